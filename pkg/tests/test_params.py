import numpy as np
import pytest

from xgmeta.params import (
    LayoutError,
    ParamVector,
    build_layout,
    load_checkpoint,
    param_axpy,
    param_scale,
    save_checkpoint,
)


@pytest.fixture
def vec():
    layout, total = build_layout([("w", (2, 3)), ("b", (3,))])
    return ParamVector(np.arange(total, dtype=float), layout)


def test_layout_extent_must_match():
    layout, _ = build_layout([("w", (2, 2))])
    with pytest.raises(LayoutError):
        ParamVector(np.zeros(5), layout)


def test_view_reshapes_and_is_readonly(vec):
    w = vec.view("w")
    assert w.shape == (2, 3)
    assert w[1, 2] == 5.0
    with pytest.raises(ValueError):
        w[0, 0] = 9.0


def test_axpy_addition():
    layout, _ = build_layout([("v", (2,))])
    x = ParamVector(np.array([1.0, 2.0]), layout)
    y = ParamVector(np.array([3.0, 4.0]), layout)
    assert np.array_equal(param_axpy(1.0, x, y).values, [4.0, 6.0])


def test_axpy_self_cancellation(vec):
    out = param_axpy(-1.0, vec, vec)
    assert np.array_equal(out.values, np.zeros(vec.size))


def test_axpy_zero_coefficient_keeps_y(vec):
    other = vec.with_values(np.ones(vec.size))
    assert np.array_equal(param_axpy(0.0, other, vec).values, vec.values)


def test_axpy_layout_mismatch():
    la, _ = build_layout([("a", (2,))])
    lb, _ = build_layout([("b", (2,))])
    with pytest.raises(LayoutError):
        param_axpy(1.0, ParamVector(np.zeros(2), la), ParamVector(np.zeros(2), lb))


def test_param_scale(vec):
    assert np.array_equal(param_scale(2.0, vec).values, 2.0 * vec.values)


def test_checkpoint_roundtrip(tmp_path, vec):
    path = tmp_path / "ckpt.bin"
    save_checkpoint(path, vec)
    loaded = load_checkpoint(path)
    assert loaded.layout == vec.layout
    assert np.array_equal(loaded.values, vec.values)


def test_checkpoint_bytes_are_deterministic(tmp_path, vec):
    a, b = tmp_path / "a.bin", tmp_path / "b.bin"
    save_checkpoint(a, vec)
    save_checkpoint(b, vec)
    assert a.read_bytes() == b.read_bytes()


def test_checkpoint_rejects_unknown_format(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b'{"format": "other"}\n')
    with pytest.raises(ValueError, match="format"):
        load_checkpoint(path)
