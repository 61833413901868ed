import math

import numpy as np
import pytest

from xgmeta.params import ParamVector, build_layout
from xgmeta.tensor import (
    NonFiniteError,
    ShapeError,
    Tape,
    Tensor,
    backward,
    grad_check,
)


def scalar_loss(tape, t):
    """Reduce any tensor to a scalar via mean, for backward tests."""
    return tape.apply("mean", [t], axis=None)


class TestForward:
    def test_matmul_identity(self):
        tape = Tape()
        a = tape.leaf([[1.0, 0.0], [0.0, 1.0]])
        b = tape.leaf([[3.0], [4.0]])
        out = tape.apply("matmul", [a, b])
        assert np.array_equal(out.data, [[3.0], [4.0]])

    def test_softmax_xent_uniform_logits(self):
        tape = Tape()
        logits = tape.leaf([[0.0, 0.0, 0.0]])
        loss = tape.apply("softmax_xent", [logits], labels=[1])
        assert loss.data[0] == pytest.approx(math.log(3.0), abs=1e-12)

    def test_tanh_reference_value(self):
        tape = Tape()
        out = tape.apply("tanh", [tape.leaf([0.5])])
        assert out.data[0] == pytest.approx(math.tanh(0.5), abs=1e-15)

    def test_add_row_bias(self):
        tape = Tape()
        out = tape.apply("add", [tape.leaf([[1.0, 2.0], [3.0, 4.0]]), tape.leaf([10.0, 20.0])])
        assert np.array_equal(out.data, [[11.0, 22.0], [13.0, 24.0]])

    def test_concat_last_axis(self):
        tape = Tape()
        out = tape.apply("concat", [tape.leaf([[1.0], [2.0]]), tape.leaf([[3.0, 4.0], [5.0, 6.0]])])
        assert out.data.shape == (2, 3)

    def test_embedding_gathers_rows(self):
        tape = Tape()
        table = tape.leaf([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        out = tape.apply("embedding", [table], indices=[2, 0, 2])
        assert np.array_equal(out.data, [[5.0, 6.0], [1.0, 2.0], [5.0, 6.0]])

    def test_mean_over_axis(self):
        tape = Tape()
        out = tape.apply("mean", [tape.leaf([[1.0, 3.0], [5.0, 7.0]])], axis=0)
        assert np.array_equal(out.data, [3.0, 5.0])

    def test_shape_mismatch_names_kind_and_shapes(self):
        tape = Tape()
        a = tape.leaf([[1.0, 2.0]])
        b = tape.leaf([[1.0, 2.0]])
        with pytest.raises(ShapeError, match="matmul.*1, 2.*1, 2"):
            tape.apply("matmul", [a, b])

    def test_nonfinite_output_rejected(self):
        tape = Tape()
        big = tape.leaf([1e308])
        with pytest.raises(NonFiniteError, match="scale"):
            tape.apply("scale", [big], factor=1e10)

    def test_nonfinite_construction_rejected(self):
        with pytest.raises(NonFiniteError):
            Tensor([np.nan])

    def test_tensors_are_immutable(self):
        t = Tensor([1.0, 2.0])
        with pytest.raises(ValueError):
            t.data[0] = 5.0

    def test_foreign_tensor_rejected(self):
        tape = Tape()
        with pytest.raises(ValueError, match="not on this tape"):
            tape.apply("tanh", [Tensor([1.0])])


class TestBackward:
    def test_quadratic_gradient(self):
        tape = Tape()
        x = tape.leaf([1.0, 2.0, 3.0])
        sq = tape.apply("mul", [x, x])
        loss = tape.apply("scale", [tape.apply("mean", [sq], axis=None)], factor=3.0)
        grads = backward(tape, loss)
        assert np.allclose(grads[x.node_id], [2.0, 4.0, 6.0], atol=1e-12)

    def test_tanh_linearization_at_origin(self):
        # loss = tanh(w . x) at w = 0 has gradient x
        x_val = np.array([0.3, -0.7, 1.1])
        tape = Tape()
        w = tape.leaf([[0.0], [0.0], [0.0]])
        x = tape.constant(x_val.reshape(1, 3))
        loss = scalar_loss(tape, tape.apply("tanh", [tape.apply("matmul", [x, w])]))
        grads = backward(tape, loss)
        assert np.allclose(grads[w.node_id].ravel(), x_val, atol=1e-12)

    def test_non_participating_leaf_gets_zeros(self):
        tape = Tape()
        x = tape.leaf([1.0, 2.0])
        unused = tape.leaf([[5.0, 5.0]])
        loss = scalar_loss(tape, tape.apply("mul", [x, x]))
        grads = backward(tape, loss)
        assert np.array_equal(grads[unused.node_id], np.zeros((1, 2)))

    def test_non_scalar_loss_rejected(self):
        tape = Tape()
        x = tape.leaf([1.0, 2.0])
        with pytest.raises(ShapeError, match="scalar"):
            backward(tape, tape.apply("mul", [x, x]))

    def test_backward_is_linear(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            v = rng.normal(size=6)
            a, b = rng.normal(size=2)

            def grads_of(coeff_a, coeff_b):
                tape = Tape()
                x = tape.leaf(v)
                l1 = tape.apply("mean", [tape.apply("mul", [x, x])], axis=None)
                l2 = tape.apply("mean", [tape.apply("tanh", [x])], axis=None)
                combo = tape.apply("add", [tape.apply("scale", [l1], factor=coeff_a),
                                           tape.apply("scale", [l2], factor=coeff_b)])
                return backward(tape, combo)[x.node_id]

            lhs = grads_of(a, b)
            rhs = a * grads_of(1.0, 0.0) + b * grads_of(0.0, 1.0)
            assert np.all(np.abs(lhs - rhs) <= 1e-12)

    def test_replay_is_bit_identical(self):
        rng = np.random.default_rng(3)
        v = rng.normal(size=(4, 3))
        w = rng.normal(size=(3, 2))

        def run():
            tape = Tape()
            a = tape.leaf(v)
            b = tape.leaf(w)
            out = tape.apply("tanh", [tape.apply("matmul", [a, b])])
            loss = scalar_loss(tape, out)
            g = backward(tape, loss)
            return loss.data.copy(), g[a.node_id].copy(), g[b.node_id].copy()

        first, second = run(), run()
        for x, y in zip(first, second):
            assert np.array_equal(x, y)


def random_op_case(rng, kind):
    """A (build_loss, params) pair exercising one op kind on random shapes."""
    n = int(rng.integers(1, 5))
    m = int(rng.integers(1, 5))
    k = int(rng.integers(1, 5))

    if kind == "matmul":
        layout, total = build_layout([("a", (n, k)), ("b", (k, m))])

        def build(tape, pv):
            out = tape.apply("matmul", [tape.leaf(pv.view("a")), tape.leaf(pv.view("b"))])
            return scalar_loss(tape, tape.apply("tanh", [out]))
    elif kind == "add_bias":
        layout, total = build_layout([("a", (n, m)), ("b", (m,))])

        def build(tape, pv):
            out = tape.apply("add", [tape.leaf(pv.view("a")), tape.leaf(pv.view("b"))])
            return scalar_loss(tape, tape.apply("tanh", [out]))
    elif kind == "mul":
        layout, total = build_layout([("a", (n, m)), ("b", (n, m))])

        def build(tape, pv):
            return scalar_loss(tape, tape.apply("mul", [tape.leaf(pv.view("a")),
                                                        tape.leaf(pv.view("b"))]))
    elif kind == "relu":
        layout, total = build_layout([("a", (n, m))])

        def build(tape, pv):
            return scalar_loss(tape, tape.apply("relu", [tape.leaf(pv.view("a"))]))
    elif kind == "softmax_xent":
        labels = rng.integers(0, m, size=n)
        layout, total = build_layout([("a", (n, m))])

        def build(tape, pv):
            ce = tape.apply("softmax_xent", [tape.leaf(pv.view("a"))], labels=labels)
            return scalar_loss(tape, ce)
    elif kind == "mean_axis":
        axis = int(rng.integers(0, 2))
        layout, total = build_layout([("a", (n, m))])

        def build(tape, pv):
            out = tape.apply("mean", [tape.leaf(pv.view("a"))], axis=axis)
            return scalar_loss(tape, tape.apply("tanh", [out]))
    elif kind == "embedding":
        idx = rng.integers(0, n, size=k)
        layout, total = build_layout([("a", (n, m))])

        def build(tape, pv):
            out = tape.apply("embedding", [tape.leaf(pv.view("a"))], indices=idx)
            return scalar_loss(tape, tape.apply("tanh", [out]))
    elif kind == "concat":
        layout, total = build_layout([("a", (n, m)), ("b", (n, k))])

        def build(tape, pv):
            out = tape.apply("concat", [tape.leaf(pv.view("a")), tape.leaf(pv.view("b"))])
            return scalar_loss(tape, tape.apply("tanh", [out]))
    else:  # scale
        factor = float(rng.normal())
        layout, total = build_layout([("a", (n, m))])

        def build(tape, pv):
            return scalar_loss(tape, tape.apply("scale", [tape.leaf(pv.view("a"))], factor=factor))

    params = ParamVector(rng.normal(size=total) * 0.7, layout)

    def f(pv):
        tape = Tape()
        loss = build(tape, pv)
        grads = backward(tape, loss)
        flat = np.zeros(pv.size)
        # leaves are recorded in layout declaration order by construction
        leaf_ids = [i for i, node in enumerate(tape.nodes) if node.kind == "leaf"]
        for (name, shape, offset), leaf_id in zip(pv.layout, leaf_ids):
            size = int(np.prod(shape))
            flat[offset:offset + size] = grads[leaf_id].ravel()
        return float(loss.data), pv.with_values(flat)

    return f, params


ALL_KINDS = ["matmul", "add_bias", "mul", "relu", "softmax_xent",
             "mean_axis", "embedding", "concat", "scale"]


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_every_op_matches_finite_differences(kind):
    """Analytic gradients match central differences over many random shapes."""
    failures = 0
    for seed in range(12):
        rng = np.random.default_rng(1000 * ALL_KINDS.index(kind) + seed)
        f, params = random_op_case(rng, kind)
        if kind == "relu":
            # keep coordinates away from the kink where the derivative jumps
            vals = params.values
            vals[np.abs(vals) < 1e-3] += 0.01
            params = params.with_values(vals)
        err = grad_check(f, params, epsilon=1e-5)
        if err > 1e-5:
            failures += 1
    assert failures == 0


class TestGradCheck:
    def test_exact_quadratic(self):
        layout, total = build_layout([("theta", (6,))])
        params = ParamVector(np.linspace(-1, 1, total), layout)

        def f(pv):
            return float(0.5 * pv.values @ pv.values), pv.with_values(pv.values.copy())

        assert grad_check(f, params, epsilon=1e-5) < 1e-8

    def test_constant_function_error_zero(self):
        layout, total = build_layout([("theta", (4,))])
        params = ParamVector(np.ones(total), layout)

        def f(pv):
            return 2.5, pv.with_values(np.zeros(total))

        assert grad_check(f, params, epsilon=1e-5) == 0.0

    def test_epsilon_must_be_positive(self):
        layout, total = build_layout([("theta", (2,))])
        params = ParamVector(np.ones(total), layout)
        with pytest.raises(ValueError):
            grad_check(lambda p: (0.0, p), params, epsilon=0.0)
