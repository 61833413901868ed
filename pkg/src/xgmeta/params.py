"""Flat parameter vectors with a named layout, plus checkpoint I/O.

A ParamVector is the single currency for model weights, gradients, and
optimizer moments: one contiguous float64 array and an ordered layout of
(name, shape, offset) fields. Vectors with identical layouts combine
elementwise, which is all the meta-updates need.

Checkpoint format (documented here and in the README):
  line 1: JSON header {"format": "pvec-1", "layout": [[name, [dims...], offset], ...]}
  then:   the values array as raw little-endian float64, row-major.
"""

import json

import numpy as np


class LayoutError(ValueError):
    pass


class ParamVector:
    __slots__ = ("values", "layout")

    def __init__(self, values, layout):
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.ndim != 1:
            raise LayoutError("values must be a flat vector")
        layout = tuple((str(n), tuple(int(d) for d in s), int(o)) for n, s, o in layout)
        extent = sum(int(np.prod(s)) if s else 1 for _, s, _ in layout)
        if extent != values.size:
            raise LayoutError(f"layout covers {extent} values, vector has {values.size}")
        self.values = values
        self.layout = layout

    def view(self, name):
        """Read-only view of one named field, reshaped to its layout shape."""
        for n, shape, offset in self.layout:
            if n == name:
                size = int(np.prod(shape)) if shape else 1
                v = self.values[offset:offset + size].reshape(shape)
                v.setflags(write=False)
                return v
        raise KeyError(name)

    def with_values(self, values):
        """A new vector with the same layout and different values."""
        return ParamVector(values, self.layout)

    def copy(self):
        return ParamVector(self.values.copy(), self.layout)

    def zeros_like(self):
        return ParamVector(np.zeros_like(self.values), self.layout)

    def same_layout(self, other):
        return self.layout == other.layout

    @property
    def size(self):
        return self.values.size

    def __repr__(self):
        names = ", ".join(n for n, _, _ in self.layout)
        return f"ParamVector(size={self.values.size}, fields=[{names}])"


def build_layout(fields):
    """Layout tuples from an ordered list of (name, shape) pairs."""
    layout = []
    offset = 0
    for name, shape in fields:
        shape = tuple(int(d) for d in shape)
        layout.append((name, shape, offset))
        offset += int(np.prod(shape)) if shape else 1
    return tuple(layout), offset


def param_axpy(a, x, y):
    """a*x + y for vectors with identical layouts."""
    if not x.same_layout(y):
        raise LayoutError("param_axpy: layouts differ")
    return ParamVector(a * x.values + y.values, x.layout)


def param_scale(a, x):
    return ParamVector(a * x.values, x.layout)


def save_checkpoint(path, params):
    header = {
        "format": "pvec-1",
        "layout": [[n, list(s), o] for n, s, o in params.layout],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(params.values.astype("<f8").tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        header_line = fh.readline()
        raw = fh.read()
    header = json.loads(header_line.decode("utf-8"))
    if header.get("format") != "pvec-1":
        raise ValueError(f"unsupported checkpoint format: {header.get('format')!r}")
    layout = [(n, tuple(s), o) for n, s, o in header["layout"]]
    values = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    return ParamVector(values, layout)
