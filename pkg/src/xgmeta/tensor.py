"""Dense float64 tensors with reverse-mode automatic differentiation.

A Tape is the computation record: an append-only list of nodes in execution
order, each remembering its op kind, input node ids, and whatever values the
backward rule needs. Forward passes rebuild the tape from scratch
(define-by-run), and backward walks it once in reverse insertion order.

Storage is row-major float64 throughout. There is no broadcasting except the
one case the ops need: adding a rank-1 bias to every row of a matrix.
"""

import numpy as np


class TensorError(Exception):
    pass


class ShapeError(TensorError):
    pass


class NonFiniteError(TensorError):
    pass


OP_KINDS = (
    "matmul",
    "add",
    "mul",
    "tanh",
    "relu",
    "softmax_xent",
    "mean",
    "embedding",
    "concat",
    "scale",
)


class Tensor:
    """Immutable float64 array, optionally attached to a tape node."""

    __slots__ = ("data", "node_id")

    def __init__(self, data, node_id=None):
        arr = np.array(data, dtype=np.float64, order="C", copy=True)
        if not np.isfinite(arr).all():
            raise NonFiniteError("tensor holds non-finite values")
        arr.setflags(write=False)
        self.data = arr
        self.node_id = node_id

    @classmethod
    def _wrap(cls, arr, node_id):
        # op outputs are freshly allocated, so skip the defensive copy
        t = cls.__new__(cls)
        arr.setflags(write=False)
        t.data = arr
        t.node_id = node_id
        return t

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, node_id={self.node_id})"


class _Node:
    __slots__ = ("kind", "input_ids", "saved", "shape")

    def __init__(self, kind, input_ids, saved, shape):
        self.kind = kind
        self.input_ids = input_ids
        self.saved = saved
        self.shape = shape


class Tape:
    """Computation record. Node order is execution order."""

    def __init__(self):
        self.nodes = []

    def _record(self, kind, input_ids, saved, shape):
        self.nodes.append(_Node(kind, input_ids, saved, shape))
        return len(self.nodes) - 1

    def leaf(self, data):
        """A differentiable input (parameter). Gradients are reported for leaves."""
        t = Tensor(data)
        nid = self._record("leaf", (), None, t.data.shape)
        return Tensor(t.data, nid)

    def constant(self, data):
        """A non-differentiable input (data, masks). No gradient is reported."""
        t = Tensor(data)
        nid = self._record("const", (), None, t.data.shape)
        return Tensor(t.data, nid)

    def apply(self, kind, inputs, **attrs):
        """Run one op, record its node, and return the output tensor.

        Supported kinds and their attrs:
          matmul(a, b)                  (n,k)@(k,m)
          add(a, b)                     same shape, or (n,m)+(m,) row bias
          mul(a, b)                     elementwise, same shape
          tanh(x) / relu(x)
          softmax_xent(logits, labels=int array)   rowwise, returns per-row loss
          mean(x, axis=int|None)        None means over all elements
          embedding(table, indices=int array)      row gather
          concat(xs...)                 along the last axis
          scale(x, factor=float)
        """
        if kind not in OP_KINDS:
            raise ValueError(f"unknown op kind: {kind!r}")
        for t in inputs:
            if t.node_id is None or t.node_id >= len(self.nodes):
                raise ValueError(f"{kind}: input tensor is not on this tape")
        arrays = [t.data for t in inputs]
        with np.errstate(over="ignore", invalid="ignore"):
            out, saved = _FORWARD[kind](arrays, attrs)
        out = np.asarray(out)
        if not np.isfinite(out).all():
            raise NonFiniteError(f"{kind} produced a non-finite value")
        nid = self._record(kind, tuple(t.node_id for t in inputs), saved, out.shape)
        return Tensor._wrap(out, nid)


def _shape_err(kind, shapes):
    return ShapeError(f"{kind}: incompatible shapes {' and '.join(str(s) for s in shapes)}")


def _fw_matmul(arrays, attrs):
    a, b = arrays
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise _shape_err("matmul", [a.shape, b.shape])
    return a @ b, (a, b)


def _fw_add(arrays, attrs):
    a, b = arrays
    if a.shape == b.shape:
        return a + b, ("same",)
    if a.ndim == 2 and b.ndim == 1 and a.shape[1] == b.shape[0]:
        return a + b, ("bias",)
    raise _shape_err("add", [a.shape, b.shape])


def _fw_mul(arrays, attrs):
    a, b = arrays
    if a.shape != b.shape:
        raise _shape_err("mul", [a.shape, b.shape])
    return a * b, (a, b)


def _fw_tanh(arrays, attrs):
    out = np.tanh(arrays[0])
    return out, (out,)


def _fw_relu(arrays, attrs):
    x = arrays[0]
    return np.maximum(x, 0.0), (x > 0,)


def _fw_softmax_xent(arrays, attrs):
    logits = arrays[0]
    labels = np.asarray(attrs["labels"], dtype=np.int64)
    if logits.ndim != 2:
        raise _shape_err("softmax_xent", [logits.shape])
    if labels.shape != (logits.shape[0],):
        raise _shape_err("softmax_xent", [logits.shape, labels.shape])
    if labels.size and (labels.min() < 0 or labels.max() >= logits.shape[1]):
        raise ValueError("softmax_xent: label id outside logit width")
    shifted = logits - logits.max(axis=1, keepdims=True)
    expv = np.exp(shifted)
    denom = expv.sum(axis=1)
    probs = expv / denom[:, None]
    rows = np.arange(logits.shape[0])
    loss = np.log(denom) - shifted[rows, labels]
    return loss, (probs, labels)


def _fw_mean(arrays, attrs):
    x = arrays[0]
    axis = attrs.get("axis", None)
    if axis is not None and not (0 <= axis < x.ndim):
        raise ValueError(f"mean: axis {axis} out of range for shape {x.shape}")
    return np.mean(x, axis=axis), (x.shape, axis)


def _fw_embedding(arrays, attrs):
    table = arrays[0]
    indices = np.asarray(attrs["indices"], dtype=np.int64)
    if table.ndim != 2 or indices.ndim != 1:
        raise _shape_err("embedding", [table.shape, indices.shape])
    if indices.size and (indices.min() < 0 or indices.max() >= table.shape[0]):
        raise ValueError("embedding: index outside table")
    return table[indices], (table.shape, indices)


def _fw_concat(arrays, attrs):
    first = arrays[0]
    for a in arrays[1:]:
        if a.ndim != first.ndim or a.shape[:-1] != first.shape[:-1]:
            raise _shape_err("concat", [t.shape for t in arrays])
    widths = tuple(a.shape[-1] for a in arrays)
    return np.concatenate(arrays, axis=-1), (widths,)


def _fw_scale(arrays, attrs):
    factor = float(attrs["factor"])
    return arrays[0] * factor, (factor,)


_FORWARD = {
    "matmul": _fw_matmul,
    "add": _fw_add,
    "mul": _fw_mul,
    "tanh": _fw_tanh,
    "relu": _fw_relu,
    "softmax_xent": _fw_softmax_xent,
    "mean": _fw_mean,
    "embedding": _fw_embedding,
    "concat": _fw_concat,
    "scale": _fw_scale,
}


def _bw_matmul(grad, saved):
    a, b = saved
    return [grad @ b.T, a.T @ grad]


def _bw_add(grad, saved):
    if saved[0] == "same":
        return [grad, grad]
    return [grad, grad.sum(axis=0)]


def _bw_mul(grad, saved):
    a, b = saved
    return [grad * b, grad * a]


def _bw_tanh(grad, saved):
    (out,) = saved
    return [grad * (1.0 - out * out)]


def _bw_relu(grad, saved):
    (mask,) = saved
    return [grad * mask]


def _bw_softmax_xent(grad, saved):
    probs, labels = saved
    d = probs.copy()
    d[np.arange(probs.shape[0]), labels] -= 1.0
    return [d * grad[:, None]]


def _bw_mean(grad, saved):
    shape, axis = saved
    if axis is None:
        count = int(np.prod(shape)) if shape else 1
        return [np.full(shape, grad / count)]
    count = shape[axis]
    return [np.broadcast_to(np.expand_dims(grad / count, axis), shape).copy()]


def _bw_embedding(grad, saved):
    table_shape, indices = saved
    d = np.zeros(table_shape)
    np.add.at(d, indices, grad)
    return [d]


def _bw_concat(grad, saved):
    (widths,) = saved
    pieces = []
    start = 0
    for w in widths:
        pieces.append(grad[..., start:start + w])
        start += w
    return pieces


def _bw_scale(grad, saved):
    (factor,) = saved
    return [grad * factor]


_BACKWARD = {
    "matmul": _bw_matmul,
    "add": _bw_add,
    "mul": _bw_mul,
    "tanh": _bw_tanh,
    "relu": _bw_relu,
    "softmax_xent": _bw_softmax_xent,
    "mean": _bw_mean,
    "embedding": _bw_embedding,
    "concat": _bw_concat,
    "scale": _bw_scale,
}


def backward(tape, loss):
    """Gradients of a scalar loss with respect to every leaf on the tape.

    Returns a dict node_id -> ndarray covering all leaves; leaves the loss
    does not depend on get zero gradients.
    """
    if loss.node_id is None:
        raise ValueError("loss tensor is not on a tape")
    if loss.data.shape not in ((), (1,)):
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    adjoint = [None] * len(tape.nodes)
    owned = [False] * len(tape.nodes)  # whether adjoint[i] is a private buffer we may mutate
    adjoint[loss.node_id] = np.ones(tape.nodes[loss.node_id].shape)
    owned[loss.node_id] = True

    def accumulate(input_id, g):
        if adjoint[input_id] is None:
            adjoint[input_id] = g
        elif owned[input_id]:
            adjoint[input_id] += g
        else:
            adjoint[input_id] = adjoint[input_id] + g
            owned[input_id] = True

    for nid in range(loss.node_id, -1, -1):
        grad = adjoint[nid]
        if grad is None:
            continue
        node = tape.nodes[nid]
        if node.kind in ("leaf", "const"):
            continue
        if node.kind == "embedding":
            # scatter rows straight into the table's accumulator instead of
            # materializing a dense zero table per lookup
            table_id = node.input_ids[0]
            table_shape, indices = node.saved
            if adjoint[table_id] is None or not owned[table_id]:
                buf = np.zeros(table_shape)
                if adjoint[table_id] is not None:
                    buf += adjoint[table_id]
                adjoint[table_id] = buf
                owned[table_id] = True
            np.add.at(adjoint[table_id], indices, grad)
            continue
        input_grads = _BACKWARD[node.kind](grad, node.saved)
        for input_id, g in zip(node.input_ids, input_grads):
            accumulate(input_id, g)
    grads = {}
    for nid, node in enumerate(tape.nodes):
        if node.kind == "leaf":
            g = adjoint[nid]
            grads[nid] = np.zeros(node.shape) if g is None else np.asarray(g, dtype=np.float64)
    return grads


def grad_check(f, params, epsilon=1e-5):
    """Max relative error between f's analytic gradient and central differences.

    f maps a ParamVector to (scalar loss, gradient ParamVector). The error at
    each coordinate is |analytic - numeric| / max(1, |analytic|); the max over
    coordinates is returned.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    _, analytic = f(params)
    analytic = np.asarray(analytic.values, dtype=np.float64)
    numeric = np.zeros_like(analytic)
    base = params.values
    for i in range(base.size):
        bumped = base.copy()
        bumped[i] = base[i] + epsilon
        hi, _ = f(params.with_values(bumped))
        bumped[i] = base[i] - epsilon
        lo, _ = f(params.with_values(bumped))
        numeric[i] = (hi - lo) / (2.0 * epsilon)
    denom = np.maximum(1.0, np.abs(analytic))
    err = np.abs(analytic - numeric) / denom
    return float(err.max()) if err.size else 0.0
