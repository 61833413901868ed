"""Desk-scale parametric models over flat parameter vectors.

Two model families share one functional interface:

  * Seq2SeqParserSpec: a token-level parser. Single-layer tanh recurrent
    encoder over the (optional context prefix +) utterance, sentence encoding
    as the mean of encoder states, a tanh recurrent decoder initialized from
    that encoding and teacher-forced during training, and a linear readout
    over the output vocabulary. Loss is mean token cross-entropy with PAD
    positions ignored.
  * MlpRegressorSpec: scalar-in scalar-out tanh MLP under squared error.

batch_loss(spec, params, batch) -> (loss, grads) is the one entry point the
training algorithms need; everything else (greedy decoding, sentence
encoding) is inference-only plain numpy.
"""

from dataclasses import dataclass

import numpy as np

from .params import ParamVector, build_layout
from .rng import stream
from .tensor import Tape, backward
from .vocab import BOS_ID, EOS_ID, PAD_ID


@dataclass(frozen=True)
class Seq2SeqParserSpec:
    input_vocab_size: int
    output_vocab_size: int
    embed_dim: int = 32
    hidden_dim: int = 64
    max_decode_len: int = 48

    def __post_init__(self):
        if min(self.input_vocab_size, self.output_vocab_size, self.embed_dim,
               self.hidden_dim, self.max_decode_len) < 1:
            raise ValueError("all spec sizes must be >= 1")
        if self.output_vocab_size <= EOS_ID:
            raise ValueError("output vocab must include PAD, BOS, EOS")

    def fields(self):
        e, h = self.embed_dim, self.hidden_dim
        return [
            ("embed_in", (self.input_vocab_size, e)),
            ("embed_out", (self.output_vocab_size, e)),
            ("enc_wx", (e, h)),
            ("enc_wh", (h, h)),
            ("enc_b", (h,)),
            ("dec_wx", (e, h)),
            ("dec_wh", (h, h)),
            ("dec_b", (h,)),
            ("out_w", (h, self.output_vocab_size)),
            ("out_b", (self.output_vocab_size,)),
        ]


@dataclass(frozen=True)
class MlpRegressorSpec:
    hidden_sizes: tuple = (40, 40)

    def __post_init__(self):
        if len(self.hidden_sizes) < 1 or min(self.hidden_sizes) < 1:
            raise ValueError("need at least one hidden layer")

    def fields(self):
        sizes = (1,) + tuple(self.hidden_sizes) + (1,)
        out = []
        for i in range(len(sizes) - 1):
            out.append((f"w{i}", (sizes[i], sizes[i + 1])))
            out.append((f"b{i}", (sizes[i + 1],)))
        return out


def init_params(spec, seed):
    """Uniform(-s, s) weights with s = sqrt(6/(fan_in+fan_out)); zero biases."""
    fields = spec.fields()
    layout, total = build_layout(fields)
    values = np.zeros(total)
    rng = stream(seed, "init")
    offsets = {n: o for n, _, o in layout}
    for name, shape in fields:
        if len(shape) == 2:
            s = np.sqrt(6.0 / (shape[0] + shape[1]))
            size = shape[0] * shape[1]
            values[offsets[name]:offsets[name] + size] = rng.uniform(-s, s, size=size)
    return ParamVector(values, layout)


def batch_loss(spec, params, batch):
    """Mean loss over a batch and its gradient, laid out like params."""
    if isinstance(spec, Seq2SeqParserSpec):
        return _seq2seq_batch_loss(spec, params, batch)
    if isinstance(spec, MlpRegressorSpec):
        return _mlp_batch_loss(spec, params, batch)
    raise TypeError(f"no batch_loss for spec {type(spec).__name__}")


def _leaves(tape, spec, params):
    return {name: tape.leaf(params.view(name)) for name, _ in spec.fields()}


def _collect_grads(tape, params, leaves, loss):
    grad_map = backward(tape, loss)
    flat = np.zeros_like(params.values)
    offsets = {n: (s, o) for n, s, o in params.layout}
    for name, leaf in leaves.items():
        shape, offset = offsets[name]
        size = int(np.prod(shape)) if shape else 1
        flat[offset:offset + size] = grad_map[leaf.node_id].ravel()
    return params.with_values(flat)


def _source_tokens(example):
    return tuple(example.context) + tuple(example.utterance)


def _check_tokens(spec, batch):
    for ex in batch:
        src = _source_tokens(ex)
        if len(src) == 0:
            raise ValueError(f"empty utterance in example pair_id={ex.pair_id}")
        if max(src) >= spec.input_vocab_size or min(src) < 0:
            raise ValueError(
                f"input token out of vocab in example pair_id={ex.pair_id} lang={ex.language}")
        lf = tuple(ex.logical_form)
        if lf and (max(lf) >= spec.output_vocab_size or min(lf) < 0):
            raise ValueError(
                f"output token out of vocab in example pair_id={ex.pair_id} lang={ex.language}")


def _encode_on_tape(spec, tape, leaves, batch):
    """Masked recurrent encoder; returns the (n, hidden) mean sentence encoding."""
    n = len(batch)
    h_dim = spec.hidden_dim
    srcs = [_source_tokens(ex) for ex in batch]
    max_len = max(len(s) for s in srcs)
    tokens = np.full((n, max_len), PAD_ID, dtype=np.int64)
    mask = np.zeros((n, max_len))
    for i, s in enumerate(srcs):
        tokens[i, :len(s)] = s
        mask[i, :len(s)] = 1.0
    lengths = mask.sum(axis=1)

    h = tape.constant(np.zeros((n, h_dim)))
    h_sum = tape.constant(np.zeros((n, h_dim)))
    for t in range(max_len):
        e_t = tape.apply("embedding", [leaves["embed_in"]], indices=tokens[:, t])
        pre = tape.apply("add", [tape.apply("matmul", [e_t, leaves["enc_wx"]]),
                                 tape.apply("matmul", [h, leaves["enc_wh"]])])
        pre = tape.apply("add", [pre, leaves["enc_b"]])
        h_new = tape.apply("tanh", [pre])
        if mask[:, t].all():
            h = h_new
            h_sum = tape.apply("add", [h_sum, h_new])
        else:
            # hold the state at padded positions so trailing PADs cannot leak in
            m = np.repeat(mask[:, t:t + 1], h_dim, axis=1)
            masked_new = tape.apply("mul", [h_new, tape.constant(m)])
            h = tape.apply("add", [masked_new, tape.apply("mul", [h, tape.constant(1.0 - m)])])
            h_sum = tape.apply("add", [h_sum, masked_new])
    inv_len = np.repeat(1.0 / lengths[:, None], h_dim, axis=1)
    return tape.apply("mul", [h_sum, tape.constant(inv_len)])


def _seq2seq_batch_loss(spec, params, batch):
    if not batch:
        raise ValueError("empty batch")
    _check_tokens(spec, batch)
    n = len(batch)
    tape = Tape()
    leaves = _leaves(tape, spec, params)
    enc = _encode_on_tape(spec, tape, leaves, batch)

    # teacher forcing: inputs BOS,y1..yT-1 predict targets y1..yT,EOS
    outs = [tuple(ex.logical_form) + (EOS_ID,) for ex in batch]
    max_out = max(len(o) for o in outs)
    dec_in = np.full((n, max_out), PAD_ID, dtype=np.int64)
    dec_tgt = np.full((n, max_out), PAD_ID, dtype=np.int64)
    out_mask = np.zeros((n, max_out))
    for i, o in enumerate(outs):
        dec_in[i, 0] = BOS_ID
        dec_in[i, 1:len(o)] = o[:-1]
        dec_tgt[i, :len(o)] = o
        out_mask[i, :len(o)] = 1.0
    n_tokens = out_mask.sum()

    d = enc
    total = tape.constant(np.zeros(n))
    for t in range(max_out):
        e_t = tape.apply("embedding", [leaves["embed_out"]], indices=dec_in[:, t])
        pre = tape.apply("add", [tape.apply("matmul", [e_t, leaves["dec_wx"]]),
                                 tape.apply("matmul", [d, leaves["dec_wh"]])])
        d = tape.apply("tanh", [tape.apply("add", [pre, leaves["dec_b"]])])
        logits = tape.apply("add", [tape.apply("matmul", [d, leaves["out_w"]]), leaves["out_b"]])
        ce = tape.apply("softmax_xent", [logits], labels=dec_tgt[:, t])
        if not out_mask[:, t].all():
            ce = tape.apply("mul", [ce, tape.constant(out_mask[:, t])])
        total = tape.apply("add", [total, ce])
    loss = tape.apply("scale", [tape.apply("mean", [total], axis=None)], factor=n / n_tokens)
    grads = _collect_grads(tape, params, leaves, loss)
    return float(loss.data), grads


def _mlp_batch_loss(spec, params, batch):
    x, y = batch
    x = np.asarray(x, dtype=np.float64).reshape(-1, 1)
    y = np.asarray(y, dtype=np.float64).reshape(-1, 1)
    if x.size == 0:
        raise ValueError("empty batch")
    tape = Tape()
    leaves = _leaves(tape, spec, params)
    h = tape.constant(x)
    n_layers = len(spec.hidden_sizes) + 1
    for i in range(n_layers):
        pre = tape.apply("add", [tape.apply("matmul", [h, leaves[f"w{i}"]]), leaves[f"b{i}"]])
        h = tape.apply("tanh", [pre]) if i < n_layers - 1 else pre
    diff = tape.apply("add", [h, tape.constant(-y)])
    loss = tape.apply("mean", [tape.apply("mul", [diff, diff])], axis=None)
    grads = _collect_grads(tape, params, leaves, loss)
    return float(loss.data), grads


def _encode_numpy(spec, params, tokens):
    embed_in = params.view("embed_in")
    wx, wh, b = params.view("enc_wx"), params.view("enc_wh"), params.view("enc_b")
    h = np.zeros(spec.hidden_dim)
    total = np.zeros(spec.hidden_dim)
    for tok in tokens:
        h = np.tanh(embed_in[tok] @ wx + h @ wh + b)
        total += h
    return total / len(tokens)


def encode(spec, params, utterance, context=()):
    """Mean of encoder hidden states for one utterance."""
    tokens = tuple(context) + tuple(utterance)
    if not tokens:
        raise ValueError("cannot encode an empty utterance")
    if max(tokens) >= spec.input_vocab_size or min(tokens) < 0:
        raise ValueError("input token out of vocab")
    return _encode_numpy(spec, params, tokens)


def decode_greedy(spec, params, utterance, context=()):
    """Greedy argmax decode from BOS until EOS or the length cap.

    Ties break toward the lowest token id. The returned list contains neither
    BOS nor EOS.
    """
    d = encode(spec, params, utterance, context)
    embed_out = params.view("embed_out")
    wx, wh, b = params.view("dec_wx"), params.view("dec_wh"), params.view("dec_b")
    out_w, out_b = params.view("out_w"), params.view("out_b")
    tok = BOS_ID
    out = []
    for _ in range(spec.max_decode_len):
        d = np.tanh(embed_out[tok] @ wx + d @ wh + b)
        logits = d @ out_w + out_b
        tok = int(np.argmax(logits))
        if tok == EOS_ID:
            break
        out.append(tok)
    return out


def encode_batch(spec, params, examples):
    """Sentence encodings for many examples at once, rows in example order."""
    srcs = [_source_tokens(ex) for ex in examples]
    if any(len(s) == 0 for s in srcs):
        raise ValueError("cannot encode an empty utterance")
    n = len(srcs)
    max_len = max(len(s) for s in srcs)
    tokens = np.full((n, max_len), PAD_ID, dtype=np.int64)
    mask = np.zeros((n, max_len))
    for i, s in enumerate(srcs):
        tokens[i, :len(s)] = s
        mask[i, :len(s)] = 1.0
    embed_in = params.view("embed_in")
    wx, wh, b = params.view("enc_wx"), params.view("enc_wh"), params.view("enc_b")
    h = np.zeros((n, spec.hidden_dim))
    total = np.zeros((n, spec.hidden_dim))
    for t in range(max_len):
        m = mask[:, t:t + 1]
        h_new = np.tanh(embed_in[tokens[:, t]] @ wx + h @ wh + b)
        h = m * h_new + (1.0 - m) * h
        total += m * h_new
    return total / mask.sum(axis=1, keepdims=True)


def decode_greedy_batch(spec, params, examples):
    """Greedy decodes for many examples, stepping all of them in lockstep."""
    d = encode_batch(spec, params, examples)
    embed_out = params.view("embed_out")
    wx, wh, b = params.view("dec_wx"), params.view("dec_wh"), params.view("dec_b")
    out_w, out_b = params.view("out_w"), params.view("out_b")
    n = len(examples)
    tok = np.full(n, BOS_ID, dtype=np.int64)
    done = np.zeros(n, dtype=bool)
    outputs = [[] for _ in range(n)]
    for _ in range(spec.max_decode_len):
        d = np.tanh(embed_out[tok] @ wx + d @ wh + b)
        logits = d @ out_w + out_b
        tok = np.argmax(logits, axis=1)
        newly_done = (tok == EOS_ID) & ~done
        for i in np.nonzero(~done & (tok != EOS_ID))[0]:
            outputs[i].append(int(tok[i]))
        done |= newly_done
        if done.all():
            break
    return outputs
