"""Episodic meta-training and its baseline family.

The central update alternates two phases: a short inner loop of optimizer
steps on "support" batches from the high-resource language, and a single
"target" step that evaluates one batch from a sampled low-resource language
at the inner loop's endpoint. The displacement accumulated by the inner loop
(phi_K - phi_1) and the target-batch gradient at phi_K are combined into one
outer update:

    d = (phi_K - phi_1) - lambda * grad_target(phi_K)
    theta' = outer_optimizer(theta, -d)

Sign convention: the displacement already points downhill while the target
gradient points uphill, so the two enter d with opposite signs, and -d is
handed to the optimizer as a gradient. With lambda = 0 the update is exactly
a plain displacement-following episode; with K = 1 and SGD on both sides it
reduces to the one-lookahead-step domain-generalization update.

All functions are generic over a loss_fn(params, batch) -> (loss, grads)
callable, so the same machinery drives the token-level parser, the MLP
regressor, and the quadratic testbeds used for verification.
"""

import time
from dataclasses import dataclass, replace

import numpy as np

from . import metrics, models
from .params import ParamVector, param_axpy, param_scale
from .records import MetricsRecord
from .rng import derive, stream
from .tasks import batch_iterator

ALGORITHMS = ("joint", "finetune", "reptile_ft", "xg_reptile")


@dataclass
class OptimizerState:
    """State for sgd or adam over one parameter layout."""

    kind: str
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: np.ndarray = None
    v: np.ndarray = None

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer kind: {self.kind!r}")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")


def optimizer_step(state, params, gradient):
    """One optimizer update; adam state (moments, counter) lives in `state`."""
    if not params.same_layout(gradient):
        raise ValueError("optimizer_step: parameter and gradient layouts differ")
    g = gradient.values
    if state.kind == "sgd":
        return params.with_values(params.values - state.lr * g)
    if state.m is None:
        state.m = np.zeros_like(params.values)
        state.v = np.zeros_like(params.values)
    state.step_count += 1
    t = state.step_count
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * g
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    m_hat = state.m / (1.0 - state.beta1 ** t)
    v_hat = state.v / (1.0 - state.beta2 ** t)
    return params.with_values(params.values - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))


@dataclass(frozen=True)
class EpisodeConfig:
    """Scalars of one episode: inner loop size and rates, optimizers, batching.

    finetune_opt/finetune_lr drive the second stage of the two-stage
    baselines (lexical adaptation to the target languages); they are separate
    knobs because that stage is plain supervised training, not an episode.
    """

    k: int = 10
    inner_lr: float = 1e-4
    outer_lr: float = 1e-3
    target_weight: float = None  # defaults to inner_lr; 0 selects the pure displacement update
    inner_opt: str = "sgd"
    outer_opt: str = "adam"
    batch_size: int = 10
    finetune_opt: str = "sgd"
    finetune_lr: float = 0.1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.inner_lr <= 0 or self.outer_lr <= 0 or self.finetune_lr <= 0:
            raise ValueError("learning rates must be positive")
        if self.target_weight is None:
            object.__setattr__(self, "target_weight", self.inner_lr)
        if self.target_weight < 0:
            raise ValueError("target_weight must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        for kind in (self.inner_opt, self.outer_opt, self.finetune_opt):
            if kind not in ("sgd", "adam"):
                raise ValueError(f"unknown optimizer kind: {kind!r}")

    def inner_state(self):
        return OptimizerState(self.inner_opt, self.inner_lr)

    def outer_state(self):
        return OptimizerState(self.outer_opt, self.outer_lr)

    def finetune_state(self):
        return OptimizerState(self.finetune_opt, self.finetune_lr)


@dataclass(frozen=True)
class TrainConfig:
    max_steps: int = 20000
    patience: int = 10
    eval_interval: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.patience < 1 or self.eval_interval < 1:
            raise ValueError("patience and eval_interval must be >= 1")


def inner_loop(loss_fn, phi1, batches, cfg):
    """K successive inner-optimizer steps from a fresh optimizer state.

    Returns the final parameters and the raw per-step gradients (as computed
    before the optimizer transformed them).
    """
    if len(batches) != cfg.k:
        raise ValueError(f"inner_loop expects exactly {cfg.k} batches, got {len(batches)}")
    state = cfg.inner_state()
    phi = phi1
    raw_grads = []
    for batch in batches:
        _, g = loss_fn(phi, batch)
        raw_grads.append(g)
        phi = optimizer_step(state, phi, g)
    return phi, raw_grads


def macro_gradient(phi1, phiK):
    """Displacement phi_K - phi_1 accumulated over the inner loop."""
    return param_axpy(-1.0, phi1, phiK)


def reptile_episode(loss_fn, theta, support_batches, cfg, outer_state):
    """Inner loop plus an outer step along the displacement alone."""
    phiK, _ = inner_loop(loss_fn, theta, support_batches, cfg)
    d = macro_gradient(theta, phiK)
    return optimizer_step(outer_state, theta, param_scale(-1.0, d))


def xg_reptile_episode(loss_fn, theta, support_batches, target_batch, cfg, outer_state):
    """One full episode: inner loop, target step at phi_K, outer update.

    With target_weight == 0 the target batch is ignored and the episode is
    exactly reptile_episode.
    """
    phiK, _ = inner_loop(loss_fn, theta, support_batches, cfg)
    d = macro_gradient(theta, phiK)
    if cfg.target_weight != 0.0:
        if target_batch is None or (hasattr(target_batch, "__len__") and len(target_batch) == 0):
            raise ValueError("xg_reptile_episode: empty target batch")
        _, g_target = loss_fn(phiK, target_batch)
        d = param_axpy(-cfg.target_weight, g_target, d)
    return optimizer_step(outer_state, theta, param_scale(-1.0, d))


def evaluate_split(spec, params, examples_by_language, support_language,
                   template, split_name, step, started):
    """Per-language MetricsRecords (loss, exact match, similarity to support)."""
    support_examples = examples_by_language[support_language]
    support_enc = models.encode_batch(spec, params, support_examples)
    support_pids = [ex.pair_id for ex in support_examples]
    support_set = metrics.EncodingSet(support_language, support_enc, support_pids)
    rows = []
    for lang in sorted(examples_by_language):
        examples = examples_by_language[lang]
        loss, _ = models.batch_loss(spec, params, examples)
        preds = models.decode_greedy_batch(spec, params, examples)
        golds = [list(ex.logical_form) for ex in examples]
        em = metrics.exact_match(preds, golds)
        if lang == support_language:
            enc_set = support_set
        else:
            enc = models.encode_batch(spec, params, examples)
            enc_set = metrics.EncodingSet(lang, enc, [ex.pair_id for ex in examples])
        cos = metrics.mean_pairwise_cosine(support_set, enc_set)
        hd = metrics.hausdorff_distance(support_set.matrix, enc_set.matrix)
        rows.append(replace(template, step=step, split=split_name, language=lang,
                            exact_match=em, loss=loss, cosine_to_support=cos,
                            hausdorff_to_support=hd,
                            wall_seconds=time.perf_counter() - started))
    return rows


@dataclass
class _Stage:
    """One early-stopped training stage over a step budget."""

    update: callable  # () -> (params, steps_consumed)
    monitor_languages: list
    budget: int
    name: str


def _run_stage(spec, stage, start_params, validation, support_language, train_cfg,
               template, history, step_offset, started):
    params = start_params
    best = params.copy()
    best_loss = np.inf
    bad_evals = 0
    consumed = 0
    since_eval = 0
    stopped_early = False

    def do_eval():
        nonlocal best, best_loss, bad_evals
        rows = evaluate_split(spec, params, validation, support_language,
                              template, "val", step_offset + consumed, started)
        history.extend(rows)
        monitored = [r.loss for r in rows if r.language in stage.monitor_languages]
        combined = float(np.mean(monitored))
        if combined < best_loss:
            best_loss = combined
            best = params.copy()
            bad_evals = 0
        else:
            bad_evals += 1
        return bad_evals > train_cfg.patience

    while consumed < stage.budget:
        params, used = stage.update(params)
        consumed += used
        since_eval += used
        if since_eval >= train_cfg.eval_interval:
            since_eval = 0
            if do_eval():
                stopped_early = True
                break
    if not stopped_early and (since_eval > 0 or best_loss == np.inf):
        do_eval()
    return best, step_offset + consumed


def train(spec, algorithm, split, cfg, train_cfg):
    """Train one algorithm on a sample split; returns (best params, history).

    One step is one parameter update: a plain batch step for the pooled
    algorithms, a whole episode (K inner batches plus one target batch) for
    the episodic ones. Two-stage algorithms run each stage under the full
    max_steps cap with its own early stopping, mirroring the
    train-then-finetune protocol; single-stage algorithms get one such
    budget. Early stopping monitors the mean validation loss over the
    stage's monitored languages and keeps the best checkpoint.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
    if not isinstance(spec, models.Seq2SeqParserSpec):
        raise TypeError("train drives the parser spec; use the episode functions directly otherwise")
    target_langs = sorted(split.targets)
    if algorithm != "joint" and not target_langs:
        raise ValueError(f"algorithm {algorithm!r} needs target samples")
    support_language = split.support[0].language
    seed = train_cfg.seed
    loss_fn = lambda p, b: models.batch_loss(spec, p, b)
    params = models.init_params(spec, derive(seed, "init"))
    started = time.perf_counter()
    template = MetricsRecord(algorithm=algorithm, seed=seed, k=cfg.k, rate=split.rate,
                             step=0, split="val", language="", exact_match=0.0,
                             loss=0.0, cosine_to_support=0.0,
                             hausdorff_to_support=0.0, wall_seconds=0.0)
    history = []
    all_langs = [support_language] + target_langs

    def pool_update(pool, purpose, state, fields=None):
        it = batch_iterator(pool, cfg.batch_size, derive(seed, purpose), recycle=True)
        mask = None
        if fields is not None:
            mask = np.zeros(params.size)
            for name, shape, offset in params.layout:
                if name in fields:
                    mask[offset:offset + int(np.prod(shape))] = 1.0

        def step(p):
            _, g = loss_fn(p, next(it))
            if mask is not None:
                g = g.with_values(g.values * mask)
            return optimizer_step(state, p, g), 1
        return step

    def episode_update(purpose, with_target):
        support_it = batch_iterator(split.support, cfg.batch_size,
                                    derive(seed, f"{purpose}/support"), recycle=True)
        target_its = {
            lang: batch_iterator(split.targets[lang], cfg.batch_size,
                                 derive(seed, f"{purpose}/target/{lang}"), recycle=True)
            for lang in target_langs
        } if with_target else {}
        lang_rng = stream(seed, f"{purpose}/lang")
        outer_state = cfg.outer_state()

        def step(p):
            batches = [next(support_it) for _ in range(cfg.k)]
            if with_target:
                lang = target_langs[int(lang_rng.integers(len(target_langs)))]
                target = next(target_its[lang])
                return xg_reptile_episode(loss_fn, p, batches, target, cfg, outer_state), 1
            return reptile_episode(loss_fn, p, batches, cfg, outer_state), 1
        return step

    merged_targets = [ex for lang in target_langs for ex in split.targets[lang]]
    budget = train_cfg.max_steps
    # the fine-tuning stage adapts the input lexicon only: at this scale a
    # full-parameter pass over the tiny target pool erases the support-side
    # solution faster than it aligns the new languages, whereas fitting the
    # target token embeddings into the frozen body is stable
    ft_fields = ("embed_in",)
    if algorithm == "joint":
        pool = list(split.support) + merged_targets
        stages = [_Stage(pool_update(pool, "batches/joint", cfg.outer_state()),
                         all_langs, budget, "joint")]
    elif algorithm == "finetune":
        stages = [
            _Stage(pool_update(list(split.support), "batches/pretrain", cfg.outer_state()),
                   [support_language], budget, "pretrain"),
            _Stage(pool_update(merged_targets, "batches/finetune", cfg.finetune_state(),
                               fields=ft_fields),
                   all_langs, budget, "finetune"),
        ]
    elif algorithm == "reptile_ft":
        stages = [
            _Stage(episode_update("batches/reptile", with_target=False),
                   [support_language], budget, "reptile"),
            _Stage(pool_update(merged_targets, "batches/finetune", cfg.finetune_state(),
                               fields=ft_fields),
                   all_langs, budget, "finetune"),
        ]
    else:
        stages = [_Stage(episode_update("batches/episodes", with_target=True),
                         all_langs, budget, "episodes")]

    step_offset = 0
    for stage in stages:
        params, step_offset = _run_stage(spec, stage, params, split.validation,
                                         support_language, train_cfg, template,
                                         history, step_offset, started)
    return params, history
