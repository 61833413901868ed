"""Synthetic multi-language parsing corpora, sampling regimes, batch streams.

A corpus is built from utterance templates (function words with entity
slots) crossed with entity bindings. Each (template, binding) pair gets one
shared logical form (an operator token plus the bound entity tokens) and one
surface utterance per language. Languages are derived from the source
realization by three knobs:

  * a bijective lexicon map (None = keep source tokens),
  * a per-template word-order permutation (None = keep source order),
  * an optional suffix morpheme appended to entity mentions with some
    probability.

Identity knobs give a near language; a fresh lexicon plus reordering plus
suffixing gives a distant one. Everything is deterministic in the seeds.

Sampling strategies over pair ids (validation/test fractions are reserved
first, parallel across languages):

  parallel      targets reuse support pairs
  subtractive   targets take a p-fraction of pairs, support keeps the rest
  all_disjoint  support and every target language get disjoint pairs
"""

import json
from dataclasses import dataclass

import numpy as np

from .rng import stream
from .vocab import BOS_TOKEN, EOS_TOKEN, INPUT_RESERVED, OUTPUT_RESERVED, PAD_TOKEN

STRATEGIES = ("parallel", "subtractive", "all_disjoint")


@dataclass(frozen=True)
class Example:
    utterance: tuple
    logical_form: tuple
    language: str
    pair_id: int
    context: tuple = ()

    def __post_init__(self):
        if len(self.utterance) == 0:
            raise ValueError("utterance must be nonempty")


@dataclass(frozen=True)
class LanguageSpec:
    tag: str
    lexicon_seed: int = None     # None keeps source tokens
    order_seed: int = None       # None keeps source word order
    suffix: str = None
    p_suffix: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.p_suffix <= 1.0):
            raise ValueError("p_suffix must be in [0, 1]")
        if self.p_suffix > 0.0 and not self.suffix:
            raise ValueError("p_suffix > 0 needs a suffix morpheme")


@dataclass
class Corpus:
    languages: list            # tags, support language first
    examples: dict             # (language, pair_id) -> Example
    input_vocab: dict          # surface token -> id
    output_vocab: dict         # logical-form token -> id
    n_pairs: int
    seed: int

    @property
    def support_language(self):
        return self.languages[0]

    def example(self, language, pair_id):
        return self.examples[(language, pair_id)]

    def examples_for(self, language, pair_ids):
        return [self.examples[(language, pid)] for pid in sorted(pair_ids)]


def _template_set(num_templates, rng):
    """Templates as token lists mixing function words and slot markers."""
    templates = []
    for t in range(num_templates):
        n_slots = 1 + t % 3
        n_func = int(rng.integers(2, 5))
        tokens = [f"f{int(rng.integers(40)):02d}" for _ in range(n_func)]
        tokens += [("slot", s) for s in range(n_slots)]
        order = rng.permutation(len(tokens))
        templates.append([tokens[i] for i in order])
    return templates


def generate_corpus(num_templates, entities_per_slot, languages, n_pairs, seed):
    """A parallel corpus of n_pairs distinct (template, binding) pairs."""
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    if len(languages) < 2:
        raise ValueError("need a support language plus at least one target")
    tags = [spec.tag for spec in languages]
    if len(set(tags)) != len(tags):
        raise ValueError("duplicate language tags")

    rng = stream(seed, "corpus/templates")
    templates = _template_set(num_templates, rng)
    slot_counts = [sum(1 for tok in tpl if isinstance(tok, tuple)) for tpl in templates]
    combos = [entities_per_slot ** c for c in slot_counts]
    total = sum(combos)
    if total < n_pairs:
        raise ValueError(
            f"template/entity pool yields only {total} distinct pairs, need {n_pairs}")

    pair_rng = stream(seed, "corpus/pairs")
    chosen = np.sort(pair_rng.choice(total, size=n_pairs, replace=False))

    def entity_token(slot, j):
        return f"e{slot}_{j:02d}"

    # decode a flat combo index into (template, per-slot entity choices)
    starts = np.cumsum([0] + combos[:-1])
    bindings = []
    for flat in chosen:
        t = int(np.searchsorted(starts, flat, side="right")) - 1
        rem = int(flat - starts[t])
        ent = []
        for _ in range(slot_counts[t]):
            ent.append(rem % entities_per_slot)
            rem //= entities_per_slot
        bindings.append((t, tuple(ent)))

    # source-side realization shared by every language
    source_vocab = sorted(
        {tok for tpl in templates for tok in tpl if not isinstance(tok, tuple)}
        | {entity_token(s, j) for s in range(3) for j in range(entities_per_slot)})
    lexicons = {}
    orders = {}
    for spec in languages:
        if spec.lexicon_seed is None:
            lexicons[spec.tag] = {tok: tok for tok in source_vocab}
        else:
            perm = stream(spec.lexicon_seed, f"lexicon/{spec.tag}").permutation(len(source_vocab))
            lexicons[spec.tag] = {tok: f"{spec.tag}:x{int(p):03d}"
                                  for tok, p in zip(source_vocab, perm)}
        if spec.order_seed is None:
            orders[spec.tag] = {t: list(range(len(tpl))) for t, tpl in enumerate(templates)}
        else:
            orders[spec.tag] = {
                t: stream(spec.order_seed, f"order/{spec.tag}/{t}").permutation(len(tpl)).tolist()
                for t, tpl in enumerate(templates)}

    examples = {}
    lf_tokens = set()
    surface_tokens = set()
    for spec in languages:
        suffix_rng = stream(seed, f"corpus/suffix/{spec.tag}")
        lex = lexicons[spec.tag]
        for pair_id, (t, ent) in enumerate(bindings):
            tpl = templates[t]
            lf = [f"op{t:02d}"] + [entity_token(s, ent[s]) for s in range(slot_counts[t])]
            lf_tokens.update(lf)
            surface = []
            for pos in orders[spec.tag][t]:
                tok = tpl[pos]
                if isinstance(tok, tuple):
                    word = lex[entity_token(tok[1], ent[tok[1]])]
                    if spec.p_suffix > 0.0 and suffix_rng.random() < spec.p_suffix:
                        word = f"{word}+{spec.suffix}"
                else:
                    word = lex[tok]
                surface.append(word)
            surface_tokens.update(surface)
            examples[(spec.tag, pair_id)] = (surface, lf)

    input_vocab = {tok: i for i, tok in enumerate(INPUT_RESERVED + sorted(surface_tokens))}
    output_vocab = {tok: i for i, tok in enumerate(OUTPUT_RESERVED + sorted(lf_tokens))}

    built = {}
    for (tag, pair_id), (surface, lf) in examples.items():
        built[(tag, pair_id)] = Example(
            utterance=tuple(input_vocab[w] for w in surface),
            logical_form=tuple(output_vocab[w] for w in lf),
            language=tag,
            pair_id=pair_id,
        )
    corpus = Corpus(languages=tags, examples=built, input_vocab=input_vocab,
                    output_vocab=output_vocab, n_pairs=n_pairs, seed=seed)
    lfs = {corpus.example(tags[0], pid).logical_form for pid in range(n_pairs)}
    if len(lfs) != n_pairs:
        raise AssertionError("logical forms are not unique")
    return corpus


@dataclass
class SampleSplit:
    support: list              # support-language examples
    targets: dict              # language -> examples
    validation: dict           # language -> examples (parallel pair ids)
    test: dict                 # language -> examples (parallel pair ids)
    strategy: str
    rate: float

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        support_pids = {ex.pair_id for ex in self.support}
        target_pid_sets = {lang: {ex.pair_id for ex in exs}
                           for lang, exs in self.targets.items()}
        if self.strategy == "subtractive":
            sets = list(target_pid_sets.values())
            if any(s != sets[0] for s in sets):
                raise ValueError("subtractive split: target pair ids differ across languages")
            if sets and sets[0] & support_pids:
                raise ValueError("subtractive split: support and target pairs overlap")
        if self.strategy == "parallel":
            for lang, s in target_pid_sets.items():
                if not s <= support_pids:
                    raise ValueError(f"parallel split: {lang} pairs missing from support")
        if self.strategy == "all_disjoint":
            pools = [support_pids] + list(target_pid_sets.values())
            for i in range(len(pools)):
                for j in range(i + 1, len(pools)):
                    if pools[i] & pools[j]:
                        raise ValueError("all_disjoint split: pair id pools overlap")


def split_sample(corpus, strategy, p, seed, val_frac=0.10, test_frac=0.10):
    """Reserve validation/test pairs, then sample support/target pools."""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if strategy == "parallel":
        if not (0.0 < p <= 1.0):
            raise ValueError("parallel sampling needs 0 < p <= 1")
    elif not (0.0 < p < 1.0):
        raise ValueError(f"{strategy} sampling needs 0 < p < 1")
    target_langs = corpus.languages[1:]
    if strategy == "all_disjoint" and len(target_langs) * p > 1.0:
        raise ValueError(
            f"all_disjoint with {len(target_langs)} languages at rate {p} "
            "leaves too few support examples")

    rng = stream(seed, "split")
    shuffled = rng.permutation(corpus.n_pairs)
    n_val = int(round(val_frac * corpus.n_pairs))
    n_test = int(round(test_frac * corpus.n_pairs))
    val_pids = shuffled[:n_val].tolist()
    test_pids = shuffled[n_val:n_val + n_test].tolist()
    usable = shuffled[n_val + n_test:].tolist()
    n_target = int(round(p * len(usable)))

    if strategy == "parallel":
        target_pids = {lang: usable[:n_target] for lang in target_langs}
        support_pids = usable
    elif strategy == "subtractive":
        target_pids = {lang: usable[:n_target] for lang in target_langs}
        support_pids = usable[n_target:]
    else:
        target_pids = {lang: usable[i * n_target:(i + 1) * n_target]
                       for i, lang in enumerate(target_langs)}
        support_pids = usable[len(target_langs) * n_target:]
    if not support_pids:
        raise ValueError("sampling left no support examples")

    support_lang = corpus.support_language
    return SampleSplit(
        support=corpus.examples_for(support_lang, support_pids),
        targets={lang: corpus.examples_for(lang, pids) for lang, pids in target_pids.items()},
        validation={lang: corpus.examples_for(lang, val_pids) for lang in corpus.languages},
        test={lang: corpus.examples_for(lang, test_pids) for lang in corpus.languages},
        strategy=strategy,
        rate=p,
    )


def batch_iterator(dataset, batch_size, seed, recycle=False):
    """Epoch-shuffled batches without replacement inside an epoch.

    With recycle=False one epoch is emitted, the final batch possibly short.
    With recycle=True the stream never ends and every batch has full size:
    each epoch yields all of its items, and an epoch's short final batch is
    topped up with extra draws from a freshly restarted pool, so small
    datasets are over-sampled rather than truncated.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    items = list(dataset)
    if not items:
        raise ValueError("empty dataset")
    n = len(items)
    rng = stream(seed, "batches")

    def generate():
        while True:
            order = rng.permutation(n).tolist()
            for start in range(0, n - batch_size + 1, batch_size):
                yield [items[i] for i in order[start:start + batch_size]]
            leftover = order[n - n % batch_size:] if n % batch_size else []
            if not recycle:
                if leftover:
                    yield [items[i] for i in leftover]
                return
            if leftover:
                while len(leftover) < batch_size:
                    fill = rng.permutation(n).tolist()
                    leftover.extend(fill[:batch_size - len(leftover)])
                yield [items[i] for i in leftover]

    return generate()


@dataclass(frozen=True)
class SinusoidTask:
    amplitude: float
    phase: float
    x: tuple
    y: tuple

    def batch(self):
        return np.asarray(self.x), np.asarray(self.y)


def sinusoid_family(num_tasks, amplitude_range, phase_range, points_per_task, seed):
    """Regression tasks y = A sin(x + phase), x uniform in [-5, 5]."""
    rng = stream(seed, "sinusoid")
    tasks = []
    for _ in range(num_tasks):
        amp = float(rng.uniform(*amplitude_range))
        phase = float(rng.uniform(*phase_range))
        x = rng.uniform(-5.0, 5.0, size=points_per_task)
        y = amp * np.sin(x + phase)
        tasks.append(SinusoidTask(amp, phase, tuple(x.tolist()), tuple(y.tolist())))
    return tasks


def write_corpus_jsonl(corpus, path):
    """Line-delimited JSON, one example per line, ordered (pair_id, language)."""
    with open(path, "w") as fh:
        for pair_id in range(corpus.n_pairs):
            for tag in corpus.languages:
                ex = corpus.example(tag, pair_id)
                row = {"pair_id": ex.pair_id, "language": ex.language,
                       "utterance": list(ex.utterance),
                       "logical_form": list(ex.logical_form)}
                if ex.context:
                    row["context"] = list(ex.context)
                fh.write(json.dumps(row, sort_keys=True) + "\n")


def write_vocab_json(corpus, path):
    tables = {"utterance": corpus.input_vocab, "logical_form": corpus.output_vocab,
              "reserved": {PAD_TOKEN: 0, BOS_TOKEN: 1, EOS_TOKEN: 2}}
    with open(path, "w") as fh:
        json.dump(tables, fh, indent=2, sort_keys=True)
