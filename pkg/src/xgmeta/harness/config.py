"""Experiment configuration: one JSON document, schema-checked, explicit defaults.

Unknown keys anywhere in the document are rejected so a typo cannot silently
fall back to a default. `resolved()` returns the fully-expanded dict that a
run writes next to its outputs, making every experiment self-describing.
"""

import copy
import json

from ..meta import ALGORITHMS, EpisodeConfig, TrainConfig
from ..tasks import STRATEGIES, LanguageSpec

DEFAULT_LANGUAGES = [
    {"tag": "en"},
    {"tag": "t1", "suffix": "a", "p_suffix": 0.2},
    {"tag": "t2", "lexicon_seed": 12},
    {"tag": "t3", "lexicon_seed": 13, "order_seed": 14},
    {"tag": "t4", "lexicon_seed": 15, "suffix": "c", "p_suffix": 0.3},
    {"tag": "t5", "lexicon_seed": 16, "order_seed": 17, "suffix": "d", "p_suffix": 0.5},
]

DEFAULTS = {
    "corpus": {
        "num_templates": 12,
        "entities_per_slot": 30,
        "num_pairs": 2000,
        "seed": 0,
        "languages": DEFAULT_LANGUAGES,
    },
    "split": {"strategy": "subtractive", "rate": 0.10, "val_frac": 0.10, "test_frac": 0.10},
    "model": {"embed_dim": 32, "hidden_dim": 64, "max_decode_len": 48},
    "episode": {"k": 10, "inner_lr": 1e-4, "outer_lr": 1e-3, "target_weight": None,
                "inner_opt": "sgd", "outer_opt": "adam", "batch_size": 10,
                "finetune_opt": "sgd", "finetune_lr": 0.1},
    "train": {"max_steps": 20000, "patience": 10, "eval_interval": 500},
    "algorithm": "xg_reptile",
    "seeds": [0],
}

_LANGUAGE_KEYS = {"tag", "lexicon_seed", "order_seed", "suffix", "p_suffix"}


class ConfigError(ValueError):
    pass


def _check_keys(given, allowed, where):
    unknown = set(given) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}; "
                          f"allowed: {sorted(allowed)}")


def _merge_section(name, overrides):
    base = copy.deepcopy(DEFAULTS[name])
    if overrides is None:
        return base
    if not isinstance(overrides, dict):
        raise ConfigError(f"section {name!r} must be an object")
    _check_keys(overrides, base, name)
    base.update(overrides)
    return base


class ExperimentConfig:
    """Validated view over the experiment JSON document."""

    def __init__(self, document=None):
        document = document or {}
        if not isinstance(document, dict):
            raise ConfigError("config document must be a JSON object")
        _check_keys(document, DEFAULTS, "config")
        self.corpus = _merge_section("corpus", document.get("corpus"))
        self.split = _merge_section("split", document.get("split"))
        self.model = _merge_section("model", document.get("model"))
        self.episode_section = _merge_section("episode", document.get("episode"))
        self.train_section = _merge_section("train", document.get("train"))
        self.algorithm = document.get("algorithm", DEFAULTS["algorithm"])
        self.seeds = list(document.get("seeds", DEFAULTS["seeds"]))
        self._validate()

    def _validate(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm {self.algorithm!r} not in {ALGORITHMS}")
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if self.split["strategy"] not in STRATEGIES:
            raise ConfigError(f"split strategy {self.split['strategy']!r} not in {STRATEGIES}")
        rate = self.split["rate"]
        upper_ok = rate <= 1.0 if self.split["strategy"] == "parallel" else rate < 1.0
        if not (0.0 < rate and upper_ok):
            raise ConfigError(f"rate {rate} invalid for strategy {self.split['strategy']!r}")
        for lang in self.corpus["languages"]:
            _check_keys(lang, _LANGUAGE_KEYS, f"language {lang.get('tag', '?')!r}")
        if len(self.corpus["languages"]) < 2:
            raise ConfigError("need a support language plus at least one target")
        # constructing the dataclasses runs their own validation
        self.language_specs()
        self.episode_config()
        self.train_config(self.seeds[0])

    def language_specs(self):
        return [LanguageSpec(**lang) for lang in self.corpus["languages"]]

    def episode_config(self):
        return EpisodeConfig(**self.episode_section)

    def train_config(self, seed):
        return TrainConfig(seed=seed, **self.train_section)

    def resolved(self):
        return {
            "corpus": copy.deepcopy(self.corpus),
            "split": copy.deepcopy(self.split),
            "model": copy.deepcopy(self.model),
            "episode": copy.deepcopy(self.episode_section),
            "train": copy.deepcopy(self.train_section),
            "algorithm": self.algorithm,
            "seeds": list(self.seeds),
        }

    def with_overrides(self, **sections):
        """A new config with section fields replaced, e.g. episode={'k': 5}."""
        doc = self.resolved()
        for name, fields in sections.items():
            if name in ("algorithm", "seeds"):
                doc[name] = fields
            else:
                doc[name].update(fields)
        return ExperimentConfig(doc)


def load_config(path):
    with open(path) as fh:
        try:
            document = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return ExperimentConfig(document)


def dump_config(config, path=None):
    text = json.dumps(config.resolved(), indent=2, sort_keys=True)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text
