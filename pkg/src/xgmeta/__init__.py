"""Cross-lingual first-order meta-learning at desk scale.

Layers, bottom up: a float64 autodiff tape (`tensor`), flat parameter
vectors (`params`), a toy seq2seq parser and MLP regressor (`models`), the
episodic training algorithms and baselines (`meta`), an exact-derivative
verification testbed (`analysis`), synthetic multi-language corpora and
sampling regimes (`tasks`), evaluation metrics (`metrics`), and the
experiment harness (`harness`, also the `xgmeta` CLI).
"""

from . import analysis, harness, meta, metrics, models, params, records, rng, tasks, tensor, vocab

__all__ = [
    "analysis",
    "harness",
    "meta",
    "metrics",
    "models",
    "params",
    "records",
    "rng",
    "tasks",
    "tensor",
    "vocab",
]

__version__ = "0.1.0"
