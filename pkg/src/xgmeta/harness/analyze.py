"""Representation analysis of a finished run's checkpoints.

Rebuilds the corpus and splits from the run's stored config, loads each
seed's checkpoint, and recomputes sentence-encoding geometry on the held-out
test split: joint-basis PCA coordinates per language, plus cosine and
Hausdorff similarity of every target language to the support language.
"""

import json
from pathlib import Path

from .. import metrics, models, tasks
from ..params import load_checkpoint
from .config import ExperimentConfig
from .runner import _pca_files, build_corpus, build_spec


def analyze(run_dir, out_dir=None):
    run_dir = Path(run_dir)
    out = Path(out_dir) if out_dir else run_dir
    out.mkdir(parents=True, exist_ok=True)
    with open(run_dir / "config.json") as fh:
        config = ExperimentConfig(json.load(fh))
    corpus = build_corpus(config)
    spec = build_spec(config, corpus)
    support = corpus.support_language

    report = {"support_language": support, "seeds": {}}
    for seed in config.seeds:
        ckpt = run_dir / f"seed_{seed}" / "checkpoint.bin"
        if not ckpt.exists():
            raise FileNotFoundError(f"missing checkpoint: {ckpt}")
        params = load_checkpoint(ckpt)
        split = tasks.split_sample(corpus, config.split["strategy"], config.split["rate"],
                                   seed, config.split["val_frac"], config.split["test_frac"])
        seed_dir = out / f"seed_{seed}"
        seed_dir.mkdir(exist_ok=True)
        fractions = _pca_files(seed_dir, spec, params, split, support)

        sets = {}
        for lang in sorted(split.test):
            enc = models.encode_batch(spec, params, split.test[lang])
            sets[lang] = metrics.EncodingSet(lang, enc, [ex.pair_id for ex in split.test[lang]])
        similarity = {}
        for lang, enc_set in sets.items():
            similarity[lang] = {
                "cosine_to_support": metrics.mean_pairwise_cosine(sets[support], enc_set),
                "hausdorff_to_support": metrics.hausdorff_distance(
                    sets[support].matrix, enc_set.matrix),
            }
        report["seeds"][str(seed)] = {
            "pca_explained_variance": fractions,
            "similarity": similarity,
        }
    with open(out / "analysis.json", "w") as fh:
        fh.write(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report
