"""Accuracy and representation-similarity metrics.

PCA is computed by power iteration with deflation on the sample covariance
(no eigensolver dependency); the dense eigendecomposition appears only as a
test oracle. Cosine similarity is taken on raw encodings between rows
matched by pair id; Hausdorff distance compares whole encoding clouds.
"""

from dataclasses import dataclass

import numpy as np

from .rng import stream
from .vocab import EOS_ID, PAD_ID

_PCA_TOL = 1e-10
_PCA_MAX_ITER = 10000
_PCA_START_SEED = 0x9E3779B9


class RankError(ValueError):
    def __init__(self, achieved, requested):
        super().__init__(f"data has rank {achieved}, cannot extract {requested} components")
        self.achieved = achieved
        self.requested = requested


@dataclass
class EncodingSet:
    language: str
    matrix: np.ndarray
    pair_ids: list

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        self.pair_ids = [int(p) for p in self.pair_ids]
        if self.matrix.ndim != 2 or self.matrix.shape[0] != len(self.pair_ids):
            raise ValueError("one encoding row per pair id required")
        if any(a >= b for a, b in zip(self.pair_ids, self.pair_ids[1:])):
            raise ValueError("pair_ids must be sorted ascending")


def _strip(tokens):
    return [t for t in tokens if t not in (PAD_ID, EOS_ID)]


def exact_match(predictions, golds):
    """Fraction of exact token-sequence matches after PAD/EOS stripping."""
    if len(predictions) != len(golds):
        raise ValueError(f"{len(predictions)} predictions vs {len(golds)} golds")
    if not golds:
        raise ValueError("empty evaluation set")
    hits = sum(1 for p, g in zip(predictions, golds) if _strip(p) == _strip(g))
    return hits / len(golds)


def _power_iteration(mat, rng):
    v = rng.normal(size=mat.shape[0])
    v /= np.linalg.norm(v)
    for _ in range(_PCA_MAX_ITER):
        w = mat @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return v, 0.0
        w /= norm
        if np.linalg.norm(w - v) < _PCA_TOL:
            v = w
            break
        v = w
    return v, float(v @ mat @ v)


def pca_project(encodings, dims=2):
    """Top principal directions via power iteration with deflation.

    Returns (projected coordinates, explained-variance fractions). Directions
    are sign-fixed so their first nonzero coordinate is positive. Raises
    RankError when the data cannot support the requested dimensionality.
    """
    x = np.asarray(encodings, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("encodings must be a matrix")
    n = x.shape[0]
    if n < dims + 1:
        raise ValueError(f"need at least {dims + 1} rows for {dims} components")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / (n - 1)
    total = float(np.trace(cov))
    rng = stream(_PCA_START_SEED, "pca/start")
    directions = []
    variances = []
    work = cov.copy()
    for i in range(dims):
        v, lam = _power_iteration(work, rng)
        if lam <= max(total, 1.0) * 1e-12:
            raise RankError(achieved=i, requested=dims)
        nz = np.nonzero(np.abs(v) > 1e-12)[0]
        if nz.size and v[nz[0]] < 0:
            v = -v
        directions.append(v)
        variances.append(lam)
        work = work - lam * np.outer(v, v)
    basis = np.stack(directions, axis=1)
    fractions = np.array(variances) / total if total > 0 else np.zeros(dims)
    return centered @ basis, fractions


def mean_pairwise_cosine(a, b):
    """Mean cosine between rows of two encoding sets matched by pair id."""
    if a.pair_ids != b.pair_ids:
        raise ValueError("encoding sets cover different pair ids")
    norms_a = np.linalg.norm(a.matrix, axis=1)
    norms_b = np.linalg.norm(b.matrix, axis=1)
    if np.any(norms_a == 0) or np.any(norms_b == 0):
        raise ValueError("zero-norm encoding row")
    sims = np.sum(a.matrix * b.matrix, axis=1) / (norms_a * norms_b)
    return float(sims.mean())


def hausdorff_distance(a, b):
    """Symmetric Hausdorff distance between two Euclidean point sets."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("point sets must be nonempty")
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    diff = a[:, None, :] - b[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    return float(max(dist.min(axis=1).max(), dist.min(axis=0).max()))
