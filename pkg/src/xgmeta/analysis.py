"""Numerical verification of the episode's gradient structure.

The testbed is a family of per-batch polynomial losses with closed-form
gradients and Hessians:

    loss_k(theta) = 1/2 theta^T A_k theta + b_k^T theta + (c/3) sum_i theta_i^3

With c = 0 the Hessian is the constant A_k, every first-order expansion of a
step gradient around the starting point is exact, and the identities below
must hold to machine precision. With c != 0 the Hessian varies linearly in
theta and the expansion errors must shrink as O(alpha^2).

Checked identities, for an SGD inner loop phi_0 = theta0, phi_j = phi_{j-1}
- alpha g_j (g_j evaluated at phi_{j-1}):

  * telescoping:       phi_K - phi_0 = -alpha * sum_j g_j
  * step expansion:    g_k = gbar_k + Hbar_k (phi_{k-1} - theta0)
                           = gbar_k - alpha Hbar_k sum_{j<k} g_j
  * target expansion:  g_T(phi_K) = gbar_T + Hbar_T (phi_K - theta0)
  * K=2 decomposition: g_1 + g_2 + g_T reassembles from the bar-gradients
                       and the Hessian products Hbar_2 g_1, Hbar_T (g_1+g_2)

where bars mean evaluation at theta0. The displacement form (equivalently a
sum over the actual step gradients) is what makes the c = 0 cases exact;
replacing the actual sums with bar-gradient sums changes each identity by
O(alpha^2), which is reported separately and must obey the two-rate law.
"""

from dataclasses import dataclass

import numpy as np

from .meta import EpisodeConfig, inner_loop
from .params import ParamVector, build_layout
from .rng import stream


@dataclass(frozen=True)
class PolyTask:
    """Per-batch quadratic-plus-cubic losses with exact derivatives."""

    mats: np.ndarray       # (num_batches, d, d), each symmetric positive definite
    vecs: np.ndarray       # (num_batches, d)
    cubic: float = 0.0

    def __post_init__(self):
        if self.mats.ndim != 3 or self.mats.shape[1] != self.mats.shape[2]:
            raise ValueError("mats must be (num_batches, d, d)")
        if self.vecs.shape != self.mats.shape[:2]:
            raise ValueError("vecs must be (num_batches, d)")

    @property
    def num_batches(self):
        return self.mats.shape[0]

    @property
    def dim(self):
        return self.mats.shape[1]

    def loss(self, k, theta):
        a, b = self.mats[k], self.vecs[k]
        return float(0.5 * theta @ a @ theta + b @ theta + (self.cubic / 3.0) * np.sum(theta ** 3))

    def params(self, theta):
        layout, _ = build_layout([("theta", (self.dim,))])
        return ParamVector(np.asarray(theta, dtype=np.float64), layout)

    def batch_loss(self, params, k):
        """loss_fn interface: batch is the batch index."""
        theta = params.values
        grad = exact_grad(self, k, theta)
        return self.loss(k, theta), params.with_values(grad)


def random_poly_task(num_batches, dim, cubic, seed):
    """A_k = Q Lambda Q^T with random orthogonal Q and eigenvalues in [0.5, 2]."""
    rng = stream(seed, "polytask")
    mats = np.empty((num_batches, dim, dim))
    vecs = np.empty((num_batches, dim))
    for k in range(num_batches):
        q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
        lam = rng.uniform(0.5, 2.0, size=dim)
        mats[k] = (q * lam) @ q.T
        mats[k] = 0.5 * (mats[k] + mats[k].T)
        vecs[k] = rng.normal(size=dim)
    return PolyTask(mats, vecs, cubic)


def exact_grad(task, k, theta):
    theta = np.asarray(theta, dtype=np.float64)
    return task.mats[k] @ theta + task.vecs[k] + task.cubic * theta ** 2


def exact_hessian(task, k, theta):
    theta = np.asarray(theta, dtype=np.float64)
    return task.mats[k] + 2.0 * task.cubic * np.diag(theta)


def sgd_run(task, alpha, big_k, theta0):
    """SGD over batches 0..K-1; returns (trajectory after each step, raw gradients)."""
    theta = np.asarray(theta0, dtype=np.float64).copy()
    trajectory = []
    grads = []
    for k in range(big_k):
        g = exact_grad(task, k, theta)
        grads.append(g)
        theta = theta - alpha * g
        trajectory.append(theta.copy())
    return trajectory, grads


def closed_form_sgd_trajectory(task, alpha, big_k, theta0):
    """theta <- (I - alpha A_k) theta - alpha b_k, iterated exactly. Needs c = 0."""
    if task.cubic != 0.0:
        raise ValueError("closed form requires a pure quadratic task (c = 0)")
    d = task.dim
    eye = np.eye(d)
    theta = np.asarray(theta0, dtype=np.float64).copy()
    out = []
    for k in range(big_k):
        theta = (eye - alpha * task.mats[k]) @ theta - alpha * task.vecs[k]
        out.append(theta.copy())
    return out


def taylor_residual(task, alpha, big_k, theta0):
    """Per-step norms of g_k minus its first-order expansion around theta0.

    The expansion uses the Hessian at theta0 and the actual displacement of
    the iterate, so it is exact for c = 0 and O(alpha^2) otherwise. The first
    step's residual is zero by construction.
    """
    theta0 = np.asarray(theta0, dtype=np.float64)
    trajectory, grads = sgd_run(task, alpha, big_k, theta0)
    residuals = np.empty(big_k)
    prev = theta0
    for k in range(big_k):
        gbar = exact_grad(task, k, theta0)
        hbar = exact_hessian(task, k, theta0)
        predicted = gbar + hbar @ (prev - theta0)
        residuals[k] = np.linalg.norm(grads[k] - predicted)
        prev = trajectory[k]
    return residuals


def target_expansion_check(task, target_index, alpha, big_k, theta0):
    """Norm of g_T(phi_K) minus its expansion gbar_T + Hbar_T (phi_K - theta0)."""
    theta0 = np.asarray(theta0, dtype=np.float64)
    trajectory, _ = sgd_run(task, alpha, big_k, theta0)
    phi_k = trajectory[-1] if trajectory else theta0
    actual = exact_grad(task, target_index, phi_k)
    predicted = exact_grad(task, target_index, theta0) \
        + exact_hessian(task, target_index, theta0) @ (phi_k - theta0)
    return float(np.linalg.norm(actual - predicted))


def total_gradient_decomposition(task, target_index, alpha, theta0):
    """Decompose the K=2 episode gradient sum g_1 + g_2 + g_T.

    Reports the bar-gradients, the two Hessian products, and two residuals:
    `exact_residual` compares against the expansion built from actual step
    gradients (zero for c = 0), `leading_order_residual` against the pure
    bar-gradient expansion (O(alpha^2) for any c).
    """
    theta0 = np.asarray(theta0, dtype=np.float64)
    trajectory, grads = sgd_run(task, alpha, 2, theta0)
    g1, g2 = grads
    g_t = exact_grad(task, target_index, trajectory[-1])
    total = g1 + g2 + g_t

    gbar1 = exact_grad(task, 0, theta0)
    gbar2 = exact_grad(task, 1, theta0)
    gbar_t = exact_grad(task, target_index, theta0)
    hbar2 = exact_hessian(task, 1, theta0)
    hbar_t = exact_hessian(task, target_index, theta0)

    exact_form = gbar1 + gbar2 + gbar_t - alpha * (hbar2 @ g1 + hbar_t @ (g1 + g2))
    leading_form = gbar1 + gbar2 + gbar_t - alpha * (hbar2 @ gbar1 + hbar_t @ (gbar1 + gbar2))
    return {
        "g_bar_1": gbar1,
        "g_bar_2": gbar2,
        "g_bar_target": gbar_t,
        "product_support": hbar2 @ gbar1,
        "product_target": hbar_t @ (gbar1 + gbar2),
        "total": total,
        "exact_residual": float(np.linalg.norm(total - exact_form)),
        "leading_order_residual": float(np.linalg.norm(total - leading_form)),
    }


def inner_loop_on_task(task, alpha, big_k, theta0):
    """Run the generic inner loop on the task; returns (phi_K, raw gradients)."""
    cfg = EpisodeConfig(k=big_k, inner_lr=alpha, outer_lr=1.0, target_weight=0.0,
                        inner_opt="sgd", outer_opt="sgd", batch_size=1)
    phi0 = task.params(theta0)
    phi_k, grads = inner_loop(task.batch_loss, phi0, list(range(big_k)), cfg)
    return phi_k, grads


def two_rate_ratio(residual_fn, alpha):
    """residual(alpha) / residual(alpha/2); ~4 when the residual is O(alpha^2)."""
    hi = residual_fn(alpha)
    lo = residual_fn(alpha / 2.0)
    if lo == 0.0:
        raise ZeroDivisionError("residual vanished; two-rate ratio undefined")
    return hi / lo


def run_verification(seeds=range(20), dims=(2, 5, 20), ks=(1, 2, 5, 10), alpha=0.01):
    """The full identity suite as a list of JSON-ready report entries."""
    report = []

    def entry(name, params, residual, threshold):
        report.append({
            "identity": name,
            "params": params,
            "residual": float(residual),
            "threshold": threshold,
            "pass": bool(residual <= threshold),
        })

    for seed in seeds:
        for d in dims:
            for big_k in ks:
                task = random_poly_task(big_k + 1, d, 0.0, seed)
                rng = stream(seed, f"theta0/{d}/{big_k}")
                theta0 = rng.normal(size=d)
                meta = {"seed": int(seed), "dim": d, "k": big_k, "alpha": alpha, "cubic": 0.0}
                entry("inner_step_expansion",
                      meta, taylor_residual(task, alpha, big_k, theta0).max(), 1e-12)
                entry("target_expansion",
                      meta, target_expansion_check(task, big_k, alpha, big_k, theta0), 1e-12)
                traj = closed_form_sgd_trajectory(task, alpha, big_k, theta0)
                phi_k, grads = inner_loop_on_task(task, alpha, big_k, theta0)
                entry("closed_form_match",
                      meta, np.abs(phi_k.values - traj[-1]).max(), 1e-12)
                tele = phi_k.values - theta0 + alpha * np.sum([g.values for g in grads], axis=0)
                entry("telescoping", meta, np.abs(tele).max(), 1e-12)
            task3 = random_poly_task(3, d, 0.0, seed)
            theta0 = stream(seed, f"theta0/decomp/{d}").normal(size=d)
            meta = {"seed": int(seed), "dim": d, "k": 2, "alpha": alpha, "cubic": 0.0}
            decomp = total_gradient_decomposition(task3, 2, alpha, theta0)
            entry("k2_decomposition", meta, decomp["exact_residual"], 1e-12)

    for seed in seeds:
        d, big_k, cubic = 5, 5, 0.5
        task = random_poly_task(big_k + 1, d, cubic, seed)
        rng = stream(seed, "theta0/cubic")
        theta0 = rng.normal(size=d)
        meta = {"seed": int(seed), "dim": d, "k": big_k, "alpha": alpha, "cubic": cubic}
        ratio = two_rate_ratio(
            lambda a: taylor_residual(task, a, big_k, theta0)[1:].sum(), alpha)
        report.append({"identity": "taylor_two_rate", "params": meta,
                       "residual": float(ratio), "threshold": [3.5, 4.5],
                       "pass": bool(3.5 <= ratio <= 4.5)})
        ratio_t = two_rate_ratio(
            lambda a: target_expansion_check(task, big_k, a, big_k, theta0), alpha)
        report.append({"identity": "target_two_rate", "params": meta,
                       "residual": float(ratio_t), "threshold": [3.5, 4.5],
                       "pass": bool(3.5 <= ratio_t <= 4.5)})
    return report
