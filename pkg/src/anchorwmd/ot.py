"""Entropic regularized optimal transport between empirical measures.

Provides squared-Euclidean ground costs, a log-domain stabilized Sinkhorn
solver with a final projection onto the marginal polytope, the envelope
gradient of the regularized transport value with respect to the cost matrix,
and a brute-force permutation oracle for uniform equal-size marginals.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SinkhornConfig",
    "SinkhornResult",
    "validate_histogram",
    "ground_cost_matrix",
    "sinkhorn",
    "exact_ot_uniform",
    "sinkhorn_cost_gradient",
]

_TINY = np.finfo(float).tiny


def validate_histogram(weights, atol: float = 1e-9) -> np.ndarray:
    """Check that ``weights`` is a probability histogram and return it as float64.

    Entries must be finite, non-negative, and sum to 1 within ``atol``.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError(f"histogram must be a non-empty 1-D array, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValueError("histogram contains non-finite entries")
    if np.any(w < 0):
        raise ValueError("histogram contains negative entries")
    total = float(w.sum())
    if abs(total - 1.0) > atol:
        raise ValueError(f"histogram sums to {total}, expected 1 within {atol}")
    return w


def ground_cost_matrix(source_points, target_points) -> np.ndarray:
    """Pairwise squared Euclidean distances between two point sets.

    Both arguments are (d, n) arrays with one point per column; the result
    has shape (n_source, n_target) with entry (i, j) equal to
    ``||source[:, i] - target[:, j]||^2``.
    """
    x = np.asarray(source_points, dtype=float)
    y = np.asarray(target_points, dtype=float)
    if x.ndim != 2 or y.ndim != 2:
        raise ValueError("point sets must be 2-D arrays with one point per column")
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"point dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("point coordinates must be finite")
    sq_x = np.einsum("di,di->i", x, x)
    sq_y = np.einsum("dj,dj->j", y, y)
    cost = sq_x[:, None] + sq_y[None, :] - 2.0 * (x.T @ y)
    # clip tiny negatives produced by cancellation between the three terms
    np.maximum(cost, 0.0, out=cost)
    return cost


@dataclass(frozen=True)
class SinkhornConfig:
    """Settings for the entropic solver.

    ``epsilon`` is the regularization strength. With ``relative=True`` (the
    default) it multiplies the mean entry of the cost matrix it is applied
    to, making behaviour independent of the scale of the input geometry;
    with ``relative=False`` it is used verbatim. ``tolerance`` bounds the L1
    marginal violation at which iterations stop.
    """

    epsilon: float = 0.1
    relative: bool = True
    max_iters: int = 200
    tolerance: float = 1e-6

    def __post_init__(self):
        if not (self.epsilon > 0):
            raise ValueError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not (self.tolerance > 0):
            raise ValueError("tolerance must be positive")

    def effective_epsilon(self, cost: np.ndarray) -> float:
        """Resolve the regularization strength for a concrete cost matrix."""
        if not self.relative:
            return self.epsilon
        mean = float(np.mean(cost))
        return self.epsilon * mean if mean > 0 else self.epsilon


@dataclass(frozen=True)
class SinkhornResult:
    """Solution of one entropic transport problem.

    ``distance`` is the transport cost ``<plan, cost>`` of the rounded plan
    with the entropy term excluded. ``reg_distance`` is the full regularized
    objective ``<plan, cost> + epsilon * sum(plan * (log plan - 1))``; by the
    envelope theorem its gradient with respect to the cost matrix is exactly
    the plan, so it is the value the training loop differentiates.
    """

    distance: float
    plan: np.ndarray
    iterations_used: int
    converged: bool
    reg_distance: float
    epsilon: float


def _logsumexp(values: np.ndarray, axis: int) -> np.ndarray:
    peak = np.max(values, axis=axis, keepdims=True)
    return np.squeeze(peak, axis=axis) + np.log(np.sum(np.exp(values - peak), axis=axis))


def _round_to_marginals(plan: np.ndarray, row_sums: np.ndarray, col_sums: np.ndarray) -> np.ndarray:
    """Project a positive matrix onto the transportation polytope.

    Scales rows then columns down to their prescribed sums and distributes
    the leftover mass as a rank-one correction, so the returned matrix meets
    both marginals up to floating-point error regardless of how early the
    iterations stopped.
    """
    row = plan.sum(axis=1)
    plan = plan * np.minimum(row_sums / np.maximum(row, _TINY), 1.0)[:, None]
    col = plan.sum(axis=0)
    plan = plan * np.minimum(col_sums / np.maximum(col, _TINY), 1.0)[None, :]
    missing_row = np.maximum(row_sums - plan.sum(axis=1), 0.0)
    missing_col = np.maximum(col_sums - plan.sum(axis=0), 0.0)
    deficit = missing_row.sum()
    if deficit > _TINY:
        plan = plan + np.outer(missing_row, missing_col) / deficit
    return plan


def sinkhorn(cost, source, target, config: SinkhornConfig | None = None) -> SinkhornResult:
    """Solve entropic OT between two histograms with log-domain iterations.

    Parameters
    ----------
    cost : (n, m) array of non-negative finite entries.
    source : length-n histogram (non-negative, sums to 1).
    target : length-m histogram.
    config : solver settings; defaults to ``SinkhornConfig()``.

    Zero-weight atoms are stripped before solving and their plan rows or
    columns reinserted as zeros. Iterations stop once the L1 marginal
    violation drops to ``config.tolerance`` or ``config.max_iters`` is
    reached; either way the returned plan is rounded onto the marginal
    polytope, so its row and column sums match the inputs to float accuracy.
    """
    if config is None:
        config = SinkhornConfig()
    cost_full = np.asarray(cost, dtype=float)
    if cost_full.ndim != 2:
        raise ValueError(f"cost must be a 2-D matrix, got shape {cost_full.shape}")
    if np.any(np.isnan(cost_full)):
        raise ValueError("cost contains NaN")
    if not np.all(np.isfinite(cost_full)):
        raise ValueError("cost entries must be finite")
    a_full = validate_histogram(source)
    b_full = validate_histogram(target)
    if cost_full.shape != (a_full.size, b_full.size):
        raise ValueError(
            f"cost shape {cost_full.shape} does not match histogram lengths "
            f"({a_full.size}, {b_full.size})"
        )

    keep_a = a_full > 0
    keep_b = b_full > 0
    a = a_full[keep_a]
    b = b_full[keep_b]
    cost_sub = cost_full[np.ix_(keep_a, keep_b)]

    eps = config.effective_epsilon(cost_sub)
    log_kernel = -cost_sub / eps
    log_a = np.log(a)
    log_b = np.log(b)
    u = np.zeros(a.size)
    v = np.zeros(b.size)

    converged = False
    iterations = 0
    plan = np.exp(log_kernel)
    for iterations in range(1, config.max_iters + 1):
        u = log_a - _logsumexp(log_kernel + v[None, :], axis=1)
        v = log_b - _logsumexp(log_kernel + u[:, None], axis=0)
        plan = np.exp(u[:, None] + log_kernel + v[None, :])
        row_gap = float(np.abs(plan.sum(axis=1) - a).sum())
        col_gap = float(np.abs(plan.sum(axis=0) - b).sum())
        if max(row_gap, col_gap) <= config.tolerance:
            converged = True
            break

    plan = _round_to_marginals(plan, a, b)

    if keep_a.all() and keep_b.all():
        full_plan = plan
    else:
        full_plan = np.zeros_like(cost_full)
        full_plan[np.ix_(keep_a, keep_b)] = plan

    distance = float(np.sum(full_plan * cost_full))
    positive = plan[plan > 0]
    entropy_term = float(np.sum(positive * np.log(positive)) - plan.sum())
    return SinkhornResult(
        distance=distance,
        plan=full_plan,
        iterations_used=iterations,
        converged=converged,
        reg_distance=distance + eps * entropy_term,
        epsilon=eps,
    )


def exact_ot_uniform(cost) -> float:
    """Exact OT value for uniform equal-size marginals by enumeration.

    With both marginals uniform over n atoms the optimum of the transport LP
    is attained at a permutation, so the value is the minimum over all n!
    permutations of the mean assigned cost. Refuses n > 8.
    """
    c = np.asarray(cost, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError(f"cost must be square, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise ValueError("cost entries must be finite")
    n = c.shape[0]
    if n > 8:
        raise ValueError(f"n={n} exceeds the n<=8 enumeration limit")
    rows = np.arange(n)
    best = min(float(c[rows, perm].sum()) for perm in itertools.permutations(range(n)))
    return best / n


def sinkhorn_cost_gradient(result: SinkhornResult) -> np.ndarray:
    """Gradient of the regularized transport value w.r.t. the cost matrix.

    By the envelope theorem this is exactly the optimal plan; for a result
    that stopped before reaching tolerance the last (rounded) iterate is
    returned with a warning.
    """
    if not result.converged:
        warnings.warn(
            "sinkhorn did not converge; gradient uses the last rounded iterate",
            RuntimeWarning,
            stacklevel=2,
        )
    return result.plan
