"""Entropy-regularized optimal transport between signal point clouds.

A signal window becomes an empirical distribution over (time, amplitude)
points; a ground cost weighs amplitude and timing discrepancies separately;
Sinkhorn iterations produce a transport plan whose cost is differentiable
through the plan itself. A brute-force exact solver over permutations serves
as the validation oracle for small uniform clouds.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalOverflow, ShapeMismatch, TooLarge
from .signals import Signal

__all__ = [
    "EmpiricalDistribution",
    "CostParams",
    "SinkhornConfig",
    "TransportPlan",
    "build_distribution",
    "cost_matrix",
    "sinkhorn",
    "exact_ot",
    "plan_weighted_cost_gradient",
]


@dataclass(frozen=True)
class EmpiricalDistribution:
    """A weighted point cloud of (t, y) pairs, t in [0, 1] window time."""

    points: np.ndarray  # (n, 2) columns: time, amplitude
    weights: np.ndarray  # (n,), nonnegative, sums to 1

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        w = np.asarray(self.weights, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] == 0:
            raise ValueError("points must be a non-empty (n, 2) array")
        if w.shape != (pts.shape[0],):
            raise ValueError("weights must match points in length")
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(w)):
            raise ValueError("points and weights must be finite")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def times(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def amplitudes(self) -> np.ndarray:
        return self.points[:, 1]

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class CostParams:
    """Weights and exponents of the ground cost.

    C_ij = alpha * |y_i - y_j|**p  +  beta * |t_i - t_j|**q
    """

    alpha: float = 1.0
    beta: float = 0.1
    p: float = 2.0
    q: float = 2.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta <= 0:
            raise ValueError("alpha, beta must be >= 0 with alpha + beta > 0")
        if self.p <= 0 or self.q <= 0:
            raise ValueError("p and q must be positive")


@dataclass(frozen=True)
class SinkhornConfig:
    """Solver settings for entropy-regularized transport."""

    epsilon: float = 0.1
    max_iter: int = 1000
    tol: float = 1e-8  # L1 marginal violation
    log_domain: bool = True

    def __post_init__(self):
        if not (self.epsilon > 0):
            raise ValueError("epsilon must be strictly positive")
        if self.max_iter < 1 or self.tol <= 0:
            raise ValueError("max_iter >= 1 and tol > 0 required")


@dataclass(frozen=True)
class TransportPlan:
    """Result of a Sinkhorn solve."""

    matrix: np.ndarray
    converged: bool
    iterations: int
    transport_cost: float  # <plan, cost>
    entropy: float  # -sum plan*log(plan)
    epsilon: float

    @property
    def entropic_cost(self) -> float:
        """The regularized objective <plan, C> - epsilon * H(plan).

        This is the quantity whose cost-matrix gradient equals the plan
        itself, which makes it the differentiable loss for filter fitting.
        """
        return self.transport_cost - self.epsilon * self.entropy


def build_distribution(window: Signal, n_points: int) -> EmpiricalDistribution:
    """Uniform-stride subsample of a window as a uniform-weight cloud.

    Times are mapped affinely onto [0, 1]; weights are all 1/n_points.
    """
    n = len(window)
    if not (1 <= n_points <= n):
        raise ValueError(f"n_points must be in [1, {n}], got {n_points}")
    stride = n // n_points
    idx = np.arange(n_points) * stride
    t = np.linspace(0.0, 1.0, n_points) if n_points > 1 else np.zeros(1)
    pts = np.column_stack([t, window.samples[idx]])
    return EmpiricalDistribution(pts, np.full(n_points, 1.0 / n_points))


def cost_matrix(
    src: EmpiricalDistribution, dst: EmpiricalDistribution, params: CostParams = CostParams()
) -> np.ndarray:
    """Pairwise ground cost between two clouds."""
    dy = np.abs(src.amplitudes[:, None] - dst.amplitudes[None, :])
    dt = np.abs(src.times[:, None] - dst.times[None, :])
    amp = dy * dy if params.p == 2.0 else dy**params.p
    tim = dt * dt if params.q == 2.0 else dt**params.q
    return params.alpha * amp + params.beta * tim


def _plan_entropy(plan: np.ndarray) -> float:
    p = plan[plan > 0]
    return float(-(p * np.log(p)).sum())


def _lse(x: np.ndarray, axis: int) -> np.ndarray:
    """logsumexp without scipy call overhead; inputs are finite."""
    m = x.max(axis=axis, keepdims=True)
    out = np.log(np.exp(x - m).sum(axis=axis))
    return out + np.squeeze(m, axis=axis)


def log_domain_sinkhorn(
    log_a: np.ndarray,
    log_b: np.ndarray,
    cost: np.ndarray,
    epsilon: float,
    max_iter: int,
    tol: float,
    f0: np.ndarray | None = None,
    g0: np.ndarray | None = None,
):
    """Batched log-domain Sinkhorn core.

    cost may carry leading batch dimensions: (..., n, m), with log marginals
    (..., n) and (..., m). Returns (plan, f, g, iterations, converged) where
    convergence means every batch member's L1 row-marginal violation is
    below tol (column marginals are exact by construction after the g
    update). Internally iterates the epsilon-scaled potentials so the cost
    tensor is divided once.
    """
    c = cost / epsilon
    phi = np.zeros_like(log_a) if f0 is None else f0 / epsilon
    psi = np.zeros_like(log_b) if g0 is None else g0 / epsilon
    a = np.exp(log_a)
    plan = np.exp(phi[..., :, None] + psi[..., None, :] - c)
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        phi = log_a - _lse(psi[..., None, :] - c, -1)
        psi = log_b - _lse(phi[..., :, None] - c, -2)
        plan = np.exp(phi[..., :, None] + psi[..., None, :] - c)
        err = np.abs(plan.sum(axis=-1) - a).sum(axis=-1).max()
        if err < tol:
            converged = True
            break
    return plan, epsilon * phi, epsilon * psi, it, converged


def _log_sinkhorn_scaled(log_a, log_b, cost, epsilon, max_iter, tol):
    """Log-domain solve with geometric epsilon annealing.

    Small regularization makes plain Sinkhorn crawl; warm-starting the dual
    potentials through a halving epsilon schedule reaches the same fixed
    point (it is unique up to a constant shift) in far fewer total
    iterations. max_iter is the total budget across stages; convergence is
    judged at the target epsilon only.
    """
    top = float(np.max(cost)) / 2.0
    stages = []
    e = top
    while e > 1.5 * epsilon:
        stages.append(e)
        e /= 2.0
    stages.append(epsilon)
    f = g = None
    plan = None
    total = 0
    converged = False
    for idx, e in enumerate(stages):
        final = idx == len(stages) - 1
        budget = max_iter - total
        if budget <= 0:
            break
        stage_tol = tol if final else max(tol, 1e-3)
        stage_budget = budget if final else min(budget, 300)
        plan, f, g, it, conv = log_domain_sinkhorn(
            log_a, log_b, cost, e, stage_budget, stage_tol, f0=f, g0=g
        )
        total += it
        if final:
            converged = conv
    return plan, f, g, total, converged


def _kernel_sinkhorn(a, b, cost, epsilon, max_iter, tol):
    """Plain scaling iterations; fast but overflow-prone at small epsilon."""
    kern = np.exp(-cost / epsilon)
    u = np.ones_like(a)
    v = np.ones_like(b)
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        kv = kern @ v
        if np.any(kv == 0.0) or not np.all(np.isfinite(kv)):
            raise NumericalOverflow(
                "kernel-domain Sinkhorn over/underflowed; enable log_domain"
            )
        u = a / kv
        ktu = kern.T @ u
        if np.any(ktu == 0.0) or not np.all(np.isfinite(ktu)):
            raise NumericalOverflow(
                "kernel-domain Sinkhorn over/underflowed; enable log_domain"
            )
        v = b / ktu
        plan = u[:, None] * kern * v[None, :]
        if not np.all(np.isfinite(plan)):
            raise NumericalOverflow("transport plan overflowed; enable log_domain")
        err = np.abs(plan.sum(axis=1) - a).sum()
        if err < tol:
            converged = True
            break
    return plan, it, converged


def sinkhorn(
    src: EmpiricalDistribution,
    dst: EmpiricalDistribution,
    cost: np.ndarray | None = None,
    cfg: SinkhornConfig = SinkhornConfig(),
    params: CostParams = CostParams(),
) -> TransportPlan:
    """Solve entropy-regularized transport between two clouds.

    If cost is None it is built from the clouds with params. Alternating
    dual updates run until the L1 marginal violation drops below cfg.tol or
    cfg.max_iter is reached.
    """
    if cost is None:
        cost = cost_matrix(src, dst, params)
    cost = np.asarray(cost, dtype=np.float64)
    if cost.shape != (len(src), len(dst)):
        raise ShapeMismatch(f"cost shape {cost.shape} vs clouds {(len(src), len(dst))}")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix must be finite")
    a = src.weights
    b = dst.weights
    if cfg.log_domain:
        with np.errstate(divide="ignore"):  # zero weights map to -inf cleanly
            log_a = np.log(a)
            log_b = np.log(b)
        plan, _, _, it, converged = _log_sinkhorn_scaled(
            log_a, log_b, cost, cfg.epsilon, cfg.max_iter, cfg.tol
        )
    else:
        plan, it, converged = _kernel_sinkhorn(a, b, cost, cfg.epsilon, cfg.max_iter, cfg.tol)
    return TransportPlan(
        matrix=plan,
        converged=converged,
        iterations=it,
        transport_cost=float((plan * cost).sum()),
        entropy=_plan_entropy(plan),
        epsilon=cfg.epsilon,
    )


_MAX_EXACT = 9


def exact_ot(
    src: EmpiricalDistribution, dst: EmpiricalDistribution, cost: np.ndarray | None = None,
    params: CostParams = CostParams(),
) -> tuple[float, np.ndarray]:
    """Exhaustive optimal transport for small uniform equal-size clouds.

    With uniform weights and n = m the optimum is a permutation, so the
    minimum of (1/n) * sum_i C[i, sigma(i)] over all n! permutations is the
    exact transport cost. Intended for validation only.
    """
    n, m = len(src), len(dst)
    if n != m:
        raise ValueError("exact oracle requires equal-size clouds")
    if n > _MAX_EXACT:
        raise TooLarge(f"brute force capped at n = {_MAX_EXACT}, got {n}")
    if not (np.allclose(src.weights, 1.0 / n) and np.allclose(dst.weights, 1.0 / n)):
        raise ValueError("exact oracle requires uniform weights")
    if cost is None:
        cost = cost_matrix(src, dst, params)
    cost = np.asarray(cost, dtype=np.float64)
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.intp)
    costs = cost[np.arange(n)[None, :], perms].sum(axis=1) / n
    best = int(np.argmin(costs))
    return float(costs[best]), perms[best].copy()


def plan_weighted_cost_gradient(plan: TransportPlan, grad_cost_wrt_param) -> np.ndarray:
    """Contract per-parameter cost gradients against a fixed transport plan.

    grad_cost_wrt_param is a sequence (or stacked array) of matrices shaped
    like the plan, one per parameter; entry l of the result is
    sum_ij plan_ij * dC_ij/dtheta_l. The plan is held constant (envelope
    differentiation of the entropic objective).
    """
    grads = np.asarray(grad_cost_wrt_param, dtype=np.float64)
    if grads.ndim == 2:
        grads = grads[None, :, :]
    if grads.ndim != 3 or grads.shape[1:] != plan.matrix.shape:
        raise ShapeMismatch(
            f"gradient matrices shaped {grads.shape} vs plan {plan.matrix.shape}"
        )
    return np.tensordot(grads, plan.matrix, axes=([1, 2], [0, 1]))
