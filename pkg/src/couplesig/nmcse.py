"""Coupling-filter estimation by entropic optimal-transport matching.

The estimator fits a causal FIR filter h so that the distribution of the
filtered excitation matches the distribution of the observed response.
Each signal is cut into overlapping windows; a window becomes a uniform
point cloud over (normalized time, amplitude); the loss is the mean
entropy-regularized transport cost between matched window clouds; the
gradient flows through the amplitude term of the ground cost with the
transport plan held fixed. Training runs mini-batch Adam over ECG-PCG
pairs; inference refines the trained filter on a single pair from a warm
start.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import Divergence, LengthMismatch, SampleRateMismatch
from .ot import CostParams, SinkhornConfig, _log_sinkhorn_scaled, log_domain_sinkhorn
from .signals import FirFilter, Signal

__all__ = [
    "NmcseConfig",
    "TrainedCoupler",
    "nmcse_loss",
    "nmcse_gradient",
    "train",
    "refine",
]

INIT_SCHEMES = ("zeros_with_unit_tap", "small_random")


@dataclass(frozen=True)
class NmcseConfig:
    """All knobs of the transport-matching estimator.

    ot_window / ot_points / ot_overlap control how signals are cut into
    point clouds: windows of ot_window samples, strided by
    ot_window * (1 - ot_overlap), each subsampled to ot_points points.
    """

    cost: CostParams = field(default_factory=CostParams)
    sinkhorn: SinkhornConfig = field(default_factory=SinkhornConfig)
    n_taps: int = 64
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 200
    refine_steps: int = 50
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    init: str = "zeros_with_unit_tap"
    seed: int = 0
    early_stop_patience: int = 20
    ot_window: int = 256
    ot_points: int = 256
    ot_overlap: float = 0.5
    sinkhorn_warm_iters: int = 30

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.n_taps < 1:
            raise ValueError("n_taps must be >= 1")
        if self.init not in INIT_SCHEMES:
            raise ValueError(f"init must be one of {INIT_SCHEMES}")
        if not (0.0 <= self.ot_overlap < 1.0):
            raise ValueError("ot_overlap must be in [0, 1)")
        if self.ot_window < 2 or self.ot_points < 1:
            raise ValueError("ot_window >= 2 and ot_points >= 1 required")
        if self.sinkhorn_warm_iters < 1:
            raise ValueError("sinkhorn_warm_iters must be >= 1")


@dataclass(frozen=True)
class TrainedCoupler:
    """Outcome of the training phase: best filter plus the loss trace."""

    filter: FirFilter
    loss_history: np.ndarray
    epochs_run: int
    config: NmcseConfig
    best_loss: float


class _PairProblem:
    """Precomputed window geometry for one ECG-PCG pair.

    Holds the per-point lag matrix (so filtered amplitudes are a single
    matrix product of the taps), the target cloud amplitudes, the fixed
    temporal half of the ground cost, and warm-start dual potentials that
    persist across gradient steps.
    """

    def __init__(self, ecg: Signal, pcg: Signal, cfg: NmcseConfig):
        if ecg.sample_rate_hz != pcg.sample_rate_hz:
            raise SampleRateMismatch("pair must share a sample rate")
        if len(ecg) != len(pcg):
            raise LengthMismatch("pair must share a length")
        self.cfg = cfg
        x = ecg.samples
        n = x.size
        w = min(cfg.ot_window, n)
        stride = max(1, int(round(w * (1.0 - cfg.ot_overlap))))
        starts = np.arange(0, n - w + 1, stride) if n >= w else np.array([0])
        n_pts = min(cfg.ot_points, w)
        sub = w // n_pts
        rel = np.arange(n_pts) * sub
        self.idx = starts[:, None] + rel[None, :]  # (W, n_pts)
        t = np.linspace(0.0, 1.0, n_pts) if n_pts > 1 else np.zeros(1)
        dt = np.abs(t[:, None] - t[None, :])
        q = cfg.cost.q
        self.t_cost = cfg.cost.beta * (dt * dt if q == 2.0 else dt**q)
        self.targets = pcg.samples[self.idx]  # (W, n_pts)
        lag = self.idx[:, :, None] - np.arange(cfg.n_taps)[None, None, :]
        self.lags = np.where(lag >= 0, x[np.clip(lag, 0, None)], 0.0)  # (W, n_pts, L)
        n_win = self.idx.shape[0]
        self.log_marg = np.full((n_win, n_pts), -np.log(n_pts))
        self._f = np.zeros((n_win, n_pts))
        self._g = np.zeros((n_win, n_pts))
        self._warm = False

    @property
    def n_windows(self) -> int:
        return self.idx.shape[0]

    def loss_and_grad(self, taps: np.ndarray, warm_start: bool = True):
        """Mean entropic transport cost over windows and its tap gradient."""
        cfg = self.cfg
        alpha, p = cfg.cost.alpha, cfg.cost.p
        eps = cfg.sinkhorn.epsilon
        yhat = self.lags @ taps  # (W, n_pts)
        d = yhat[:, :, None] - self.targets[:, None, :]  # (W, n, m)
        ad = np.abs(d)
        cost = alpha * (d * d if p == 2.0 else ad**p) + self.t_cost[None, :, :]
        if warm_start and self._warm:
            # potentials from the previous step are near the fixed point; a
            # short refresh keeps the plan accurate at training speed
            plan, f, g, _, _ = log_domain_sinkhorn(
                self.log_marg, self.log_marg, cost,
                eps, cfg.sinkhorn_warm_iters, cfg.sinkhorn.tol,
                f0=self._f, g0=self._g,
            )
        else:
            plan, f, g, _, _ = _log_sinkhorn_scaled(
                self.log_marg, self.log_marg, cost,
                eps, cfg.sinkhorn.max_iter, cfg.sinkhorn.tol,
            )
        if warm_start:
            self._f, self._g = f, g
            self._warm = True
        log_plan = (f[:, :, None] + g[:, None, :] - cost) / eps
        per_window = (plan * cost).sum(axis=(1, 2)) + eps * (plan * log_plan).sum(axis=(1, 2))
        loss = float(per_window.mean())
        if p == 2.0:
            weighted = 2.0 * alpha * d
        else:
            weighted = alpha * p * np.sign(d) * ad ** (p - 1.0)
        point_grad = (plan * weighted).sum(axis=2)  # (W, n_pts)
        grad = np.einsum("wil,wi->l", self.lags, point_grad) / self.n_windows
        return loss, grad


def nmcse_loss(h: FirFilter, ecg: Signal, pcg: Signal, cfg: NmcseConfig = NmcseConfig()) -> float:
    """Mean per-window entropic transport cost of conv(ecg, h) against pcg."""
    problem = _PairProblem(ecg, pcg, _with_taps(cfg, h))
    loss, _ = problem.loss_and_grad(h.coefficients, warm_start=False)
    return loss


def nmcse_gradient(
    h: FirFilter, ecg: Signal, pcg: Signal, cfg: NmcseConfig = NmcseConfig()
) -> np.ndarray:
    """Tap gradient of nmcse_loss with the transport plans held fixed.

    Only the amplitude half of the ground cost depends on the taps; the
    temporal half contributes nothing.
    """
    problem = _PairProblem(ecg, pcg, _with_taps(cfg, h))
    _, grad = problem.loss_and_grad(h.coefficients, warm_start=False)
    return grad


def _with_taps(cfg: NmcseConfig, h: FirFilter) -> NmcseConfig:
    return cfg if cfg.n_taps == len(h) else replace(cfg, n_taps=len(h))


class _Adam:
    def __init__(self, cfg: NmcseConfig, dim: int):
        self.lr = cfg.learning_rate
        self.b1 = cfg.adam_beta1
        self.b2 = cfg.adam_beta2
        self.eps = cfg.adam_eps
        self.m = np.zeros(dim)
        self.v = np.zeros(dim)
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.b1 * self.m + (1.0 - self.b1) * grad
        self.v = self.b2 * self.v + (1.0 - self.b2) * grad * grad
        m_hat = self.m / (1.0 - self.b1**self.t)
        v_hat = self.v / (1.0 - self.b2**self.t)
        return theta - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _init_taps(cfg: NmcseConfig) -> np.ndarray:
    taps = np.zeros(cfg.n_taps)
    if cfg.init == "zeros_with_unit_tap":
        taps[0] = 1.0
    else:
        taps = 0.01 * np.random.default_rng([cfg.seed, 11]).standard_normal(cfg.n_taps)
    return taps


def train(pairs, cfg: NmcseConfig = NmcseConfig()) -> TrainedCoupler:
    """Fit the coupling filter over a collection of ECG-PCG pairs.

    Mini-batch Adam with a seeded shuffle; the returned filter is the
    parameter snapshot with the lowest evaluated batch loss, so the
    reported best loss never exceeds the first. Raises Divergence if the
    loss goes non-finite.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("need at least one (ecg, pcg) pair")
    problems = [_PairProblem(e, p, cfg) for e, p in pairs]
    rate = pairs[0][0].sample_rate_hz
    taps = _init_taps(cfg)
    adam = _Adam(cfg, cfg.n_taps)
    rng = np.random.default_rng(cfg.seed)
    best_loss = np.inf
    best_taps = taps.copy()
    best_epoch_loss = np.inf
    patience_left = cfg.early_stop_patience
    history = []
    epochs_run = 0
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(len(problems))
        pair_losses = np.empty(len(problems))
        for b0 in range(0, len(order), cfg.batch_size):
            batch = order[b0 : b0 + cfg.batch_size]
            batch_loss = 0.0
            batch_grad = np.zeros(cfg.n_taps)
            for j in batch:
                loss_j, grad_j = problems[j].loss_and_grad(taps)
                pair_losses[j] = loss_j
                batch_loss += loss_j
                batch_grad += grad_j
            batch_loss /= batch.size
            batch_grad /= batch.size
            if not np.isfinite(batch_loss):
                raise Divergence(f"loss became non-finite at epoch {epoch}", epoch=epoch)
            if batch_loss < best_loss:
                best_loss = batch_loss
                best_taps = taps.copy()
            taps = adam.step(taps, batch_grad)
        epoch_loss = float(pair_losses.mean())
        history.append(epoch_loss)
        epochs_run = epoch + 1
        if epoch_loss < best_epoch_loss:
            best_epoch_loss = epoch_loss
            patience_left = cfg.early_stop_patience
        else:
            patience_left -= 1
            if patience_left <= 0:
                break
    return TrainedCoupler(
        filter=FirFilter(best_taps, rate),
        loss_history=np.asarray(history),
        epochs_run=epochs_run,
        config=cfg,
        best_loss=float(best_loss),
    )


def refine(
    coupler: TrainedCoupler, ecg: Signal, pcg: Signal, cfg: NmcseConfig | None = None
) -> FirFilter:
    """Per-pair refinement from the trained filter.

    Runs at most cfg.refine_steps Adam steps on this pair's loss, starting
    at the trained taps, and returns the best evaluated snapshot, so the
    result never scores worse on this pair than the warm start.
    """
    cfg = coupler.config if cfg is None else cfg
    if cfg.refine_steps <= 0:
        return coupler.filter
    cfg = _with_taps(cfg, coupler.filter)
    problem = _PairProblem(ecg, pcg, cfg)
    taps = coupler.filter.coefficients.copy()
    loss, grad = problem.loss_and_grad(taps)
    best_loss = loss
    best_taps = taps.copy()
    adam = _Adam(cfg, cfg.n_taps)
    for step in range(cfg.refine_steps):
        taps = adam.step(taps, grad)
        loss, grad = problem.loss_and_grad(taps)
        if not np.isfinite(loss):
            raise Divergence(f"refinement loss became non-finite at step {step}", epoch=step)
        if loss < best_loss:
            best_loss = loss
            best_taps = taps.copy()
    return FirFilter(best_taps, coupler.filter.sample_rate_hz)
