"""Classical coupling-filter estimators: spectral division and variants.

All four share the same surface: given the excitation (ECG) and response
(PCG) at equal length and rate, return a causal FIR estimate truncated to
n_taps. Spectra for the division formulas use a full-segment Hann-windowed
FFT; Welch periodograms back the Wiener noise/signal ratio.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import signal as sps

from .errors import (
    DegenerateExcitation,
    LengthMismatch,
    NonConvergenceWarning,
    SampleRateMismatch,
)
from .signals import FirFilter, Signal

__all__ = [
    "DeconvConfig",
    "deconv_naive",
    "deconv_tikhonov",
    "deconv_wiener",
    "deconv_sparse",
]

_SPECTRAL_FLOOR = 1e-12  # relative to the excitation's spectral peak


@dataclass(frozen=True)
class DeconvConfig:
    """Settings shared by the deconvolution estimators.

    lam is the Tikhonov ridge, gamma the L1 weight of the sparse solver,
    both interpreted relative to the mean excitation spectral power so the
    published defaults are scale-free. noise_psd feeds the Wiener method:
    a scalar density, an array on the rFFT grid, or a (freqs_hz, psd) pair
    to interpolate; None selects the built-in quiet-band estimate.
    """

    method: str = "naive"
    lam: float = 0.01
    gamma: float = 0.1
    noise_psd: Optional[object] = None
    n_taps: int = 64
    max_iter: int = 500
    tol: float = 1e-6

    def __post_init__(self):
        if self.method not in ("naive", "tikhonov", "wiener", "sparsity", "sparse"):
            raise ValueError(f"unknown deconvolution method {self.method!r}")
        if self.method == "tikhonov" and self.lam <= 0:
            raise ValueError("lam must be positive for tikhonov")
        if self.method in ("sparsity", "sparse") and self.gamma < 0:
            raise ValueError("gamma must be nonnegative for the sparse solver")
        if self.n_taps < 1:
            raise ValueError("n_taps must be >= 1")


def _check_pair(ecg: Signal, pcg: Signal):
    if ecg.sample_rate_hz != pcg.sample_rate_hz:
        raise SampleRateMismatch(
            f"ecg at {ecg.sample_rate_hz} Hz vs pcg at {pcg.sample_rate_hz} Hz"
        )
    if len(ecg) != len(pcg):
        raise LengthMismatch(f"ecg length {len(ecg)} vs pcg length {len(pcg)}")


def _windowed_spectra(ecg: Signal, pcg: Signal):
    n = len(ecg)
    w = sps.windows.hann(n, sym=False)
    return np.fft.rfft(w * ecg.samples), np.fft.rfft(w * pcg.samples)


def _truncate(h_freq: np.ndarray, n: int, n_taps: int, fs: float) -> FirFilter:
    taps = np.fft.irfft(h_freq, n=n)[:n_taps]
    return FirFilter(taps, fs)


def deconv_naive(ecg: Signal, pcg: Signal, cfg: DeconvConfig = DeconvConfig()) -> FirFilter:
    """Direct spectral division H = X_pcg / X_ecg.

    Bins where the excitation magnitude falls under a tiny relative floor
    divide by the floor instead, keeping the output finite while preserving
    the method's characteristic instability at weak-excitation frequencies.
    """
    _check_pair(ecg, pcg)
    xe, xp = _windowed_spectra(ecg, pcg)
    mag = np.abs(xe)
    peak = mag.max()
    if peak == 0.0:
        raise DegenerateExcitation("excitation spectrum is identically zero")
    floor = _SPECTRAL_FLOOR * peak
    weak = mag < floor
    # keep the phase where defined; pure-zero bins divide by a real floor
    phase = np.where(mag > 0, xe / np.where(mag > 0, mag, 1.0), 1.0)
    denom = np.where(weak, floor * phase, xe)
    h_freq = xp / denom
    return _truncate(h_freq, len(ecg), cfg.n_taps, ecg.sample_rate_hz)


def deconv_tikhonov(ecg: Signal, pcg: Signal, cfg: DeconvConfig = DeconvConfig(method="tikhonov")) -> FirFilter:
    """Ridge-regularized division H = conj(Xe)*Xp / (|Xe|^2 + lam)."""
    _check_pair(ecg, pcg)
    xe, xp = _windowed_spectra(ecg, pcg)
    power = np.abs(xe) ** 2
    scale = power.mean()
    if scale == 0.0:
        raise DegenerateExcitation("excitation spectrum is identically zero")
    denom = power + cfg.lam * scale
    h_freq = np.conj(xe) * xp / denom
    return _truncate(h_freq, len(ecg), cfg.n_taps, ecg.sample_rate_hz)


def _welch_psd(x: np.ndarray, fs: float, n_segments: int = 8):
    nperseg = max(16, (2 * x.size) // (n_segments + 1))
    return sps.welch(x, fs=fs, window="hann", nperseg=nperseg, noverlap=nperseg // 2)


def _noise_to_signal_ratio(pcg: Signal, cfg: DeconvConfig, freqs: np.ndarray) -> np.ndarray:
    """Per-bin N(w)/S(w) on the rFFT grid.

    S is the Welch PSD of the response minus the noise estimate, floored at
    10% of the response PSD. The built-in noise estimate is the median
    periodogram level above 500 Hz (or the top of the band when Nyquist is
    lower), a band where heart sounds carry little energy.
    """
    fs = pcg.sample_rate_hz
    f_w, p_w = _welch_psd(pcg.samples, fs)
    noise = cfg.noise_psd
    if noise is None:
        quiet = f_w >= min(500.0, 0.8 * fs / 2.0)
        level = float(np.median(p_w[quiet])) if np.any(quiet) else float(np.median(p_w))
        n_of_f = np.full_like(freqs, level)
    elif np.isscalar(noise):
        n_of_f = np.full_like(freqs, float(noise))
    elif isinstance(noise, tuple) and len(noise) == 2:
        n_of_f = np.interp(freqs, np.asarray(noise[0], float), np.asarray(noise[1], float))
    else:
        arr = np.asarray(noise, dtype=np.float64)
        if arr.shape != freqs.shape:
            raise LengthMismatch(
                f"noise_psd length {arr.shape} vs rFFT grid {freqs.shape}"
            )
        n_of_f = arr
    s_w = np.interp(freqs, f_w, p_w)
    n_of_f = np.clip(n_of_f, 0.0, None)
    sig = np.maximum(s_w - n_of_f, 0.1 * s_w)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(sig > 0, n_of_f / np.where(sig > 0, sig, 1.0), 0.0)
    return ratio


def deconv_wiener(ecg: Signal, pcg: Signal, cfg: DeconvConfig = DeconvConfig(method="wiener")) -> FirFilter:
    """Wiener-weighted division H = conj(Xe)*Xp / (|Xe|^2 + N/S)."""
    _check_pair(ecg, pcg)
    xe, xp = _windowed_spectra(ecg, pcg)
    power = np.abs(xe) ** 2
    scale = power.mean()
    if scale == 0.0:
        raise DegenerateExcitation("excitation spectrum is identically zero")
    freqs = np.fft.rfftfreq(len(ecg), d=1.0 / ecg.sample_rate_hz)
    ratio = _noise_to_signal_ratio(pcg, cfg, freqs)
    denom = power + ratio * scale
    denom = np.maximum(denom, (_SPECTRAL_FLOOR * np.sqrt(scale)) ** 2)
    h_freq = np.conj(xe) * xp / denom
    return _truncate(h_freq, len(ecg), cfg.n_taps, ecg.sample_rate_hz)


def _conv_op(x: np.ndarray, n: int, n_taps: int):
    """Forward/adjoint of h -> causal same-length convolution with x."""

    def fwd(h: np.ndarray) -> np.ndarray:
        return sps.fftconvolve(x, h, mode="full")[:n]

    def adj(r: np.ndarray) -> np.ndarray:
        # (A^T r)[k] = sum_m x[m - k] r[m]; slice the full correlation
        c = sps.fftconvolve(r, x[::-1], mode="full")
        return c[x.size - 1 : x.size - 1 + n_taps]

    return fwd, adj


def _operator_norm_sq(fwd, adj, n_taps: int, iters: int = 100, tol: float = 1e-12) -> float:
    """Largest squared singular value of the convolution map by power iteration."""
    v = np.full(n_taps, 1.0 / np.sqrt(n_taps))
    lam = 0.0
    for _ in range(iters):
        w = adj(fwd(v))
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v_next = w / nw
        if abs(nw - lam) <= tol * max(nw, 1.0):
            v = v_next
            lam = nw
            break
        v = v_next
        lam = nw
    return float(lam)


def _soft(x: np.ndarray, thresh: float) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - thresh, 0.0)


def deconv_sparse(
    ecg: Signal,
    pcg: Signal,
    cfg: DeconvConfig = DeconvConfig(method="sparsity"),
    return_objectives: bool = False,
):
    """L1-penalized least squares by proximal gradient (ISTA).

    Minimizes ||conv(ecg, h) - pcg||^2 + gamma * ||h||_1 with a fixed step
    of one over the squared operator norm of the convolution map (estimated
    by power iteration), which keeps the objective monotone. gamma is scaled
    by the mean excitation spectral power, matching the other regularizers.
    Stops when the relative objective change drops below cfg.tol; if the
    iteration cap is hit while the objective is still moving faster than
    100*tol, a NonConvergenceWarning is emitted and the last iterate is
    returned anyway.
    """
    _check_pair(ecg, pcg)
    n = len(ecg)
    x = ecg.samples
    y = pcg.samples
    n_taps = cfg.n_taps
    fwd, adj = _conv_op(x, n, n_taps)
    op_sq = _operator_norm_sq(fwd, adj, n_taps)
    if op_sq == 0.0:
        raise DegenerateExcitation("excitation is identically zero")
    gamma = cfg.gamma * op_sq / n_taps  # scale-free L1 weight
    step = 1.0 / (1.01 * op_sq)

    h = np.zeros(n_taps)
    r = fwd(h) - y
    obj = float(r @ r + gamma * np.abs(h).sum())
    objectives = [obj]
    converged = False
    rel = np.inf
    for _ in range(cfg.max_iter):
        grad = adj(r)
        h = _soft(h - step * grad, 0.5 * gamma * step)
        r = fwd(h) - y
        new_obj = float(r @ r + gamma * np.abs(h).sum())
        objectives.append(new_obj)
        rel = abs(obj - new_obj) / max(obj, 1e-300)
        obj = new_obj
        if rel < cfg.tol:
            converged = True
            break
    if not converged and rel > 100.0 * cfg.tol:
        warnings.warn(
            f"sparse deconvolution stopped at max_iter={cfg.max_iter} "
            f"with relative change {rel:.3e}",
            NonConvergenceWarning,
        )
    fir = FirFilter(h, ecg.sample_rate_hz)
    if return_objectives:
        return fir, np.asarray(objectives)
    return fir
