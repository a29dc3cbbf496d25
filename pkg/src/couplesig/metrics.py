"""Evaluation metrics: filter-space error, spectral coherence, consistency."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .errors import LengthMismatch, SampleRateMismatch, TooShort, ZeroVariance
from .signals import FirFilter, Signal

__all__ = [
    "CoherenceReport",
    "ConsistencyReport",
    "filter_mse",
    "filter_pcc",
    "coherence",
    "consistency_eval",
]

# coherence band edges in Hz: low < 10, mid 10..100, high > 100
MID_BAND_HZ = (10.0, 100.0)


@dataclass(frozen=True)
class CoherenceReport:
    frequencies_hz: np.ndarray
    msc: np.ndarray
    band_means: dict

    @property
    def mid_band(self) -> float:
        return self.band_means["mid"]


@dataclass(frozen=True)
class ConsistencyReport:
    ref_mse: float
    ref_pcc: float
    mutual_mse: float
    mutual_pcc: float


def _check_taps(a: FirFilter, b: FirFilter):
    if len(a) != len(b):
        raise LengthMismatch(f"filters have {len(a)} vs {len(b)} taps")


def filter_mse(a: FirFilter, b: FirFilter) -> float:
    """Mean over taps of the squared difference."""
    _check_taps(a, b)
    d = a.coefficients - b.coefficients
    return float(np.mean(d * d))


def filter_pcc(a: FirFilter, b: FirFilter) -> float:
    """Pearson correlation of two tap sequences (population variances)."""
    _check_taps(a, b)
    x = a.coefficients
    y = b.coefficients
    sx = x.std()
    sy = y.std()
    if sx == 0.0 or sy == 0.0:
        raise ZeroVariance("constant tap sequence has no correlation")
    r = float(np.mean((x - x.mean()) * (y - y.mean())) / (sx * sy))
    return float(np.clip(r, -1.0, 1.0))


def coherence(x: Signal, y: Signal, n_segments: int = 8) -> CoherenceReport:
    """Magnitude-squared coherence via Welch cross/auto spectra.

    Hann windows with 50% overlap; the segment length is chosen so
    n_segments half-overlapping windows tile the signal. Band means cover
    low (< 10 Hz), mid (10-100 Hz), and high (> 100 Hz).
    """
    if x.sample_rate_hz != y.sample_rate_hz:
        raise SampleRateMismatch("coherence needs equal sample rates")
    if len(x) != len(y):
        raise LengthMismatch("coherence needs equal lengths")
    n = len(x)
    nperseg = max(8, (2 * n) // (n_segments + 1))
    if 4 * nperseg > n:
        raise TooShort(
            f"need length >= 4 * segment size ({4 * nperseg}), got {n}; "
            "use more segments or a longer signal"
        )
    f, msc = sps.coherence(
        x.samples,
        y.samples,
        fs=x.sample_rate_hz,
        window="hann",
        nperseg=nperseg,
        noverlap=nperseg // 2,
    )
    lo, hi = MID_BAND_HZ
    bands = {
        "low": f < lo,
        "mid": (f >= lo) & (f <= hi),
        "high": f > hi,
    }
    band_means = {
        name: float(np.mean(msc[mask])) if np.any(mask) else float("nan")
        for name, mask in bands.items()
    }
    return CoherenceReport(frequencies_hz=f, msc=msc, band_means=band_means)


def consistency_eval(h_ref: FirFilter, h_a: FirFilter, h_b: FirFilter) -> ConsistencyReport:
    """Reference and mutual agreement of two estimates against a baseline.

    Reference metrics average each estimate's distance to h_ref; mutual
    metrics compare the two estimates directly.
    """
    _check_taps(h_ref, h_a)
    _check_taps(h_ref, h_b)
    return ConsistencyReport(
        ref_mse=0.5 * (filter_mse(h_a, h_ref) + filter_mse(h_b, h_ref)),
        ref_pcc=0.5 * (filter_pcc(h_a, h_ref) + filter_pcc(h_b, h_ref)),
        mutual_mse=filter_mse(h_a, h_b),
        mutual_pcc=filter_pcc(h_a, h_b),
    )
