"""Core signal types and DSP primitives.

Everything here is a pure function over immutable inputs: resampling,
standardization, Butterworth filtering, convolution, segmentation, and
SNR-controlled additive mixing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import signal as sps

from .errors import (
    InvalidCutoff,
    SampleRateMismatch,
    SilentNoise,
    ZeroVariance,
)

__all__ = [
    "Signal",
    "FirFilter",
    "ButterworthSpec",
    "z_score",
    "butterworth_filter",
    "convolve",
    "segment",
    "mix_at_snr",
    "resample",
]


@dataclass(frozen=True)
class Signal:
    """A uniformly sampled real-valued waveform.

    Samples are stored as a float64 array and treated as immutable.
    """

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("samples must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples must be finite")
        if not (self.sample_rate_hz > 0):
            raise ValueError("sample_rate_hz must be positive")
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    def with_samples(self, samples: np.ndarray) -> "Signal":
        return Signal(samples, self.sample_rate_hz)


@dataclass(frozen=True)
class FirFilter:
    """A causal FIR coupling filter: real taps at a given sample rate."""

    coefficients: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        arr = np.asarray(self.coefficients, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("coefficients must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(arr)):
            raise ValueError("coefficients must be finite")
        if not (self.sample_rate_hz > 0):
            raise ValueError("sample_rate_hz must be positive")
        object.__setattr__(self, "coefficients", arr)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    def __len__(self) -> int:
        return self.coefficients.size


@dataclass(frozen=True)
class ButterworthSpec:
    """Butterworth filter specification.

    kind is one of "low_pass", "high_pass", "band_pass". band_pass takes two
    cutoffs (low < high); the others take one.
    """

    kind: str
    cutoffs_hz: tuple
    order: int = 4

    _KINDS = ("low_pass", "high_pass", "band_pass")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"kind must be one of {self._KINDS}, got {self.kind!r}")
        cuts = tuple(float(c) for c in (
            self.cutoffs_hz if isinstance(self.cutoffs_hz, (tuple, list, np.ndarray))
            else (self.cutoffs_hz,)
        ))
        if any(c <= 0 for c in cuts):
            raise ValueError("cutoffs must be positive")
        if self.kind == "band_pass":
            if len(cuts) != 2 or not cuts[0] < cuts[1]:
                raise ValueError("band_pass needs two cutoffs with low < high")
        elif len(cuts) != 1:
            raise ValueError(f"{self.kind} needs exactly one cutoff")
        if self.order < 1:
            raise ValueError("order must be a positive integer")
        object.__setattr__(self, "cutoffs_hz", cuts)

    @property
    def btype(self) -> str:
        return {"low_pass": "lowpass", "high_pass": "highpass", "band_pass": "bandpass"}[self.kind]


def z_score(signal: Signal) -> Signal:
    """Standardize to zero mean and unit population standard deviation."""
    x = signal.samples
    if x.size < 2 or np.ptp(x) == 0.0:
        raise ZeroVariance("cannot z-score a constant signal")
    mu = x.mean()
    sigma = x.std()  # population (ddof=0)
    return signal.with_samples((x - mu) / sigma)


def _sos(spec: ButterworthSpec, fs: float) -> np.ndarray:
    nyq = fs / 2.0
    if any(c >= nyq for c in spec.cutoffs_hz):
        raise InvalidCutoff(
            f"cutoffs {spec.cutoffs_hz} must lie strictly below Nyquist {nyq} Hz"
        )
    wn = spec.cutoffs_hz if spec.kind == "band_pass" else spec.cutoffs_hz[0]
    return sps.butter(spec.order, wn, btype=spec.btype, fs=fs, output="sos")


def butterworth_filter(signal: Signal, spec: ButterworthSpec, zero_phase: bool = True) -> Signal:
    """Apply a Butterworth filter realized as second-order sections.

    zero_phase=True runs the filter forward and backward (no phase
    distortion, magnitude response squared); zero_phase=False is a single
    causal pass with the textbook -3 dB point at the cutoff.
    """
    sos = _sos(spec, signal.sample_rate_hz)
    if zero_phase:
        y = sps.sosfiltfilt(sos, signal.samples)
    else:
        y = sps.sosfilt(sos, signal.samples)
    return signal.with_samples(np.asarray(y, dtype=np.float64))


def convolve(signal: Signal, fir: FirFilter, mode: str = "same", method: str = "auto") -> Signal:
    """Discrete linear convolution of a signal with a causal FIR filter.

    mode "full" returns all len(x)+len(h)-1 samples; mode "same" returns the
    first len(x) samples, i.e. y[n] = sum_k h[k] * x[n-k] with zero-padded
    history (the filter acts causally, output aligned to the input).

    method selects the implementation ("direct", "fft", or "auto"); both
    produce the same result to within roundoff.
    """
    if signal.sample_rate_hz != fir.sample_rate_hz:
        raise SampleRateMismatch(
            f"signal at {signal.sample_rate_hz} Hz vs filter at {fir.sample_rate_hz} Hz"
        )
    if mode not in ("same", "full"):
        raise ValueError("mode must be 'same' or 'full'")
    x = signal.samples
    h = fir.coefficients
    if method == "auto":
        method = "fft" if x.size * h.size > 1 << 18 else "direct"
    if method == "direct":
        full = np.convolve(x, h, mode="full")
    elif method == "fft":
        full = sps.fftconvolve(x, h, mode="full")
    else:
        raise ValueError("method must be 'direct', 'fft', or 'auto'")
    y = full if mode == "full" else full[: x.size]
    return Signal(y, signal.sample_rate_hz)


def segment(signal: Signal, window_s: float, stride_s: float) -> list[Signal]:
    """Split a signal into fixed-length windows.

    Signals shorter than the window are cyclically padded to exactly one
    window; longer signals yield floor((len-window)/stride)+1 overlapping
    windows.
    """
    if window_s <= 0 or stride_s <= 0:
        raise ValueError("window_s and stride_s must be positive")
    fs = signal.sample_rate_hz
    w = max(1, int(round(window_s * fs)))
    s = max(1, int(round(stride_s * fs)))
    x = signal.samples
    if x.size < w:
        return [Signal(np.resize(x, w), fs)]  # np.resize tiles cyclically
    n_windows = (x.size - w) // s + 1
    return [Signal(x[i * s : i * s + w], fs) for i in range(n_windows)]


def mix_at_snr(clean: Signal, noise: Signal, snr_db: float, seed: int = 0) -> Signal:
    """Add noise scaled so the realized SNR equals snr_db.

    The gain is g = sqrt(P_clean / (P_noise * 10^(snr_db/10))) with P the
    mean squared amplitude of the segment actually mixed in. A noise clip
    shorter than the clean signal is tiled circularly from a seed-chosen
    offset so sweeps are reproducible.
    """
    if clean.sample_rate_hz != noise.sample_rate_hz:
        raise SampleRateMismatch(
            f"clean at {clean.sample_rate_hz} Hz vs noise at {noise.sample_rate_hz} Hz"
        )
    n = clean.samples.size
    v = noise.samples
    if v.size < n:
        offset = int(np.random.default_rng(seed).integers(0, v.size))
        v = np.resize(np.roll(v, -offset), n)
    else:
        v = v[:n]
    p_noise = float(np.mean(v**2))
    if p_noise == 0.0:
        raise SilentNoise("noise clip has zero power")
    p_clean = float(np.mean(clean.samples**2))
    gain = np.sqrt(p_clean / (p_noise * 10.0 ** (snr_db / 10.0)))
    return clean.with_samples(clean.samples + gain * v)


def resample(signal: Signal, target_rate_hz: float) -> Signal:
    """Resample to a new rate via polyphase windowed-sinc interpolation."""
    if target_rate_hz <= 0:
        raise ValueError("target_rate_hz must be positive")
    if target_rate_hz == signal.sample_rate_hz:
        return signal
    ratio = Fraction(target_rate_hz / signal.sample_rate_hz).limit_denominator(1000)
    y = sps.resample_poly(signal.samples, ratio.numerator, ratio.denominator, window=("kaiser", 5.0))
    return Signal(y, target_rate_hz)
