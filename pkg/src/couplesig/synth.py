"""Synthetic ECG-like excitations, ground-truth coupling filters, and paired
PCG instances with known answers.

Every generator is a pure function of its spec (including the seed), so a
spec pins the instance bit-for-bit. The point is verifiability: a pair built
here carries the exact filter that produced it, which is the reference every
estimator is scored against.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .signals import FirFilter, Signal, convolve, mix_at_snr, z_score

__all__ = [
    "SynthSpec",
    "SynthPair",
    "gen_ecg",
    "gen_true_filter",
    "gen_pair",
    "damped_sinusoid_taps",
    "white_noise",
    "hospital_noise",
]

FILTER_FAMILIES = ("damped_sinusoid", "two_burst", "random_smooth")
NOISE_KINDS = ("white", "hospital_like")


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic ECG/PCG instance."""

    duration_s: float = 10.0
    sample_rate_hz: float = 2000.0
    heart_rate_bpm: float = 60.0
    qrs_width_ms: float = 12.0
    filter_family: str = "damped_sinusoid"
    spectral_notch: Optional[tuple] = None  # (center_hz, width_hz, depth_db)
    seed: int = 0

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")
        if not (30.0 <= self.heart_rate_bpm <= 220.0):
            raise ValueError("heart_rate_bpm must be in [30, 220]")
        if self.qrs_width_ms <= 0:
            raise ValueError("qrs_width_ms must be positive")
        if self.filter_family not in FILTER_FAMILIES:
            raise ValueError(f"filter_family must be one of {FILTER_FAMILIES}")
        if self.spectral_notch is not None:
            notch = tuple(float(v) for v in self.spectral_notch)
            if len(notch) != 3:
                raise ValueError("spectral_notch is (center_hz, width_hz, depth_db)")
            if notch[0] >= self.sample_rate_hz / 2.0:
                raise ValueError("notch center must lie below Nyquist")
            if notch[1] <= 0 or notch[2] <= 0:
                raise ValueError("notch width and depth must be positive")
            object.__setattr__(self, "spectral_notch", notch)


@dataclass(frozen=True)
class SynthPair:
    """A generated instance: excitation, clean/noisy responses, true filter."""

    ecg: Signal
    pcg_clean: Signal
    pcg_noisy: Optional[Signal]
    h_true: FirFilter
    spec: SynthSpec


def _rng(spec: SynthSpec, stream: int) -> np.random.Generator:
    # distinct deterministic streams per generator role
    return np.random.default_rng([spec.seed, stream])


def _ricker(t: np.ndarray, sigma: float) -> np.ndarray:
    u = t / sigma
    return (1.0 - u * u) * np.exp(-0.5 * u * u)


def _apply_notch(x: np.ndarray, fs: float, center: float, width: float, depth_db: float) -> np.ndarray:
    """Flat-bottom spectral notch with raised-cosine edges, zero phase.

    depth_db is the power attenuation at the bottom; the suppressed band is
    center +- width/2, with cosine ramps of width/2 on each side.
    """
    spec = np.fft.rfft(x)
    f = np.fft.rfftfreq(x.size, d=1.0 / fs)
    gain_floor = 10.0 ** (-depth_db / 20.0)
    d = np.abs(f - center)
    half = width / 2.0
    gain = np.ones_like(f)
    bottom = d <= half
    ramp = (d > half) & (d <= width)
    gain[bottom] = gain_floor
    gain[ramp] = gain_floor + (1.0 - gain_floor) * 0.5 * (
        1.0 - np.cos(np.pi * (d[ramp] - half) / half)
    )
    return np.fft.irfft(spec * gain, n=x.size)


def gen_ecg(spec: SynthSpec) -> Signal:
    """Quasi-periodic train of sharp QRS-like pulses, standardized.

    Pulses are Gaussian-windowed (Ricker-shaped) spikes placed at the given
    heart rate with seeded +-5% beat-interval jitter and +-10% amplitude
    variation. If spec.spectral_notch is set, the band is suppressed before
    standardization.
    """
    rng = _rng(spec, 1)
    fs = spec.sample_rate_hz
    n = int(round(spec.duration_s * fs))
    sigma_s = spec.qrs_width_ms / 4.0 / 1000.0
    interval = 60.0 / spec.heart_rate_bpm
    x = np.zeros(n)
    t_end = n / fs
    center = min(0.5 * interval, 0.5 * t_end)  # short signals still get one beat
    while center < t_end:
        amp = 1.0 + rng.uniform(-0.1, 0.1)
        half_w = 5.0 * sigma_s
        i0 = max(0, int((center - half_w) * fs))
        i1 = min(n, int((center + half_w) * fs) + 1)
        if i1 > i0:
            tt = np.arange(i0, i1) / fs - center
            x[i0:i1] += amp * _ricker(tt, sigma_s)
        center += interval * (1.0 + rng.uniform(-0.05, 0.05))
    if spec.spectral_notch is not None:
        c, w, d = spec.spectral_notch
        x = _apply_notch(x, fs, c, w, d)
    return z_score(Signal(x, fs))


def damped_sinusoid_taps(
    n_taps: int, freq_hz: float, sample_rate_hz: float, decay_taps: float
) -> np.ndarray:
    """Unit-energy taps h[k] = exp(-k/decay_taps) * sin(2*pi*f*k/fs)."""
    k = np.arange(n_taps, dtype=np.float64)
    decay = np.ones(n_taps) if np.isinf(decay_taps) else np.exp(-k / decay_taps)
    taps = decay * np.sin(2.0 * np.pi * freq_hz * k / sample_rate_hz)
    energy = float(np.sum(taps**2))
    if energy == 0.0:
        raise ValueError("degenerate taps: zero energy")
    return taps / np.sqrt(energy)


def gen_true_filter(spec: SynthSpec, n_taps: int = 64) -> FirFilter:
    """Draw a unit-energy ground-truth coupling filter from the spec's family."""
    rng = _rng(spec, 2)
    fs = spec.sample_rate_hz
    k = np.arange(n_taps, dtype=np.float64)
    if spec.filter_family == "damped_sinusoid":
        f = rng.uniform(40.0, min(150.0, 0.35 * fs))
        tau = rng.uniform(8.0, 24.0)
        taps = np.exp(-k / tau) * np.sin(2.0 * np.pi * f * k / fs)
    elif spec.filter_family == "two_burst":
        # two decaying bursts at distinct delays, echoing an S1/S2 layout
        f1 = rng.uniform(40.0, min(120.0, 0.3 * fs))
        tau1 = rng.uniform(6.0, 14.0)
        d2 = int(rng.integers(max(8, n_taps // 3), max(9, (2 * n_taps) // 3)))
        f2 = rng.uniform(120.0, min(300.0, 0.4 * fs))
        tau2 = rng.uniform(4.0, 10.0)
        a2 = rng.uniform(0.4, 0.8)
        taps = np.exp(-k / tau1) * np.sin(2.0 * np.pi * f1 * k / fs)
        k2 = k[d2:] - d2
        taps[d2:] += a2 * np.exp(-k2 / tau2) * np.sin(2.0 * np.pi * f2 * k2 / fs)
    else:  # random_smooth
        raw = rng.standard_normal(n_taps + 12)
        kern_t = np.arange(-6, 7, dtype=np.float64)
        kern = np.exp(-0.5 * (kern_t / 2.5) ** 2)
        kern /= kern.sum()
        taps = np.convolve(raw, kern, mode="same")[6:-6]
    energy = float(np.sum(taps**2))
    if energy == 0.0:
        raise ValueError("degenerate filter draw: zero energy")
    return FirFilter(taps / np.sqrt(energy), fs)


def white_noise(n_samples: int, sample_rate_hz: float, rng: np.random.Generator) -> Signal:
    return Signal(rng.standard_normal(n_samples), sample_rate_hz)


def hospital_noise(n_samples: int, sample_rate_hz: float, rng: np.random.Generator) -> Signal:
    """Equipment-beep and ambient-floor noise model.

    A seeded mixture of gated narrowband tones (monitor beeps, drawn between
    400 Hz and 1200 Hz, capped below Nyquist) over a pink 1/f broadband
    floor.
    """
    fs = sample_rate_hz
    t = np.arange(n_samples) / fs
    # pink floor: shape white spectrum by 1/sqrt(f)
    w = rng.standard_normal(n_samples)
    spec = np.fft.rfft(w)
    f = np.fft.rfftfreq(n_samples, d=1.0 / fs)
    spec /= np.sqrt(np.maximum(f, 1.0))
    pink = np.fft.irfft(spec, n=n_samples)
    pink /= np.sqrt(np.mean(pink**2))

    hi = 0.95 * fs / 2.0
    lo = min(400.0, 0.5 * hi)
    tones = np.zeros(n_samples)
    for _ in range(int(rng.integers(2, 5))):
        fc = rng.uniform(lo, min(1200.0, hi))
        period = rng.uniform(0.6, 1.6)
        beep_len = rng.uniform(0.15, 0.5) * period
        phase_t = rng.uniform(0.0, period)
        phase0 = rng.uniform(0.0, 2.0 * np.pi)
        amp = rng.uniform(0.5, 1.0)
        env = ((t + phase_t) % period) < beep_len
        tones += amp * env * np.sin(2.0 * np.pi * fc * t + phase0)
    p_tones = float(np.mean(tones**2))
    if p_tones > 0:
        tones /= np.sqrt(p_tones)
    mix = (pink + tones) / np.sqrt(2.0)
    return Signal(mix, fs)


def gen_pair(
    spec: SynthSpec, snr_db: Optional[float] = None, noise_kind: str = "white"
) -> SynthPair:
    """Build an instance: ecg, pcg_clean = ecg (*) h_true, optional noisy pcg."""
    if noise_kind not in NOISE_KINDS:
        raise ValueError(f"noise_kind must be one of {NOISE_KINDS}")
    ecg = gen_ecg(spec)
    h_true = gen_true_filter(spec)
    pcg_clean = convolve(ecg, h_true, mode="same", method="fft")
    pcg_noisy = None
    if snr_db is not None:
        if noise_kind == "white":
            noise = white_noise(len(pcg_clean), spec.sample_rate_hz, _rng(spec, 3))
        else:
            noise = hospital_noise(len(pcg_clean), spec.sample_rate_hz, _rng(spec, 4))
        pcg_noisy = mix_at_snr(pcg_clean, noise, snr_db, seed=spec.seed + 5)
    return SynthPair(ecg=ecg, pcg_clean=pcg_clean, pcg_noisy=pcg_noisy, h_true=h_true, spec=spec)
