"""On-disk formats: raw float32 signals with JSON sidecars, filter JSON.

A stored signal is a pair of files sharing a stem: <stem>.f32 holds raw
little-endian 32-bit float samples, <stem>.json holds
{sample_rate_hz, n_samples, label, channel}. Single-column CSV (one
amplitude per line) is accepted as an alternative input with the rate
supplied by the caller.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .signals import FirFilter, Signal

__all__ = [
    "write_signal",
    "read_signal",
    "read_signal_csv",
    "write_filter_json",
    "read_filter_json",
    "canonical_json",
    "config_fingerprint",
    "file_sha256",
]


def _stem(path) -> Path:
    p = Path(path)
    if p.suffix in (".f32", ".json"):
        p = p.with_suffix("")
    return p


def write_signal(path, signal: Signal, label: str = "", channel: str = "") -> tuple[Path, Path]:
    """Write <stem>.f32 plus its JSON sidecar; returns both paths."""
    stem = _stem(path)
    raw = stem.with_suffix(".f32")
    sidecar = stem.with_suffix(".json")
    raw.write_bytes(signal.samples.astype("<f4").tobytes())
    meta = {
        "sample_rate_hz": signal.sample_rate_hz,
        "n_samples": int(len(signal)),
        "label": label,
        "channel": channel,
    }
    sidecar.write_text(canonical_json(meta) + "\n")
    return raw, sidecar


def read_signal(path) -> Signal:
    """Read a raw/sidecar signal pair; path may name either file or the stem."""
    stem = _stem(path)
    raw = stem.with_suffix(".f32")
    sidecar = stem.with_suffix(".json")
    meta = json.loads(sidecar.read_text())
    samples = np.frombuffer(raw.read_bytes(), dtype="<f4").astype(np.float64)
    if samples.size != int(meta["n_samples"]):
        raise ValueError(
            f"{raw}: expected {meta['n_samples']} samples, found {samples.size}"
        )
    return Signal(samples, float(meta["sample_rate_hz"]))


def read_signal_csv(path, sample_rate_hz: float) -> Signal:
    """Read a single-column CSV of amplitudes at a caller-supplied rate."""
    samples = np.loadtxt(path, dtype=np.float64, ndmin=1)
    if samples.ndim != 1:
        raise ValueError(f"{path}: expected a single column of amplitudes")
    return Signal(samples, sample_rate_hz)


def write_filter_json(path, fir: FirFilter, meta: dict | None = None) -> Path:
    """Serialize a filter with provenance metadata."""
    p = Path(path)
    doc = {
        "taps": [float(c) for c in fir.coefficients],
        "sample_rate_hz": fir.sample_rate_hz,
    }
    if meta:
        doc["meta"] = meta
    p.write_text(canonical_json(doc) + "\n")
    return p


def read_filter_json(path) -> tuple[FirFilter, dict]:
    doc = json.loads(Path(path).read_text())
    fir = FirFilter(np.asarray(doc["taps"], dtype=np.float64), float(doc["sample_rate_hz"]))
    return fir, doc.get("meta", {})


def canonical_json(obj) -> str:
    """Stable JSON text: sorted keys, no whitespace drift."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_fingerprint(obj) -> str:
    """Short stable hash of a JSON-serializable configuration."""
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:16]


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]
