"""Seeded benchmark and consistency experiments over synthetic instances.

Every trial draws a fresh synthetic pair from a seed derived from the
experiment seed and the trial coordinates, runs each estimator on the same
pair, and scores the estimate against the generating filter. Rows are
buffered and emitted in a fixed (condition, trial, method) order so a given
configuration always produces byte-identical result files; wall-clock
timings go to a separate file because they can never be reproducible.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .deconv import (
    DeconvConfig,
    deconv_naive,
    deconv_sparse,
    deconv_tikhonov,
    deconv_wiener,
)
from .io import canonical_json, config_fingerprint
from .metrics import coherence, consistency_eval, filter_mse, filter_pcc
from .nmcse import NmcseConfig, refine, train
from .ot import CostParams, SinkhornConfig
from .signals import FirFilter, Signal, convolve, mix_at_snr, segment
from .synth import SynthSpec, gen_pair, hospital_noise, white_noise

__all__ = [
    "ExperimentConfig",
    "BenchmarkRow",
    "ConsistencyRow",
    "run_benchmark",
    "run_consistency",
    "estimate_with_method",
    "summarize",
    "benchmark_csv_text",
    "timing_csv_text",
    "consistency_csv_text",
]

ALL_METHODS = ("naive", "tikhonov", "wiener", "sparse", "nmcse")
CSV_SCHEMA_VERSION = "1"


@dataclass(frozen=True)
class ExperimentConfig:
    """One benchmark campaign: conditions, trial count, and estimator knobs."""

    methods: tuple = ALL_METHODS
    snr_db_levels: tuple = (30.0, 10.0, 5.0)
    noise_kinds: tuple = ("hospital_like",)
    n_trials: int = 20
    seed: int = 0
    synth: SynthSpec = field(default_factory=SynthSpec)
    nmcse: NmcseConfig = field(default_factory=NmcseConfig)
    deconv: DeconvConfig = field(default_factory=DeconvConfig)
    sweep: Optional[dict] = None  # {"param": "alpha"|"beta"|"epsilon", "values": [...]}

    def __post_init__(self):
        methods = tuple(self.methods)
        if not methods:
            raise ValueError("methods must be non-empty")
        for m in methods:
            if m not in ALL_METHODS:
                raise ValueError(f"unknown method {m!r}; choose from {ALL_METHODS}")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if self.sweep is not None:
            param = self.sweep.get("param")
            values = self.sweep.get("values")
            if param not in ("alpha", "beta", "epsilon") or not values:
                raise ValueError("sweep needs param in {alpha, beta, epsilon} and values")
        object.__setattr__(self, "methods", methods)
        object.__setattr__(self, "snr_db_levels", tuple(float(s) for s in self.snr_db_levels))
        object.__setattr__(self, "noise_kinds", tuple(self.noise_kinds))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["methods"] = list(self.methods)
        d["snr_db_levels"] = list(self.snr_db_levels)
        d["noise_kinds"] = list(self.noise_kinds)
        return d

    def fingerprint(self) -> str:
        return config_fingerprint(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "synth" in d and not isinstance(d["synth"], SynthSpec):
            s = dict(d["synth"])
            if s.get("spectral_notch") is not None:
                s["spectral_notch"] = tuple(s["spectral_notch"])
            d["synth"] = SynthSpec(**s)
        if "nmcse" in d and not isinstance(d["nmcse"], NmcseConfig):
            n = dict(d["nmcse"])
            if "cost" in n and not isinstance(n["cost"], CostParams):
                n["cost"] = CostParams(**n["cost"])
            if "sinkhorn" in n and not isinstance(n["sinkhorn"], SinkhornConfig):
                n["sinkhorn"] = SinkhornConfig(**n["sinkhorn"])
            d["nmcse"] = NmcseConfig(**n)
        if "deconv" in d and not isinstance(d["deconv"], DeconvConfig):
            dd = dict(d["deconv"])
            if dd.get("noise_psd") is not None and isinstance(dd["noise_psd"], list):
                dd["noise_psd"] = tuple(np.asarray(v, float) for v in dd["noise_psd"])
            d["deconv"] = DeconvConfig(**dd)
        for key in ("methods", "snr_db_levels", "noise_kinds"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass(frozen=True)
class BenchmarkRow:
    method: str
    snr_db: float
    noise_kind: str
    trial: int
    sweep_param: str
    sweep_value: str
    mse: float
    pcc: float
    mid_band_coherence: float
    wall_time_ms: float
    status: str = "ok"


@dataclass(frozen=True)
class ConsistencyRow:
    method: str
    snr_db: float
    noise_kind: str
    trial: int
    ref_mse: float
    ref_pcc: float
    mutual_mse: float
    mutual_pcc: float
    status: str = "ok"


def _trial_seed(base: int, *coords: int) -> int:
    return int(np.random.SeedSequence([base, *coords]).generate_state(1)[0])


def estimate_with_method(
    method: str,
    ecg: Signal,
    pcg: Signal,
    deconv_cfg: DeconvConfig = DeconvConfig(),
    nmcse_cfg: NmcseConfig = NmcseConfig(),
) -> FirFilter:
    """Run one named estimator on a pair."""
    if method == "naive":
        return deconv_naive(ecg, pcg, deconv_cfg)
    if method == "tikhonov":
        return deconv_tikhonov(ecg, pcg, deconv_cfg)
    if method == "wiener":
        return deconv_wiener(ecg, pcg, deconv_cfg)
    if method in ("sparse", "sparsity"):
        return deconv_sparse(ecg, pcg, deconv_cfg)
    if method == "nmcse":
        return train([(ecg, pcg)], nmcse_cfg).filter
    raise ValueError(f"unknown method {method!r}")


def _mid_band_coherence(ecg: Signal, h_true: FirFilter, h_est: FirFilter) -> float:
    ref = convolve(ecg, h_true, mode="same", method="fft")
    est = convolve(ecg, h_est, mode="same", method="fft")
    if float(np.max(np.abs(est.samples))) == 0.0:
        return 0.0
    return coherence(ref, est).band_means["mid"]


def _nmcse_variants(config: ExperimentConfig) -> list[tuple[str, str, NmcseConfig]]:
    """(sweep_param, sweep_value, cfg) variants of the transport estimator."""
    if config.sweep is None:
        return [("", "", config.nmcse)]
    param = config.sweep["param"]
    out = []
    for v in config.sweep["values"]:
        v = float(v)
        if param == "alpha":
            cfg = replace(config.nmcse, cost=replace(config.nmcse.cost, alpha=v))
        elif param == "beta":
            cfg = replace(config.nmcse, cost=replace(config.nmcse.cost, beta=v))
        else:
            cfg = replace(config.nmcse, sinkhorn=replace(config.nmcse.sinkhorn, epsilon=v))
        out.append((param, repr(v), cfg))
    return out


def _benchmark_trial(config: ExperimentConfig, kind_i: int, snr_i: int, trial: int) -> list[BenchmarkRow]:
    kind = config.noise_kinds[kind_i]
    snr = config.snr_db_levels[snr_i]
    seed = _trial_seed(config.seed, kind_i, snr_i, trial)
    spec = replace(config.synth, seed=seed)
    pair = gen_pair(spec, snr_db=snr, noise_kind=kind)
    pcg = pair.pcg_noisy if pair.pcg_noisy is not None else pair.pcg_clean
    rows = []
    for method in config.methods:
        variants = _nmcse_variants(config) if method == "nmcse" else [("", "", config.nmcse)]
        for sweep_param, sweep_value, nm_cfg in variants:
            nm_cfg = replace(nm_cfg, seed=seed)
            t0 = time.perf_counter()
            try:
                h_est = estimate_with_method(method, pair.ecg, pcg, config.deconv, nm_cfg)
                wall = (time.perf_counter() - t0) * 1000.0
                rows.append(
                    BenchmarkRow(
                        method=method,
                        snr_db=snr,
                        noise_kind=kind,
                        trial=trial,
                        sweep_param=sweep_param,
                        sweep_value=sweep_value,
                        mse=filter_mse(h_est, pair.h_true),
                        pcc=filter_pcc(h_est, pair.h_true),
                        mid_band_coherence=_mid_band_coherence(pair.ecg, pair.h_true, h_est),
                        wall_time_ms=wall,
                    )
                )
            except Exception as exc:  # flag the row, keep the run alive
                wall = (time.perf_counter() - t0) * 1000.0
                rows.append(
                    BenchmarkRow(
                        method=method,
                        snr_db=snr,
                        noise_kind=kind,
                        trial=trial,
                        sweep_param=sweep_param,
                        sweep_value=sweep_value,
                        mse=float("nan"),
                        pcc=float("nan"),
                        mid_band_coherence=float("nan"),
                        wall_time_ms=wall,
                        status=f"failed:{type(exc).__name__}",
                    )
                )
    return rows


def run_benchmark(config: ExperimentConfig, workers: int = 1) -> list[BenchmarkRow]:
    """All (noise kind x SNR x trial x method) rows, deterministically ordered."""
    coords = [
        (ki, si, t)
        for ki in range(len(config.noise_kinds))
        for si in range(len(config.snr_db_levels))
        for t in range(config.n_trials)
    ]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda c: _benchmark_trial(config, *c), coords))
    else:
        chunks = [_benchmark_trial(config, *c) for c in coords]
    method_order = {m: i for i, m in enumerate(config.methods)}
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(
        key=lambda r: (
            config.noise_kinds.index(r.noise_kind),
            config.snr_db_levels.index(r.snr_db),
            r.trial,
            method_order[r.method],
            r.sweep_value,
        )
    )
    return rows


def _consistency_trial(config: ExperimentConfig, trial: int) -> list[ConsistencyRow]:
    kind = config.noise_kinds[0]
    snr = config.snr_db_levels[0]
    seed = _trial_seed(config.seed, 7, trial)
    spec = replace(config.synth, seed=seed)
    pair = gen_pair(spec)
    seg_s = spec.duration_s / 3.0
    ecg_w = segment(pair.ecg, seg_s, seg_s)[:3]
    pcg_w = segment(pair.pcg_clean, seg_s, seg_s)[:3]
    if len(ecg_w) < 3:
        raise ValueError("consistency needs duration_s long enough for 3 windows")
    noisy = []
    for i, w in enumerate(pcg_w[1:]):
        rng = np.random.default_rng([seed, 50 + i])
        if kind == "white":
            noise = white_noise(len(w), spec.sample_rate_hz, rng)
        else:
            noise = hospital_noise(len(w), spec.sample_rate_hz, rng)
        noisy.append(mix_at_snr(w, noise, snr, seed=seed + i))
    rows = []
    for method in config.methods:
        try:
            if method == "nmcse":
                nm_cfg = replace(config.nmcse, seed=seed)
                coupler = train([(ecg_w[0], pcg_w[0])], nm_cfg)
                h_ref = coupler.filter
                h_a = refine(coupler, ecg_w[1], noisy[0])
                h_b = refine(coupler, ecg_w[2], noisy[1])
            else:
                h_ref = estimate_with_method(method, ecg_w[0], pcg_w[0], config.deconv)
                h_a = estimate_with_method(method, ecg_w[1], noisy[0], config.deconv)
                h_b = estimate_with_method(method, ecg_w[2], noisy[1], config.deconv)
            rep = consistency_eval(h_ref, h_a, h_b)
            rows.append(
                ConsistencyRow(
                    method=method,
                    snr_db=snr,
                    noise_kind=kind,
                    trial=trial,
                    ref_mse=rep.ref_mse,
                    ref_pcc=rep.ref_pcc,
                    mutual_mse=rep.mutual_mse,
                    mutual_pcc=rep.mutual_pcc,
                )
            )
        except Exception as exc:
            rows.append(
                ConsistencyRow(
                    method=method,
                    snr_db=snr,
                    noise_kind=kind,
                    trial=trial,
                    ref_mse=float("nan"),
                    ref_pcc=float("nan"),
                    mutual_mse=float("nan"),
                    mutual_pcc=float("nan"),
                    status=f"failed:{type(exc).__name__}",
                )
            )
    return rows


def run_consistency(config: ExperimentConfig, workers: int = 1) -> list[ConsistencyRow]:
    """Reference/mutual consistency rows: one per (trial, method)."""
    trials = list(range(config.n_trials))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda t: _consistency_trial(config, t), trials))
    else:
        chunks = [_consistency_trial(config, t) for t in trials]
    method_order = {m: i for i, m in enumerate(config.methods)}
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=lambda r: (r.trial, method_order[r.method]))
    return rows


def summarize(rows, keys=("method", "snr_db", "noise_kind", "sweep_param", "sweep_value")) -> list[dict]:
    """Per-condition medians over successful trials, deterministically ordered."""
    groups: dict[tuple, list] = {}
    order: list[tuple] = []
    for r in rows:
        if r.status != "ok":
            continue
        k = tuple(getattr(r, key, "") for key in keys)
        if k not in groups:
            groups[k] = []
            order.append(k)
        groups[k].append(r)
    metric_fields = [
        f for f in ("mse", "pcc", "mid_band_coherence", "ref_mse", "ref_pcc", "mutual_mse", "mutual_pcc")
        if rows and hasattr(rows[0], f)
    ]
    out = []
    for k in order:
        entry = {key: val for key, val in zip(keys, k)}
        entry["n"] = len(groups[k])
        for f in metric_fields:
            entry[f"median_{f}"] = float(np.median([getattr(r, f) for r in groups[k]]))
        out.append(entry)
    return out


def _csv_text(rows, columns, fingerprint: str) -> str:
    header = ["schema_version", "config_fingerprint"] + list(columns)
    lines = [",".join(header)]
    for r in rows:
        vals = [CSV_SCHEMA_VERSION, fingerprint]
        for c in columns:
            v = getattr(r, c)
            vals.append(repr(float(v)) if isinstance(v, float) else str(v))
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


_BENCH_COLS = (
    "method", "snr_db", "noise_kind", "trial", "sweep_param", "sweep_value",
    "mse", "pcc", "mid_band_coherence", "status",
)
_TIMING_COLS = (
    "method", "snr_db", "noise_kind", "trial", "sweep_param", "sweep_value", "wall_time_ms",
)
_CONSISTENCY_COLS = (
    "method", "snr_db", "noise_kind", "trial",
    "ref_mse", "ref_pcc", "mutual_mse", "mutual_pcc", "status",
)


def benchmark_csv_text(rows, fingerprint: str) -> str:
    """Deterministic results CSV (timings deliberately excluded)."""
    return _csv_text(rows, _BENCH_COLS, fingerprint)


def timing_csv_text(rows, fingerprint: str) -> str:
    return _csv_text(rows, _TIMING_COLS, fingerprint)


def consistency_csv_text(rows, fingerprint: str) -> str:
    return _csv_text(rows, _CONSISTENCY_COLS, fingerprint)


def write_benchmark_outputs(rows, config: ExperimentConfig, out_dir, prefix: str = "benchmark"):
    """Write results CSV, timing CSV, and a summary JSON; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fp = config.fingerprint()
    results = out / f"{prefix}_results.csv"
    timing = out / f"{prefix}_timing.csv"
    summary = out / f"{prefix}_summary.json"
    results.write_text(benchmark_csv_text(rows, fp))
    timing.write_text(timing_csv_text(rows, fp))
    doc = {
        "schema_version": CSV_SCHEMA_VERSION,
        "config_fingerprint": fp,
        "config": config.to_dict(),
        "groups": summarize(rows),
    }
    summary.write_text(canonical_json(doc) + "\n")
    return results, timing, summary
