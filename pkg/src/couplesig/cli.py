"""Command-line harness.

Subcommands: synth, estimate, train, refine, evaluate, benchmark,
consistency. Exit codes: 0 ran, 2 usage error, 3 I/O error, 4 numerical
failure. Flag values override config-file values which override defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io as csio
from .deconv import DeconvConfig
from .errors import CouplesigError, NumericalError
from .experiments import (
    ExperimentConfig,
    consistency_csv_text,
    run_benchmark,
    run_consistency,
    summarize,
    write_benchmark_outputs,
    estimate_with_method,
)
from .metrics import coherence, consistency_eval, filter_mse, filter_pcc
from .nmcse import NmcseConfig, TrainedCoupler, refine, train
from .signals import ButterworthSpec, Signal, butterworth_filter, z_score
from .synth import SynthSpec, gen_pair

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4

ECG_BAND_HZ = (0.5, 60.0)
PCG_HIGHPASS_HZ = 20.0


class SystemExit2(Exception):
    """Usage error to be mapped onto exit code 2."""


def _read_signal_arg(path: str, rate: float | None) -> Signal:
    if path.endswith(".csv"):
        if rate is None:
            raise SystemExit2("--rate is required for CSV signal input")
        return csio.read_signal_csv(path, rate)
    return csio.read_signal(path)


def preprocess_ecg(sig: Signal) -> Signal:
    out = z_score(sig)
    return butterworth_filter(out, ButterworthSpec("band_pass", ECG_BAND_HZ, order=4))


def preprocess_pcg(sig: Signal) -> Signal:
    out = z_score(sig)
    return butterworth_filter(out, ButterworthSpec("high_pass", (PCG_HIGHPASS_HZ,), order=4))


def _parse_notch(text: str):
    parts = text.split(":")
    if len(parts) != 3:
        raise SystemExit2("--notch expects center:width:depth_db, e.g. 50:10:40")
    return tuple(float(p) for p in parts)


def cmd_synth(args) -> int:
    notch = _parse_notch(args.notch) if args.notch else None
    spec = SynthSpec(
        duration_s=args.duration,
        sample_rate_hz=args.fs,
        heart_rate_bpm=args.hr,
        qrs_width_ms=args.qrs_width,
        filter_family=args.filter_family,
        spectral_notch=notch,
        seed=args.seed,
    )
    pair = gen_pair(spec, snr_db=args.snr, noise_kind=args.noise)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prefix = args.prefix
    files = {}
    files["ecg"] = str(csio.write_signal(out / f"{prefix}_ecg", pair.ecg, label="ecg", channel="ecg")[0])
    files["pcg_clean"] = str(
        csio.write_signal(out / f"{prefix}_pcg_clean", pair.pcg_clean, label="pcg_clean", channel="pcg")[0]
    )
    if pair.pcg_noisy is not None:
        files["pcg_noisy"] = str(
            csio.write_signal(out / f"{prefix}_pcg_noisy", pair.pcg_noisy, label="pcg_noisy", channel="pcg")[0]
        )
    spec_dict = {
        "duration_s": spec.duration_s,
        "sample_rate_hz": spec.sample_rate_hz,
        "heart_rate_bpm": spec.heart_rate_bpm,
        "qrs_width_ms": spec.qrs_width_ms,
        "filter_family": spec.filter_family,
        "spectral_notch": list(spec.spectral_notch) if spec.spectral_notch else None,
        "seed": spec.seed,
    }
    manifest = {
        "spec": spec_dict,
        "snr_db": args.snr,
        "noise_kind": args.noise,
        "h_true": {
            "taps": [float(c) for c in pair.h_true.coefficients],
            "sample_rate_hz": pair.h_true.sample_rate_hz,
        },
        "files": files,
        "config_fingerprint": csio.config_fingerprint(
            {"spec": spec_dict, "snr_db": args.snr, "noise_kind": args.noise}
        ),
    }
    manifest_path = out / f"{prefix}_manifest.json"
    manifest_path.write_text(csio.canonical_json(manifest) + "\n")
    print(f"wrote {len(files)} signal file pairs and {manifest_path}")
    return EXIT_OK


def _nmcse_config_from_args(args, seed: int) -> NmcseConfig:
    cfg = NmcseConfig(seed=seed)
    if getattr(args, "epochs", None) is not None:
        cfg = replace(cfg, max_epochs=args.epochs)
    if getattr(args, "learning_rate", None) is not None:
        cfg = replace(cfg, learning_rate=args.learning_rate)
    if getattr(args, "ot_window", None) is not None:
        cfg = replace(cfg, ot_window=args.ot_window)
    if getattr(args, "ot_points", None) is not None:
        cfg = replace(cfg, ot_points=args.ot_points)
    return cfg


def cmd_estimate(args) -> int:
    ecg = _read_signal_arg(args.ecg, args.rate)
    pcg = _read_signal_arg(args.pcg, args.rate)
    if not args.skip_preprocess:
        ecg = preprocess_ecg(ecg)
        pcg = preprocess_pcg(pcg)
    noise_psd = None
    if args.noise_psd:
        data = np.loadtxt(args.noise_psd, delimiter=",", ndmin=2)
        noise_psd = (data[:, 0], data[:, 1])
    dcfg = DeconvConfig(
        method=args.method if args.method != "nmcse" else "naive",
        lam=args.lam,
        gamma=args.gamma,
        noise_psd=noise_psd,
        n_taps=args.taps,
    )
    ncfg = _nmcse_config_from_args(args, args.seed)
    ncfg = replace(ncfg, n_taps=args.taps)
    try:
        h = estimate_with_method(args.method, ecg, pcg, dcfg, ncfg)
    except CouplesigError as exc:
        raise type(exc)(f"method {args.method}: {exc}") from exc
    meta = {
        "method": args.method,
        "inputs": {
            "ecg": csio.file_sha256(args.ecg),
            "pcg": csio.file_sha256(args.pcg),
        },
        "preprocessed": not args.skip_preprocess,
        "config": {
            "lambda": args.lam,
            "gamma": args.gamma,
            "n_taps": args.taps,
            "seed": args.seed,
        },
    }
    csio.write_filter_json(args.out, h, meta)
    print(f"wrote {args.out}")
    return EXIT_OK


def _load_pairs(pair_args, rate):
    pairs = []
    for ecg_path, pcg_path in pair_args:
        pairs.append((_read_signal_arg(ecg_path, rate), _read_signal_arg(pcg_path, rate)))
    return pairs


def cmd_train(args) -> int:
    pairs = _load_pairs(args.pair, args.rate)
    if not args.skip_preprocess:
        pairs = [(preprocess_ecg(e), preprocess_pcg(p)) for e, p in pairs]
    cfg = _nmcse_config_from_args(args, args.seed)
    coupler = train(pairs, cfg)
    meta = {
        "loss_history": [float(v) for v in coupler.loss_history],
        "epochs_run": coupler.epochs_run,
        "best_loss": coupler.best_loss,
        "config_fingerprint": csio.config_fingerprint(
            {"seed": cfg.seed, "lr": cfg.learning_rate, "epochs": cfg.max_epochs,
             "ot_window": cfg.ot_window, "ot_points": cfg.ot_points}
        ),
    }
    csio.write_filter_json(args.out, coupler.filter, meta)
    print(f"wrote {args.out} after {coupler.epochs_run} epochs (best loss {coupler.best_loss:.6g})")
    return EXIT_OK


def cmd_refine(args) -> int:
    fir, meta = csio.read_filter_json(args.filter)
    ecg = _read_signal_arg(args.ecg, args.rate)
    pcg = _read_signal_arg(args.pcg, args.rate)
    if not args.skip_preprocess:
        ecg = preprocess_ecg(ecg)
        pcg = preprocess_pcg(pcg)
    cfg = _nmcse_config_from_args(args, args.seed)
    cfg = replace(cfg, n_taps=len(fir), refine_steps=args.steps)
    coupler = TrainedCoupler(
        filter=fir, loss_history=np.array([0.0]), epochs_run=0, config=cfg, best_loss=0.0
    )
    refined = refine(coupler, ecg, pcg, cfg)
    csio.write_filter_json(args.out, refined, {"refined_from": args.filter, **({"origin": meta} if meta else {})})
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    filters = [csio.read_filter_json(p)[0] for p in args.filters]
    report: dict = {"filters": list(args.filters)}
    if len(filters) == 2:
        report["mse"] = filter_mse(filters[0], filters[1])
        report["pcc"] = filter_pcc(filters[0], filters[1])
    elif len(filters) == 3:
        rep = consistency_eval(filters[0], filters[1], filters[2])
        report.update(
            ref_mse=rep.ref_mse, ref_pcc=rep.ref_pcc,
            mutual_mse=rep.mutual_mse, mutual_pcc=rep.mutual_pcc,
        )
    else:
        raise SystemExit2("evaluate expects two or three filter JSON files")
    if args.ecg:
        from .signals import convolve

        ecg = _read_signal_arg(args.ecg, args.rate)
        ref = convolve(ecg, filters[0], mode="same", method="fft")
        est = convolve(ecg, filters[-1], mode="same", method="fft")
        rep = coherence(ref, est)
        report["coherence_band_means"] = rep.band_means
    Path(args.out).write_text(csio.canonical_json(report) + "\n")
    print(f"wrote {args.out}")
    return EXIT_OK


def _experiment_config_from_args(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_dict(json.loads(Path(args.config).read_text()))
    else:
        cfg = ExperimentConfig()
    if args.methods:
        cfg = replace(cfg, methods=tuple(args.methods.split(",")))
    if args.snr is not None:
        cfg = replace(cfg, snr_db_levels=tuple(float(s) for s in args.snr.split(",")))
    if args.trials is not None:
        cfg = replace(cfg, n_trials=args.trials)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _workers(args) -> int:
    if args.workers is not None:
        return args.workers
    return int(os.environ.get("COUPLESIG_WORKERS", "1"))


def cmd_benchmark(args) -> int:
    cfg = _experiment_config_from_args(args)
    rows = run_benchmark(cfg, workers=_workers(args))
    results, timing, summary = write_benchmark_outputs(rows, cfg, args.out_dir, prefix=args.prefix)
    n_failed = sum(1 for r in rows if r.status != "ok")
    print(f"wrote {results}, {timing}, {summary} ({len(rows)} rows, {n_failed} flagged)")
    return EXIT_OK


def cmd_consistency(args) -> int:
    cfg = _experiment_config_from_args(args)
    rows = run_consistency(cfg, workers=_workers(args))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fp = cfg.fingerprint()
    results = out / f"{args.prefix}_results.csv"
    summary = out / f"{args.prefix}_summary.json"
    results.write_text(consistency_csv_text(rows, fp))
    doc = {
        "schema_version": "1",
        "config_fingerprint": fp,
        "config": cfg.to_dict(),
        "groups": summarize(rows, keys=("method", "snr_db", "noise_kind")),
    }
    summary.write_text(csio.canonical_json(doc) + "\n")
    print(f"wrote {results}, {summary} ({len(rows)} rows)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="couplesig",
        description="Estimate and evaluate ECG-to-PCG coupling filters.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic ECG/PCG pair with known filter")
    p.add_argument("--duration", type=float, default=10.0)
    p.add_argument("--fs", type=float, default=2000.0)
    p.add_argument("--hr", type=float, default=60.0)
    p.add_argument("--qrs-width", type=float, default=12.0, dest="qrs_width")
    p.add_argument("--filter-family", default="damped_sinusoid",
                   choices=("damped_sinusoid", "two_burst", "random_smooth"))
    p.add_argument("--notch", default=None, help="center:width:depth_db")
    p.add_argument("--snr", type=float, default=None)
    p.add_argument("--noise", default="white", choices=("white", "hospital_like"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--prefix", default="synth")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("estimate", help="estimate the coupling filter from a pair")
    p.add_argument("--method", required=True,
                   choices=("naive", "tikhonov", "wiener", "sparse", "nmcse"))
    p.add_argument("--ecg", required=True)
    p.add_argument("--pcg", required=True)
    p.add_argument("--rate", type=float, default=None, help="sample rate for CSV input")
    p.add_argument("--out", required=True)
    p.add_argument("--lambda", type=float, default=0.01, dest="lam")
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--noise-psd", default=None, help="CSV of freq_hz,psd for Wiener")
    p.add_argument("--taps", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None, dest="learning_rate")
    p.add_argument("--ot-window", type=int, default=None, dest="ot_window")
    p.add_argument("--ot-points", type=int, default=None, dest="ot_points")
    p.add_argument("--skip-preprocess", action="store_true")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("train", help="fit the transport estimator over ECG/PCG pairs")
    p.add_argument("--pair", nargs=2, action="append", required=True,
                   metavar=("ECG", "PCG"))
    p.add_argument("--rate", type=float, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None, dest="learning_rate")
    p.add_argument("--ot-window", type=int, default=None, dest="ot_window")
    p.add_argument("--ot-points", type=int, default=None, dest="ot_points")
    p.add_argument("--skip-preprocess", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("refine", help="refine a trained filter on one pair")
    p.add_argument("--filter", required=True)
    p.add_argument("--ecg", required=True)
    p.add_argument("--pcg", required=True)
    p.add_argument("--rate", type=float, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None, dest="learning_rate")
    p.add_argument("--ot-window", type=int, default=None, dest="ot_window")
    p.add_argument("--ot-points", type=int, default=None, dest="ot_points")
    p.add_argument("--skip-preprocess", action="store_true")
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("evaluate", help="compare two or three filter files")
    p.add_argument("filters", nargs="+")
    p.add_argument("--ecg", default=None, help="excitation for signal-domain coherence")
    p.add_argument("--rate", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    for name, fn in (("benchmark", cmd_benchmark), ("consistency", cmd_consistency)):
        p = sub.add_parser(name, help=f"run the {name} experiment grid")
        p.add_argument("--config", default=None, help="experiment config JSON")
        p.add_argument("--methods", default=None, help="comma-separated method list")
        p.add_argument("--snr", default=None, help="comma-separated SNR levels in dB")
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None,
                       help="worker threads (default: COUPLESIG_WORKERS or 1)")
        p.add_argument("--out-dir", default=".")
        p.add_argument("--prefix", default=name)
        p.set_defaults(func=fn)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit2 as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, json.JSONDecodeError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CouplesigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
