"""Command-line entry point: ``rsdcm <subcommand> ...``."""
import argparse
import json
import logging
import os
import sys
from dataclasses import asdict

import numpy as np

from ..dynamics import noise_to_dict
from ..errors import BatchError, RsdcmError
from ..hemo import FIRPrior
from .. import metrics
from .config import SCHEMA, EMSettings, ExperimentConfig, normalize_assumption
from .data import load_bold_csv, write_bold_csv
from .montecarlo import (
    _jsonable, _safe, emit_report, estimate_dataset, estimate_record, fir_prior_for,
    load_report, recompute_metrics, record_model, run_monte_carlo,
)
from .synthetic import generate_synthetic

log = logging.getLogger("rsdcm")


def _load_config(args):
    if args.config:
        cfg = ExperimentConfig.load(args.config)
    else:
        cfg = ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "runs", None) is not None:
        cfg.runs = args.runs
    if getattr(args, "assumption", None):
        cfg.assumptions = tuple(normalize_assumption(a) for a in args.assumption)
    return cfg


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(obj), fh, indent=1)


def _fir_prior(args, cfg):
    path = getattr(args, "fir_prior", None)
    if path:
        with open(path, encoding="utf-8") as fh:
            return FIRPrior.from_json(fh.read())
    return fir_prior_for(cfg)


def cmd_fir_prior(args):
    cfg = _load_config(args)
    prior = fir_prior_for(cfg)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "fir_prior.json")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(prior.to_json())
    print(path)
    return 0


def cmd_simulate(args):
    cfg = _load_config(args)
    os.makedirs(args.out, exist_ok=True)
    for run in range(cfg.runs):
        d_est, d_test, truth = generate_synthetic(cfg, run)
        write_bold_csv(os.path.join(args.out, f"run{run:03d}_est.csv"), d_est)
        write_bold_csv(os.path.join(args.out, f"run{run:03d}_test.csv"), d_test)
        _write_json(os.path.join(args.out, f"run{run:03d}_truth.json"), {
            "schema": SCHEMA,
            "run": run,
            "A_true": truth.A,
            "noise": noise_to_dict(truth.noise),
            "balloon": [asdict(p) for p in truth.balloon],
            "noise_var_est": truth.noise_var_est,
            "noise_var_test": truth.noise_var_test,
        })
    _write_json(os.path.join(args.out, "config.json"), cfg.to_dict())
    print(f"wrote {cfg.runs} run(s) to {args.out}")
    return 0


def cmd_estimate(args):
    cfg = _load_config(args)
    ds = load_bold_csv(args.data, T_R=args.tr if args.tr else cfg.T_R)
    prior = _fir_prior(args, cfg)
    assumptions = args.assumption or ["w"]
    os.makedirs(args.out, exist_ok=True)
    for a in assumptions:
        kind = normalize_assumption(a)
        result = estimate_dataset(ds, kind, prior, cfg.em)
        rec = estimate_record(result)
        rec["model_fc"] = metrics.model_fc(result)
        rec["empirical_fc"] = metrics.empirical_fc(ds.Y)
        rec["rho_fc"] = _safe(metrics.rho_fc, rec["empirical_fc"], rec["model_fc"])
        out = {"schema": SCHEMA, "assumption": kind, "T_R": ds.T_R,
               "region_names": ds.region_names, "source": ds.provenance, **rec}
        path = os.path.join(args.out, f"estimate_{kind.lower()}.json")
        _write_json(path, out)
        print(f"{kind}: {result.iterations} iterations, rho_FC={rec['rho_fc']:.3f} -> {path}")
    return 0


def _print_summary(summary):
    for key, block in summary.items():
        if key == "pairwise_rho_ec":
            for pair, q in block.items():
                if q:
                    print(f"  rho_EC {pair:<7} median {q['median']:.3f}")
            continue
        parts = [f"{m}={q['median']:.3f}" for m, q in block.items() if q]
        print(f"  {key:<4} " + " ".join(parts))


def cmd_montecarlo(args):
    cfg = _load_config(args)

    def progress(rec):
        msg = rec.get("error") or f"rmse={rec.get('rmse', float('nan')):.3f}"
        log.info("run %d %s %s (%.1fs) %s", rec["run"], rec["assumption"], rec["status"],
                 rec["elapsed"], msg)

    try:
        report = run_monte_carlo(cfg, jobs=args.jobs, fir_prior=_fir_prior(args, cfg), progress=progress)
    except BatchError as exc:
        emit_report(exc.report, args.out)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    paths = emit_report(report, args.out)
    _print_summary(report["summary"])
    print(paths["json"])
    return 0


def cmd_metrics(args):
    """Recompute metrics of a stored study, or of one stored estimate."""
    if args.estimate:
        with open(args.estimate, encoding="utf-8") as fh:
            rec = json.load(fh)
        model = record_model(rec, rec["T_R"])
        out = {"schema": SCHEMA, "model_fc": metrics.model_fc(model)}
        if args.data:
            Y = load_bold_csv(args.data).Y
            out["empirical_fc"] = metrics.empirical_fc(Y)
            out["rho_fc"] = _safe(metrics.rho_fc, out["empirical_fc"], out["model_fc"])
        if args.truth:
            with open(args.truth, encoding="utf-8") as fh:
                A_true = np.asarray(json.load(fh)["A_true"])
            A_hat = np.asarray(rec["A_hat"])
            out["rmse"] = metrics.rmse_ec(A_true, A_hat)
            out["err"] = metrics.sparsity_err(A_true, A_hat, pruned=rec.get("pruned"))
            out["rho_ec_truth"] = _safe(metrics.rho_ec, A_true, A_hat)
    else:
        if not args.report:
            print("error: give a study directory or --estimate", file=sys.stderr)
            return 2
        report = load_report(args.report)
        fresh = recompute_metrics(report)
        stored = {(r["run"], r["assumption"]): r for r in report["records"] if r.get("status") == "ok"}
        worst = 0.0
        for row in fresh:
            old = stored[(row["run"], row["assumption"])]
            for k, v in row.items():
                if k in ("run", "assumption") or old.get(k) is None or v != v:
                    continue
                worst = max(worst, abs(float(v) - float(old[k])))
        out = {"schema": SCHEMA, "records": fresh, "max_abs_diff": worst}
        print(f"recomputed {len(fresh)} record(s); max |diff| vs stored = {worst:.3g}")
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "metrics.json")
    _write_json(path, out)
    print(path)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="rsdcm", description="Resting-state effective connectivity with AR endogenous noise.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, assumption=False):
        sp.add_argument("--config", help="experiment config JSON")
        sp.add_argument("--seed", type=int, help="master seed (overrides config)")
        sp.add_argument("--out", default=".", help="output directory")
        if assumption:
            sp.add_argument("--assumption", action="append", choices=["w", "ar", "var"],
                            type=str.lower, help="modelling assumption; repeat for several")

    sp = sub.add_parser("simulate", help="write synthetic estimation/test datasets")
    common(sp)
    sp.add_argument("--runs", type=int, help="number of runs (overrides config)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("estimate", help="estimate connectivity from a BOLD CSV file")
    sp.add_argument("data", help="BOLD CSV: header of region names, one row per scan")
    common(sp, assumption=True)
    sp.add_argument("--fir-prior", help="cached FIR prior JSON")
    sp.add_argument("--tr", type=float, help="repetition time in seconds")
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("montecarlo", help="run a synthetic Monte-Carlo study")
    common(sp, assumption=True)
    sp.add_argument("--runs", type=int, help="number of runs (overrides config)")
    sp.add_argument("--jobs", type=int, default=1, help="worker processes")
    sp.add_argument("--fir-prior", help="cached FIR prior JSON")
    sp.set_defaults(func=cmd_montecarlo)

    sp = sub.add_parser("metrics", help="recompute metrics from stored results")
    sp.add_argument("report", nargs="?", help="study directory or results.json")
    sp.add_argument("--estimate", help="single estimate JSON")
    sp.add_argument("--data", help="BOLD CSV for the FC comparison")
    sp.add_argument("--truth", help="JSON with an A_true field")
    sp.add_argument("--out", default=".", help="output directory")
    sp.set_defaults(func=cmd_metrics)

    sp = sub.add_parser("fir-prior", help="build and cache the FIR prior")
    common(sp)
    sp.set_defaults(func=cmd_fir_prior)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (RsdcmError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
