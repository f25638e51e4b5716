"""Monte-Carlo studies over the modelling assumptions, and their reports."""
import csv
import itertools
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .. import metrics
from ..dynamics import noise_from_dict, noise_to_dict
from ..errors import BatchError, RsdcmError, ShapeError
from ..hemo import FIRPrior, build_fir_prior
from ..inference import EMConfig, estimate
from ..ssm import assemble
from .config import SCHEMA, ExperimentConfig, normalize_assumption
from .synthetic import generate_synthetic

METRICS = ("rmse", "err", "rho_ec_truth", "rho_fc_est", "rho_fc_test")
FAILURE_LIMIT = 0.2


def fir_prior_for(cfg):
    return build_fir_prior(
        prior_cfg=cfg.balloon_prior, s=cfg.em.s, T_R=cfg.T_R,
        num_samples=cfg.em.fir_samples, seed=cfg.seed, dt=cfg.sim_dt,
    )


def em_config(settings, assumption, T_R):
    return EMConfig(
        model_kind=normalize_assumption(assumption), T_R=T_R, tol=settings.tol,
        max_iter=settings.max_iter, a_step=settings.a_step, sbl_rule=settings.sbl_rule,
    )


def estimate_dataset(dataset, assumption, fir_prior, settings):
    return estimate(dataset.Y, fir_prior, em_config(settings, assumption, dataset.T_R))


def estimate_record(result):
    """JSON-ready summary of an :class:`EstimationResult`."""
    return {
        "A_hat": result.A_hat.tolist(),
        "noise_hat": noise_to_dict(result.noise_hat),
        "h_hat": result.h_hat.h.tolist(),
        "eps_hat": result.eps_hat,
        "gamma": result.sbl.gamma.tolist(),
        "pruned": result.sbl.prune_mask.tolist(),
        "iterations": result.iterations,
        "converged": result.converged,
        "loglik": result.loglik,
        "objective_trace": list(result.objective_trace),
    }


def _safe(fn, *args):
    """Correlation metric, or NaN when it is undefined (constant or too short)."""
    try:
        return fn(*args)
    except (metrics.UndefinedCorrelationError, ShapeError):
        return float("nan")


def record_model(rec, T_R):
    return assemble(
        np.asarray(rec["A_hat"]), noise_from_dict(rec["noise_hat"]),
        np.asarray(rec["h_hat"]), T_R, rec["eps_hat"],
    )


def cell_metrics(rec, A_true, Y_est, Y_test, T_R):
    """Metrics of one stored estimate against the truth and both datasets."""
    A_hat = np.asarray(rec["A_hat"])
    fc_model = metrics.model_fc(record_model(rec, T_R))
    return {
        "rmse": metrics.rmse_ec(A_true, A_hat),
        "err": metrics.sparsity_err(A_true, A_hat, pruned=rec["pruned"]),
        "rho_ec_truth": _safe(metrics.rho_ec, A_true, A_hat),
        "rho_fc_est": _safe(metrics.rho_fc, metrics.empirical_fc(Y_est), fc_model),
        "rho_fc_test": _safe(metrics.rho_fc, metrics.empirical_fc(Y_test), fc_model),
    }


def run_cell(cfg, fir_prior, run, assumption):
    """Generate run ``run`` and estimate it under one assumption; never raises."""
    t0 = time.perf_counter()
    rec = {"run": int(run), "assumption": assumption}
    try:
        d_est, d_test, truth = generate_synthetic(cfg, run)
        result = estimate_dataset(d_est, assumption, fir_prior, cfg.em)
        rec.update(estimate_record(result))
        rec["truth_noise"] = noise_to_dict(truth.noise)
        rec.update(cell_metrics(rec, truth.A, d_est.Y, d_test.Y, cfg.T_R))
        rec["status"] = "ok"
    except (RsdcmError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        rec["status"] = "failed"
        rec["error"] = f"{type(exc).__name__}: {exc}"
    rec["elapsed"] = time.perf_counter() - t0
    return rec


def _run_cell_star(args):
    return run_cell(*args)


def pairwise_similarity(records, assumptions):
    """rho_EC between the estimates of every pair of assumptions, per run."""
    by_run = {}
    for r in records:
        if r.get("status") == "ok":
            by_run.setdefault(r["run"], {})[r["assumption"]] = np.asarray(r["A_hat"])
    out = []
    for run in sorted(by_run):
        for a, b in itertools.combinations(assumptions, 2):
            if a in by_run[run] and b in by_run[run]:
                rho = _safe(metrics.rho_ec, by_run[run][a], by_run[run][b])
                out.append({"run": run, "pair": f"{a}-{b}", "rho_ec": rho})
    return out


def quartiles(values):
    v = np.asarray([x for x in values if x is not None and math.isfinite(x)], dtype=float)
    if v.size == 0:
        return None
    q = np.percentile(v, [0, 25, 50, 75, 100])
    return {"min": q[0], "q1": q[1], "median": q[2], "q3": q[3], "max": q[4], "count": int(v.size)}


def summarize(records, pairwise, assumptions):
    summary = {}
    for a in assumptions:
        ok = [r for r in records if r["assumption"] == a and r.get("status") == "ok"]
        summary[a] = {m: quartiles([r[m] for r in ok]) for m in METRICS}
    pairs = {}
    for p in pairwise:
        pairs.setdefault(p["pair"], []).append(p["rho_ec"])
    summary["pairwise_rho_ec"] = {k: quartiles(v) for k, v in pairs.items()}
    return summary


def run_monte_carlo(cfg, jobs=1, fir_prior=None, progress=None):
    """Run every (run, assumption) cell and aggregate the metrics.

    Cells are independent and deterministic given ``cfg``, so serial and
    parallel execution give identical reports. Failed cells are kept as
    records; more than 20% failures raises :class:`BatchError` with the
    report attached as ``.report``.
    """
    fir_prior = fir_prior_for(cfg) if fir_prior is None else fir_prior
    cells = [(cfg, fir_prior, run, a) for run in range(cfg.runs) for a in cfg.assumptions]
    if jobs is not None and jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = []
            for rec in pool.map(_run_cell_star, cells):
                records.append(rec)
                if progress:
                    progress(rec)
    else:
        records = []
        for c in cells:
            rec = run_cell(*c)
            records.append(rec)
            if progress:
                progress(rec)
    pairwise = pairwise_similarity(records, cfg.assumptions)
    failed = sum(r["status"] != "ok" for r in records)
    report = {
        "schema": SCHEMA,
        "config": cfg.to_dict(),
        "seeds": {"seed": cfg.seed, "runs": list(range(cfg.runs))},
        "fir_prior": json.loads(fir_prior.to_json()),
        "records": records,
        "pairwise": pairwise,
        "summary": summarize(records, pairwise, cfg.assumptions),
        "failures": failed,
    }
    if records and failed > FAILURE_LIMIT * len(records):
        err = BatchError(f"{failed} of {len(records)} cells failed")
        err.report = report
        raise err
    return report


def recompute_metrics(report):
    """Recompute every stored metric from the stored estimates and regenerated data."""
    cfg = ExperimentConfig.from_dict(report["config"])
    out = []
    cache = {}
    for rec in report["records"]:
        if rec.get("status") != "ok":
            continue
        run = rec["run"]
        if run not in cache:
            cache[run] = generate_synthetic(cfg, run)
        d_est, d_test, truth = cache[run]
        vals = cell_metrics(rec, truth.A, d_est.Y, d_test.Y, cfg.T_R)
        out.append({"run": run, "assumption": rec["assumption"], **vals})
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def emit_report(report, out_dir):
    """Write results.json, metrics.csv (one row per run x assumption) and pairwise.csv."""
    os.makedirs(out_dir, exist_ok=True)
    report = dict(report)
    report.setdefault("schema", SCHEMA)
    report.setdefault("records", [])
    report.setdefault("pairwise", [])
    paths = {
        "json": os.path.join(out_dir, "results.json"),
        "metrics": os.path.join(out_dir, "metrics.csv"),
        "pairwise": os.path.join(out_dir, "pairwise.csv"),
    }
    with open(paths["json"], "w", encoding="utf-8") as fh:
        json.dump(_jsonable(report), fh, indent=1)
    cols = ["run", "assumption", "status", *METRICS, "iterations", "converged", "elapsed"]
    with open(paths["metrics"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in report["records"]:
            w.writerow([_csv_cell(r.get(c)) for c in cols])
    with open(paths["pairwise"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["run", "pair", "rho_ec"])
        for p in report["pairwise"]:
            w.writerow([p["run"], p["pair"], _csv_cell(p["rho_ec"])])
    return paths


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def load_report(path):
    if os.path.isdir(path):
        path = os.path.join(path, "results.json")
    with open(path, encoding="utf-8") as fh:
        report = json.load(fh)
    if report.get("schema") != SCHEMA:
        raise ValueError(f"unsupported report schema {report.get('schema')}")
    return report
