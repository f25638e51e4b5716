import csv
import json

import numpy as np
import pytest

from rsdcm.dynamics import AR, VAR, White
from rsdcm.errors import BatchError, ConfigurationError, GenerationError, ParseError
from rsdcm.harness.config import REFERENCE_A, EMSettings, ExperimentConfig, normalize_assumption
from rsdcm.harness.data import Dataset, load_bold_csv, write_bold_csv
from rsdcm.harness.montecarlo import (
    METRICS, emit_report, fir_prior_for, load_report, quartiles, recompute_metrics,
    run_cell, run_monte_carlo,
)
from rsdcm.harness.synthetic import calibrate_intensity, draw_noise, generate_synthetic
from rsdcm.ssm import stationary_covariance
from rsdcm.harness.synthetic import neuronal_transition

A_SMALL = np.array([[-0.6, 0.0, 0.3], [0.4, -0.7, 0.0], [0.0, 0.5, -0.5]])


def tiny(**kw):
    base = dict(A_true=A_SMALL, N=80, runs=2, burn_in=20.0,
                em=EMSettings(tol=1e-2, max_iter=4, s=15, fir_samples=20))
    base.update(kw)
    return ExperimentConfig(**base)


# ----------------------------------------------------------------- config


def test_config_defaults():
    cfg = ExperimentConfig()
    np.testing.assert_array_equal(cfg.A_true, REFERENCE_A)
    assert (cfg.sim_dt, cfg.T_R, cfg.N, cfg.snr, cfg.runs) == (0.05, 2.0, 300, 10.0, 50)
    assert cfg.decimation == 40


def test_config_round_trip():
    cfg = tiny(noise_gen=VAR((-0.3, -0.2, -0.1), 0.01), seed=9)
    back = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert back.to_dict() == cfg.to_dict()


@pytest.mark.parametrize("kw", [
    dict(sim_dt=0.3), dict(snr=0.0), dict(snr=-1.0), dict(lambda_range=(0.0, 1.0)),
    dict(assumptions=("W", "ARMA")), dict(A_true=np.ones((2, 3))),
])
def test_config_invalid(kw):
    with pytest.raises(ConfigurationError):
        tiny(**kw)


def test_config_unknown_key_and_schema():
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({"schema": 2})


def test_normalize_assumption():
    assert normalize_assumption("var") == "VAR"
    with pytest.raises(ConfigurationError):
        normalize_assumption("x")


# -------------------------------------------------------------- generation


def test_generation_deterministic():
    cfg = tiny()
    a = generate_synthetic(cfg, 1)
    b = generate_synthetic(cfg, 1)
    np.testing.assert_array_equal(a[0].Y, b[0].Y)
    np.testing.assert_array_equal(a[1].Y, b[1].Y)
    c = generate_synthetic(cfg, 0)
    assert not np.array_equal(a[0].Y, c[0].Y)


def test_generation_shapes_and_independent_sets():
    d_est, d_test, truth = generate_synthetic(tiny(), 0)
    assert d_est.Y.shape == d_test.Y.shape == (80, 3)
    assert not np.array_equal(d_est.Y, d_test.Y)
    assert d_est.provenance["split"] == "estimation"
    assert len(truth.balloon) == 3


def test_generation_infinite_snr_is_clean():
    d_est, _, truth = generate_synthetic(tiny(snr=float("inf")), 0)
    np.testing.assert_array_equal(d_est.Y, truth.clean_est)
    assert np.all(truth.noise_var_est == 0)


def test_generation_snr_variance_ratio():
    cfg = tiny(N=300 * 40, runs=1)
    d_est, _, truth = generate_synthetic(cfg, 0)
    resid = d_est.Y - truth.clean_est
    ratio = resid.var(axis=0) / (truth.clean_est.var(axis=0) / 10.0)
    assert np.all(np.abs(ratio - 1) < 0.05)


def test_generation_unstable_A():
    with pytest.raises(GenerationError):
        generate_synthetic(tiny(A_true=np.array([[0.1, 0.0], [0.0, -1.0]])), 0)


def test_lambda_draws():
    rng = np.random.default_rng(0)
    cfg = tiny(noise_gen=VAR((-0.5,) * 3, 1.0))
    noise = draw_noise(cfg, rng)
    lams = np.array(noise.lambdas)
    assert lams.size == 3 and np.all((lams >= -1) & (lams < 0)) and len(set(lams)) == 3
    shared = draw_noise(tiny(noise_gen=VAR((-0.5,) * 3, 1.0), shared_lambda=True), rng)
    assert len(set(shared.lambdas)) == 1
    assert isinstance(draw_noise(tiny(noise_gen=AR(-0.5, 1.0)), rng), AR)
    fixed = tiny(noise_gen=VAR((-0.2, -0.3, -0.4), 1.0), draw_lambdas=False)
    assert draw_noise(fixed, rng).lambdas == (-0.2, -0.3, -0.4)


@pytest.mark.parametrize("noise", [White(3.0), VAR((-0.2, -0.9, -0.5), 7.0)])
def test_calibrated_intensity_hits_target_sd(noise):
    cal = calibrate_intensity(A_SMALL, noise, 0.05, 0.05)
    F, Q = neuronal_transition(A_SMALL, cal, 0.05)
    sd = np.sqrt(np.diag(stationary_covariance(F, Q))[-3:])
    assert sd.max() == pytest.approx(0.05, rel=1e-9)


# ----------------------------------------------------------------- CSV


def _write(tmp_path, text):
    p = tmp_path / "bold.csv"
    p.write_text(text)
    return p


def test_csv_well_formed(tmp_path):
    d = load_bold_csv(_write(tmp_path, "a,b\n1,2\n3,4\n5,6\n"))
    assert (d.N, d.n) == (3, 2)
    assert d.region_names == ["a", "b"]
    np.testing.assert_array_equal(d.Y[:, 1], [2, 4, 6])


def test_csv_header_only(tmp_path):
    with pytest.raises(ParseError):
        load_bold_csv(_write(tmp_path, "a,b\n"))


def test_csv_nan_cell(tmp_path):
    with pytest.raises(ParseError, match="'b'") as info:
        load_bold_csv(_write(tmp_path, "a,b\n1,2\n3,NaN\n"))
    assert info.value.line == 3


def test_csv_ragged_and_text(tmp_path):
    with pytest.raises(ParseError) as info:
        load_bold_csv(_write(tmp_path, "a,b\n1,2\n3\n"))
    assert info.value.line == 3
    with pytest.raises(ParseError) as info:
        load_bold_csv(_write(tmp_path, "a,b\nx,2\n3,4\n"))
    assert info.value.line == 2


def test_csv_empty_file(tmp_path):
    with pytest.raises(ParseError):
        load_bold_csv(_write(tmp_path, ""))


def test_csv_round_trip(tmp_path, rng):
    d = Dataset(rng.standard_normal((7, 3)), 2.0, ["x", "y", "z"])
    p = tmp_path / "out.csv"
    write_bold_csv(p, d)
    back = load_bold_csv(p)
    np.testing.assert_array_equal(back.Y, d.Y)
    assert back.region_names == d.region_names


# ---------------------------------------------------------- Monte Carlo


@pytest.fixture(scope="module")
def small_report():
    cfg = tiny()
    return cfg, run_monte_carlo(cfg, jobs=1)


def test_single_run_single_assumption():
    cfg = tiny(runs=1, assumptions=("W",))
    report = run_monte_carlo(cfg)
    assert len(report["records"]) == 1
    rec = report["records"][0]
    assert rec["status"] == "ok"
    for m in METRICS:
        assert m in rec
    assert report["pairwise"] == []


def test_report_contents(small_report):
    cfg, report = small_report
    assert report["schema"] == 1
    assert len(report["records"]) == cfg.runs * 3
    assert len(report["pairwise"]) == cfg.runs * 3
    assert set(report["summary"]) == {"W", "AR", "VAR", "pairwise_rho_ec"}
    assert report["summary"]["W"]["rmse"]["count"] == cfg.runs


def test_parallel_matches_serial(small_report):
    cfg, report = small_report
    par = run_monte_carlo(cfg, jobs=2)
    for a, b in zip(report["records"], par["records"]):
        assert a["A_hat"] == b["A_hat"]
        assert a["rmse"] == b["rmse"]


def test_recompute_metrics_reproduces(small_report):
    _, report = small_report
    again = recompute_metrics(report)
    ok = [r for r in report["records"] if r["status"] == "ok"]
    assert len(again) == len(ok)
    for r, s in zip(ok, again):
        for m in METRICS:
            assert s[m] == pytest.approx(r[m], abs=1e-12)


def test_emit_report_round_trip(small_report, tmp_path):
    cfg, report = small_report
    paths = emit_report(report, tmp_path)
    back = load_report(tmp_path)
    for r, s in zip(report["records"], back["records"]):
        for m in METRICS:
            assert s[m] == r[m]
    with open(paths["metrics"]) as fh:
        rows = list(csv.reader(fh))
    assert len(rows) - 1 == cfg.runs * len(cfg.assumptions)
    assert back["config"] == json.loads(json.dumps(cfg.to_dict()))


def test_emit_empty_report(tmp_path):
    emit_report({}, tmp_path)
    back = load_report(tmp_path / "results.json")
    assert back["schema"] == 1 and back["records"] == []


def test_emit_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        emit_report({}, blocker / "sub")


def test_failed_cells_recorded_and_batch_error():
    # an unstable A makes every generation fail
    cfg = tiny(A_true=np.array([[0.2, 0.0], [0.0, -0.5]]), runs=2, assumptions=("W",))
    rec = run_cell(cfg, fir_prior_for(cfg), 0, "W")
    assert rec["status"] == "failed" and "GenerationError" in rec["error"]
    with pytest.raises(BatchError) as info:
        run_monte_carlo(cfg)
    assert info.value.report["failures"] == 2


def test_quartiles():
    q = quartiles([1.0, 2.0, 3.0, 4.0, 5.0, float("nan")])
    assert (q["min"], q["median"], q["max"], q["count"]) == (1.0, 3.0, 5.0, 5)
    assert quartiles([]) is None


def test_two_regions_fc_correlation_undefined():
    cfg = tiny(A_true=np.array([[-0.6, 0.0], [0.4, -0.7]]), runs=1, assumptions=("W",))
    rec = run_cell(cfg, fir_prior_for(cfg), 0, "W")
    assert rec["status"] == "ok"
    assert np.isnan(rec["rho_fc_est"]) and np.isfinite(rec["rmse"])
