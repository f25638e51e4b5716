import json

import numpy as np
import pytest

from rsdcm.balloon import BalloonParams, simulate_bold
from rsdcm.errors import ConfigurationError, ShapeError
from rsdcm.hemo import (
    BalloonPrior, FIRPrior, HemoFIR, build_fir_prior, check_tail_decay, impulse_response,
)

P = BalloonParams()


def test_impulse_response_sign_pattern():
    h = impulse_response(P, 16, 2.0)
    assert h[0] == 0.0
    peak = np.argmax(h)
    assert h[peak] > 0
    assert np.min(h[peak:]) < 0
    assert np.argmin(h) > peak
    assert check_tail_decay(h)


def test_impulse_response_against_fine_integration():
    # oracle: dt = 1e-3 integration of the same small impulse, sampled at T_R
    h = impulse_response(P, 16, 2.0, dt=0.05)
    dt = 1e-3
    x = np.zeros((int(30 / dt) + 1, 1))
    x[: int(0.05 / dt), 0] = 1e-4 / 0.05
    y = simulate_bold(x, dt, P)[:: int(2.0 / dt), 0] / 1e-4
    np.testing.assert_allclose(h[:16], y[:16], atol=0.02 * np.max(np.abs(h)))


def test_doubling_s_keeps_prefix():
    h16 = impulse_response(P, 16, 2.0)
    h32 = impulse_response(P, 32, 2.0)
    np.testing.assert_allclose(h32[:16], h16, rtol=0, atol=1e-12)


def test_zero_area_gives_zero():
    assert np.all(impulse_response(P, 16, 2.0, area=0.0) == 0.0)


def test_area_scaling_is_linear():
    np.testing.assert_allclose(impulse_response(P, 16, 2.0, area=3.0), 3.0 * impulse_response(P, 16, 2.0))


@pytest.mark.parametrize("s,T_R,dt", [(8, 2.0, 0.05), (16, 2.0, 0.3)])
def test_impulse_response_preconditions(s, T_R, dt):
    with pytest.raises(ValueError):
        impulse_response(P, s, T_R, dt)


def test_degenerate_prior():
    prior = BalloonPrior(log_std={})
    fp = build_fir_prior(prior, s=16, num_samples=5)
    assert np.all(fp.Sigma_h == 0.0)
    np.testing.assert_allclose(fp.h_bar, impulse_response(P, 16, 2.0), atol=1e-14)


def test_prior_covariance_psd(fir_prior):
    S = fir_prior.Sigma_h
    np.testing.assert_array_equal(S, S.T)
    assert np.min(np.linalg.eigvalsh(S)) >= -1e-10
    assert check_tail_decay(fir_prior.h_bar)


def test_prior_monte_carlo_convergence():
    h1 = build_fir_prior(num_samples=1000, seed=1).h_bar
    h2 = build_fir_prior(num_samples=2000, seed=1).h_bar
    assert np.linalg.norm(h1 - h2) / np.linalg.norm(h2) < 0.05


def test_prior_is_deterministic():
    a = build_fir_prior(num_samples=50, seed=4)
    b = build_fir_prior(num_samples=50, seed=4)
    assert a.to_json() == b.to_json()
    c = build_fir_prior(num_samples=50, seed=5)
    assert not np.array_equal(a.h_bar, c.h_bar)


def test_prior_draws_use_per_draw_streams():
    # draw i only depends on (seed, i): the first 20 draws of a 40-draw prior
    # reproduce a 20-draw prior exactly
    a = build_fir_prior(num_samples=20, seed=9)
    prior = BalloonPrior()
    H = np.array([impulse_response(prior.sample(np.random.default_rng([9, i])), 16, 2.0) for i in range(20)])
    np.testing.assert_allclose(a.h_bar, H.mean(axis=0), rtol=1e-12, atol=1e-15)


class _BadRho(BalloonPrior):
    def draw(self, rng):
        values = super().draw(rng)
        values["rho"] = 1.5 if rng.uniform() < 0.8 else 0.3
        return values


def test_too_many_rejections():
    prior = _BadRho()
    with pytest.raises(ConfigurationError):
        build_fir_prior(prior, num_samples=20)


def test_prior_json_round_trip(fir_prior):
    text = fir_prior.to_json()
    d = json.loads(text)
    assert set(d) >= {"s", "T_R", "h_bar", "Sigma_h"}
    assert d["s"] == 16 and d["T_R"] == 2.0
    back = FIRPrior.from_json(text)
    np.testing.assert_array_equal(back.h_bar, fir_prior.h_bar)
    np.testing.assert_array_equal(back.Sigma_h, fir_prior.Sigma_h)


def test_prior_json_inconsistent_s(fir_prior):
    d = json.loads(fir_prior.to_json())
    d["s"] = 3
    with pytest.raises(ShapeError):
        FIRPrior.from_json(json.dumps(d))


def test_regularized_cov_is_positive_definite():
    fp = FIRPrior(np.ones(3), np.zeros((3, 3)), 2.0)
    np.linalg.cholesky(fp.regularized_cov())


def test_hemofir_shapes():
    f = HemoFIR(np.ones(16), 2.0)
    assert (f.n, f.s) == (1, 16)
    with pytest.raises(ShapeError):
        HemoFIR(np.array([[np.nan, 1.0]]), 2.0)


def test_balloon_prior_dict_round_trip():
    p = BalloonPrior(log_std={"tau": 0.1})
    q = BalloonPrior.from_dict(p.to_dict())
    assert q == p
