"""Statistical linearization of the Balloon model into an FIR filter.

The FIR taps of a region are the small-signal impulse response of its
Balloon model sampled every ``T_R`` seconds. Drawing the biophysical
parameters from their prior and collecting the resulting taps gives a
Gaussian prior (``h_bar``, ``Sigma_h``) on the taps.
"""
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .balloon import BalloonParams, simulate_bold
from .errors import ConfigurationError, DomainError, ShapeError

SIGMA_H_JITTER = 1e-10
PROBE_AREA = 1e-4


@dataclass(frozen=True)
class BalloonPrior:
    """Log-normal prior around ``mean`` for kappa, gamma_f, tau and rho.

    ``log_std`` maps a parameter name to the standard deviation of its
    logarithm; parameters not listed are held at the mean.
    """

    mean: BalloonParams = field(default_factory=BalloonParams)
    log_std: dict = field(
        default_factory=lambda: {"kappa": 0.015, "gamma_f": 0.015, "tau": 0.015, "rho": 0.015}
    )

    def draw(self, rng):
        """One raw draw, as a dict of parameter values (may be invalid)."""
        values = {}
        for name in ("kappa", "gamma_f", "tau", "rho"):
            base = getattr(self.mean, name)
            std = float(self.log_std.get(name, 0.0))
            values[name] = base * math.exp(std * rng.standard_normal()) if std > 0 else base
        return values

    def sample(self, rng, max_tries=100):
        """Draw a valid parameter set, redrawing when rho falls outside (0, 1)."""
        for _ in range(max_tries):
            values = self.draw(rng)
            if 0.0 < values["rho"] < 1.0:
                return _params_from(self.mean, values)
        raise ConfigurationError(f"Balloon prior produced no valid draw in {max_tries} tries")

    def to_dict(self):
        m = self.mean
        return {
            "mean": {k: getattr(m, k) for k in ("kappa", "gamma_f", "tau", "rho", "xi", "V0", "k2")},
            "log_std": dict(self.log_std),
        }

    @classmethod
    def from_dict(cls, d):
        mean = BalloonParams(**d.get("mean", {}))
        log_std = d.get("log_std")
        return cls(mean=mean) if log_std is None else cls(mean=mean, log_std=dict(log_std))


def _params_from(mean, values):
    return BalloonParams(
        kappa=values["kappa"], gamma_f=values["gamma_f"], tau=values["tau"],
        rho=values["rho"], xi=mean.xi, V0=mean.V0, k2=mean.k2,
    )


@dataclass(frozen=True)
class HemoFIR:
    """Per-region FIR taps, ``h[i, l]`` weighting ``x_i(k - l)``."""

    h: np.ndarray
    T_R: float

    def __post_init__(self):
        h = np.atleast_2d(np.asarray(self.h, dtype=float))
        if h.shape[1] < 1 or not np.all(np.isfinite(h)):
            raise ShapeError(f"FIR taps must be a finite (n, s) array, got shape {h.shape}")
        object.__setattr__(self, "h", h)

    @property
    def n(self):
        return self.h.shape[0]

    @property
    def s(self):
        return self.h.shape[1]


@dataclass(frozen=True)
class FIRPrior:
    """Gaussian prior N(h_bar, Sigma_h) shared by the taps of every region."""

    h_bar: np.ndarray
    Sigma_h: np.ndarray
    T_R: float

    def __post_init__(self):
        h_bar = np.asarray(self.h_bar, dtype=float).ravel()
        S = np.asarray(self.Sigma_h, dtype=float)
        if S.shape != (h_bar.size, h_bar.size):
            raise ShapeError(f"Sigma_h has shape {S.shape}, expected {(h_bar.size,) * 2}")
        object.__setattr__(self, "h_bar", h_bar)
        object.__setattr__(self, "Sigma_h", 0.5 * (S + S.T))

    @property
    def s(self):
        return self.h_bar.size

    def regularized_cov(self):
        return self.Sigma_h + SIGMA_H_JITTER * np.eye(self.s)

    def tiled(self, n):
        """Prior mean broadcast to ``n`` regions."""
        return HemoFIR(np.tile(self.h_bar, (n, 1)), self.T_R)

    def to_json(self):
        return json.dumps(
            {"schema": 1, "s": self.s, "T_R": self.T_R,
             "h_bar": self.h_bar.tolist(), "Sigma_h": self.Sigma_h.tolist()}
        )

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        prior = cls(np.array(d["h_bar"]), np.array(d["Sigma_h"]), float(d["T_R"]))
        if prior.s != int(d["s"]):
            raise ShapeError(f"cached prior declares s={d['s']} but holds {prior.s} taps")
        return prior


def _stride(T_R, dt):
    stride = int(round(T_R / dt))
    if stride < 1 or abs(stride * dt - T_R) > 1e-9 * max(T_R, 1.0):
        raise ValueError(f"dt={dt} does not divide T_R={T_R}")
    return stride


def impulse_response(p, s, T_R, dt=0.05, area=1.0):
    """FIR taps h_0..h_{s-1} of the linearized Balloon model of one region.

    The response to an impulse of the requested ``area`` is obtained by
    integrating the nonlinear model with a tiny probe impulse (one step of
    amplitude ``PROBE_AREA / dt``) and rescaling, so the result is the
    small-signal response around equilibrium. Taps are the BOLD values at
    times ``l * T_R``.
    """
    if s < 1:
        raise ValueError("s must be at least 1")
    stride = _stride(T_R, dt)
    if s * T_R < 30.0:
        raise ValueError(f"s*T_R = {s * T_R} s does not cover the 30 s hemodynamic memory")
    if area == 0:
        return np.zeros(s)
    K = (s - 1) * stride + 1
    x = np.zeros((K, 1))
    x[0, 0] = PROBE_AREA / dt
    y = simulate_bold(x, dt, p)[::stride, 0]
    return y[:s] * (area / PROBE_AREA)


def check_tail_decay(h, frac=0.05):
    """True when the last tap is at most ``frac`` of the largest one."""
    h = np.asarray(h, dtype=float)
    return abs(h[-1]) <= frac * np.max(np.abs(h))


def build_fir_prior(prior_cfg=None, s=16, T_R=2.0, num_samples=1000, seed=0, dt=0.05):
    """Monte-Carlo FIR prior from the Balloon parameter prior.

    Draw ``i`` uses its own generator seeded by ``(seed, i)``, so the result
    does not depend on how draws are scheduled. Invalid draws are redrawn
    from the same substream; if more than half of all attempts are
    rejected the configuration is refused.
    """
    if num_samples < 2:
        raise ValueError("num_samples must be at least 2")
    prior_cfg = BalloonPrior() if prior_cfg is None else prior_cfg
    params = []
    rejected = 0
    for i in range(num_samples):
        rng = np.random.default_rng([seed, i])
        while True:
            values = prior_cfg.draw(rng)
            if 0.0 < values["rho"] < 1.0:
                params.append(_params_from(prior_cfg.mean, values))
                break
            rejected += 1
            if rejected > num_samples:
                raise ConfigurationError(
                    f"Balloon prior rejects more than half of its draws ({rejected} rejected)"
                )
    stride = _stride(T_R, dt)
    if s * T_R < 30.0:
        raise ValueError(f"s*T_R = {s * T_R} s does not cover the 30 s hemodynamic memory")
    K = (s - 1) * stride + 1
    x = np.zeros((K, num_samples))
    x[0] = PROBE_AREA / dt
    H = simulate_bold(x, dt, params)[::stride][:s].T / PROBE_AREA
    h_bar = H.mean(axis=0)
    # shifting by one draw is exact for identical draws and leaves the covariance unchanged
    Sigma = np.cov(H - H[0], rowvar=False, ddof=1)
    return FIRPrior(h_bar, Sigma, T_R)
