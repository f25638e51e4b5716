"""Nonlinear Balloon-Windkessel hemodynamics: neuronal activity -> BOLD.

Each region is an independent 4-state SISO system with states
(r, f, v, q): vasodilatory signal, inflow, blood volume and
deoxyhemoglobin content. Equilibrium is (0, 1, 1, 1) with zero BOLD.
"""
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence, Union

import numpy as np

from . import _kernels
from .errors import DomainError, IntegrationError

DOMAIN_FLOOR = 1e-9


class BalloonState(NamedTuple):
    r: float
    f: float
    v: float
    q: float


EQUILIBRIUM = BalloonState(0.0, 1.0, 1.0, 1.0)


@dataclass(frozen=True)
class BalloonParams:
    """Biophysical parameters of one region.

    ``k1`` and ``k3`` default to the usual functions of ``rho``
    (7 rho and 2 rho - 0.2) when left as ``None``.
    """

    kappa: float = 0.65
    gamma_f: float = 0.41
    tau: float = 0.98
    rho: float = 0.34
    xi: float = 0.32
    V0: float = 0.4
    k1: float = None
    k2: float = 2.0
    k3: float = None

    def __post_init__(self):
        if self.k1 is None:
            object.__setattr__(self, "k1", 7.0 * self.rho)
        if self.k3 is None:
            object.__setattr__(self, "k3", 2.0 * self.rho - 0.2)
        if not self.tau > 0:
            raise DomainError(f"tau must be positive, got {self.tau}")
        if not 0.0 < self.rho < 1.0:
            raise DomainError(f"rho must lie in (0, 1), got {self.rho}")
        if not self.xi > 0:
            raise DomainError(f"xi must be positive, got {self.xi}")
        if not self.V0 > 0:
            raise DomainError(f"V0 must be positive, got {self.V0}")

    def with_rho(self, rho):
        """Copy with a new ``rho`` and the output constants recomputed from it."""
        return replace(self, rho=rho, k1=None, k3=None)

    def as_vector(self):
        return np.array(
            [self.kappa, self.gamma_f, self.tau, self.rho, self.xi,
             self.V0, self.k1, self.k2, self.k3]
        )


def _check_positive(state):
    if state.f <= DOMAIN_FLOOR or state.v <= DOMAIN_FLOOR or state.q <= DOMAIN_FLOOR:
        raise DomainError(
            f"balloon state out of domain (f={state.f}, v={state.v}, q={state.q}); "
            "f, v and q must be positive"
        )


def balloon_derivatives(state, x_in, p):
    """Time derivative of the Balloon-Windkessel state for input ``x_in``."""
    state = BalloonState(*state)
    _check_positive(state)
    r, f, v, q = state
    vx = v ** (1.0 / p.xi)
    dr = x_in - p.kappa * r - p.gamma_f * (f - 1.0)
    df = r
    dv = (f - vx) / p.tau
    # f (1 - (1-rho)^(1/f)) / rho, arranged to be exactly 1 at f = 1
    base = 1.0 - p.rho
    extraction = f * (1.0 - (base ** (1.0 / f) - base) / p.rho)
    dq = (extraction - v ** (1.0 / p.xi - 1.0) * q) / p.tau
    return BalloonState(dr, df, dv, dq)


def bold_output(state, p):
    """Noise-free BOLD signal of a state."""
    _, _, v, q = state
    if v <= DOMAIN_FLOOR:
        raise DomainError(f"blood volume must be positive, got v={v}")
    return p.V0 * (p.k1 * (1.0 - q) + p.k2 * (1.0 - q / v) + p.k3 * (1.0 - v))


def _param_matrix(params, n):
    if isinstance(params, BalloonParams):
        params = [params] * n
    params = list(params)
    if len(params) != n:
        raise ValueError(f"expected {n} parameter sets, got {len(params)}")
    return np.ascontiguousarray(np.column_stack([p.as_vector() for p in params]))


def simulate_bold(x_series, dt, params, noise_var=None, rng=None):
    """Integrate the Balloon model of every region with fixed-step RK4.

    Parameters
    ----------
    x_series : array_like, shape (K, n)
        Neuronal activity; ``x_series[j]`` is held constant over step j.
    dt : float
        Integration step in seconds.
    params : BalloonParams or sequence of BalloonParams
        One set shared by all regions, or one per region.
    noise_var : float or array_like of shape (n,), optional
        Variance of i.i.d. Gaussian measurement noise added to the output.
    rng : numpy.random.Generator, optional
        Source of the measurement noise.

    Returns
    -------
    ndarray, shape (K, n)
        ``y[j]`` is the BOLD signal at time ``j * dt``, i.e. before input
        ``x_series[j]`` is applied; every region starts at equilibrium.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    x = np.ascontiguousarray(np.asarray(x_series, dtype=float))
    if x.ndim == 1:
        x = x[:, None]
    if not np.all(np.isfinite(x)):
        raise ValueError("x_series contains non-finite values")
    y, step, region = _kernels.balloon_rk4(x, float(dt), _param_matrix(params, x.shape[1]))
    if step >= 0:
        raise IntegrationError(
            f"Balloon state left the valid domain at step {step} in region {region}",
            step=int(step),
            region=int(region),
        )
    if noise_var is not None:
        rng = np.random.default_rng() if rng is None else rng
        std = np.sqrt(np.broadcast_to(np.asarray(noise_var, dtype=float), (x.shape[1],)))
        y = y + rng.standard_normal(y.shape) * std
    return y
