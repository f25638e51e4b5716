"""Continuous-to-discrete conversion of the neuronal dynamics and noise.

All covariance integrals of the form int_0^T e^{M t} S e^{M' t} dt are
evaluated exactly with Van Loan's augmented matrix exponential.
"""
from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.linalg

from .errors import ShapeError

_SYM_TOL = 1e-12


@dataclass(frozen=True)
class White:
    """Continuous white noise with intensity ``sigma * I``."""

    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    kind = "W"


@dataclass(frozen=True)
class AR:
    """First-order CT autoregressive noise w' = lambda w + v, v of intensity ``delta * I``."""

    lam: float
    delta: float

    def __post_init__(self):
        if not self.lam < 0:
            raise ValueError(f"AR rate must be negative (Hurwitz), got {self.lam}")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")

    kind = "AR"

    def rates(self, n):
        return np.full(n, float(self.lam))


@dataclass(frozen=True)
class VAR:
    """Diagonal first-order CT autoregressive noise with one rate per region."""

    lambdas: tuple
    delta: float

    def __post_init__(self):
        lams = tuple(float(v) for v in np.ravel(self.lambdas))
        object.__setattr__(self, "lambdas", lams)
        if not all(v < 0 for v in lams):
            raise ValueError(f"every AR rate must be negative (Hurwitz), got {lams}")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")

    kind = "VAR"

    def rates(self, n):
        if len(self.lambdas) != n:
            raise ShapeError(f"VAR noise has {len(self.lambdas)} rates for {n} regions")
        return np.array(self.lambdas)


NoiseModel = Union[White, AR, VAR]


def noise_to_dict(noise):
    if isinstance(noise, White):
        return {"kind": "W", "sigma": noise.sigma}
    if isinstance(noise, AR):
        return {"kind": "AR", "lambda": noise.lam, "delta": noise.delta}
    return {"kind": "VAR", "lambdas": list(noise.lambdas), "delta": noise.delta}


def noise_from_dict(d):
    kind = d["kind"].upper()
    if kind == "W":
        return White(float(d["sigma"]))
    if kind == "AR":
        return AR(float(d["lambda"]), float(d["delta"]))
    if kind == "VAR":
        return VAR(tuple(d["lambdas"]), float(d["delta"]))
    raise ValueError(f"unknown noise kind {d['kind']!r}")


@dataclass(frozen=True)
class DiscretizedDynamics:
    Ad: np.ndarray
    Qw: np.ndarray
    T_R: float


@dataclass(frozen=True)
class JointDiscretized:
    """Sampled (w, x) dynamics; state ordering is [w; x]."""

    Md: np.ndarray
    Q_eta: np.ndarray
    T_R: float


def expm(M):
    """Matrix exponential (scaling and squaring with a Pade approximant)."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ShapeError(f"expm needs a square matrix, got shape {M.shape}")
    return scipy.linalg.expm(M)


def symmetrize(S):
    return 0.5 * (S + S.T)


def van_loan(M, S, T):
    """Return ``(e^{M T}, int_0^T e^{M t} S e^{M' t} dt)``."""
    k = M.shape[0]
    big = np.zeros((2 * k, 2 * k))
    big[:k, :k] = -M
    big[:k, k:] = S
    big[k:, k:] = M.T
    E = expm(big * T)
    Md = E[k:, k:].T
    return Md, symmetrize(Md @ E[:k, k:])


def _square(A):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise ShapeError(f"A must be square, got shape {A.shape}")
    return A


def discretize_white(A, sigma, T_R):
    """Sample x' = A x + w with white w of intensity ``sigma * I`` every ``T_R`` s."""
    A = _square(A)
    if not T_R > 0:
        raise ValueError(f"T_R must be positive, got {T_R}")
    n = A.shape[0]
    Ad, Qw = van_loan(A, sigma * np.eye(n), T_R)
    return DiscretizedDynamics(Ad, Qw, T_R)


def joint_generator(A, lambdas):
    """Generator of the stacked (w, x) system: [[Lambda, 0], [I, A]]."""
    A = _square(A)
    n = A.shape[0]
    M = np.zeros((2 * n, 2 * n))
    M[:n, :n] = np.diag(lambdas)
    M[n:, :n] = np.eye(n)
    M[n:, n:] = A
    return M


def build_joint(A, noise, T_R):
    """Discretize the joint (w, x) model driven by AR(1)/VAR(1) noise.

    The innovation enters the w-block: Sigma = blkdiag(delta I, 0).
    """
    if isinstance(noise, White):
        raise TypeError("build_joint needs AR or VAR noise")
    if not T_R > 0:
        raise ValueError(f"T_R must be positive, got {T_R}")
    A = _square(A)
    n = A.shape[0]
    lams = noise.rates(n)
    if np.any(lams >= 0):
        raise ValueError("AR rates must be negative")
    M = joint_generator(A, lams)
    S = np.zeros((2 * n, 2 * n))
    S[:n, :n] = noise.delta * np.eye(n)
    Md, Q = van_loan(M, S, T_R)
    return JointDiscretized(Md, Q, T_R)


def dt_ar_equivalent(A, lam, sigma, T_R):
    """Discrete AR(1) description (Delta, Qv) of the sampled noise w_d.

    Qv is the separable double integral
    sigma * int int e^{A t} e^{2 lam s} e^{A' t} ds dt.
    """
    if not lam < 0:
        raise ValueError(f"lambda must be negative, got {lam}")
    A = _square(A)
    n = A.shape[0]
    Delta = np.exp(lam * T_R) * np.eye(n)
    scale = np.expm1(2.0 * lam * T_R) / (2.0 * lam)
    Qv = scale * discretize_white(A, sigma, T_R).Qw
    return Delta, Qv


def ar_model_autocovariance(Delta, Qv, lags=(0, 1)):
    """Autocovariances of the stationary DT AR(1) model w(k) = Delta w(k-1) + v(k)."""
    S = scipy.linalg.solve_discrete_lyapunov(Delta, Qv)
    out = []
    for lag in lags:
        out.append(np.linalg.matrix_power(Delta, lag) @ S)
    return out


def wd_autocovariance(A, lam, delta, T_R):
    """Exact lag-0 and lag-1 autocovariances of w_d under CT AR(1) noise.

    With the joint state z = (w, x) sampled every ``T_R``,
    w_d(k) = x(k+1) - e^{A T_R} x(k) = L z(k) + eta_x(k). The stationary
    covariance of z then gives both moments in closed form.
    """
    A = _square(A)
    n = A.shape[0]
    joint = build_joint(A, AR(lam, delta), T_R)
    Md, Q = joint.Md, joint.Q_eta
    Ad = expm(A * T_R)
    L = Md[n:, :].copy()
    L[:, n:] -= Ad
    S = scipy.linalg.solve_discrete_lyapunov(Md, Q)
    lag0 = L @ S @ L.T + Q[n:, n:]
    lag1 = L @ (Md @ S @ L.T + Q[:, n:])
    return symmetrize(lag0), lag1
