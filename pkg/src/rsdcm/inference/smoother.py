"""Kalman filter and Rauch-Tung-Striebel smoother for lifted FIR models.

Time indexing: state ``x(0)`` carries the prior N(m0, P0) and observations
``y(1..N)`` are the rows of ``Y``. All per-step arrays therefore have a
leading dimension of ``N + 1`` with index 0 for the initial state.

Covariance recursions do not depend on the data. Once the predicted
covariance stops changing (relative max-abs change below ``steady_tol``)
the filter reuses it for the remaining steps; the smoother does the same
for its backward covariance recursion. Only the mean recursions then run
per step.
"""
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ..errors import NumericalError

LOG2PI = np.log(2.0 * np.pi)


@dataclass
class FilterResult:
    x_pred: np.ndarray
    P_pred: np.ndarray
    x_filt: np.ndarray
    P_filt: np.ndarray
    loglik: float
    steady_from: int


@dataclass
class SmoothedMoments:
    """Smoothed means/covariances for x(0..N).

    ``G[k]`` is the smoother gain linking x(k) to x(k+1) (k = 0..N-1) and
    ``lag1[k-1]`` is Cov(x(k), x(k-1) | Y) = P_s(k) G(k-1)' (k = 1..N).
    """

    xhat_s: np.ndarray
    P_s: np.ndarray
    G: np.ndarray
    lag1: np.ndarray


class _Transition:
    """Applies F using its block structure: dense top rows, shift below."""

    def __init__(self, ssm):
        lay = ssm.layout
        self.F = ssm.F
        self.m = lay.m
        self.top = ssm.F[: lay.m, : lay.m]
        self.shift = slice(lay.offset, lay.offset + lay.n * (lay.s - 1))
        self.structured = np.count_nonzero(ssm.F[: lay.m, lay.m:]) == 0

    def apply(self, X):
        """F @ X for a vector or matrix X."""
        if not self.structured:
            return self.F @ X
        out = np.empty_like(X)
        out[: self.m] = self.top @ X[: self.m]
        out[self.m:] = X[self.shift]
        return out

    def sandwich(self, P):
        """F P F'."""
        FP = self.apply(P)
        return self.apply(FP.T)


def _steady(a, b, tol):
    scale = np.max(np.abs(a))
    return np.max(np.abs(a - b)) <= tol * max(scale, 1e-300)


def kalman_filter(ssm, Y, m0=None, P0=None, steady_tol=1e-13):
    """Forward pass with Joseph-form covariance update.

    Returns predicted and filtered moments for every step and the exact
    Gaussian log-likelihood of ``Y``.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    N, n = Y.shape
    d = ssm.d
    if n != ssm.n_out:
        raise ValueError(f"Y has {n} channels, model has {ssm.n_out}")
    if not np.all(np.isfinite(Y)):
        raise ValueError("Y contains non-finite values")
    m0 = np.zeros(d) if m0 is None else np.asarray(m0, dtype=float)
    P0 = np.eye(d) if P0 is None else np.asarray(P0, dtype=float)
    C, Q, eps = ssm.C, ssm.Q, ssm.eps
    trans = _Transition(ssm)
    R = eps * np.eye(n)

    x_pred = np.empty((N + 1, d))
    x_filt = np.empty((N + 1, d))
    P_pred = np.empty((N + 1, d, d))
    P_filt = np.empty((N + 1, d, d))
    x_pred[0] = x_filt[0] = m0
    P_pred[0] = P_filt[0] = P0

    loglik = 0.0
    steady_from = N + 1
    gain = None
    chol = None
    logdet = 0.0
    degenerate = False
    for k in range(1, N + 1):
        xp = trans.apply(x_filt[k - 1])
        x_pred[k] = xp
        if k <= steady_from:
            Pp = trans.sandwich(P_filt[k - 1]) + Q
            Pp = 0.5 * (Pp + Pp.T)
            PCt = Pp @ C.T
            S = C @ PCt + R
            S = 0.5 * (S + S.T)
            try:
                chol = scipy.linalg.cho_factor(S, lower=True)
                degenerate = False
            except np.linalg.LinAlgError:
                if np.max(np.abs(S)) <= 1e-300:
                    chol, degenerate = None, True
                else:
                    raise NumericalError(
                        f"innovation covariance is not positive definite at step {k}", step=k
                    ) from None
            if degenerate:
                gain = np.zeros((d, n))
                Pf = Pp
                logdet = 0.0
            else:
                gain = scipy.linalg.cho_solve(chol, PCt.T).T
                logdet = 2.0 * np.sum(np.log(np.diag(chol[0])))
                X = Pp - gain @ (C @ Pp)
                Pf = X - (X @ C.T) @ gain.T + gain @ R @ gain.T
                Pf = 0.5 * (Pf + Pf.T)
            P_pred[k] = Pp
            P_filt[k] = Pf
            if k >= 2 and steady_from > N and _steady(Pp, P_pred[k - 1], steady_tol):
                steady_from = k
        else:
            P_pred[k] = P_pred[k - 1]
            P_filt[k] = P_filt[k - 1]
        innov = Y[k - 1] - C @ xp
        if degenerate:
            if np.max(np.abs(innov)) > 1e-12 * max(1.0, np.max(np.abs(Y[k - 1]))):
                raise NumericalError(
                    f"deterministic model contradicts the data at step {k}", step=k
                )
            x_filt[k] = xp
            continue
        x_filt[k] = xp + gain @ innov
        sol = scipy.linalg.cho_solve(chol, innov)
        loglik -= 0.5 * (n * LOG2PI + logdet + innov @ sol)
    return FilterResult(x_pred, P_pred, x_filt, P_filt, float(loglik), min(steady_from, N + 1))


def _smoother_gain(trans, Pf, Pp, k):
    PFt = trans.apply(Pf).T  # Pf F'
    try:
        c = scipy.linalg.cho_factor(Pp, lower=True)
        return scipy.linalg.cho_solve(c, PFt.T).T
    except np.linalg.LinAlgError:
        warnings.warn(
            f"predicted covariance singular at step {k}; using pseudo-inverse", RuntimeWarning
        )
        return PFt @ np.linalg.pinv(Pp, hermitian=True)


def rts_smoother(ssm, filt, steady_tol=1e-13):
    """Backward RTS pass producing smoothed moments and lag-one covariances."""
    x_f, P_f, x_p, P_p = filt.x_filt, filt.P_filt, filt.x_pred, filt.P_pred
    N = x_f.shape[0] - 1
    d = ssm.d
    trans = _Transition(ssm)
    xs = np.empty_like(x_f)
    Ps = np.empty_like(P_f)
    G = np.empty((N, d, d))
    lag1 = np.empty((N, d, d))
    xs[N] = x_f[N]
    Ps[N] = P_f[N]
    steady_gain = None
    s_from = filt.steady_from
    converged = False
    for k in range(N - 1, -1, -1):
        # the gain is constant when both k and k+1 lie in the steady region
        if k >= s_from:
            if steady_gain is None:
                steady_gain = _smoother_gain(trans, P_f[k], P_p[k + 1], k)
            Gk = steady_gain
        else:
            Gk = _smoother_gain(trans, P_f[k], P_p[k + 1], k)
        G[k] = Gk
        xs[k] = x_f[k] + Gk @ (xs[k + 1] - x_p[k + 1])
        if converged and k >= s_from:
            Ps[k] = Ps[k + 1]
            lag1[k] = lag1[k + 1]
            continue
        P = P_f[k] + Gk @ (Ps[k + 1] - P_p[k + 1]) @ Gk.T
        Ps[k] = 0.5 * (P + P.T)
        lag1[k] = Ps[k + 1] @ Gk.T
        if k >= s_from and k + 1 < N and _steady(Ps[k], Ps[k + 1], steady_tol):
            converged = True
    return SmoothedMoments(xs, Ps, G, lag1)
