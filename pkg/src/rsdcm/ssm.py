"""Lifted linear state-space models with FIR hemodynamics.

State ordering is ``[w; x(k); x(k-1); ...; x(k-s+1)]`` where the ``w``
block only exists for autoregressive noise. The first ``m`` coordinates
are driven by noise; the lag blocks are deterministic shift registers,
so the process covariance is ``blkdiag(Q_stoch, 0)``.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .dynamics import AR, VAR, White, build_joint, discretize_white, symmetrize
from .errors import InstabilityError, ShapeError
from .hemo import HemoFIR

DIRECT_LYAPUNOV_MAX_DIM = 30


@dataclass(frozen=True)
class StateLayout:
    n: int
    s: int
    has_w: bool

    @property
    def offset(self):
        return self.n if self.has_w else 0

    @property
    def d(self):
        return self.offset + self.n * self.s

    @property
    def m(self):
        """Size of the stochastic block (leading coordinates)."""
        return 2 * self.n if self.has_w else self.n

    @property
    def w(self):
        return slice(0, self.n) if self.has_w else None

    @property
    def x(self):
        return slice(self.offset, self.offset + self.n)

    def lag(self, l):
        start = self.offset + l * self.n
        return slice(start, start + self.n)

    def region_taps(self, i):
        """Indices of x_i(k), x_i(k-1), ..., x_i(k-s+1)."""
        return self.offset + i + self.n * np.arange(self.s)


@dataclass(frozen=True, eq=False)
class LinearSSM:
    """x(k+1) = F x(k) + noise(Q), y(k) = C x(k) + e(k), Var e = eps I."""

    F: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    eps: float
    layout: StateLayout

    @property
    def d(self):
        return self.layout.d

    @property
    def n_out(self):
        return self.C.shape[0]

    @property
    def Q_stoch(self):
        m = self.layout.m
        return self.Q[:m, :m]


def _taps(h, n):
    if isinstance(h, HemoFIR):
        h = h.h
    elif isinstance(h, (list, tuple)):
        rows = [np.ravel(r.h if isinstance(r, HemoFIR) else r) for r in h]
        if len({r.size for r in rows}) > 1:
            raise ShapeError(f"regions have different tap counts: {[r.size for r in rows]}")
        h = np.array(rows, dtype=float)
    h = np.atleast_2d(np.asarray(h, dtype=float))
    if h.shape[0] == 1 and n > 1:
        h = np.tile(h, (n, 1))
    if h.shape[0] != n:
        raise ShapeError(f"got FIR taps for {h.shape[0]} regions, expected {n}")
    return h


def output_matrix(h, layout):
    """C = [0 | diag(h[:,0]) | diag(h[:,1]) | ...] (zero block over w if present)."""
    n, s = layout.n, layout.s
    C = np.zeros((n, layout.d))
    for l in range(s):
        C[:, layout.lag(l)] = np.diag(h[:, l])
    return C


def _shift_rows(F, layout):
    n = layout.n
    for l in range(1, layout.s):
        F[layout.lag(l), layout.lag(l - 1)] = np.eye(n)


def assemble_white(A, sigma, h, T_R, eps):
    """Lifted model for white endogenous noise (state dimension n*s)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    h = _taps(h, n)
    layout = StateLayout(n, h.shape[1], has_w=False)
    disc = discretize_white(A, sigma, T_R)
    F = np.zeros((layout.d, layout.d))
    F[:n, :n] = disc.Ad
    _shift_rows(F, layout)
    Q = np.zeros_like(F)
    Q[:n, :n] = disc.Qw
    return LinearSSM(F, output_matrix(h, layout), Q, float(eps), layout)


def assemble_var(A, noise, h, T_R, eps):
    """Lifted model for AR(1)/VAR(1) endogenous noise (state dimension n*(s+1))."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    h = _taps(h, n)
    layout = StateLayout(n, h.shape[1], has_w=True)
    joint = build_joint(A, noise, T_R)
    F = np.zeros((layout.d, layout.d))
    F[: 2 * n, : 2 * n] = joint.Md
    _shift_rows(F, layout)
    Q = np.zeros_like(F)
    Q[: 2 * n, : 2 * n] = joint.Q_eta
    return LinearSSM(F, output_matrix(h, layout), Q, float(eps), layout)


def assemble(A, noise, h, T_R, eps):
    if isinstance(noise, White):
        return assemble_white(A, noise.sigma, h, T_R, eps)
    return assemble_var(A, noise, h, T_R, eps)


def spectral_radius(F):
    return float(np.max(np.abs(np.linalg.eigvals(F)))) if F.size else 0.0


def _lyap_direct(F, Q):
    d = F.shape[0]
    vec = np.linalg.solve(np.eye(d * d) - np.kron(F, F), Q.reshape(-1))
    return vec.reshape(d, d)


def _lyap_doubling(F, Q, max_iter=100):
    S = Q.copy()
    Fk = F.copy()
    for _ in range(max_iter):
        inc = Fk @ S @ Fk.T
        S = S + inc
        if np.max(np.abs(inc)) <= 1e-17 * max(np.max(np.abs(S)), 1e-300):
            break
        Fk = Fk @ Fk
    return S


def stationary_covariance(ssm_or_F, Q=None):
    """Solve S = F S F' + Q for a Schur-stable F.

    Small problems use the Kronecker-vectorized linear system; larger ones
    the squared-Smith (doubling) iteration.
    """
    if Q is None:
        F, Q = ssm_or_F.F, ssm_or_F.Q
    else:
        F = ssm_or_F
    F = np.atleast_2d(np.asarray(F, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    rho = spectral_radius(F)
    if rho >= 1.0 - 1e-9:
        raise InstabilityError(f"spectral radius {rho:.12g} is not below 1")
    if F.shape[0] <= DIRECT_LYAPUNOV_MAX_DIM:
        S = _lyap_direct(F, Q)
    else:
        S = _lyap_doubling(F, Q)
    return symmetrize(S)


def lyapunov_residual(F, S, Q):
    """Relative Frobenius residual of S = F S F' + Q."""
    return np.linalg.norm(S - F @ S @ F.T - Q) / max(np.linalg.norm(Q), 1e-300)


def recover_A(ssm, T_R):
    """Continuous-time coupling from the transition block via the matrix log."""
    n = ssm.layout.n
    blk = ssm.F[: 2 * n, : 2 * n] if ssm.layout.has_w else ssm.F[:n, :n]
    L = np.real(scipy.linalg.logm(blk)) / T_R
    return L[n:, n:] if ssm.layout.has_w else L
