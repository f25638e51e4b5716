"""Sparse Bayesian learning on the coupling matrix.

The prior is vec(A') ~ N(0, Gamma) with one variance per entry, so entry
``i * n + j`` of every vector here is ``A[i, j]``. Hyperparameters are
re-estimated from the linear regression x = Phi a + b with
Cov(b) = q kron I_N.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ..errors import NumericalError

PRUNE_TOL = 1e-6
RULES = ("mackay", "em")


@dataclass
class SBLState:
    gamma: np.ndarray
    prune_mask: np.ndarray = None

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=float).copy()
        if self.prune_mask is None:
            self.prune_mask = self.gamma == 0.0
        self.prune_mask = np.asarray(self.prune_mask, dtype=bool).copy()
        self.gamma[self.prune_mask] = 0.0

    @classmethod
    def ones(cls, n):
        return cls(np.ones(n * n))

    @property
    def active(self):
        return ~self.prune_mask


def regression_design(X, T_R):
    """Phi = (I_n kron X) T_R for the stacked regression on vec(A')."""
    X = np.asarray(X, dtype=float)
    n = X.shape[1]
    return np.kron(np.eye(n), X) * T_R


def regression_gram(X, q, T_R):
    """Phi' (q kron I)^-1 Phi without forming Phi."""
    X = np.asarray(X, dtype=float)
    return T_R**2 * np.kron(np.linalg.inv(q), X.T @ X)


def _reweight(g, quad, a_hat, rule):
    """New gamma from quad_i = phi_i' S^-1 phi_i.

    ``"em"`` is gamma - gamma^2 quad + a^2. ``"mackay"`` is the fixed-point
    form a^2 / (gamma quad), which has the same stationary points but
    drives irrelevant entries to zero geometrically instead of like 1/l.
    """
    a2 = np.asarray(a_hat, dtype=float) ** 2
    if rule == "em":
        return g - g**2 * quad + a2
    if rule != "mackay":
        raise ValueError(f"rule must be one of {RULES}, got {rule!r}")
    denom = g * quad
    out = np.zeros_like(g)
    ok = denom > 0
    out[ok] = a2[ok] / denom[ok]
    return out


def _apply_update(sbl, gamma_new, prune_tol):
    gamma_new = np.where(sbl.prune_mask, 0.0, np.maximum(gamma_new, 0.0))
    mask = sbl.prune_mask | (gamma_new < prune_tol)
    gamma_new[mask] = 0.0
    return SBLState(gamma_new, mask)


def sbl_update(sbl, Phi, a_hat, q, prune_tol=PRUNE_TOL, rule="em"):
    """Reweighting step with the explicit (Phi Gamma Phi' + q kron I_N)^-1.

    Meant for small problems and as a reference for ``sbl_update_gram``.
    """
    Phi = np.asarray(Phi, dtype=float)
    n = np.atleast_2d(q).shape[0]
    N = Phi.shape[0] // n
    g = sbl.gamma
    S = (Phi * g) @ Phi.T + np.kron(np.atleast_2d(q), np.eye(N))
    # symmetric indefinite solve after diagonal equilibration
    d = np.sqrt(np.diag(S))
    if not np.all(d > 0):
        raise NumericalError("SBL inner matrix has a zero diagonal entry")
    Phi_e = Phi / d[:, None]
    try:
        X = scipy.linalg.solve(S / np.outer(d, d), Phi_e, assume_a="sym")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"SBL inner matrix is singular: {exc}") from None
    quad = np.einsum("ij,ij->j", Phi_e, X)
    return _apply_update(sbl, _reweight(g, quad, a_hat, rule), prune_tol)


def sbl_update_gram(sbl, H, a_hat, prune_tol=PRUNE_TOL, rule="em"):
    """Same update written in terms of the gram H = Phi' (q kron I)^-1 Phi.

    Uses diag(Phi' S^-1 Phi) = diag(H - H G (I + G H G)^-1 G H) with
    G = Gamma^(1/2), which stays well defined when some gamma are zero.
    """
    g = sbl.gamma
    root = np.sqrt(g)
    inner = np.eye(g.size) + root[:, None] * H * root[None, :]
    HG = H * root[None, :]
    try:
        c = scipy.linalg.cho_factor(inner, lower=True)
    except np.linalg.LinAlgError:
        raise NumericalError("SBL inner matrix is not positive definite") from None
    quad = np.diag(H) - np.einsum("ij,ji->i", HG, scipy.linalg.cho_solve(c, HG.T))
    return _apply_update(sbl, _reweight(g, quad, a_hat, rule), prune_tol)


def map_coefficients(H, c, gamma):
    """argmax_a  a'c - a'H a / 2 - a' Gamma^-1 a / 2  (zero where gamma is zero)."""
    root = np.sqrt(gamma)
    inner = np.eye(gamma.size) + root[:, None] * H * root[None, :]
    try:
        sol = scipy.linalg.solve(inner, root * c, assume_a="pos")
    except np.linalg.LinAlgError:
        sol = np.linalg.solve(inner + 1e-8 * np.eye(gamma.size), root * c)
    return root * sol
