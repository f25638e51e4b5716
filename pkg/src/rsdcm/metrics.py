"""Evaluation metrics for effective and functional connectivity."""
import numpy as np

from .errors import DataError, ShapeError
from .ssm import LinearSSM, stationary_covariance

ZERO_TOL = 1e-3


class UndefinedCorrelationError(DataError):
    """Pearson correlation of a constant vector."""


def pearson(u, v):
    """Centered correlation coefficient of two equal-length vectors."""
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if u.shape != v.shape:
        raise ShapeError(f"length mismatch: {u.size} vs {v.size}")
    if u.size < 2:
        raise ShapeError("need at least two samples")
    du = u - u.mean()
    dv = v - v.mean()
    nu = np.sqrt(du @ du)
    nv = np.sqrt(dv @ dv)
    if nu == 0.0 or nv == 0.0:
        raise UndefinedCorrelationError("correlation is undefined for a constant vector")
    return float(np.clip((du @ dv) / (nu * nv), -1.0, 1.0))


def _same_square(A, B):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape != B.shape:
        raise ShapeError(f"expected equal square matrices, got {A.shape} and {B.shape}")
    return A, B


def off_diagonal(A):
    """Off-diagonal entries in row-major order."""
    A = np.asarray(A)
    return A[~np.eye(A.shape[0], dtype=bool)]


def upper_triangle(F):
    F = np.asarray(F)
    return F[np.triu_indices(F.shape[0], k=1)]


def rmse_ec(A_true, A_hat):
    """Root-mean-square error over off-diagonal entries."""
    A, B = _same_square(A_true, A_hat)
    n = A.shape[0]
    if n < 2:
        raise ShapeError("need n >= 2")
    d = off_diagonal(A - B)
    return float(np.sqrt(d @ d / (n * (n - 1))))


def support(A, zero_tol=ZERO_TOL, pruned=None):
    """Boolean support pattern; ``pruned`` (flat or n x n) forces zeros."""
    A = np.asarray(A, dtype=float)
    nz = np.abs(A) > zero_tol
    if pruned is not None:
        nz &= ~np.asarray(pruned, dtype=bool).reshape(A.shape)
    return nz


def sparsity_err(A_true, A_hat, zero_tol=ZERO_TOL, pruned=None):
    """Number of off-diagonal positions whose zero/non-zero status differs.

    The truth is compared exactly against zero; an estimated entry counts
    as zero when ``|a| <= zero_tol`` or it is flagged in ``pruned``.
    """
    A, B = _same_square(A_true, A_hat)
    diff = support(A, 0.0) != support(B, zero_tol, pruned)
    return int(off_diagonal(diff).sum())


def cov_to_corr(S):
    S = np.asarray(S, dtype=float)
    d = np.sqrt(np.diag(S))
    F = S / np.outer(d, d)
    F = 0.5 * (F + F.T)
    np.fill_diagonal(F, 1.0)
    return np.clip(F, -1.0, 1.0)


def empirical_fc(Y):
    """Pairwise Pearson correlations of the columns of ``Y``."""
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.shape[0] < 2:
        raise ShapeError(f"expected an (N >= 2, n) array, got shape {Y.shape}")
    sd = Y.std(axis=0)
    for i in np.flatnonzero(sd == 0.0):
        raise UndefinedCorrelationError(f"region {i} is constant")
    return cov_to_corr(np.cov(Y, rowvar=False).reshape(Y.shape[1], Y.shape[1]))


def model_fc(est):
    """FC implied by a fitted model: corr(C Sigma_x C' + eps I)."""
    model = est if isinstance(est, LinearSSM) else est.ssm()
    Sx = stationary_covariance(model)
    Sy = model.C @ Sx @ model.C.T + model.eps * np.eye(model.n_out)
    return cov_to_corr(Sy)


def rho_ec(A1, A2):
    A, B = _same_square(A1, A2)
    return pearson(off_diagonal(A), off_diagonal(B))


def rho_fc(F1, F2):
    A, B = _same_square(F1, F2)
    return pearson(upper_triangle(A), upper_triangle(B))
