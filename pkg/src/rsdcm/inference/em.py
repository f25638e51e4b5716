"""EM / sparse-Bayesian-learning inversion of the lifted linear models.

One iteration is: assemble the model from the current parameters, run the
Kalman filter and RTS smoother, average the smoothed second moments, then
update A, the FIR taps, the measurement variance, the AR rates and the
noise intensity in turn (each block never decreases the EM lower bound plus
log-prior), and finally reweight the sparsity hyperparameters.
"""
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from ..dynamics import AR, VAR, White, build_joint, discretize_white
from ..errors import DataError, EstimationError, InstabilityError, NumericalError
from ..hemo import FIRPrior, HemoFIR
from ..ssm import assemble, stationary_covariance
from .sbl import PRUNE_TOL, SBLState, map_coefficients, sbl_update_gram
from .smoother import kalman_filter, rts_smoother

LOG2PI = math.log(2.0 * math.pi)
MODEL_KINDS = ("W", "AR", "VAR")
EPS_FLOOR = 1e-8
INTENSITY_FLOOR = 1e-10


@dataclass
class Theta:
    """Model parameters. ``intensity`` is sigma for W and delta for AR/VAR."""

    kind: str
    A: np.ndarray
    intensity: float
    h: np.ndarray
    eps: float
    T_R: float
    lambdas: np.ndarray = None

    @property
    def n(self):
        return self.A.shape[0]

    def noise(self, intensity=None):
        c = self.intensity if intensity is None else intensity
        if self.kind == "W":
            return White(c)
        if self.kind == "AR":
            return AR(float(self.lambdas[0]), c)
        return VAR(tuple(self.lambdas), c)

    def ssm(self):
        return assemble(self.A, self.noise(), self.h, self.T_R, self.eps)

    def process_blocks(self, A=None, lambdas=None, intensity=None):
        """(F_s, Q_s): transition and noise covariance of the stochastic block."""
        A = self.A if A is None else A
        c = self.intensity if intensity is None else intensity
        if self.kind == "W":
            disc = discretize_white(A, c, self.T_R)
            return disc.Ad, disc.Qw
        lams = self.lambdas if lambdas is None else lambdas
        joint = build_joint(A, VAR(tuple(lams), c), self.T_R)
        return joint.Md, joint.Q_eta

    def copy(self, **changes):
        out = replace(self, **changes)
        out.A = np.array(out.A, dtype=float)
        out.h = np.array(out.h, dtype=float)
        if out.lambdas is not None:
            out.lambdas = np.array(out.lambdas, dtype=float)
        return out


@dataclass
class EMStats:
    """Averaged second moments of the smoothing distribution."""

    Theta: np.ndarray
    Upsilon: np.ndarray
    Xi: np.ndarray
    Pi: np.ndarray
    Psi: np.ndarray
    N: int


def em_statistics(smoothed, Y):
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    xs, Ps = smoothed.xhat_s, smoothed.P_s
    N = Y.shape[0]
    if xs.shape[0] != N + 1:
        raise ValueError(f"smoothed moments cover {xs.shape[0] - 1} steps, Y has {N}")
    cur, prev = xs[1:], xs[:-1]
    Theta_ = (Ps[1:].sum(axis=0) + cur.T @ cur) / N
    Upsilon = (Ps[:-1].sum(axis=0) + prev.T @ prev) / N
    Psi = (smoothed.lag1.sum(axis=0) + cur.T @ prev) / N
    Xi = Y.T @ cur / N
    Pi = Y.T @ Y / N
    return EMStats(0.5 * (Theta_ + Theta_.T), 0.5 * (Upsilon + Upsilon.T), Xi, Pi, Psi, N)


def process_residual(F_s, stats, m):
    """E[(x_s(k) - F_s x_s(k-1))(...)'] averaged, on the stochastic block."""
    T = stats.Theta[:m, :m]
    U = stats.Upsilon[:m, :m]
    P = stats.Psi[:m, :m]
    FP = F_s @ P.T
    R = T - FP - FP.T + F_s @ U @ F_s.T
    return 0.5 * (R + R.T)


def measurement_residual(C, stats):
    XC = stats.Xi @ C.T
    R = stats.Pi - XC - XC.T + C @ stats.Theta @ C.T
    return 0.5 * (R + R.T)


def _chol(Q, what):
    try:
        return scipy.linalg.cho_factor(Q, lower=True)
    except np.linalg.LinAlgError:
        raise NumericalError(f"{what} is not positive definite") from None


def process_term(F_s, Q_s, stats):
    m = Q_s.shape[0]
    R = process_residual(F_s, stats, m)
    c = _chol(Q_s, "stochastic process-noise block")
    logdet = 2.0 * np.sum(np.log(np.diag(c[0])))
    tr = np.trace(scipy.linalg.cho_solve(c, R))
    return -0.5 * stats.N * (m * LOG2PI + logdet + tr)


def measurement_term(C, eps, stats):
    n = C.shape[0]
    if not eps > 0:
        raise NumericalError("measurement variance must be positive")
    tr = np.trace(measurement_residual(C, stats))
    return -0.5 * stats.N * (n * (LOG2PI + math.log(eps)) + tr / eps)


def q_lower_bound(ssm, stats):
    """EM lower bound on the stochastic sub-block of the state.

    The lag coordinates evolve deterministically, so the Gaussian terms
    are evaluated on the leading ``m`` coordinates only.
    """
    m = ssm.layout.m
    return process_term(ssm.F[:m, :m], ssm.Q[:m, :m], stats) + measurement_term(
        ssm.C, ssm.eps, stats
    )


def log_prior_A(A, sbl):
    a = np.asarray(A, dtype=float).ravel()
    if np.any(a[sbl.prune_mask] != 0.0):
        return -np.inf
    g = sbl.gamma[sbl.active]
    aa = a[sbl.active]
    return -0.5 * float(np.sum(np.log(2.0 * np.pi * g) + aa**2 / g))


def log_prior_h(h, fir_prior):
    S = fir_prior.regularized_cov()
    c = _chol(S, "FIR prior covariance")
    logdet = 2.0 * np.sum(np.log(np.diag(c[0])))
    D = np.atleast_2d(h) - fir_prior.h_bar
    quad = np.einsum("ij,ij->", D, scipy.linalg.cho_solve(c, D.T).T)
    s = fir_prior.s
    return -0.5 * (D.shape[0] * (s * LOG2PI + logdet) + quad)


def log_prior(theta, sbl, fir_prior):
    return log_prior_A(theta.A, sbl) + log_prior_h(theta.h, fir_prior)


def objective(theta, stats, sbl, fir_prior):
    """Lower bound plus log-priors, the quantity each M-step block ascends."""
    F_s, Q_s = theta.process_blocks()
    C = _output_matrix(theta)
    return (
        process_term(F_s, Q_s, stats)
        + measurement_term(C, theta.eps, stats)
        + log_prior(theta, sbl, fir_prior)
    )


def _output_matrix(theta):
    from ..ssm import StateLayout, output_matrix

    lay = StateLayout(theta.n, theta.h.shape[1], has_w=theta.kind != "W")
    return output_matrix(theta.h, lay)


# ----------------------------------------------------------------- M-step


@dataclass
class MStepOptions:
    a_step: str = "local"
    lambda_bounds: tuple = (-5.0, -0.01)
    lambda_tol: float = 1e-4
    max_backtracks: int = 20
    ridge: float = 1e-8


@dataclass
class MStepInfo:
    gram: np.ndarray
    a_candidate: np.ndarray
    step: float
    warnings: list = field(default_factory=list)


def _u_slice(theta):
    """Regressor coordinates: x(k) for W, (w(k), x(k)) for AR/VAR."""
    n = theta.n
    return slice(0, n) if theta.kind == "W" else slice(0, 2 * n)


def _x_slice(theta):
    n = theta.n
    return slice(0, n) if theta.kind == "W" else slice(n, 2 * n)


def linearization(theta, mode):
    """Base x-rows ``E`` and Jacobian ``K`` of the transition w.r.t. vec(A').

    ``E`` is the x-rows of the sampled transition (over the regressor
    coordinates) at the linearization point and ``K[:, i*n+j]`` is
    vec_row of its derivative in the direction of A[i, j].

    ``mode="origin"`` expands e^{M T} = I + M T around M = 0;
    ``mode="local"`` expands around the current A with the exact Frechet
    derivative of the matrix exponential.
    """
    n, T = theta.n, theta.T_R
    W = theta.kind == "W"
    nu = n if W else 2 * n
    K = np.zeros((n * nu, n * n))
    if mode == "origin":
        E = np.zeros((n, nu))
        if W:
            E[:, :] = np.eye(n)
        else:
            E[:, :n] = T * np.eye(n)
            E[:, n:] = np.eye(n)
        for i in range(n):
            for j in range(n):
                D = np.zeros((n, nu))
                D[i, nu - n + j] = T
                K[:, i * n + j] = D.ravel()
        return E, K, np.zeros(n * n)
    if mode != "local":
        raise ValueError(f"unknown linearization mode {mode!r}")
    if W:
        base = theta.A * T
    else:
        from ..dynamics import joint_generator

        base = joint_generator(theta.A, theta.lambdas) * T
    E_full = None
    for i in range(n):
        for j in range(n):
            direction = np.zeros_like(base)
            direction[nu - n + i, nu - n + j] = T
            if E_full is None:
                E_full, L = scipy.linalg.expm_frechet(base, direction)
            else:
                L = scipy.linalg.expm_frechet(base, direction, compute_expm=False)
            K[:, i * n + j] = L[nu - n:, :].ravel()
    return E_full[nu - n:, :], K, theta.A.ravel().copy()


def regression_terms(theta, stats, mode):
    """Gram H and linear term c of the expected linearized regression on a = vec(A')."""
    N = stats.N
    u = _u_slice(theta)
    xs = _x_slice(theta)
    E, K, a0 = linearization(theta, mode)
    _, Q_s = theta.process_blocks()
    q = Q_s[xs, xs]
    qinv = np.linalg.inv(q)
    qinv = 0.5 * (qinv + qinv.T)
    S_uu = N * stats.Upsilon[u, u]
    S_xu = N * stats.Psi[xs, u]
    S_zu = S_xu - E @ S_uu
    H = K.T @ np.kron(qinv, S_uu) @ K
    H = 0.5 * (H + H.T)
    b = K.T @ (qinv @ S_zu).ravel()
    return H, b + H @ a0, q


def _is_hurwitz(A):
    return np.max(np.linalg.eigvals(A).real) < -1e-6


def _numeric_gradient(f, a, active, rel=1e-6):
    g = np.zeros_like(a)
    for i in np.flatnonzero(active):
        h = rel * max(1.0, abs(a[i]))
        up, dn = a.copy(), a.copy()
        up[i] += h
        dn[i] -= h
        g[i] = (f(up) - f(dn)) / (2.0 * h)
    return g


def _backtrack(value, A0, direction, f0, max_backtracks):
    t = 1.0
    for _ in range(max_backtracks):
        cand = A0 + t * direction
        if _is_hurwitz(cand):
            try:
                if value(cand) >= f0:
                    return cand, t
            except NumericalError:
                pass
        t *= 0.5
    return None, 0.0


def update_A(theta, stats, sbl, opts):
    """Linearized MAP step for A followed by backtracking on the exact bound.

    The regression ignores how the noise covariance depends on A, so its
    step is not always an ascent direction for the exact bound. When
    backtracking along it fails, the exact gradient preconditioned by the
    regression curvature is used instead, which always ascends.
    """
    H, c, _ = regression_terms(theta, stats, opts.a_step)
    a_star = map_coefficients(H, c, sbl.gamma)
    a_star[sbl.prune_mask] = 0.0
    A0 = theta.A

    def value(A):
        F_s, Q_s = theta.process_blocks(A=A)
        return process_term(F_s, Q_s, stats) + log_prior_A(A, sbl)

    f0 = value(A0)
    cand, t = _backtrack(value, A0, a_star.reshape(A0.shape) - A0, f0, opts.max_backtracks)
    if cand is not None:
        return cand, H, a_star, t

    def flat(a):
        try:
            return value(a.reshape(A0.shape))
        except NumericalError:
            return -np.inf

    active = sbl.active
    g = _numeric_gradient(flat, A0.ravel(), active)
    idx = np.flatnonzero(active)
    P = H[np.ix_(idx, idx)] + np.diag(1.0 / sbl.gamma[idx])
    step = np.zeros_like(g)
    step[idx] = scipy.linalg.solve(P + opts.ridge * np.eye(idx.size), g[idx], assume_a="pos")
    cand, t = _backtrack(value, A0, step.reshape(A0.shape), f0, opts.max_backtracks)
    if cand is not None:
        return cand, H, a_star, -t
    return A0.copy(), H, a_star, 0.0


def update_h(theta, stats, fir_prior):
    """Exact Gaussian MAP of every region's taps given the smoothed moments."""
    from ..ssm import StateLayout

    n, s = theta.h.shape
    lay = StateLayout(n, s, has_w=theta.kind != "W")
    Sig = fir_prior.regularized_cov()
    hbar = fir_prior.h_bar
    N, eps = stats.N, theta.eps
    h = np.empty_like(theta.h)
    for i in range(n):
        idx = lay.region_taps(i)
        S = N * stats.Theta[np.ix_(idx, idx)] / eps
        r = N * stats.Xi[i, idx] / eps
        lhs = np.eye(s) + Sig @ S
        h[i] = hbar + np.linalg.solve(lhs, Sig @ (r - S @ hbar))
    return h


def update_eps(theta, stats):
    C = _output_matrix(theta)
    return max(float(np.trace(measurement_residual(C, stats))) / theta.n, EPS_FLOOR)


def _profiled_process(theta, stats, lambdas=None, A=None):
    """Process term maximized over the intensity; returns (value, intensity)."""
    F_s, Q1 = theta.process_blocks(A=A, lambdas=lambdas, intensity=1.0)
    m = Q1.shape[0]
    R = process_residual(F_s, stats, m)
    c = _chol(Q1, "unit-intensity process-noise block")
    intensity = max(float(np.trace(scipy.linalg.cho_solve(c, R))) / m, INTENSITY_FLOOR)
    logdet = 2.0 * np.sum(np.log(np.diag(c[0]))) + m * math.log(intensity)
    tr = np.trace(scipy.linalg.cho_solve(c, R)) / intensity
    return -0.5 * stats.N * (m * LOG2PI + logdet + tr), intensity


def golden_section_max(f, lo, hi, tol):
    """Maximize a unimodal ``f`` on [lo, hi]; returns (x, f(x))."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (c, fc) if fc > fd else (d, fd)


def update_lambdas(theta, stats, opts):
    """Golden-section ascent on the AR rates (intensity profiled out).

    AR shares one rate across regions; VAR sweeps the rates one at a time.
    A proposal is kept only if it improves the bound.
    """
    lo, hi = opts.lambda_bounds
    lams = np.clip(np.array(theta.lambdas, dtype=float), lo, hi)

    def f_of(vec):
        try:
            return _profiled_process(theta, stats, lambdas=vec)[0]
        except NumericalError:
            return -np.inf

    current = f_of(lams)
    if theta.kind == "AR":
        x, fx = golden_section_max(lambda v: f_of(np.full(theta.n, v)), lo, hi, opts.lambda_tol)
        if fx > current:
            lams = np.full(theta.n, x)
        return lams
    for i in range(theta.n):
        def fi(v, i=i):
            trial = lams.copy()
            trial[i] = v
            return f_of(trial)

        x, fx = golden_section_max(fi, lo, hi, opts.lambda_tol)
        if fx > current:
            lams[i] = x
            current = fx
    return lams


def update_intensity(theta, stats):
    return _profiled_process(theta, stats)[1]


def m_step(stats, theta, sbl, fir_prior, opts=None):
    """One block-coordinate pass: A, h, eps, AR rates, intensity."""
    opts = MStepOptions() if opts is None else opts
    new = theta.copy()
    A, H, a_star, step = update_A(new, stats, sbl, opts)
    new.A = A
    new.h = update_h(new, stats, fir_prior)
    new.eps = update_eps(new, stats)
    if new.kind != "W":
        new.lambdas = update_lambdas(new, stats, opts)
    new.intensity = update_intensity(new, stats)
    return new, MStepInfo(H, a_star, step)


# ------------------------------------------------------- initialization


def deconvolve(y, h, weight=None):
    """Tikhonov-regularized FIR deconvolution of one series."""
    y = np.asarray(y, dtype=float)
    h = np.asarray(h, dtype=float)
    N = y.size
    col = np.zeros(N)
    col[: min(N, h.size)] = h[:N]
    T = scipy.linalg.toeplitz(col, np.zeros(N))
    mu = 1e-2 * float(h @ h) if weight is None else weight
    return np.linalg.solve(T.T @ T + mu * np.eye(N), T.T @ y)


def ar_innovation_variance(x, order=3):
    """Residual variance of a least-squares AR(order) fit."""
    x = np.asarray(x, dtype=float)
    x = x - x.mean()
    X = np.column_stack([x[order - l - 1: x.size - l - 1] for l in range(order)])
    target = x[order:]
    coef, *_ = np.linalg.lstsq(X, target, rcond=None)
    resid = target - X @ coef
    return float(resid @ resid / resid.size)


def initialize(Y, fir_prior, model_kind, T_R=2.0):
    """Starting point: A = -I, taps at the prior mean, AR rates -0.5, all gamma = 1."""
    if model_kind not in MODEL_KINDS:
        raise ValueError(f"model_kind must be one of {MODEL_KINDS}, got {model_kind!r}")
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    N, n = Y.shape
    s = fir_prior.s
    if N <= 3 * s:
        raise DataError(f"need more than 3*s = {3 * s} samples, got {N}")
    var = Y.var(axis=0)
    for i, v in enumerate(var):
        if not v > 0:
            raise DataError(f"region {i} has zero variance")
    eps0 = 0.1 * float(var.mean())
    innov = [ar_innovation_variance(deconvolve(Y[:, i], fir_prior.h_bar)) for i in range(n)]
    intensity0 = max(float(np.mean(innov)), INTENSITY_FLOOR)
    theta = Theta(
        kind=model_kind,
        A=-np.eye(n),
        intensity=intensity0,
        h=np.tile(fir_prior.h_bar, (n, 1)),
        eps=eps0,
        T_R=T_R,
        lambdas=None if model_kind == "W" else np.full(n, -0.5),
    )
    return theta, SBLState.ones(n)


# ------------------------------------------------------------- driver


@dataclass
class EMConfig:
    model_kind: str = "W"
    T_R: float = 2.0
    tol: float = 1e-3
    max_iter: int = 200
    a_step: str = "local"
    prune_tol: float = PRUNE_TOL
    update_gamma: bool = True
    sbl_rule: str = "mackay"
    lambda_bounds: tuple = (-5.0, -0.01)
    demean: bool = True

    def mstep_options(self):
        return MStepOptions(a_step=self.a_step, lambda_bounds=tuple(self.lambda_bounds))


@dataclass
class EstimationResult:
    A_hat: np.ndarray
    noise_hat: object
    h_hat: HemoFIR
    eps_hat: float
    sbl: SBLState
    iterations: int
    objective_trace: list
    bound_trace: list
    smoothed: object
    theta: Theta
    converged: bool
    loglik: float

    def ssm(self):
        return self.theta.ssm()


def e_step(theta, Y, P0):
    model = theta.ssm()
    filt = kalman_filter(model, Y, P0=P0)
    smoothed = rts_smoother(model, filt)
    return filt, smoothed, em_statistics(smoothed, Y)


def initial_covariance(theta):
    try:
        return stationary_covariance(theta.ssm())
    except InstabilityError:
        return 10.0 * np.eye(theta.ssm().d)


def estimate(Y, fir_prior, config=None, theta0=None, sbl0=None):
    """MAP estimate of the model parameters by EM with SBL reweighting.

    Parameters
    ----------
    Y : array_like, shape (N, n)
        BOLD series, one column per region. Column means are removed when
        ``config.demean`` is set.
    fir_prior : FIRPrior
        Prior on the FIR taps, shared by all regions.
    config : EMConfig, optional
    theta0, sbl0 : optional
        Override the default starting point.

    Returns
    -------
    EstimationResult
        ``objective_trace`` holds the log-likelihood plus log-prior before
        each M-step and ``bound_trace`` the (before, after) values of the
        lower bound plus log-prior around each M-step.
    """
    cfg = EMConfig() if config is None else config
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if Y.shape[0] < 50:
        raise DataError(f"need at least 50 samples, got {Y.shape[0]}")
    if cfg.demean:
        Y = Y - Y.mean(axis=0)
    if theta0 is None:
        theta, sbl = initialize(Y, fir_prior, cfg.model_kind, cfg.T_R)
    else:
        theta, sbl = theta0.copy(), SBLState.ones(theta0.n)
    if sbl0 is not None:
        sbl = SBLState(sbl0.gamma, sbl0.prune_mask)
    opts = cfg.mstep_options()
    P0 = initial_covariance(theta)
    trace, bounds = [], []
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        try:
            filt, smoothed, stats = e_step(theta, Y, P0)
            lp = filt.loglik + log_prior(theta, sbl, fir_prior)
            before = objective(theta, stats, sbl, fir_prior)
        except NumericalError as exc:
            raise EstimationError(f"E-step failed at iteration {it}: {exc}", trace) from exc
        trace.append(lp)
        if not np.isfinite(lp):
            raise EstimationError(f"objective is not finite at iteration {it}", trace)
        new, info = m_step(stats, theta, sbl, fir_prior, opts)
        after = objective(new, stats, sbl, fir_prior)
        bounds.append((before, after))
        A_prev = theta.A
        theta = new
        if cfg.update_gamma:
            H, _, _ = regression_terms(theta, stats, opts.a_step)
            sbl = sbl_update_gram(sbl, H, theta.A.ravel(), cfg.prune_tol, cfg.sbl_rule)
            theta.A = np.where(sbl.prune_mask.reshape(theta.A.shape), 0.0, theta.A)
        change = np.linalg.norm(theta.A - A_prev) / max(np.linalg.norm(theta.A), 1e-300)
        if change < cfg.tol:
            converged = True
            break
    filt, smoothed, _ = e_step(theta, Y, P0)
    final_lp = filt.loglik + log_prior(theta, sbl, fir_prior)
    if not np.isfinite(final_lp):
        raise EstimationError("final objective is not finite", trace)
    return EstimationResult(
        A_hat=theta.A.copy(),
        noise_hat=theta.noise(),
        h_hat=HemoFIR(theta.h.copy(), theta.T_R),
        eps_hat=theta.eps,
        sbl=sbl,
        iterations=it,
        objective_trace=trace,
        bound_trace=bounds,
        smoothed=smoothed,
        theta=theta,
        converged=converged,
        loglik=filt.loglik,
    )
