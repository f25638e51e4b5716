"""Synthetic BOLD data from the linear neuronal model and the Balloon model."""
from dataclasses import dataclass, replace

import numpy as np

from .. import _kernels
from ..balloon import simulate_bold
from ..dynamics import AR, VAR, White, build_joint, discretize_white
from ..errors import DomainError, GenerationError
from ..ssm import stationary_covariance
from .data import Dataset

MAX_RATE = -1e-3


@dataclass
class SyntheticTruth:
    A: np.ndarray
    noise: object
    balloon: list
    noise_var_est: np.ndarray
    noise_var_test: np.ndarray
    clean_est: np.ndarray
    clean_test: np.ndarray


def run_streams(seed, run_index):
    """Independent generators for (rates, Balloon draws, estimation set, test set)."""
    ss = np.random.SeedSequence([int(seed), int(run_index)])
    return [np.random.default_rng(c) for c in ss.spawn(4)]


def draw_noise(cfg, rng):
    """Generating noise model of one run, with freshly drawn AR rates if requested."""
    noise = cfg.noise_gen
    if isinstance(noise, White) or not cfg.draw_lambdas:
        return noise
    lo, hi = cfg.lambda_range
    # rates arbitrarily close to 0 are barely stationary; keep a small margin
    count = 1 if isinstance(noise, AR) or cfg.shared_lambda else cfg.n
    lams = np.minimum(lo + (hi - lo) * rng.uniform(size=count), MAX_RATE)
    if isinstance(noise, AR):
        return AR(float(lams[0]), noise.delta)
    return VAR(tuple(float(v) for v in np.resize(lams, cfg.n)), noise.delta)


def neuronal_transition(A, noise, dt):
    """(F, Q) of the sampled neuronal (or joint noise/neuronal) state."""
    if isinstance(noise, White):
        disc = discretize_white(A, noise.sigma, dt)
        return disc.Ad, disc.Qw
    joint = build_joint(A, noise, dt)
    return joint.Md, joint.Q_eta


def calibrate_intensity(A, noise, dt, target_sd):
    """Rescale the noise intensity so that max_i sd(x_i) = target_sd."""
    n = A.shape[0]
    unit = White(1.0) if isinstance(noise, White) else replace(noise, delta=1.0)
    F, Q = neuronal_transition(A, unit, dt)
    S = stationary_covariance(F, Q)
    c = target_sd**2 / float(np.max(np.diag(S)[-n:]))
    return White(c) if isinstance(noise, White) else replace(noise, delta=c)


def _factor(Q):
    """Square root of a PSD matrix tolerant of near-singular directions."""
    w, V = np.linalg.eigh(0.5 * (Q + Q.T))
    return V * np.sqrt(np.clip(w, 0.0, None))


def simulate_neuronal(A, noise, dt, steps, rng):
    """Sampled neuronal activity x at ``steps`` consecutive grid points."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if np.max(np.linalg.eigvals(A).real) >= 0:
        raise GenerationError("A_true is not Hurwitz")
    F, Q = neuronal_transition(A, noise, dt)
    if np.max(np.abs(np.linalg.eigvals(F))) >= 1.0:
        raise GenerationError(f"discrete transition at dt={dt} is not stable")
    m = F.shape[0]
    u = rng.standard_normal((steps, m)) @ _factor(Q).T
    states, _ = _kernels.linear_recursion(np.ascontiguousarray(F), np.ascontiguousarray(u), np.zeros(m), 1)
    return states[:, m - n:]


def _bold_series(cfg, noise, balloon, rng):
    dec = cfg.decimation
    burn = int(round(cfg.burn_in / cfg.sim_dt))
    steps = burn + cfg.N * dec
    x = simulate_neuronal(cfg.A_true, noise, cfg.sim_dt, steps, rng)
    try:
        y = simulate_bold(x, cfg.sim_dt, balloon)
    except DomainError as exc:
        raise GenerationError(f"Balloon integration failed: {exc}") from exc
    clean = y[burn::dec][: cfg.N]
    var = clean.var(axis=0)
    noise_var = np.zeros_like(var) if np.isinf(cfg.snr) else var / cfg.snr
    noisy = clean + rng.standard_normal(clean.shape) * np.sqrt(noise_var)
    return noisy, clean, noise_var


def generate_synthetic(cfg, run_index):
    """Estimation set, test set and ground truth of one Monte-Carlo run.

    Both sets share the run's connectivity, AR rates and Balloon parameters
    but are driven by independent noise, each with its own burn-in.
    """
    rng_lam, rng_bal, rng_est, rng_test = run_streams(cfg.seed, run_index)
    noise = draw_noise(cfg, rng_lam)
    if np.max(np.linalg.eigvals(cfg.A_true).real) >= 0:
        raise GenerationError("A_true is not Hurwitz")
    if cfg.neuronal_sd is not None:
        noise = calibrate_intensity(cfg.A_true, noise, cfg.sim_dt, cfg.neuronal_sd)
    balloon = [cfg.balloon_prior.sample(rng_bal) for _ in range(cfg.n)]
    Y_est, clean_est, nv_est = _bold_series(cfg, noise, balloon, rng_est)
    Y_test, clean_test, nv_test = _bold_series(cfg, noise, balloon, rng_test)
    names = [f"r{i}" for i in range(cfg.n)]
    prov = {"seed": cfg.seed, "run": int(run_index)}
    d_est = Dataset(Y_est, cfg.T_R, names, dict(prov, split="estimation"))
    d_test = Dataset(Y_test, cfg.T_R, names, dict(prov, split="test"))
    truth = SyntheticTruth(cfg.A_true.copy(), noise, balloon, nv_est, nv_test, clean_est, clean_test)
    return d_est, d_test, truth
