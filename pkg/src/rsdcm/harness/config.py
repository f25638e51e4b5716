"""Experiment configuration records and their JSON form."""
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ..dynamics import VAR, White, noise_from_dict, noise_to_dict
from ..errors import ConfigurationError
from ..hemo import BalloonPrior

SCHEMA = 1
ASSUMPTIONS = ("W", "AR", "VAR")

REFERENCE_A = np.array([
    [-0.5, 0.0, 0.0, 0.0, -0.2, 0.0, 0.0],
    [0.0, -0.5, 0.0, -0.45, -0.3, 0.0, 0.0],
    [0.0, 0.0, -0.5, 0.8, 0.0, 0.0, 0.0],
    [0.0, 0.6, 0.0, -0.5, -0.1, 0.6, 0.0],
    [0.3, 0.0, -0.55, 0.0, -0.5, 0.2, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.3, -0.5, 0.45],
    [0.15, 0.0, 0.2, 0.0, 0.0, 0.0, -0.5],
])


def normalize_assumption(name):
    key = str(name).upper()
    if key not in ASSUMPTIONS:
        raise ConfigurationError(f"unknown assumption {name!r}; expected one of w, ar, var")
    return key


@dataclass
class EMSettings:
    tol: float = 1e-3
    max_iter: int = 200
    s: int = 16
    fir_samples: int = 1000
    a_step: str = "local"
    sbl_rule: str = "mackay"


@dataclass
class ExperimentConfig:
    """Synthetic Monte-Carlo study.

    For AR/VAR generation the rates in ``noise_gen`` are ignored when
    ``draw_lambdas`` is set: every run draws them from
    U(``lambda_range``), independently per region unless
    ``shared_lambda`` is set.

    When ``neuronal_sd`` is set, the noise intensity of every run is
    rescaled so that the largest stationary standard deviation of the
    neuronal states equals it, which keeps the Balloon model in its
    valid domain whatever rates are drawn. ``None`` uses the intensity
    of ``noise_gen`` as given.
    """

    A_true: np.ndarray = None
    noise_gen: object = field(default_factory=lambda: White(0.02))
    sim_dt: float = 0.05
    T_R: float = 2.0
    N: int = 300
    snr: float = 10.0
    runs: int = 50
    assumptions: tuple = ASSUMPTIONS
    seed: int = 0
    em: EMSettings = field(default_factory=EMSettings)
    burn_in: float = 100.0
    draw_lambdas: bool = True
    lambda_range: tuple = (-1.0, 0.0)
    shared_lambda: bool = False
    balloon_prior: BalloonPrior = field(default_factory=BalloonPrior)
    neuronal_sd: float = 0.05

    def __post_init__(self):
        if self.A_true is None:
            self.A_true = REFERENCE_A.copy()
        self.A_true = np.asarray(self.A_true, dtype=float)
        if self.A_true.ndim != 2 or self.A_true.shape[0] != self.A_true.shape[1]:
            raise ConfigurationError(f"A_true must be square, got shape {self.A_true.shape}")
        if isinstance(self.em, dict):
            self.em = EMSettings(**self.em)
        if isinstance(self.noise_gen, dict):
            self.noise_gen = noise_from_dict(self.noise_gen)
        if isinstance(self.balloon_prior, dict):
            self.balloon_prior = BalloonPrior.from_dict(self.balloon_prior)
        self.assumptions = tuple(normalize_assumption(a) for a in self.assumptions)
        self.lambda_range = tuple(float(v) for v in self.lambda_range)
        if not self.snr > 0:
            raise ConfigurationError(f"snr must be positive, got {self.snr}")
        ratio = self.T_R / self.sim_dt
        if not self.sim_dt > 0 or abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ConfigurationError(f"sim_dt={self.sim_dt} does not divide T_R={self.T_R}")
        if self.N < 2 or self.runs < 0:
            raise ConfigurationError("N must be >= 2 and runs >= 0")
        if self.neuronal_sd is not None and not self.neuronal_sd > 0:
            raise ConfigurationError(f"neuronal_sd must be positive, got {self.neuronal_sd}")
        lo, hi = self.lambda_range
        if not lo < hi <= 0:
            raise ConfigurationError(f"lambda_range must satisfy lo < hi <= 0, got {self.lambda_range}")

    @property
    def n(self):
        return self.A_true.shape[0]

    @property
    def decimation(self):
        return int(round(self.T_R / self.sim_dt))

    def to_dict(self):
        return {
            "schema": SCHEMA,
            "A_true": self.A_true.tolist(),
            "noise_gen": noise_to_dict(self.noise_gen),
            "sim_dt": self.sim_dt,
            "T_R": self.T_R,
            "N": self.N,
            "snr": self.snr,
            "runs": self.runs,
            "assumptions": list(self.assumptions),
            "seed": self.seed,
            "em": asdict(self.em),
            "burn_in": self.burn_in,
            "draw_lambdas": self.draw_lambdas,
            "lambda_range": list(self.lambda_range),
            "shared_lambda": self.shared_lambda,
            "balloon_prior": self.balloon_prior.to_dict(),
            "neuronal_sd": self.neuronal_sd,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        schema = d.pop("schema", SCHEMA)
        if schema != SCHEMA:
            raise ConfigurationError(f"unsupported config schema {schema}")
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        if "snr" in d and d["snr"] in ("inf", "Infinity"):
            d["snr"] = float("inf")
        return cls(**d)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def var_generation_config(**overrides):
    """Config for AR(1)-driven data with per-run uniform rates."""
    base = dict(noise_gen=VAR((-0.5,) * REFERENCE_A.shape[0], 0.02))
    base.update(overrides)
    return ExperimentConfig(**base)
