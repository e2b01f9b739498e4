"""Memoryless source/channel sampling and the enrollment/identification trial."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .decoders import (
    Decision,
    ExactModel,
    GammaMetric,
    decode_approx_ml,
    decode_exact_ml,
    decode_mmi,
    decode_universal,
)
from .ensemble import (
    ERROR,
    CompressionConstraint,
    LossyEncoder,
    MappingPolicy,
    TypeRegistry,
    build_codebook,
    build_registry,
)
from .errors import CapExceededError, ConfigError
from .types_core import as_distribution, as_kernel

DECODERS = ("universal", "mmi", "approx_ml", "exact_ml")
FIXED_CODEBOOK_KEY = 0xFFFFFFFF  # trial slot reserved for the --fixed-codebook draw


@dataclass
class SystemConfig:
    G: np.ndarray
    W: np.ndarray
    n: int
    rate: float  # R_I, nats/symbol
    policy: MappingPolicy = field(default_factory=MappingPolicy)
    constraint: CompressionConstraint = field(default_factory=CompressionConstraint)
    ky: int | None = None
    max_users: int = 1_000_000
    max_rows: int = 2_000_000
    brute_force_cap: int = 2 ** 24

    def __post_init__(self):
        try:
            self.G = as_distribution(self.G, "G")
            self.W = as_kernel(self.W, "W")
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.W.shape[0] != self.G.size:
            raise ConfigError(f"W has {self.W.shape[0]} rows but |X| = {self.G.size}")
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if self.rate < 0:
            raise ConfigError("R_I must be nonnegative")
        self.ky = self.ky or self.G.size
        if self.M > self.max_users:
            raise CapExceededError(f"M = {self.M} users exceeds cap {self.max_users}")

    @property
    def kx(self) -> int:
        return self.G.size

    @property
    def kz(self) -> int:
        return self.W.shape[1]

    @property
    def M(self) -> int:
        return num_users(self.n, self.rate)

    @property
    def positive(self) -> bool:
        return bool(np.all(self.W > 0))

    def with_n(self, n: int) -> "SystemConfig":
        return replace(self, n=n)

    def registry(self) -> TypeRegistry:
        return build_registry(self.n, self.policy, self.constraint, self.G, self.W, self.ky)


def num_users(n: int, rate: float) -> int:
    # round before ceil so exp(n R) that is an integer in exact arithmetic stays put
    return max(1, math.ceil(round(math.exp(n * rate), 9)))


def sample_source(G, n: int, rng: np.random.Generator) -> np.ndarray:
    G = np.asarray(G, dtype=float)
    return rng.choice(G.size, size=n, p=G).astype(np.int8)


def transmit(W, x, rng: np.random.Generator) -> np.ndarray:
    """Pass x through the DMC W symbol by symbol."""
    W = np.asarray(W, dtype=float)
    x = np.asarray(x, dtype=np.int64)
    cdf = np.cumsum(W[x], axis=1)
    u = rng.random(x.size)[:, None]
    z = (u >= cdf).sum(axis=1)
    return np.minimum(z, W.shape[1] - 1).astype(np.int8)


def log_prob_sequence(G, x) -> float:
    with np.errstate(divide="ignore"):
        return float(np.log(np.asarray(G, dtype=float))[np.asarray(x)].sum())


def log_prob_channel(W, x, z) -> float:
    with np.errstate(divide="ignore"):
        return float(np.log(np.asarray(W, dtype=float))[np.asarray(x), np.asarray(z)].sum())


@dataclass
class TrialOutcome:
    true_index: int
    decoded: dict[str, int | None]
    metrics: dict[str, np.ndarray]
    x_true: np.ndarray  # channel input: the original source word
    y_true: np.ndarray  # its enrolled (compressed) version
    encoder_error: bool
    ties: dict[str, bool]
    errors: dict[str, str] = field(default_factory=dict)

    def correct(self, decoder: str) -> bool:
        return self.decoded.get(decoder) == self.true_index


class DecoderSuite:
    """Decoders bound to one system; holds the gamma memo across trials."""

    def __init__(self, cfg: SystemConfig, registry: TypeRegistry, names=DECODERS, tiebreak_seed: int = 0):
        unknown = set(names) - set(DECODERS)
        if unknown:
            raise ConfigError(f"unknown decoders {sorted(unknown)}")
        self.cfg = cfg
        self.registry = registry
        self.names = tuple(names)
        self.tiebreak_seed = tiebreak_seed
        self.gamma = GammaMetric(registry, cfg.G, cfg.W) if "approx_ml" in names else None
        if "universal" in names and not cfg.positive:
            warnings.warn("W has zero entries: universal decoding runs outside the regime where it matches ML",
                          stacklevel=2)
        if "exact_ml" in names and cfg.kx ** cfg.n > cfg.brute_force_cap:
            raise CapExceededError(f"exact ML needs |X|^n = {cfg.kx ** cfg.n} <= {cfg.brute_force_cap}")

    def decide(self, name: str, z, rows, enc: LossyEncoder, error_rows, model=None) -> Decision:
        cfg = self.cfg
        if name == "universal":
            return decode_universal(z, rows, enc.codebook, cfg.G, cfg.kz, error_rows)
        if name == "mmi":
            return decode_mmi(z, rows, cfg.ky, cfg.kz, error_rows)
        if name == "approx_ml":
            return decode_approx_ml(z, rows, self.gamma, error_rows)
        return decode_exact_ml(z, rows, model, self.tiebreak_seed, error_rows)


def enroll(cfg: SystemConfig, enc: LossyEncoder, rng: np.random.Generator):
    xs = np.stack([sample_source(cfg.G, cfg.n, rng) for _ in range(cfg.M)])
    ys, status = enc.encode_batch(xs)
    return xs, ys, status == ERROR


def run_trial(cfg: SystemConfig, enc: LossyEncoder, suite: DecoderSuite, rng: np.random.Generator) -> TrialOutcome:
    """One enrollment + identification round with every decoder in the suite."""
    xs, ys, err = enroll(cfg, enc, rng)
    m = int(rng.integers(cfg.M))
    z = transmit(cfg.W, xs[m], rng)
    model = ExactModel(enc, cfg.G, cfg.W) if "exact_ml" in suite.names else None
    decoded, metrics, ties, errors = {}, {}, {}, {}
    for name in suite.names:
        try:
            d = suite.decide(name, z, ys, enc, err, model)
        except Exception as exc:  # recorded, trial kept
            errors[name] = f"{type(exc).__name__}: {exc}"
            decoded[name] = None
            continue
        decoded[name] = d.index
        metrics[name] = d.scores
        ties[name] = d.tie
    return TrialOutcome(m, decoded, metrics, xs[m], ys[m], bool(err[m]), ties, errors)


def trial_rng(seed: int, n: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(n, trial)))


def run_trials(cfg: SystemConfig, trials: int, seed: int, decoders=DECODERS, fixed_codebook: bool = False,
               registry: TypeRegistry | None = None, start: int = 0):
    """Yield TrialOutcomes; a fresh encoder per trial unless ``fixed_codebook``."""
    registry = registry or cfg.registry()
    suite = DecoderSuite(cfg, registry, decoders, tiebreak_seed=seed)
    fixed = None
    if fixed_codebook:
        fixed = LossyEncoder(build_codebook(registry, trial_rng(seed, cfg.n, FIXED_CODEBOOK_KEY), cfg.max_rows),
                             cfg.brute_force_cap)
    for t in range(start, start + trials):
        rng = trial_rng(seed, cfg.n, t)
        enc = fixed or LossyEncoder(build_codebook(registry, rng, cfg.max_rows), cfg.brute_force_cap)
        yield run_trial(cfg, enc, suite, rng)
