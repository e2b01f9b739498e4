"""Identification systems with compressed enrollment: random-coding
ensemble, decoders, error exponents and a Monte Carlo harness."""
from .decoders import (
    ExactModel,
    GammaMetric,
    count_matches,
    decode_approx_ml,
    decode_exact_ml,
    decode_mmi,
    decode_universal,
)
from .ensemble import (
    CompressionConstraint,
    LossyEncoder,
    MappingPolicy,
    build_codebook,
    build_registry,
    load_codebook,
    save_codebook,
)
from .errors import CapExceededError, ConfigError, InfeasibleError, SolverError, VQIdentError
from .simulation import SystemConfig, run_trial, sample_source, transmit

__version__ = "0.1.0"
