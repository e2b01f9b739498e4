"""TOML experiment configuration.

Layout::

    seed = 7

    [source]
    G = [0.7, 0.3]

    [channel]
    W = [[0.9, 0.1], [0.2, 0.8]]

    [system]
    n = 8
    rate = 0.15        # R_I, nats/symbol
    ky = 2             # |Y|, defaults to |X|

    [policy]
    strategy = "identity_if_allowed"
    delta = 0.1
    epsilon = 0.02

    [constraint]
    kind = "excess_probability"
    rate = 0.5         # R_C
    excess_exponent = 0.1

    [experiment]
    n_list = [4, 6, 8]
    trials = 1000
    decoders = ["universal", "mmi"]
    fixed_codebook = false

    [caps]
    max_users = 1000000
    max_rows = 2000000
    brute_force_cap = 16777216
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .ensemble import CompressionConstraint, MappingPolicy
from .errors import ConfigError
from .simulation import SystemConfig

SEED_ENV = "IDENT_SEED"
KNOWN_SECTIONS = {"source", "channel", "system", "policy", "constraint", "experiment", "caps"}


@dataclass
class RunConfig:
    system: SystemConfig
    seed: int = 0
    n_list: list[int] = field(default_factory=list)
    trials: int = 1000
    decoders: tuple[str, ...] = ("universal", "mmi")
    fixed_codebook: bool = False
    raw: dict = field(default_factory=dict)


def parse_seed(value) -> int:
    try:
        seed = int(value, 0) if isinstance(value, str) else int(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {value!r}") from exc
    if not 0 <= seed < 2 ** 64:
        raise ConfigError(f"seed {seed} outside [0, 2^64)")
    return seed


def resolve_seed(cli_seed=None, config_seed=None, env=None) -> int:
    """CLI flag, then IDENT_SEED, then the config file, then 0."""
    env = os.environ if env is None else env
    if cli_seed is not None:
        return parse_seed(cli_seed)
    if env.get(SEED_ENV):
        return parse_seed(env[SEED_ENV])
    if config_seed is not None:
        return parse_seed(config_seed)
    return 0


def _table(raw: dict, name: str) -> dict:
    sec = raw.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    return sec


def _policy(sec: dict) -> MappingPolicy:
    table = None
    if "table" in sec:
        # keys are comma-separated counts of Q_X: "3,5" = [[..],[..]]
        table = {tuple(int(c) for c in k.split(",")): np.asarray(v, dtype=float) for k, v in sec["table"].items()}
    kw = {k: sec[k] for k in ("strategy", "delta", "epsilon", "candidate_cap") if k in sec}
    return MappingPolicy(table=table, **kw)


def _constraint(sec: dict) -> CompressionConstraint:
    kw = {k: sec[k] for k in ("kind", "rate", "excess_exponent", "s", "lam") if k in sec}
    return CompressionConstraint(**kw)


def from_dict(raw: dict) -> RunConfig:
    unknown = set(k for k, v in raw.items() if isinstance(v, dict)) - KNOWN_SECTIONS
    if unknown:
        raise ConfigError(f"unknown sections {sorted(unknown)}")
    src, ch, sysm = _table(raw, "source"), _table(raw, "channel"), _table(raw, "system")
    exp, caps = _table(raw, "experiment"), _table(raw, "caps")
    if "G" not in src or "W" not in ch:
        raise ConfigError("config needs [source].G and [channel].W")
    try:
        n_list = [int(n) for n in exp.get("n_list", [sysm.get("n", 8)])]
        system = SystemConfig(
            G=src["G"],
            W=ch["W"],
            n=int(sysm.get("n", max(n_list))),
            rate=float(sysm.get("rate", 0.0)),
            policy=_policy(_table(raw, "policy")),
            constraint=_constraint(_table(raw, "constraint")),
            ky=sysm.get("ky"),
            **{k: int(caps[k]) for k in ("max_users", "max_rows", "brute_force_cap") if k in caps},
        )
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    return RunConfig(
        system=system,
        seed=parse_seed(raw["seed"]) if "seed" in raw else 0,
        n_list=n_list,
        trials=int(exp.get("trials", 1000)),
        decoders=tuple(exp.get("decoders", ("universal", "mmi"))),
        fixed_codebook=bool(exp.get("fixed_codebook", False)),
        raw=raw,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return from_dict(raw)
