"""Monte Carlo estimation, diagnostics and result emission."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import norm

from .decoders import ExactModel, ml_order
from .ensemble import LossyEncoder, build_codebook, concentration_diagnostic, save_codebook
from .errors import ConfigError
from .exponents import default_mapping, exponent_pair
from .simulation import DECODERS, FIXED_CODEBOOK_KEY, SystemConfig, run_trials, sample_source, trial_rng

log = logging.getLogger(__name__)

CSV_COLUMNS = ("decoder", "n", "trials", "errors", "p_hat", "ci_lo", "ci_hi", "emp_exponent")
CSV_VERSION = 1
Z95 = float(norm.ppf(0.975))


def wilson_interval(errors: int, trials: int, z: float = Z95) -> tuple[float, float]:
    if trials <= 0:
        raise ValueError("trials must be positive")
    p = errors / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    # clamp to keep lo <= p_hat <= hi under rounding
    return max(0.0, min(centre - half, p)), min(1.0, max(centre + half, p))


@dataclass
class ErrorEstimate:
    decoder: str
    n: int
    errors: int
    trials: int

    @property
    def p_hat(self) -> float:
        return self.errors / self.trials

    @property
    def ci(self) -> tuple[float, float]:
        return wilson_interval(self.errors, self.trials)

    @property
    def half_width(self) -> float:
        lo, hi = self.ci
        return (hi - lo) / 2

    @property
    def emp_exponent(self) -> float:
        return -math.log(self.p_hat) / self.n if self.errors > 0 else math.inf

    def row(self) -> list:
        lo, hi = self.ci
        return [self.decoder, self.n, self.trials, self.errors, f"{self.p_hat:.10g}", f"{lo:.10g}",
                f"{hi:.10g}", f"{self.emp_exponent:.10g}"]


@dataclass
class ExperimentPlan:
    system: SystemConfig
    n_list: list[int]
    trials: int = 1000
    decoders: tuple[str, ...] = ("universal", "mmi")
    seed: int = 0
    out_dir: Path | None = None
    fixed_codebook: bool = False
    predict_exponents: bool = True
    diagnostics_sample: int = 200

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.n_list:
            raise ConfigError("n_list is empty")
        self.n_list = sorted(int(n) for n in self.n_list)
        bad = set(self.decoders) - set(DECODERS)
        if bad:
            raise ConfigError(f"unknown decoders {sorted(bad)}")
        self.decoders = tuple(self.decoders)

    def skip_reason(self, decoder: str, n: int) -> str | None:
        cfg = self.system
        if decoder == "exact_ml" and cfg.kx ** n > cfg.brute_force_cap:
            return f"exact ML needs |X|^n = {cfg.kx ** n} <= cap {cfg.brute_force_cap}"
        if decoder == "approx_ml" and not cfg.positive:
            return "approximate ML needs W > 0"
        return None


def estimate_error_rates(plan: ExperimentPlan, n: int, seed: int | None = None,
                         decoders=None) -> tuple[dict[str, ErrorEstimate], dict[str, str]]:
    """Run ``plan.trials`` trials at length n; all decoders see the same trials."""
    seed = plan.seed if seed is None else seed
    decoders = tuple(decoders or plan.decoders)
    skipped = {d: r for d in decoders if (r := plan.skip_reason(d, n))}
    active = [d for d in decoders if d not in skipped]
    out: dict[str, ErrorEstimate] = {}
    if not active:
        return out, skipped
    cfg = plan.system.with_n(n)
    errors = dict.fromkeys(active, 0)
    failures: dict[str, str] = {}
    for outcome in run_trials(cfg, plan.trials, seed, active, plan.fixed_codebook):
        for d in active:
            if not outcome.correct(d):
                errors[d] += 1
        for d, msg in outcome.errors.items():
            failures.setdefault(d, msg)
    for d, msg in failures.items():
        log.warning("decoder %s raised during trials at n=%d: %s", d, n, msg)
    for d in active:
        out[d] = ErrorEstimate(d, n, errors[d], plan.trials)
    return out, skipped


def estimate_error_rate(plan: ExperimentPlan, decoder: str, n: int, seed: int | None = None) -> ErrorEstimate | None:
    est, skipped = estimate_error_rates(plan, n, seed, [decoder])
    if decoder in skipped:
        log.info("skipping %s at n=%d: %s", decoder, n, skipped[decoder])
        return None
    return est[decoder]


@dataclass
class Regression:
    slope: float
    intercept: float
    residuals: list[float]
    defined: bool = True
    reason: str = ""


def fit_exponent(ns, ps) -> Regression:
    """Least-squares fit of -ln p = slope * n + intercept."""
    ns = np.asarray(ns, dtype=float)
    ps = np.asarray(ps, dtype=float)
    if ns.size < 3:
        return Regression(math.nan, math.nan, [], False, f"need >= 3 lengths with errors, have {ns.size}")
    if np.any(ps <= 0):
        return Regression(math.nan, math.nan, [], False, "zero error probability")
    y = -np.log(ps)
    A = np.vstack([ns, np.ones_like(ns)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    return Regression(float(slope), float(intercept), (y - A @ [slope, intercept]).tolist())


def exponent_regression(estimates) -> Regression:
    """Slope of -ln p_hat against n over cells with at least one error (a trend statistic)."""
    pts = [(e.n, e.p_hat) for e in estimates if e.errors > 0]
    return fit_exponent([n for n, _ in pts], [p for _, p in pts])


# -- K_n diagnostic ----------------------------------------------------------------

def kn_value(a) -> float:
    """sum_i a_i / A_i for probabilities a listed in ranking order."""
    a = np.asarray(a, dtype=float)
    if a.size == 0 or a[0] <= 0:
        raise ValueError("need a nonempty list with a_1 > 0")
    return float(np.sum(a / np.cumsum(a)))


@dataclass
class KnReport:
    value: float
    bound: float
    sharp_bound: float  # 1 + ln(1/P(y[1]))
    size: int

    @property
    def ok(self) -> bool:
        return self.value <= self.bound + 1e-9


def kn_diagnostic(enc: LossyEncoder, z, G, W, seed: int = 0, model: ExactModel | None = None) -> KnReport:
    """K_n(z) over the reproduction set of a drawn encoder, exact P(y) by brute force."""
    model = model or ExactModel(enc, G, W)
    rows = model.range_rows()
    prior = np.exp(model.log_prior(rows))
    order = ml_order(z, rows, model.log_likelihood(z, rows), seed)
    a = prior[order]
    g_min = float(np.min(np.asarray(G)[np.asarray(G) > 0]))
    n = rows.shape[1]
    return KnReport(kn_value(a), 1 + n * math.log(1 / g_min), 1 + math.log(1 / a[0]), rows.shape[0])


# -- experiment runner ----------------------------------------------------------------

def _predictions(cfg: SystemConfig) -> dict:
    mapping = default_mapping(cfg.G, cfg.constraint, cfg.ky)
    try:
        e, dd = exponent_pair(cfg.G, cfg.W, mapping, cfg.rate)
    except Exception as exc:  # the summary still gets written
        return {"error": f"{type(exc).__name__}: {exc}"}
    return {"E": e.to_dict(), "E_DD": dd.to_dict()}


def _diagnostics(plan: ExperimentPlan, n: int) -> dict:
    cfg = plan.system.with_n(n)
    reg = cfg.registry()
    enc = LossyEncoder(build_codebook(reg, trial_rng(plan.seed, n, FIXED_CODEBOOK_KEY), cfg.max_rows), cfg.brute_force_cap)
    rng = trial_rng(plan.seed, n, 0xFFFFFFFE)
    xs = np.stack([sample_source(cfg.G, n, rng) for _ in range(plan.diagnostics_sample)])
    rep = concentration_diagnostic(enc, xs)
    repairs = [[list(t.counts) for t in r] for r in reg.repairs]
    return {"n": n, "registry_size": len(reg), "repairs": repairs, "codebook_rows": enc.codebook.total_rows(),
            "fraction_in_window": rep.fraction_in_window, "skipped_low_entropy": rep.skipped_low_entropy,
            "window": list(rep.window)}


def config_echo(cfg: SystemConfig) -> dict:
    c, p = cfg.constraint, cfg.policy
    return {
        "G": cfg.G.tolist(), "W": cfg.W.tolist(), "rate": cfg.rate, "ky": cfg.ky,
        "constraint": {"kind": c.kind, "rate": c.rate, "excess_exponent": c.excess_exponent, "s": c.s, "lam": c.lam},
        "policy": {"strategy": p.strategy, "delta": p.delta, "epsilon": p.epsilon},
        "caps": {"max_users": cfg.max_users, "max_rows": cfg.max_rows, "brute_force_cap": cfg.brute_force_cap},
    }


def run_experiment(plan: ExperimentPlan) -> dict:
    """Write results.csv (one row per decoder x n) and summary.json under plan.out_dir."""
    out = Path(plan.out_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "results.csv"
    summary = {
        "csv_version": CSV_VERSION,
        "seed": plan.seed,
        "trials": plan.trials,
        "n_list": plan.n_list,
        "decoders": list(plan.decoders),
        "fixed_codebook": plan.fixed_codebook,
        "config": config_echo(plan.system),
        "cells": [],
        "skipped": [],
        "diagnostics": [],
    }
    estimates: dict[str, list[ErrorEstimate]] = {d: [] for d in plan.decoders}
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        fh.flush()
        for n in plan.n_list:
            if plan.fixed_codebook:
                summary["diagnostics"].append(_diagnostics(plan, n))
                cfg = plan.system.with_n(n)
                reg = cfg.registry()
                save_codebook(out / f"codebook_n{n}.vqcb", build_codebook(reg, trial_rng(plan.seed, n, FIXED_CODEBOOK_KEY)))
            est, skipped = estimate_error_rates(plan, n)
            for d, reason in skipped.items():
                summary["skipped"].append({"decoder": d, "n": n, "reason": reason})
            for d in plan.decoders:
                if d in est:
                    writer.writerow(est[d].row())
                    fh.flush()
                    os.fsync(fh.fileno())
                    estimates[d].append(est[d])
                    lo, hi = est[d].ci
                    summary["cells"].append({"decoder": d, "n": n, "errors": est[d].errors, "p_hat": est[d].p_hat,
                                             "ci": [lo, hi]})
    summary["regression"] = {d: vars(exponent_regression(e)) for d, e in estimates.items()}
    if plan.predict_exponents:
        summary["predictions"] = _predictions(plan.system)
    with open(out / "summary.json", "w") as fh:
        json.dump(jsonable(summary), fh, indent=2, allow_nan=False)
    return summary


def jsonable(o):
    """Strict-JSON copy: arrays to lists, non-finite floats to strings."""
    if isinstance(o, dict):
        return {str(k): jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return jsonable(o.tolist())
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return jsonable(o.item())
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    return o

