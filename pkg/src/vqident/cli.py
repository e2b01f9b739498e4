"""Command line entry point: exponent, simulate, diagnose, typeclass."""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import exponents as ex
from .config import RunConfig, load_config, resolve_seed
from .ensemble import LossyEncoder, build_codebook, concentration_diagnostic
from .errors import CapExceededError, ConfigError, InfeasibleError
from .harness import ExperimentPlan, jsonable, kn_diagnostic, run_experiment
from .simulation import DECODERS, sample_source, transmit, trial_rng
from .types_core import (
    EmpiricalType,
    enumerate_types,
    num_types,
    sample_from_type_class,
    type_class,
    type_class_size,
)

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_CAP = 0, 2, 3, 4
log = logging.getLogger("vqident")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _decoder_list(text: str) -> list[str]:
    names = [v.strip() for v in text.split(",") if v.strip()]
    bad = [v for v in names if v not in DECODERS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown decoders {bad}; choose from {', '.join(DECODERS)}")
    return names


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML config file")
    common.add_argument("--seed", help="master seed (u64); overrides IDENT_SEED and the config")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--decoders", type=_decoder_list)
    common.add_argument("--trials", type=int)
    common.add_argument("--n", type=_int_list, dest="n_list", metavar="LIST")
    common.add_argument("--fixed-codebook", action="store_true", default=None)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="vqident", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    e = sub.add_parser("exponent", parents=[common], help="E(R_I), E_DD(R_I), closed forms, capacity")
    e.add_argument("--rates", type=lambda s: [float(v) for v in s.split(",")], help="rate grid for a curve")
    e.add_argument("--starts", type=int, default=32)
    sub.add_parser("simulate", parents=[common], help="Monte Carlo error rates per decoder and n")
    d = sub.add_parser("diagnose", parents=[common], help="ensemble diagnostics")
    d.add_argument("what", choices=("kn", "concentration", "injectivity"))
    d.add_argument("--samples", type=int, default=200)
    t = sub.add_parser("typeclass", parents=[common], help="method-of-types utilities")
    t.add_argument("action", choices=("enumerate", "count", "sample"))
    t.add_argument("-k", type=int, default=2, help="alphabet size")
    t.add_argument("--counts", type=_int_list, help="type as comma-separated counts (sample)")
    t.add_argument("--draws", type=int, default=1)
    return p


def _load(args) -> RunConfig:
    if args.config is None:
        raise ConfigError("--config is required for this command")
    cfg = load_config(args.config)
    cfg.seed = resolve_seed(args.seed, cfg.seed)
    if args.n_list:
        cfg.n_list = args.n_list
    if args.trials is not None:
        cfg.trials = args.trials
    if args.decoders:
        cfg.decoders = tuple(args.decoders)
    if args.fixed_codebook:
        cfg.fixed_codebook = True
    return cfg


def _emit(args, name: str, payload: dict) -> None:
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / name, "w") as fh:
        json.dump(jsonable(payload), fh, indent=2, allow_nan=False)
    json.dump(jsonable(payload), sys.stdout, indent=2, allow_nan=False)
    sys.stdout.write("\n")


def cmd_exponent(args) -> int:
    rc = _load(args)
    s = rc.system
    opts = ex.ExponentOptions(starts=args.starts, seed=rc.seed & 0xFFFFFFFF)
    mapping = ex.default_mapping(s.G, s.constraint, s.ky)
    e, dd = ex.exponent_pair(s.G, s.W, mapping, s.rate, opts)
    zr = ex.zero_rate_closed_forms(s.G)
    cap = ex.identification_capacity(s.G, s.W, s.constraint.rate, s.ky)
    out = {
        "rate": s.rate,
        "E": e.to_dict(),
        "E_DD": dd.to_dict(),
        "gap": e.value - dd.value,
        "closed_forms": {"E0": zr.E0, "E0_dd": zr.E0_dd, "Qstar": zr.Qstar, "gap": zr.gap,
                         "note": "clean channel, identity test channel"},
        "capacity": {"R_C": s.constraint.rate, "value": cap.value, "kernel": cap.kernel, "mi_xy": cap.mi_xy},
        "seed": rc.seed,
    }
    if args.rates:
        out["curve"] = [{"rate": r.rate, "E": r.value} for r in ex.exponent_curve(s.G, s.W, mapping, args.rates, opts=opts)]
        out["curve_dd"] = [{"rate": r.rate, "E_DD": r.value}
                           for r in ex.exponent_curve(s.G, s.W, mapping, args.rates, kind="dd", opts=opts)]
    _emit(args, "exponent.json", out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    rc = _load(args)
    plan = ExperimentPlan(rc.system, rc.n_list, rc.trials, rc.decoders, rc.seed, args.out, rc.fixed_codebook)
    summary = run_experiment(plan)
    for cell in summary["cells"]:
        log.info("%s n=%d p_hat=%.4g", cell["decoder"], cell["n"], cell["p_hat"])
    print(args.out / "results.csv")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    rc = _load(args)
    reports = []
    for n in rc.n_list:
        cfg = replace(rc.system, n=n)
        reg = cfg.registry()
        if args.what == "injectivity":
            reg.check()
            reports.append({"n": n, "types": len(reg), "repairs": [[list(t.counts) for t in r] for r in reg.repairs],
                            "injective": True, "notes": reg.notes})
            continue
        if args.what == "concentration":
            rng = trial_rng(rc.seed, n, 0)
            enc = LossyEncoder(build_codebook(reg, rng, cfg.max_rows), cfg.brute_force_cap)
            xs = np.stack([sample_source(cfg.G, n, rng) for _ in range(args.samples)])
            rep = concentration_diagnostic(enc, xs)
            reports.append({"n": n, "window": rep.window, "fraction_in_window": rep.fraction_in_window,
                            "skipped_low_entropy": rep.skipped_low_entropy, "passes": rep.passes()})
            continue
        if cfg.kx ** n > cfg.brute_force_cap:
            raise CapExceededError(f"K_n needs |X|^n = {cfg.kx ** n} <= cap {cfg.brute_force_cap}")
        draws = rc.trials if args.trials is not None else 100
        values, worst = [], 0.0
        for t in range(draws):
            rng = trial_rng(rc.seed, n, t)
            enc = LossyEncoder(build_codebook(reg, rng, cfg.max_rows), cfg.brute_force_cap)
            z = transmit(cfg.W, sample_source(cfg.G, n, rng), rng)
            rep = kn_diagnostic(enc, z, cfg.G, cfg.W, rc.seed)
            values.append(rep.value)
            worst = max(worst, rep.value - rep.bound)
        bound = 1 + n * math.log(1 / float(cfg.G[cfg.G > 0].min()))
        reports.append({"n": n, "draws": draws, "max_kn": max(values), "bound": bound,
                        "violations": int(sum(v > bound + 1e-9 for v in values))})
    _emit(args, f"diagnose_{args.what}.json", {"diagnostic": args.what, "seed": rc.seed, "reports": reports})
    return EXIT_OK


def cmd_typeclass(args) -> int:
    n_list = args.n_list or [4]
    out = []
    if args.action == "sample":
        if not args.counts:
            raise ConfigError("typeclass sample needs --counts")
        t = EmpiricalType(tuple(args.counts))
        rng = np.random.default_rng(resolve_seed(args.seed, None))
        draws = sample_from_type_class(t, rng, size=args.draws)
        out = {"type": list(t.counts), "size": type_class_size(t), "draws": draws.tolist()}
    else:
        for n in n_list:
            types = enumerate_types(n, args.k)
            entry = {"n": n, "k": args.k, "num_types": num_types(n, args.k),
                     "total_sequences": sum(type_class_size(t) for t in types)}
            if args.action == "enumerate":
                entry["types"] = [{"counts": list(t.counts), "size": type_class_size(t)} for t in types]
            out.append(entry)
        if args.counts and args.action == "enumerate":
            t = EmpiricalType(tuple(args.counts))
            out.append({"members": [s.tolist() for s in type_class(t)]})
    print(json.dumps(out, indent=2))
    return EXIT_OK


COMMANDS = {"exponent": cmd_exponent, "simulate": cmd_simulate, "diagnose": cmd_diagnose, "typeclass": cmd_typeclass}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except CapExceededError as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP


if __name__ == "__main__":
    sys.exit(main())
