"""Monte Carlo error rates for all decoders on a config, with predicted exponents.

Thin wrapper over the harness; equivalent to ``vqident simulate`` but also
prints a table.

    python scripts/desk_simulation.py configs/desk_n8.toml --out runs/desk --trials 2000
"""
import argparse
import csv
from dataclasses import replace
from pathlib import Path

from vqident.config import load_config, resolve_seed
from vqident.harness import ExperimentPlan, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--out", default="runs/desk")
    ap.add_argument("--trials", type=int)
    ap.add_argument("--seed", type=int)
    args = ap.parse_args()
    rc = load_config(args.config)
    plan = ExperimentPlan(rc.system, rc.n_list or [rc.system.n], trials=args.trials or rc.trials,
                          decoders=rc.decoders, seed=resolve_seed(args.seed, rc.seed),
                          out_dir=Path(args.out), fixed_codebook=rc.fixed_codebook)
    summary = run_experiment(plan)
    with open(Path(args.out) / "results.csv") as fh:
        for row in csv.DictReader(fh):
            print(f"{row['decoder']:>10} n={row['n']:>3} p={float(row['p_hat']):.4f} "
                  f"[{float(row['ci_lo']):.4f}, {float(row['ci_hi']):.4f}]")
    pred = summary.get("predictions", {})
    if "E" in pred:
        print(f"predicted E={pred['E']['value']:.4f}  E_DD={pred['E_DD']['value']:.4f}")


if __name__ == "__main__":
    main()
