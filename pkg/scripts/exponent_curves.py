"""E(R) and E_DD(R) for a few sources, plus the zero-rate closed forms.

    python scripts/exponent_curves.py --out runs/curves
"""
import argparse
import json
from pathlib import Path

import numpy as np

from vqident import exponents as ex
from vqident.ensemble import CompressionConstraint
from vqident.harness import jsonable

W = np.array([[0.9, 0.1], [0.2, 0.8]])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/curves")
    ap.add_argument("--rates", default="0,0.025,0.05,0.1,0.15,0.2,0.3,0.4")
    ap.add_argument("--rc", type=float, default=0.5, help="compression rate for the default mapping")
    args = ap.parse_args()
    rates = [float(r) for r in args.rates.split(",")]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    results = {}
    for p in (0.5, 0.7, 0.8, 0.9):
        G = (p, 1 - p)
        mapping = ex.default_mapping(G, CompressionConstraint(rate=args.rc, excess_exponent=10.0), 2)
        e = ex.exponent_curve(G, W, mapping, rates)
        dd = ex.exponent_curve(G, W, mapping, rates, kind="dd")
        results[f"{p:g}"] = {
            "rates": rates,
            "E": [r.value for r in e],
            "E_DD": [r.value for r in dd],
            "closed_forms_clean_channel": vars(ex.zero_rate_closed_forms(G)),
        }
        print(f"G=({p:g},{1 - p:g})")
        for r, a, b in zip(rates, e, dd):
            print(f"  R={r:<6g} E={a.value:.5f}  E_DD={b.value:.5f}")
    rcs = [0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 0.8]
    caps = ex.capacity_curve((0.7, 0.3), W, rcs)
    results["capacity"] = [{"R_C": rc, "C": c.value, "I_XY": c.mi_xy} for rc, c in zip(rcs, caps)]
    (out / "curves.json").write_text(json.dumps(jsonable(results), indent=2))


if __name__ == "__main__":
    main()
