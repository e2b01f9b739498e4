"""The optimized-mapping exponent at full kernel resolution, one rate per line.

Slow: every outer point scans the whole kernel grid.

    python scripts/minmaxmin_full.py --rc 0.2 --rates 0,0.05,0.1
"""
import argparse
import json
import time

import numpy as np

from vqident import exponents as ex
from vqident.ensemble import CompressionConstraint
from vqident.harness import jsonable


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--G", default="0.8,0.2")
    ap.add_argument("--W", default="0.9,0.1;0.2,0.8", help="rows separated by ';'")
    ap.add_argument("--rc", type=float, default=0.2)
    ap.add_argument("--ec", type=float, default=10.0)
    ap.add_argument("--rates", default="0,0.05,0.1")
    ap.add_argument("--kernel-step", type=float, default=0.05)
    ap.add_argument("--starts", type=int, default=16)
    ap.add_argument("--json", help="write results here")
    args = ap.parse_args()
    G = np.array([float(v) for v in args.G.split(",")])
    W = np.array([[float(v) for v in row.split(",")] for row in args.W.split(";")])
    c = CompressionConstraint(rate=args.rc, excess_exponent=args.ec)
    opts = ex.MinMaxMinOptions(kernel_step=args.kernel_step, qx_starts=args.starts)
    rows = []
    for R in (float(r) for r in args.rates.split(",")):
        t = time.time()
        res = ex.exponent_minmaxmin(G, W, c, R, opts=opts)
        fixed = ex.exponent_fixed_mapping(G, W, ex.default_mapping(G, c, W.shape[0]), R)
        print(f"R={R:<6g} optimized={res.value:.5f}  default mapping={fixed.value:.5f}  ({time.time() - t:.0f}s)")
        rows.append({"R": R, "optimized": res.to_dict(), "default_mapping": fixed.value})
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(jsonable(rows), fh, indent=2)


if __name__ == "__main__":
    main()
