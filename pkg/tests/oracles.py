"""Slow, independent reference computations used as test oracles.

Nothing here imports the solver or decoder internals it is checking.
"""
import itertools
import math

import numpy as np
from scipy.optimize import minimize_scalar


def h(p):
    return -sum(v * math.log(v) for v in p if v > 0)


def kl(p, q):
    s = 0.0
    for a, b in zip(p, q):
        if a > 0:
            if b == 0:
                return math.inf
            s += a * math.log(a / b)
    return s


def mi(joint):
    joint = [list(r) for r in joint]
    px = [sum(r) for r in joint]
    py = [sum(c) for c in zip(*joint)]
    return sum(v * math.log(v / (px[i] * py[j]))
               for i, r in enumerate(joint) for j, v in enumerate(r) if v > 0)


def grid_inner_min_binary(q_xy, q_zy, W, step=1e-3, polish=False):
    """min over couplings, per y, on a 1-D grid of the (0,0) cell (binary X, Z).

    With ``polish`` the best grid cell is refined by a bounded scalar search on
    its two neighbouring intervals (the cost is convex in the cell value).
    """
    q_xy = np.asarray(q_xy, float)
    q_zy = np.asarray(q_zy, float)
    W = np.asarray(W, float)
    total = 0.0
    for y in range(q_xy.shape[1]):
        qy = q_xy[:, y].sum()
        if qy == 0:
            continue
        r = q_xy[:, y] / qy
        c = q_zy[y]
        lo, hi = max(0.0, r[0] + c[0] - 1), min(r[0], c[0])
        ts = np.arange(lo, hi + step / 2, step)
        ts = np.clip(np.append(ts, hi), lo, hi)

        def cost(t):
            J = [[t, r[0] - t], [c[0] - t, 1 - r[0] - c[0] + t]]
            v = 0.0
            for a in range(2):
                for b in range(2):
                    j = max(J[a][b], 0.0)
                    if j > 1e-15:
                        k = r[a] * W[a, b]
                        v = math.inf if k == 0 else v + j * math.log(j / k)
            return v

        vals = [cost(t) for t in ts]
        i = int(np.argmin(vals))
        best = vals[i]
        if polish and hi > lo:
            a, b = max(lo, ts[i] - step), min(hi, ts[i] + step)
            res = minimize_scalar(cost, bounds=(a, b), method="bounded", options={"xatol": 1e-12})
            best = min(best, float(res.fun))
        total += qy * best
    return total


def grid_beta_binary(joint_yz, rev, G, W, step=1e-3):
    """B_Q(Y,Z) by grid search (binary X, Z); ``rev`` is Q_{X|Y} rows by y."""
    q = np.asarray(joint_yz, float)
    total = 0.0
    for y in range(q.shape[0]):
        qy = q[y].sum()
        if qy == 0:
            continue
        c = q[y] / qy
        r = np.asarray(rev[y], float)
        lo, hi = max(0.0, r[0] + c[0] - 1), min(r[0], c[0])
        ts = np.clip(np.append(np.arange(lo, hi + step / 2, step), hi), lo, hi)
        best = math.inf
        for t in ts:
            J = [[t, r[0] - t], [c[0] - t, 1 - r[0] - c[0] + t]]
            v = 0.0
            for a in range(2):
                for b in range(2):
                    j = max(J[a][b], 0.0)
                    if j > 1e-15:
                        v += j * math.log(j / (c[b] * G[a] * W[a, b]))
            best = min(best, v)
        total += qy * best
    return total


def brute_likelihood(encode, G, W, n, z, y):
    """P(z|y) by enumerating X^n and calling the encoder on each x."""
    kx = len(G)
    num = den = 0.0
    for x in itertools.product(range(kx), repeat=n):
        if tuple(encode(np.array(x, dtype=np.int8))) != tuple(y):
            continue
        gx = math.prod(G[a] for a in x)
        den += gx
        num += gx * math.prod(W[a][b] for a, b in zip(x, z))
    return num / den if den > 0 else math.nan


def e0_grid(G, step=1e-3):
    """min over binary Q of 2D(Q||G) + H(Q) on a grid."""
    best = (math.inf, None)
    for q in np.arange(0, 1 + step / 2, step):
        Q = (q, 1 - q)
        v = 2 * kl(Q, G) + h(Q)
        if v < best[0]:
            best = (v, Q)
    return best


def e0_dd_grid(G, step=1e-3):
    best = math.inf
    for q in np.arange(0, 1 + step / 2, step):
        Q = (q, 1 - q)
        best = min(best, kl(Q, G) + h(Q))
    return best
