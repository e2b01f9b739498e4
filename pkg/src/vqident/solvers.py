"""KL projection onto couplings with fixed marginals.

Both the inner minimisation of the exponent and B_Q(Y,Z) reduce, one
conditioning symbol y at a time, to

    min_J  sum_{x,z} J(x,z) log[J(x,z) / K(x,z)]
    s.t.   sum_z J(x,z) = r(x),  sum_x J(x,z) = c(z)

with K >= 0 fixed. Alternating Bregman (KL) projections onto the two affine
constraint sets -- Sinkhorn scaling -- converge to the optimum
J = diag(u) K diag(v).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import SolverError


@dataclass
class Projection:
    plan: np.ndarray
    value: float
    residual: float
    iterations: int


def transport_feasible(support: np.ndarray, row: np.ndarray, col: np.ndarray, tol: float = 1e-10) -> bool:
    """Is there a nonnegative plan on ``support`` with the given marginals?"""
    ii, jj = np.nonzero(support)
    if ii.size == 0:
        return bool(row.sum() <= tol and col.sum() <= tol)
    m, k = support.shape
    a = np.zeros((m + k, ii.size))
    a[ii, np.arange(ii.size)] = 1.0
    a[m + jj, np.arange(ii.size)] = 1.0
    b = np.concatenate([row, col])
    res = linprog(np.zeros(ii.size), A_eq=a, b_eq=b, bounds=(0, None), method="highs")
    return bool(res.status == 0)


def kl_projection(K, row, col, tol: float = 1e-12, max_iter: int = 100_000) -> Projection:
    K = np.asarray(K, dtype=float)
    row = np.asarray(row, dtype=float)
    col = np.asarray(col, dtype=float)
    if abs(row.sum() - col.sum()) > 1e-9:
        raise ValueError(f"marginal masses differ: {row.sum()} vs {col.sum()}")
    K = K * (row[:, None] > 0) * (col[None, :] > 0)
    if np.any(K == 0) and not transport_feasible(K > 0, row, col):
        return Projection(np.zeros_like(K), math.inf, math.inf, 0)
    u = np.ones(K.shape[0])
    v = np.ones(K.shape[1])
    residual = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        kv = K @ v
        u = np.divide(row, kv, out=np.zeros_like(row), where=kv > 0)
        ku = K.T @ u
        v = np.divide(col, ku, out=np.zeros_like(col), where=ku > 0)
        if it % 10 == 0 or it < 10:
            plan = u[:, None] * K * v[None, :]
            residual = float(np.abs(plan.sum(axis=1) - row).max())
            if residual < tol:
                break
    plan = u[:, None] * K * v[None, :]
    residual = float(max(np.abs(plan.sum(axis=1) - row).max(), np.abs(plan.sum(axis=0) - col).max()))
    if residual > max(tol, 1e-9):
        raise SolverError(f"Sinkhorn did not converge in {max_iter} iterations", residual=residual)
    pos = plan > 0
    value = float(np.sum(plan[pos] * np.log(plan[pos] / K[pos])))
    return Projection(plan, value, residual, it)
