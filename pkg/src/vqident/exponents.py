"""Error exponents of the compressed-enrollment identification system.

The exponent objective for a source type Q_X, test channel Q_{Y|X}
and output kernel Q_{Z|Y} is

    D(Q_X||G) + min_{Q~ in U} D(Q~_{XZ|Y} || Q_{X|Y} x W | Q_Y) + rate term

with rate term max{[I(Y;Z) - I(X;Y)]_+, [I(Y;Z) + D(Q_X||G) - R]_+}, or
[I(Y;Z) - R]_+ for the baseline system without the compression-aware term.

The outer problem is solved by nesting: for fixed Q_X the joint minimum
over Q_{Z|Y} and Q~ is a convex program in V = Q~_{Z|XY}, and the outer
search over Q_X is multi-start Nelder-Mead. Outer results are upper bounds
on the true minimum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Callable

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .ensemble import CompressionConstraint, blend_mapping, check_compression_constraint, identity_kernel
from .errors import InfeasibleError, SolverError
from .solvers import kl_projection
from .types_core import (
    _compositions,
    as_distribution,
    as_kernel,
    divergence,
    entropy,
    mutual_information,
    positive_part,
)

Mapping = Callable[[np.ndarray], np.ndarray]
FLOOR = 1e-9
LOGIT_CLIP = 30.0
RATE_TERMS = ("full", "dd")


# -- algebraic helpers ------------------------------------------------------------

def min_identity(a: float, b: float) -> float:
    """a - [a-b]_+ , which equals min{a, b}."""
    return a - positive_part(a - b)


def max_identity(a: float, b: float) -> float:
    """b + [a-b]_+ , which equals max{a, b}."""
    return b + positive_part(a - b)


# -- mappings -----------------------------------------------------------------------

def identity_mapping(k: int) -> Mapping:
    eye = identity_kernel(k, k)
    return lambda qx: eye


def constant_mapping(qy) -> Mapping:
    qy = as_distribution(qy, "qy")
    return lambda qx: np.tile(qy, (len(qx), 1))


def table_mapping(kernel) -> Mapping:
    kernel = as_kernel(kernel, "kernel")
    return lambda qx: kernel


# -- inner convex program -----------------------------------------------------------

@dataclass
class InnerResult:
    value: float
    posterior: np.ndarray  # Q~(x|y,z), shape (|Y|, |X|, |Z|)
    residual: float


def inner_divergence_min(q_xy, q_zy, W, tol: float = 1e-12) -> InnerResult:
    """min over U(Q_{X|Y}) of D(Q~_{XZ|Y} || Q_{X|Y} x W | Q_Y).

    ``q_xy`` is the joint |X| x |Y|, ``q_zy`` the kernel Q_{Z|Y} (|Y| x |Z|).
    Per y this is the KL projection of Q_{X|Y}(x|y) W(z|x) onto couplings of
    Q_{X|Y}(.|y) and Q_{Z|Y}(.|y).
    """
    q_xy = np.asarray(q_xy, dtype=float)
    q_zy = np.asarray(q_zy, dtype=float)
    W = np.asarray(W, dtype=float)
    if q_xy.shape[0] != W.shape[0] or q_zy.shape[0] != q_xy.shape[1] or q_zy.shape[1] != W.shape[1]:
        raise ValueError(f"inconsistent shapes {q_xy.shape}, {q_zy.shape}, {W.shape}")
    q_y = q_xy.sum(axis=0)
    post = np.zeros((q_xy.shape[1], q_xy.shape[0], W.shape[1]))
    total, worst = 0.0, 0.0
    for y in np.flatnonzero(q_y > 0):
        rev = q_xy[:, y] / q_y[y]
        K = rev[:, None] * W
        proj = kl_projection(K, rev, q_zy[y], tol=tol)
        if math.isinf(proj.value):
            return InnerResult(math.inf, post, math.inf)
        total += q_y[y] * proj.value
        worst = max(worst, proj.residual)
        col = proj.plan.sum(axis=0)
        post[y] = np.divide(proj.plan, col[None, :], out=np.zeros_like(proj.plan), where=col[None, :] > 0)
    return InnerResult(max(float(total), 0.0), post, worst)


# -- objective ------------------------------------------------------------------------

@dataclass
class ObjectiveTerms:
    divergence: float
    inner: float
    rate: float
    mi_xy: float
    mi_yz: float

    @property
    def total(self) -> float:
        return self.divergence + self.inner + self.rate


def rate_term(mi_yz: float, mi_xy: float, d: float, R: float, kind: str = "full") -> float:
    if kind == "dd":
        return positive_part(mi_yz - R)
    return max(positive_part(mi_yz - mi_xy), positive_part(mi_yz + d - R))


def objective_terms(G, W, qx, qyx, qzy, R: float, kind: str = "full") -> ObjectiveTerms:
    qx = np.asarray(qx, dtype=float)
    q_xy = qx[:, None] * np.asarray(qyx, dtype=float)
    q_y = q_xy.sum(axis=0)
    d = divergence(qx, G)
    inner = inner_divergence_min(q_xy, qzy, W).value
    mi_xy = mutual_information(q_xy)
    mi_yz = mutual_information(q_y[:, None] * np.asarray(qzy, dtype=float))
    return ObjectiveTerms(d, inner, rate_term(mi_yz, mi_xy, d, R, kind), mi_xy, mi_yz)


class _InnerProblem:
    """For fixed Q_XY: min over V = Q~_{Z|XY} of D(V||W|Q_XY) + lam * I(Y;Z)."""

    def __init__(self, q_xy, W):
        self.q = q_xy
        self.W = W
        self.pairs = [(x, y) for x, y in zip(*np.nonzero(q_xy > 0))]
        self.supp = [np.flatnonzero(W[x] > 0) for x, _ in self.pairs]
        self.sizes = [s.size for s in self.supp]
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)])
        self.logw = [np.log(W[x, s]) for (x, _), s in zip(self.pairs, self.supp)]
        self.q_y = q_xy.sum(axis=0)
        self._last = None

    @property
    def dim(self) -> int:
        return int(self.offsets[-1])

    def unpack(self, theta) -> list[np.ndarray]:
        out = []
        for i in range(len(self.pairs)):
            t = theta[self.offsets[i]:self.offsets[i + 1]]
            t = t - t.max()
            e = np.exp(t)
            out.append(e / e.sum())
        return out

    def pack(self, V) -> np.ndarray:
        """V: |X| x |Y| x |Z| array."""
        parts = []
        for (x, y), s in zip(self.pairs, self.supp):
            v = np.maximum(V[x, y, s], 1e-300)
            parts.append(np.clip(np.log(v) - np.log(v).max(), -LOGIT_CLIP, 0.0))
        return np.concatenate(parts) if parts else np.zeros(0)

    def default_theta(self) -> np.ndarray:
        return np.concatenate([lw - lw.max() for lw in self.logw]) if self.pairs else np.zeros(0)

    def pyz(self, vs) -> np.ndarray:
        p = np.zeros((self.q.shape[1], self.W.shape[1]))
        for (x, y), s, v in zip(self.pairs, self.supp, vs):
            p[y, s] += self.q[x, y] * v
        return p

    def evaluate(self, theta):
        """(divergence, I(Y;Z), d divergence/d theta, d I/d theta); last call cached."""
        key = theta.tobytes()
        if self._last is not None and self._last[0] == key:
            return self._last[1]
        vs = self.unpack(theta)
        div = 0.0
        for (x, y), v, lw in zip(self.pairs, vs, self.logw):
            pos = v > 0
            div += self.q[x, y] * float(np.sum(v[pos] * (np.log(v[pos]) - lw[pos])))
        p = self.pyz(vs)
        pz = p.sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            dmi = np.where(p > 0, np.log(p / (self.q_y[:, None] * pz[None, :])), 0.0)
        mi = max(float(np.sum(p * dmi)), 0.0)
        gdiv = np.empty(self.dim)
        gmi = np.empty(self.dim)
        for i, ((x, y), v, lw, s) in enumerate(zip(self.pairs, vs, self.logw, self.supp)):
            sl = slice(self.offsets[i], self.offsets[i + 1])
            g = self.q[x, y] * (np.log(np.maximum(v, 1e-300)) - lw)
            gdiv[sl] = v * (g - np.dot(v, g))
            h = self.q[x, y] * dmi[y, s]
            gmi[sl] = v * (h - np.dot(v, h))
        out = (div, mi, gdiv, gmi)
        self._last = (key, out)
        return out

    def solve(self, lam: float, theta0) -> tuple[np.ndarray, float, float]:
        if self.dim == 0:
            div, mi, _, _ = self.evaluate(theta0)
            return theta0, div, mi

        def fun(t):
            div, mi, gdiv, gmi = self.evaluate(t)
            return div + lam * mi, gdiv + lam * gmi

        res = minimize(fun, theta0, jac=True, method="L-BFGS-B",
                       bounds=[(-LOGIT_CLIP, LOGIT_CLIP)] * self.dim,
                       options={"maxiter": 2000, "ftol": 1e-15, "gtol": 1e-11})
        div, mi, _, _ = self.evaluate(res.x)
        return res.x, div, mi

    def solve_capped(self, cap: float, theta0) -> tuple[np.ndarray, float, float] | None:
        """min divergence subject to I(Y;Z) <= cap, by SLSQP."""
        if self.dim == 0:
            return None
        res = minimize(lambda t: self.evaluate(t)[0], theta0, method="SLSQP",
                       jac=lambda t: self.evaluate(t)[2],
                       constraints=[{"type": "ineq", "fun": lambda t: cap - self.evaluate(t)[1],
                                     "jac": lambda t: -self.evaluate(t)[3]}],
                       bounds=[(-LOGIT_CLIP, LOGIT_CLIP)] * self.dim,
                       options={"maxiter": 500, "ftol": 1e-15})
        div, mi, _, _ = self.evaluate(res.x)
        if not res.success or mi > cap + 1e-9:
            return None
        return res.x, div, mi

    def qzy(self, theta) -> np.ndarray:
        p = self.pyz(self.unpack(theta))
        out = np.zeros_like(p)
        pos = self.q_y > 0
        out[pos] = p[pos] / self.q_y[pos, None]
        out[~pos] = 1.0 / p.shape[1]
        return out


def _min_over_channels(prob: _InnerProblem, c: float, theta0=None, iters: int = 60):
    """min_V D(V||W|Q_XY) + [I(Y;Z) + c]_+ , a convex program.

    Uses [u]_+ = max_{0<=lam<=1} lam*u and minimax duality: the dual
    function is concave in lam, its slope at lam is I(Y;Z) + c at the
    lam-optimal V.
    """
    base = prob.default_theta() if theta0 is None else theta0
    t0 = prob.default_theta()  # V = W, zero divergence
    d0, i0 = prob.evaluate(t0)[:2]
    if i0 + c <= 0:
        return t0, d0
    t1, d1, i1 = prob.solve(1.0, base)
    if i1 + c >= -1e-12:
        return t1, d1 + positive_part(i1 + c)
    best_t, best_v = t1, d1 + positive_part(i1 + c)
    # optimum sits on I(Y;Z) = -c
    capped = prob.solve_capped(-c, t1)
    if capped is not None:
        t, d, i = capped
        val = d + positive_part(i + c)
        if val < best_v:
            best_t, best_v = t, val
        return best_t, best_v
    lo, hi, theta = 0.0, 1.0, t1
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        theta, d, i = prob.solve(mid, theta)
        val = d + positive_part(i + c)
        if val < best_v:
            best_t, best_v = theta, val
        if i + c > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-10:
            break
    return best_t, best_v


@dataclass
class ExponentResult:
    value: float
    qx: np.ndarray
    qyx: np.ndarray
    qzy: np.ndarray
    posterior: np.ndarray
    terms: ObjectiveTerms
    rate: float
    kind: str = "full"
    restarts: int = 0
    evaluations: int = 0
    nonconvex_outer: bool = True  # value is an upper bound on the true min
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "kind": self.kind,
            "rate": self.rate,
            "qx": self.qx.tolist(),
            "qyx": self.qyx.tolist(),
            "qzy": self.qzy.tolist(),
            "terms": {
                "divergence": self.terms.divergence,
                "inner": self.terms.inner,
                "rate": self.terms.rate,
                "mi_xy": self.terms.mi_xy,
                "mi_yz": self.terms.mi_yz,
            },
            "restarts": self.restarts,
            "evaluations": self.evaluations,
            "upper_bound_only": self.nonconvex_outer,
            **self.meta,
        }


@dataclass
class ExponentOptions:
    starts: int = 32
    refine: int = 4
    xatol: float = 1e-7
    fatol: float = 1e-10
    seed: int = 0


def _channel_min(G, W, qx, qyx, R, kind, theta0=None):
    """Inner value (over Q_{Z|Y}) for fixed Q_X and test channel."""
    q_xy = qx[:, None] * qyx
    prob = _InnerProblem(q_xy, W)
    d = divergence(qx, G)
    if kind == "dd":
        c = -R
    else:
        c = max(-mutual_information(q_xy), d - R)
    theta, val = _min_over_channels(prob, c, theta0)
    return d + val, prob.qzy(theta), theta


def _softmax(logits, support, k):
    q = np.zeros(k)
    t = np.clip(logits, -LOGIT_CLIP, LOGIT_CLIP)
    e = np.exp(t - t.max())
    q[support] = e / e.sum()
    return q


def _start_points(support_size: int, opts: ExponentOptions, rng) -> list[np.ndarray]:
    pts = []
    res = 1
    while math.comb(res + 1 + support_size - 1, support_size - 1) <= opts.starts // 2 and res < 200:
        res += 1
    for c in _compositions(res, support_size):
        pts.append(np.maximum(np.array(c, dtype=float) / res, FLOOR))
    while len(pts) < opts.starts:
        pts.append(np.maximum(rng.dirichlet(np.ones(support_size)), FLOOR))
    return [p / p.sum() for p in pts]


def _finalize(G, W, mapping, R, kind, candidates, restarts, evals) -> ExponentResult:
    """Pick the best candidate by the re-evaluated objective."""
    best = None
    for qx, qzy in candidates:
        qyx = np.asarray(mapping(qx), dtype=float)
        terms = objective_terms(G, W, qx, qyx, qzy, R, kind)
        if best is None or terms.total < best[0].total - 1e-15:
            best = (terms, qx, qyx, qzy)
    if best is None or not math.isfinite(best[0].total):
        raise SolverError("every start failed to produce a finite objective", residual=math.inf)
    terms, qx, qyx, qzy = best
    q_xy = qx[:, None] * qyx
    inner = inner_divergence_min(q_xy, qzy, W)
    return ExponentResult(terms.total, qx, qyx, qzy, inner.posterior, terms, R, kind, restarts, evals,
                          meta={"inner_residual": inner.residual})


def _optimize(G, W, mapping: Mapping, R: float, kind: str, opts: ExponentOptions, warm=()) -> ExponentResult:
    G = as_distribution(G, "G")
    W = as_kernel(W, "W")
    support = np.flatnonzero(G > 0)
    k = G.size
    rng = np.random.default_rng(opts.seed)
    evals = 0
    cache: dict[bytes, tuple[float, np.ndarray]] = {}

    def f(qx):
        nonlocal evals
        key = np.round(qx, 14).tobytes()
        if key not in cache:
            evals += 1
            qyx = np.asarray(mapping(qx), dtype=float)
            val, qzy, _ = _channel_min(G, W, qx, qyx, R, kind)
            cache[key] = (val, qzy)
        return cache[key]

    scored = []
    for p in _start_points(support.size, opts, rng):
        qx = np.zeros(k)
        qx[support] = p
        scored.append((f(qx)[0], qx))
    for qx, _ in warm:
        scored.append((f(qx)[0], np.asarray(qx, dtype=float)))
    scored.sort(key=lambda t: t[0])
    candidates = [(qx, f(qx)[1]) for _, qx in scored[:opts.refine]]
    candidates += [(np.asarray(a, float), np.asarray(b, float)) for a, b in warm]
    if support.size == 2:
        # one free coordinate: bounded Brent around each of the best starts
        h = 1.0 / max(2, opts.starts // 2)
        for _, qx0 in scored[:opts.refine]:
            a = qx0[support[0]]

            def along(u):
                qx = np.zeros(k)
                qx[support] = [u, 1 - u]
                return qx

            res = minimize_scalar(lambda u: f(along(u))[0], bounds=(max(FLOOR, a - h), min(1 - FLOOR, a + h)),
                                  method="bounded", options={"xatol": opts.xatol})
            qx = along(res.x)
            candidates.append((qx, f(qx)[1]))
    elif support.size > 2:
        for _, qx0 in scored[:opts.refine]:
            t0 = np.log(np.maximum(qx0[support], 1e-300))
            res = minimize(lambda t: f(_softmax(t, support, k))[0], t0 - t0.max(), method="Nelder-Mead",
                           options={"xatol": opts.xatol, "fatol": opts.fatol, "maxiter": 4000})
            qx = _softmax(res.x, support, k)
            candidates.append((qx, f(qx)[1]))
    return _finalize(G, W, mapping, R, kind, candidates, len(scored), evals)


def exponent_fixed_mapping(G, W, mapping: Mapping, R: float, opts: ExponentOptions | None = None,
                           warm=()) -> ExponentResult:
    """Error exponent for a given continuous test-channel mapping."""
    return _optimize(G, W, mapping, R, "full", opts or ExponentOptions(), warm)


def exponent_dd(G, W, mapping: Mapping, R: float, opts: ExponentOptions | None = None,
                warm=()) -> ExponentResult:
    """Same objective with the baseline rate term [I(Y;Z) - R]_+."""
    return _optimize(G, W, mapping, R, "dd", opts or ExponentOptions(), warm)


def exponent_pair(G, W, mapping: Mapping, R: float, opts: ExponentOptions | None = None):
    """(E, E_DD), the baseline warm-started at E's witness so E_DD <= E."""
    e = exponent_fixed_mapping(G, W, mapping, R, opts)
    dd = exponent_dd(G, W, mapping, R, opts, warm=[(e.qx, e.qzy)])
    return e, dd


def exponent_curve(G, W, mapping: Mapping, rates, kind: str = "full",
                   opts: ExponentOptions | None = None) -> list[ExponentResult]:
    """E over increasing rates, warm-started so the curve is non-increasing."""
    out: list[ExponentResult] = []
    for R in sorted(rates):
        warm = [(r.qx, r.qzy) for r in out[-1:]]
        out.append(_optimize(G, W, mapping, R, kind, opts or ExponentOptions(), warm))
    return out


# -- closed forms and checks ---------------------------------------------------------

@dataclass
class ZeroRate:
    E0: float
    E0_dd: float
    Qstar: np.ndarray

    @property
    def gap(self) -> float:
        return self.E0 - self.E0_dd


def zero_rate_closed_forms(G) -> ZeroRate:
    """Clean channel, identity test channel, R = 0."""
    G = as_distribution(G, "G")
    s = float(np.sum(G ** 2))
    return ZeroRate(-math.log(s), -math.log(float(G.max())), G ** 2 / s)


@dataclass
class LinearityReport:
    rates: list[float]
    values: list[float]
    e0: float
    deviations: list[float]
    tol: float

    @property
    def max_linear_rate(self) -> float | None:
        ok = [r for r, d in zip(self.rates, self.deviations) if d < self.tol]
        return max(ok) if ok else None

    @property
    def holds(self) -> bool:
        return all(d < self.tol for d in self.deviations)


def low_rate_linearity_check(G, W, mapping: Mapping, rates, tol: float = 1e-3,
                             opts: ExponentOptions | None = None) -> LinearityReport:
    rates = sorted(set([0.0] + [float(r) for r in rates]))
    curve = exponent_curve(G, W, mapping, rates, opts=opts)
    e0 = curve[0].value
    vals = [r.value for r in curve]
    devs = [abs(v - (e0 - r)) for r, v in zip(rates, vals)]
    return LinearityReport(rates, vals, e0, devs, tol)


# -- min-max-min ---------------------------------------------------------------------

@dataclass
class MinMaxMinOptions:
    kernel_step: float = 0.05
    qx_starts: int = 16
    refine: bool = True
    seed: int = 0


def _kernel_grid(kx: int, ky: int, step: float) -> list[np.ndarray]:
    m = int(round(1 / step))
    rows = [np.array(c, dtype=float) / m for c in _compositions(m, ky)]
    return [np.array(r) for r in product(rows, repeat=kx)]


def _feasible_kernel(qx, qyx, constraint, G) -> bool:
    return check_compression_constraint(qx, qyx, constraint, G).passed


def _best_kernel(G, W, qx, constraint, R, grid, refine, maxiter=150) -> tuple[float, np.ndarray]:
    """Heuristic max over feasible Q_{Y|X} of the inner channel minimum:
    scan ``grid`` then polish the winner with Nelder-Mead on row logits."""
    best_v, best_k = -math.inf, None
    for K in grid:
        if not _feasible_kernel(qx, K, constraint, G):
            continue
        v = _channel_min(G, W, qx, K, R, "full")[0]
        if v > best_v:
            best_v, best_k = v, K
    if best_k is None:
        raise InfeasibleError(f"no test channel satisfies the {constraint.kind} constraint at Q_X = {qx.tolist()}")
    if refine:
        kx, ky = best_k.shape

        def kernel(t):
            return np.vstack([_softmax(row, np.arange(ky), ky) for row in t.reshape(kx, ky)])

        def neg(t):
            K = kernel(t)
            if not _feasible_kernel(qx, K, constraint, G):
                return 1e6
            return -_channel_min(G, W, qx, K, R, "full")[0]

        t0 = np.log(np.maximum(best_k, 1e-12)).ravel()
        res = minimize(neg, t0, method="Nelder-Mead", options={"xatol": 1e-6, "fatol": 1e-10, "maxiter": maxiter})
        if -res.fun > best_v:
            best_v, best_k = -res.fun, kernel(res.x)
    return best_v, best_k


def exponent_minmaxmin(G, W, constraint: CompressionConstraint, R: float, ky: int | None = None,
                       opts: MinMaxMinOptions | None = None) -> ExponentResult:
    """min over Q_X of a (heuristic) max over feasible kernels of the channel minimum.

    Start points scan the full kernel grid and polish; the outer refinement
    only scans the kernels that won at some start, and its end point is
    re-scored with the full grid. The achieving kernels are returned as a
    lookup table in ``meta``.
    """
    opts = opts or MinMaxMinOptions()
    G = as_distribution(G, "G")
    W = as_kernel(W, "W")
    ky = ky or G.size
    grid = _kernel_grid(G.size, ky, opts.kernel_step)
    support = np.flatnonzero(G > 0)
    table: dict[tuple, tuple[float, np.ndarray]] = {}
    pool: list[np.ndarray] = []
    local: dict[tuple, float] = {}

    def g(qx):
        key = tuple(np.round(qx, 12))
        if key not in table:
            table[key] = _best_kernel(G, W, qx, constraint, R, grid, opts.refine)
        return table[key][0]

    def g_pool(qx):
        # outer search: winners of the start points only, no polish
        key = tuple(np.round(qx, 12))
        if key not in local:
            local[key] = _best_kernel(G, W, qx, constraint, R, pool, False)[0]
        return local[key]

    def embed(p):
        qx = np.zeros(G.size)
        qx[support] = p
        return qx

    rng = np.random.default_rng(opts.seed)
    starts = []
    for p in _start_points(support.size, ExponentOptions(starts=opts.qx_starts), rng):
        qx = embed(p)
        starts.append((g(qx), qx))
        pool.append(table[tuple(np.round(qx, 12))][1])
    starts.sort(key=lambda t: t[0])
    qx_best = starts[0][1]
    if support.size > 1 and opts.refine:
        if support.size == 2:
            h = 1.0 / max(2, opts.qx_starts // 2)
            a = qx_best[support[0]]
            res = minimize_scalar(lambda u: g_pool(embed([u, 1 - u])),
                                  bounds=(max(FLOOR, a - h), min(1 - FLOOR, a + h)),
                                  method="bounded", options={"xatol": 1e-5})
            cand = embed([res.x, 1 - res.x])
        else:
            t0 = np.log(qx_best[support])
            res = minimize(lambda t: g_pool(_softmax(t, support, G.size)), t0 - t0.max(), method="Nelder-Mead",
                           options={"xatol": 1e-5, "fatol": 1e-9, "maxiter": 200})
            cand = _softmax(res.x, support, G.size)
        if g(cand) < g(qx_best):
            qx_best = cand
    _, K = table[tuple(np.round(qx_best, 12))]
    result = _finalize(G, W, table_mapping(K), R, "full",
                       [(qx_best, _channel_min(G, W, qx_best, K, R, "full")[1])], len(starts), len(table))
    result.meta["mapping_table"] = {",".join(f"{v:.12g}" for v in key): val[1].tolist() for key, val in table.items()}
    result.meta["max_is_heuristic"] = True
    return result


# -- identification capacity -------------------------------------------------------

@dataclass
class CapacityResult:
    value: float
    kernel: np.ndarray
    mi_xy: float


def _mi_pair(G, W, K) -> tuple[float, float]:
    q_xy = G[:, None] * K
    q_y = q_xy.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        rev = np.where(q_y[None, :] > 0, q_xy / q_y[None, :], 0.0)
    q_yz = q_y[:, None] * (rev.T @ W)
    return mutual_information(q_xy), mutual_information(q_yz)


def identification_capacity(G, W, R_C: float, ky: int | None = None, step: float = 0.05,
                            warm=()) -> CapacityResult:
    """max I(Y;Z) over Q_{Y|X} with I(X;Y) <= R_C, for Y - X - Z and X ~ G."""
    G = as_distribution(G, "G")
    W = as_kernel(W, "W")
    ky = ky or G.size
    if R_C < 0:
        raise InfeasibleError("R_C must be nonnegative")
    cands = [np.tile(np.ones(ky) / ky, (G.size, 1))]
    if ky >= G.size:
        cands.append(identity_kernel(G.size, ky))
    cands += [np.asarray(k, dtype=float) for k in warm]
    cands += _kernel_grid(G.size, ky, step)
    best_v, best_k = 0.0, cands[0]
    for K in cands:
        ixy, iyz = _mi_pair(G, W, K)
        if ixy <= R_C + 1e-12 and iyz > best_v:
            best_v, best_k = iyz, K
    if R_C > 0:
        kx = G.size

        def unpack(t):
            return np.vstack([_softmax(r, np.arange(ky), ky) for r in t.reshape(kx, ky)])

        t0 = np.log(np.maximum(best_k, 1e-9)).ravel()
        res = minimize(lambda t: -_mi_pair(G, W, unpack(t))[1], t0, method="SLSQP",
                       constraints=[{"type": "ineq", "fun": lambda t: R_C - _mi_pair(G, W, unpack(t))[0]}],
                       options={"maxiter": 300, "ftol": 1e-12})
        K = unpack(res.x)
        ixy, iyz = _mi_pair(G, W, K)
        if ixy <= R_C + 1e-12 and iyz > best_v:
            best_v, best_k = iyz, K
    return CapacityResult(max(best_v, 0.0), best_k, _mi_pair(G, W, best_k)[0])


def capacity_curve(G, W, rc_list, ky: int | None = None, step: float = 0.05) -> list[CapacityResult]:
    out: list[CapacityResult] = []
    for rc in sorted(rc_list):
        out.append(identification_capacity(G, W, rc, ky, step, warm=[r.kernel for r in out[-1:]]))
    return out


def default_mapping(G, constraint: CompressionConstraint | None, ky: int | None = None) -> Mapping:
    if constraint is None:
        return identity_mapping(len(G))
    return blend_mapping(constraint, G, ky)


def binary_entropy(p: float) -> float:
    return entropy([p, 1 - p])
