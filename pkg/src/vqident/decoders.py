"""Decision rules for identification from a channel output z.

Every decoder takes the enrolled (compressed) rows and returns a
``Decision``. Indices are 0-based. Rows flagged as encoder error messages
get the worst possible metric.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from .ensemble import DOMAIN_ML_TIEBREAK, Codebook, LossyEncoder, TypeRegistry, match_joint, rank_pairs
from .solvers import kl_projection
from .types_core import (
    EmpiricalType,
    JointEmpiricalType,
    conditional_type_class_size,
    empirical_joint,
    mutual_information,
)

TIE_DECIMALS = 12


@dataclass
class Decision:
    index: int | None  # None: no feasible candidate
    scores: np.ndarray
    tie: bool = False

    @property
    def failed(self) -> bool:
        return self.index is None


def _prep(z, rows, error_rows):
    z = np.asarray(z, dtype=np.int8)
    rows = np.atleast_2d(np.asarray(rows, dtype=np.int8))
    if rows.shape[1] != z.size:
        raise ValueError(f"rows have length {rows.shape[1]}, z has length {z.size}")
    err = np.zeros(rows.shape[0], dtype=bool) if error_rows is None else np.asarray(error_rows, dtype=bool)
    return z, rows, err


def _argbest(scores: np.ndarray, minimize: bool) -> Decision:
    key = np.round(scores if minimize else -scores, TIE_DECIMALS)
    if np.all(key == np.inf):
        return Decision(None, scores)
    best = np.min(key)
    hits = np.flatnonzero(key == best)
    return Decision(int(hits[0]), scores, tie=hits.size > 1)


# -- universal decoder -----------------------------------------------------------

def alpha_of(qy: EmpiricalType, registry: TypeRegistry, G) -> float:
    """alpha(P_y) = I_Q(X;Y) + D(Q_X||G) for the unique registered Q_XY."""
    return registry.by_y(qy).alpha(G)


def count_matches(y, z, rows, ky: int | None = None, kz: int | None = None) -> int:
    """N(y|z): rows sharing y's joint type with z, counted with multiplicity."""
    y = np.asarray(y)
    z = np.asarray(z)
    rows = np.atleast_2d(np.asarray(rows))
    ky = ky or max(2, int(max(rows.max(), y.max())) + 1)
    kz = kz or max(2, int(z.max()) + 1)
    target = empirical_joint(y, z, ky, kz).array
    return int(match_joint(rows, z[None, :], target).sum())


def codebook_matches(y, z, codebook: Codebook, kz: int) -> int:
    """|T(y|z) intersect C| over the encoder's reproduction codebook.

    High-entropy Q_Y: count draws of C_Q. Low-entropy Q_Y: every sequence of
    the type is a reproduction vector, so the count is |T(y|z)|.
    """
    reg = codebook.registry
    y = np.asarray(y, dtype=np.int8)
    joint = empirical_joint(y, z, reg.ky, kz)
    entry = reg.by_y(joint.row_type())
    if entry.identity:
        return conditional_type_class_size(joint, given="col")
    book = codebook.sub_codebooks[entry.qx]
    return int(match_joint(book, np.asarray(z, dtype=np.int8)[None, :], joint.array).sum())


def universal_metrics(z, rows, codebook: Codebook, G, kz: int, error_rows=None) -> np.ndarray:
    """d(y_m, z) = log N(y_m|z) - n alpha(P_{y_m}) for each row."""
    z, rows, err = _prep(z, rows, error_rows)
    reg = codebook.registry
    n = z.size
    out = np.empty(rows.shape[0])
    memo: dict[JointEmpiricalType, float] = {}
    for m, y in enumerate(rows):
        if err[m]:
            out[m] = math.inf
            continue
        joint = empirical_joint(y, z, reg.ky, kz)
        if joint not in memo:
            count = codebook_matches(y, z, codebook, kz)
            if count == 0:
                memo[joint] = math.inf  # not a reproduction vector
            else:
                memo[joint] = math.log(count) - n * alpha_of(joint.row_type(), reg, G)
        out[m] = memo[joint]
    return out


def decode_universal(z, rows, codebook: Codebook, G, kz: int, error_rows=None) -> Decision:
    return _argbest(universal_metrics(z, rows, codebook, G, kz, error_rows), minimize=True)


# -- MMI ----------------------------------------------------------------------

def empirical_mi(y, z, ky: int, kz: int) -> float:
    return mutual_information(empirical_joint(y, z, ky, kz).probs)


def decode_mmi(z, rows, ky: int | None = None, kz: int | None = None, error_rows=None) -> Decision:
    z, rows, err = _prep(z, rows, error_rows)
    ky = ky or max(2, int(rows.max()) + 1)
    kz = kz or max(2, int(z.max()) + 1)
    scores = np.array([-math.inf if e else empirical_mi(y, z, ky, kz) for y, e in zip(rows, err)])
    return _argbest(scores, minimize=False)


# -- approximate ML --------------------------------------------------------------

def beta_of(qyz: JointEmpiricalType, registry: TypeRegistry, G, W, tol: float = 1e-12) -> float:
    """B_Q(Y,Z): min over Q~_{X|YZ} consistent with Q_{X|Y} of
    sum Q_XYZ log[Q~_{X|YZ} / (G W)]."""
    G = np.asarray(G, dtype=float)
    W = np.asarray(W, dtype=float)
    entry = registry.by_y(qyz.row_type())
    rev = entry.reverse_kernel()  # |Y| x |X|
    q = qyz.probs
    q_y = q.sum(axis=1)
    total = 0.0
    for y in np.flatnonzero(q_y > 0):
        c = q[y] / q_y[y]
        K = c[None, :] * G[:, None] * W
        proj = kl_projection(K, rev[y], c, tol=tol)
        if math.isinf(proj.value):
            return math.inf
        total += q_y[y] * proj.value
    return float(total)


class GammaMetric:
    """gamma(P_yz) = beta(P_yz) - alpha(P_y), memoised per joint type."""

    def __init__(self, registry: TypeRegistry, G, W, tol: float = 1e-12):
        W = np.asarray(W, dtype=float)
        if np.any(W <= 0):
            raise ValueError(
                "approximate-ML decoding needs a channel with strictly positive "
                "transition probabilities; W has zero entries"
            )
        self.registry = registry
        self.G = np.asarray(G, dtype=float)
        self.W = W
        self.tol = tol
        self._memo: dict[JointEmpiricalType, float] = {}
        self._lock = threading.Lock()

    def __call__(self, joint: JointEmpiricalType) -> float:
        val = self._memo.get(joint)
        if val is None:
            val = beta_of(joint, self.registry, self.G, self.W, self.tol) - alpha_of(joint.row_type(), self.registry, self.G)
            with self._lock:
                self._memo.setdefault(joint, val)
        return val

    def scores(self, z, rows, error_rows=None) -> np.ndarray:
        z, rows, err = _prep(z, rows, error_rows)
        kz = self.W.shape[1]
        return np.array([
            math.inf if e else self(empirical_joint(y, z, self.registry.ky, kz))
            for y, e in zip(rows, err)
        ])


def decode_approx_ml(z, rows, metric: GammaMetric, error_rows=None) -> Decision:
    return _argbest(metric.scores(z, rows, error_rows), minimize=True)


# -- exact ML ----------------------------------------------------------------------

class ExactModel:
    """Exact P(y) and P(z|y) for a drawn encoder, by brute force over X^n."""

    def __init__(self, enc: LossyEncoder, G, W):
        self.enc = enc
        self.G = np.asarray(G, dtype=float)
        self.W = np.asarray(W, dtype=float)
        xs, ys, _ = enc.table()
        self.xs = xs
        with np.errstate(divide="ignore"):
            self.log_g = np.log(self.G)[xs].sum(axis=1)
            self.log_w = np.log(self.W)
        uniq, inverse = np.unique(ys, axis=0, return_inverse=True)
        self._range = uniq
        self._group = inverse.ravel()
        self._ngroups = uniq.shape[0]
        self._index = {row.tobytes(): i for i, row in enumerate(uniq)}
        self.log_prior_groups = self._group_lse(self.log_g)

    def _group_lse(self, values):
        top = np.full(self._ngroups, -np.inf)
        np.maximum.at(top, self._group, values)
        safe_top = np.where(np.isfinite(top), top, 0.0)
        acc = np.zeros(self._ngroups)
        np.add.at(acc, self._group, np.exp(values - safe_top[self._group]))
        with np.errstate(divide="ignore"):
            return np.where(np.isfinite(top), safe_top + np.log(acc), -np.inf)

    def _lookup(self, rows) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(rows, dtype=np.int8))
        return np.array([self._index.get(r.tobytes(), -1) for r in rows], dtype=np.int64)

    def range_rows(self) -> np.ndarray:
        """Distinct reproduction vectors f(X^n)."""
        return self._range

    def log_prior(self, rows) -> np.ndarray:
        """log P(y); -inf for vectors outside the range of f."""
        idx = self._lookup(rows)
        return np.where(idx >= 0, self.log_prior_groups[np.maximum(idx, 0)], -np.inf)

    def log_likelihood(self, z, rows) -> np.ndarray:
        """log P(z|y) = log sum_{x in f^-1(y)} G(x)W(z|x) - log P(y)."""
        z = np.asarray(z, dtype=np.int64)
        with np.errstate(invalid="ignore"):
            log_joint = self._group_lse(self.log_g + self.log_w[self.xs, z[None, :]].sum(axis=1))
        idx = self._lookup(rows)
        safe = np.maximum(idx, 0)
        with np.errstate(invalid="ignore"):
            ll = log_joint[safe] - self.log_prior_groups[safe]
        return np.where((idx >= 0) & np.isfinite(self.log_prior_groups[safe]), ll, -np.inf)


def ml_order(z, rows, log_lik: np.ndarray, seed: int) -> np.ndarray:
    """Row order by decreasing likelihood; ties by the keyed M_o rank, then index."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.int8))
    z = np.asarray(z, dtype=np.int8)
    mo = rank_pairs(np.broadcast_to(z, rows.shape), rows, seed, DOMAIN_ML_TIEBREAK)
    key = np.round(-log_lik, TIE_DECIMALS)
    return np.lexsort((np.arange(rows.shape[0]), mo, key))


def decode_exact_ml(z, rows, model: ExactModel, tiebreak_seed: int, error_rows=None) -> Decision:
    z, rows, err = _prep(z, rows, error_rows)
    scores = model.log_likelihood(z, rows)
    scores[err] = -np.inf
    if not np.any(np.isfinite(scores)):
        return Decision(None, scores)
    order = ml_order(z, rows, scores, tiebreak_seed)
    best = order[0]
    tie = int(np.sum(np.round(scores, TIE_DECIMALS) == np.round(scores[best], TIE_DECIMALS))) > 1
    return Decision(int(best), scores, tie=tie)
