"""Method-of-types calculus over finite alphabets.

Distributions and kernels are plain numpy arrays validated on entry; empirical
types are hashable integer count containers so they can key registries and
memo tables. Every information quantity is in nats.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import CapExceededError

SUM_TOL = 1e-12
DEFAULT_TYPE_CAP = 1_000_000


# -- validation -------------------------------------------------------------

def as_distribution(p, name: str = "distribution") -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise ValueError(f"{name} must be a vector over >= 2 symbols, got shape {p.shape}")
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError(f"{name} has entries outside [0, 1]")
    if abs(p.sum() - 1.0) > SUM_TOL * max(1, p.size):
        raise ValueError(f"{name} sums to {p.sum()!r}, not 1")
    return p


def as_kernel(w, name: str = "kernel") -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 2:
        raise ValueError(f"{name} must be a 2-D stochastic matrix")
    if np.any(w < 0):
        raise ValueError(f"{name} has negative entries")
    bad = np.abs(w.sum(axis=1) - 1.0) > SUM_TOL * max(1, w.shape[1])
    if np.any(bad):
        raise ValueError(f"{name} rows {np.flatnonzero(bad).tolist()} do not sum to 1")
    return w


def as_joint(q, name: str = "joint") -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.ndim < 2:
        raise ValueError(f"{name} must have at least two axes")
    if np.any(q < 0):
        raise ValueError(f"{name} has negative entries")
    if abs(q.sum() - 1.0) > SUM_TOL * max(1, q.size):
        raise ValueError(f"{name} sums to {q.sum()!r}, not 1")
    return q


# -- information measures ---------------------------------------------------

def _xlogx(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p, dtype=float)
    pos = p > 0
    out[pos] = p[pos] * np.log(p[pos])
    return out


def entropy(p) -> float:
    """Shannon entropy in nats with 0 log 0 = 0."""
    p = np.asarray(p, dtype=float)
    return float(-_xlogx(p).sum())


def divergence(p, q) -> float:
    """Relative entropy D(p||q); +inf on a support violation."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")
    pos = p > 0
    if np.any(q[pos] <= 0):
        return math.inf
    return float(max(0.0, np.sum(p[pos] * np.log(p[pos] / q[pos]))))


class JointMeasures(NamedTuple):
    h_x: float
    h_y: float
    h_x_given_y: float
    h_y_given_x: float
    mi: float


def joint_measures(q) -> JointMeasures:
    """Marginal/conditional entropies and mutual information of a 2-D joint."""
    q = np.asarray(q, dtype=float)
    h_xy = entropy(q)
    h_x = entropy(q.sum(axis=1))
    h_y = entropy(q.sum(axis=0))
    mi = max(0.0, h_x + h_y - h_xy)
    return JointMeasures(h_x, h_y, h_xy - h_y, h_xy - h_x, mi)


def mutual_information(q) -> float:
    return joint_measures(q).mi


def weighted_conditional_divergence(qz_x, w, qx) -> float:
    """D(Q_{Z|X} || W | Q_X) = sum_x Q_X(x) D(Q_{Z|X}(.|x) || W(.|x))."""
    qz_x = np.asarray(qz_x, dtype=float)
    w = np.asarray(w, dtype=float)
    qx = np.asarray(qx, dtype=float)
    if qz_x.shape != w.shape or qz_x.shape[0] != qx.size:
        raise ValueError(f"incompatible shapes {qz_x.shape}, {w.shape}, {qx.shape}")
    total = 0.0
    for x in np.flatnonzero(qx > 0):
        d = divergence(qz_x[x], w[x])
        if math.isinf(d):
            return math.inf
        total += qx[x] * d
    return float(total)


def positive_part(a: float) -> float:
    return a if a > 0 else 0.0


# -- empirical types --------------------------------------------------------

@dataclass(frozen=True, order=True)
class EmpiricalType:
    """Integer symbol counts of a length-n sequence."""

    counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if any(c < 0 for c in counts):
            raise ValueError(f"negative count in {counts}")
        if not counts:
            raise ValueError("a type needs a nonempty alphabet")
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def k(self) -> int:
        return len(self.counts)

    @property
    def probs(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / self.n

    def fractions(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(c, self.n) for c in self.counts)

    def entropy(self) -> float:
        return entropy(self.probs)

    @classmethod
    def of(cls, seq, k: int | None = None) -> "EmpiricalType":
        return empirical_type(seq, k)


@dataclass(frozen=True, order=True)
class JointEmpiricalType:
    """k1 x k2 integer count matrix of a pair of sequences."""

    counts: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        counts = tuple(tuple(int(c) for c in row) for row in self.counts)
        if len({len(r) for r in counts}) != 1:
            raise ValueError("ragged count matrix")
        if any(c < 0 for row in counts for c in row):
            raise ValueError("negative joint count")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_array(cls, a) -> "JointEmpiricalType":
        a = np.asarray(a)
        return cls(tuple(tuple(int(v) for v in row) for row in a))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=np.int64)

    @property
    def n(self) -> int:
        return sum(map(sum, self.counts))

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.counts), len(self.counts[0])

    @property
    def probs(self) -> np.ndarray:
        return self.array / self.n

    def row_type(self) -> EmpiricalType:
        return EmpiricalType(tuple(self.array.sum(axis=1)))

    def col_type(self) -> EmpiricalType:
        return EmpiricalType(tuple(self.array.sum(axis=0)))

    def transpose(self) -> "JointEmpiricalType":
        return JointEmpiricalType.from_array(self.array.T)


def _alphabet(seqs, k):
    if k is not None:
        return k
    top = max((int(np.max(s)) for s in seqs if len(s)), default=0)
    return max(2, top + 1)


def empirical_type(seq, k: int | None = None) -> EmpiricalType:
    seq = np.asarray(seq, dtype=np.int64)
    k = _alphabet([seq], k)
    return EmpiricalType(tuple(np.bincount(seq, minlength=k)[:k]))


def empirical_joint(xseq, yseq, kx: int | None = None, ky: int | None = None) -> JointEmpiricalType:
    """Joint counts N(a, b) = #{i : x_i = a, y_i = b}."""
    x = np.asarray(xseq, dtype=np.int64)
    y = np.asarray(yseq, dtype=np.int64)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    kx = _alphabet([x], kx)
    ky = _alphabet([y], ky)
    flat = np.bincount(x * ky + y, minlength=kx * ky)
    return JointEmpiricalType.from_array(flat.reshape(kx, ky))


def batch_joint_counts(xs: np.ndarray, ys: np.ndarray, kx: int, ky: int) -> np.ndarray:
    """Joint counts for every (row of xs, row of ys) pair.

    Returns an int array of shape (len(xs), len(ys), kx, ky).
    """
    xs = np.atleast_2d(xs)
    ys = np.atleast_2d(ys)
    out = np.empty((xs.shape[0], ys.shape[0], kx, ky), dtype=np.int64)
    xin = [(xs == a).astype(np.int64) for a in range(kx)]
    yin = [(ys == b).astype(np.int64) for b in range(ky)]
    for a in range(kx):
        for b in range(ky):
            out[:, :, a, b] = xin[a] @ yin[b].T
    return out


def same_conditional_type(y1, y2, z, ky: int | None = None, kz: int | None = None) -> bool:
    """True iff y2 lies in T(y1|z), i.e. (y1, z) and (y2, z) share a joint type."""
    y1 = np.asarray(y1)
    y2 = np.asarray(y2)
    z = np.asarray(z)
    if not (y1.shape == y2.shape == z.shape):
        raise ValueError("length mismatch")
    ky = _alphabet([y1, y2], ky)
    return empirical_joint(y1, z, ky, kz) == empirical_joint(y2, z, ky, kz)


# -- enumeration and counting -----------------------------------------------

def num_types(n: int, k: int) -> int:
    return math.comb(n + k - 1, k - 1)


def _compositions(n: int, k: int) -> Iterator[tuple[int, ...]]:
    # descending lexicographic: (n,0,...), (n-1,1,...), ...
    if k == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in _compositions(n - first, k - 1):
            yield (first,) + rest


def enumerate_types(n: int, k: int, cap: int = DEFAULT_TYPE_CAP) -> list[EmpiricalType]:
    """All C(n+k-1, k-1) types of length-n sequences over k symbols."""
    if n < 1 or k < 1:
        raise ValueError(f"need n >= 1 and k >= 1, got n={n}, k={k}")
    count = num_types(n, k)
    if count > cap:
        raise CapExceededError(f"{count} types for n={n}, k={k} exceeds cap {cap}")
    return [EmpiricalType(c) for c in _compositions(n, k)]


def multinomial(counts: Sequence[int]) -> int:
    out = 1
    total = 0
    for c in counts:
        total += c
        out *= math.comb(total, c)
    return out


def log_multinomial(counts: Sequence[int]) -> float:
    n = sum(counts)
    return math.lgamma(n + 1) - sum(math.lgamma(c + 1) for c in counts)


def type_class_size(t: EmpiricalType) -> int:
    """|T(t)| = n! / prod(counts!) as an exact integer."""
    return multinomial(t.counts)


def log_type_class_size(t: EmpiricalType) -> float:
    return log_multinomial(t.counts)


def conditional_type_class_size(joint: JointEmpiricalType, given: str = "col") -> int:
    """|T(x|y)| for a joint type of (x, y).

    ``given="col"`` conditions on the second sequence (columns), so the size
    is the product over column symbols of the multinomial of that column.
    """
    a = joint.array
    if given == "row":
        a = a.T
    elif given != "col":
        raise ValueError("given must be 'col' or 'row'")
    size = 1
    for col in a.T:
        size *= multinomial(col.tolist())
    return size


def log_conditional_type_class_size(joint: JointEmpiricalType, given: str = "col") -> float:
    a = joint.array
    if given == "row":
        a = a.T
    return float(sum(log_multinomial(col.tolist()) for col in a.T))


# -- sampling and class generation ------------------------------------------

def type_representative(t: EmpiricalType, dtype=np.int8) -> np.ndarray:
    return np.repeat(np.arange(t.k, dtype=dtype), t.counts)


def sample_from_type_class(t: EmpiricalType, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform draw(s) from T(t); ``size`` rows if given."""
    base = type_representative(t)
    if size is None:
        out = rng.permutation(base)
        assert np.array_equal(np.bincount(out, minlength=t.k), t.counts)
        return out
    out = rng.permuted(np.broadcast_to(base, (size, base.size)), axis=1)
    return out


def _distinct_permutations(items: list[int]) -> Iterator[tuple[int, ...]]:
    # multiset permutations in lexicographic order
    a = sorted(items)
    m = len(a)
    while True:
        yield tuple(a)
        i = m - 2
        while i >= 0 and a[i] >= a[i + 1]:
            i -= 1
        if i < 0:
            return
        j = m - 1
        while a[j] <= a[i]:
            j -= 1
        a[i], a[j] = a[j], a[i]
        a[i + 1:] = reversed(a[i + 1:])


def type_class(t: EmpiricalType) -> Iterator[np.ndarray]:
    """Every member of T(t), lexicographic order."""
    items = type_representative(t, dtype=np.int64).tolist()
    for p in _distinct_permutations(items):
        yield np.asarray(p, dtype=np.int8)


def conditional_type_class(joint: JointEmpiricalType, y) -> Iterator[np.ndarray]:
    """Every x with empirical_joint(x, y) == joint (x on rows, y on columns)."""
    y = np.asarray(y)
    a = joint.array
    if not np.array_equal(np.bincount(y, minlength=a.shape[1])[: a.shape[1]], a.sum(axis=0)):
        return
    positions = [np.flatnonzero(y == b) for b in range(a.shape[1])]
    per_symbol = []
    for b in range(a.shape[1]):
        items = np.repeat(np.arange(a.shape[0]), a[:, b]).tolist()
        per_symbol.append(list(_distinct_permutations(items)) if items else [()])
    for combo in itertools.product(*per_symbol):
        x = np.empty(y.size, dtype=np.int8)
        for pos, vals in zip(positions, combo):
            x[pos] = vals
        yield x


def all_sequences(n: int, k: int, cap: int) -> np.ndarray:
    """All k**n sequences as rows, lexicographic."""
    total = k ** n
    if total > cap:
        raise CapExceededError(f"{k}^{n} = {total} sequences exceeds brute-force cap {cap}")
    idx = np.arange(total, dtype=np.int64)
    out = np.empty((total, n), dtype=np.int8)
    for i in range(n - 1, -1, -1):
        out[:, i] = idx % k
        idx //= k
    return out
