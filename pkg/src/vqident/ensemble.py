"""Random ensemble of lossy (rate-distortion) encoders over n-types.

For every source type Q_X a conditional type Q_{Y|X} is chosen under a
compression constraint; the induced Q_X -> Q_Y map is kept injective; each
high-entropy type gets a sub-codebook of i.i.d. uniform draws from T(Q_Y);
an input x is encoded to the lowest-ranked codeword in T(Q_{Y|X}|x).
"""
from __future__ import annotations

import itertools
import math
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterator, Mapping

import numpy as np

from .errors import CapExceededError, ConfigError, InfeasibleError
from .types_core import (
    EmpiricalType,
    JointEmpiricalType,
    all_sequences,
    conditional_type_class,
    conditional_type_class_size,
    divergence,
    entropy,
    enumerate_types,
    joint_measures,
    mutual_information,
    sample_from_type_class,
)

CONSTRAINT_KINDS = ("expected_length", "excess_probability", "exponential_moment")
STRATEGIES = ("user_table", "identity_if_allowed", "greedy_capacity")
DEFAULT_BRUTE_FORCE_CAP = 2 ** 24
DEFAULT_MAX_ROWS = 2_000_000
PRED_TOL = 1e-12


# -- compression constraints -------------------------------------------------

@dataclass(frozen=True)
class CompressionConstraint:
    kind: str = "excess_probability"
    rate: float = 0.5  # R_C, nats/symbol
    excess_exponent: float = 0.1  # E_C; vicinity radius for expected_length
    s: float | None = None
    lam: float | None = None

    def __post_init__(self):
        if self.kind not in CONSTRAINT_KINDS:
            raise ConfigError(f"unknown constraint kind {self.kind!r}")
        if self.rate < 0:
            raise ConfigError("R_C must be nonnegative")
        if self.kind in ("expected_length", "excess_probability") and not self.excess_exponent > 0:
            raise ConfigError(f"{self.kind} needs excess_exponent > 0")
        if self.kind == "exponential_moment":
            if self.s is None or self.lam is None or self.s <= 0 or self.lam <= 0:
                raise ConfigError("exponential_moment needs s > 0 and lam > 0")

    def rate_bound(self, d_qx_g: float) -> float:
        """Largest admissible I_Q(X;Y) for a source type at divergence d from G."""
        if self.kind == "exponential_moment":
            # E exp(sL) ~ max_Q exp{n[s I - D]} <= exp(n Lambda)
            return (self.lam + d_qx_g) / self.s
        if d_qx_g <= self.excess_exponent:
            return self.rate
        return math.inf


@dataclass(frozen=True)
class ConstraintReport:
    passed: bool
    kind: str
    mutual_info: float
    bound: float
    divergence: float

    def describe(self) -> str:
        rel = "<=" if self.passed else ">"
        return f"{self.kind}: I(X;Y)={self.mutual_info:.6g} {rel} bound {self.bound:.6g} (D(Q_X||G)={self.divergence:.6g})"


def check_compression_constraint(qx, qyx, constraint: CompressionConstraint, G) -> ConstraintReport:
    qx = np.asarray(qx, dtype=float)
    mi = mutual_information(qx[:, None] * np.asarray(qyx, dtype=float))
    d = divergence(qx, G)
    bound = constraint.rate_bound(d)
    return ConstraintReport(bool(mi <= bound + PRED_TOL), constraint.kind, mi, bound, d)


# -- mapping policies ---------------------------------------------------------

@dataclass(frozen=True)
class MappingPolicy:
    strategy: str = "identity_if_allowed"
    delta: float = 0.1
    epsilon: float = 0.02
    table: Mapping[tuple[int, ...], np.ndarray] | None = None
    candidate_cap: int = 200_000

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown mapping strategy {self.strategy!r}")
        if self.delta < 0 or self.epsilon < 0:
            raise ConfigError("delta and epsilon must be nonnegative")
        if self.delta > 0 and not 0 < self.epsilon < self.delta:
            raise ConfigError(f"need 0 < epsilon < delta, got epsilon={self.epsilon}, delta={self.delta}")
        if self.delta == 0 and self.epsilon != 0:
            raise ConfigError("delta = 0 mode requires epsilon = 0")
        if self.strategy == "user_table" and not self.table:
            raise ConfigError("user_table strategy needs a table")

    @property
    def entropy_threshold(self) -> float:
        return math.sqrt(self.delta)

    @property
    def equivocation_floor(self) -> float:
        return self.delta + 3 * self.epsilon

    def is_low_entropy(self, qx) -> bool:
        h = entropy(qx.probs if isinstance(qx, EmpiricalType) else qx)
        return h < self.entropy_threshold


def kernel_of(joint: JointEmpiricalType) -> np.ndarray:
    a = joint.array.astype(float)
    rows = a.sum(axis=1, keepdims=True)
    k = np.where(rows > 0, a / np.where(rows > 0, rows, 1), 1.0 / a.shape[1])
    return k


def identity_kernel(kx: int, ky: int) -> np.ndarray:
    e = np.zeros((kx, ky))
    e[np.arange(kx), np.minimum(np.arange(kx), ky - 1)] = 1.0
    return e


def blend_kernel(kx: int, ky: int, lam: float) -> np.ndarray:
    return (1 - lam) * identity_kernel(kx, ky) + lam / ky


def _feasible(qx, qyx, G, constraint, floor) -> tuple[bool, str]:
    qx = np.asarray(qx, dtype=float)
    m = joint_measures(qx[:, None] * qyx)
    if m.h_x_given_y < floor - PRED_TOL:
        return False, f"H(X|Y)={m.h_x_given_y:.6g} < Delta+3eps={floor:.6g}"
    rep = check_compression_constraint(qx, qyx, constraint, G)
    if not rep.passed:
        return False, rep.describe()
    return True, ""


def blend_weight(qx, constraint: CompressionConstraint, G, ky: int, floor: float = 0.0) -> float:
    """Smallest uniform-blend weight meeting the constraint and H(X|Y) >= floor.

    Along the blend I(X;Y) is convex with minimum 0 at weight 1, hence
    nonincreasing, so both predicates are monotone and bisection applies.
    """
    qx = np.asarray(qx, dtype=float)
    kx = qx.size
    ok, why = _feasible(qx, blend_kernel(kx, ky, 1.0), G, constraint, floor)
    if not ok:
        raise InfeasibleError(f"no blended kernel is feasible for Q_X={qx.tolist()}: {why}")
    if _feasible(qx, blend_kernel(kx, ky, 0.0), G, constraint, floor)[0]:
        return 0.0
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _feasible(qx, blend_kernel(kx, ky, mid), G, constraint, floor)[0]:
            hi = mid
        else:
            lo = mid
    return hi


def blend_mapping(constraint: CompressionConstraint, G, ky: int | None = None, floor: float = 0.0) -> Callable[[np.ndarray], np.ndarray]:
    """Continuous Q_X -> Q_{Y|X}: identity blended toward uniform just enough."""
    G = np.asarray(G, dtype=float)
    ky = ky or G.size

    def mapping(qx):
        return blend_kernel(G.size, ky, blend_weight(qx, constraint, G, ky, floor))

    return mapping


# -- lattice of conditional types ---------------------------------------------

def _row_compositions(m: int, k: int) -> list[tuple[int, ...]]:
    if k == 1:
        return [(m,)]
    return [(a,) + rest for a in range(m, -1, -1) for rest in _row_compositions(m - a, k - 1)]


def count_conditional_types(qx: EmpiricalType, ky: int) -> int:
    return math.prod(math.comb(c + ky - 1, ky - 1) for c in qx.counts)


def conditional_types(qx: EmpiricalType, ky: int, cap: int = 200_000) -> Iterator[JointEmpiricalType]:
    """Every joint type with row sums equal to the counts of ``qx``."""
    total = count_conditional_types(qx, ky)
    if total > cap:
        raise CapExceededError(f"{total} conditional types for Q_X={qx.counts} exceeds cap {cap}")
    rows = [_row_compositions(c, ky) for c in qx.counts]
    for combo in itertools.product(*rows):
        yield JointEmpiricalType(combo)


def _round_rows(qx: EmpiricalType, kernel: np.ndarray) -> JointEmpiricalType:
    # largest-remainder rounding of n_x * kernel[x] to integers summing to n_x
    out = []
    for c, row in zip(qx.counts, kernel):
        target = c * row
        base = np.floor(target).astype(int)
        short = c - base.sum()
        order = np.argsort(-(target - base), kind="stable")
        base[order[:short]] += 1
        out.append(tuple(base))
    return JointEmpiricalType(tuple(out))


def _joint_ok(joint, G, constraint, floor):
    qx = joint.row_type().probs
    return _feasible(qx, kernel_of(joint), G, constraint, floor)


def _table_joint(qx: EmpiricalType, kernel, ky) -> JointEmpiricalType:
    kernel = np.asarray(kernel, dtype=float)
    if kernel.shape != (qx.k, ky):
        raise ConfigError(f"table kernel for {qx.counts} has shape {kernel.shape}, want {(qx.k, ky)}")
    a = np.asarray(qx.counts, dtype=float)[:, None] * kernel
    r = np.rint(a)
    if np.max(np.abs(a - r)) > 1e-9 or np.any(r.sum(axis=1) != np.asarray(qx.counts)):
        raise ConfigError(f"table kernel for {qx.counts} is not a conditional type at n={qx.n}")
    return JointEmpiricalType.from_array(r.astype(int))


def select_test_channel(qx: EmpiricalType, policy: MappingPolicy, constraint: CompressionConstraint,
                        G, W=None, ky: int | None = None) -> JointEmpiricalType:
    """Choose the conditional type Q_{Y|X} for a high-entropy source type.

    Returns the joint count matrix (rows X, columns Y); ``kernel_of`` gives
    the conditional kernel.
    """
    G = np.asarray(G, dtype=float)
    ky = ky or qx.k
    floor = policy.equivocation_floor
    if policy.strategy == "user_table":
        if qx.counts not in policy.table:
            raise ConfigError(f"user_table has no entry for Q_X={qx.counts}")
        joint = _table_joint(qx, policy.table[qx.counts], ky)
        ok, why = _joint_ok(joint, G, constraint, floor)
        if not ok:
            raise InfeasibleError(f"user_table entry for Q_X={qx.counts} violates {why}")
        return joint

    if policy.strategy == "identity_if_allowed":
        lam = blend_weight(qx.probs, constraint, G, ky, floor)
        target = np.asarray(qx.counts, dtype=float)[:, None] * blend_kernel(qx.k, ky, lam)
        if count_conditional_types(qx, ky) <= policy.candidate_cap:
            best = None
            for joint in conditional_types(qx, ky, policy.candidate_cap):
                if not _joint_ok(joint, G, constraint, floor)[0]:
                    continue
                a = joint.array
                key = (round(float(np.abs(a - target).sum()), 9),
                       -round(mutual_information(a / qx.n), 12), joint.counts)
                if best is None or key < best[0]:
                    best = (key, joint)
            if best is None:
                raise InfeasibleError(f"no conditional type at n={qx.n} is feasible for Q_X={qx.counts}")
            return best[1]
        for step in np.linspace(lam, 1.0, 201):
            joint = _round_rows(qx, blend_kernel(qx.k, ky, step))
            if _joint_ok(joint, G, constraint, floor)[0]:
                return joint
        raise InfeasibleError(f"rounded blends infeasible for Q_X={qx.counts}")

    # greedy_capacity
    if W is None:
        raise ConfigError("greedy_capacity needs the channel W")
    W = np.asarray(W, dtype=float)
    best = None
    for joint in conditional_types(qx, ky, policy.candidate_cap):
        if not _joint_ok(joint, G, constraint, floor)[0]:
            continue
        q_xy = joint.probs
        q_yz = q_xy.T @ W
        key = (-round(mutual_information(q_yz), 12), joint.counts)
        if best is None or key < best[0]:
            best = (key, joint)
    if best is None:
        raise InfeasibleError(f"no conditional type at n={qx.n} is feasible for Q_X={qx.counts}")
    return best[1]


# -- registry -----------------------------------------------------------------

@dataclass(frozen=True)
class RegistryEntry:
    qx: EmpiricalType
    joint: JointEmpiricalType  # counts of Q_XY, rows X, columns Y
    identity: bool = False
    repaired: bool = False

    @property
    def qy(self) -> EmpiricalType:
        return self.joint.col_type()

    @cached_property
    def measures(self):
        return joint_measures(self.joint.probs)

    @property
    def mutual_info(self) -> float:
        return self.measures.mi

    def alpha(self, G) -> float:
        """A_Q(Y) = I_Q(X;Y) + D(Q_X||G)."""
        if self.identity:
            q = self.qx.probs
            return entropy(q) + divergence(q, G)
        return self.mutual_info + divergence(self.qx.probs, G)

    def reverse_kernel(self) -> np.ndarray:
        """Q_{X|Y} as a |Y| x |X| matrix (uniform rows where Q_Y(y) = 0)."""
        return kernel_of(self.joint.transpose())


@dataclass
class TypeRegistry:
    n: int
    kx: int
    ky: int
    delta: float
    epsilon: float
    forward: dict[EmpiricalType, RegistryEntry] = field(default_factory=dict)
    reverse: dict[EmpiricalType, RegistryEntry] = field(default_factory=dict)
    repairs: list[tuple[EmpiricalType, EmpiricalType, EmpiricalType]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def add(self, entry: RegistryEntry) -> None:
        if entry.qy in self.reverse:
            raise InfeasibleError(f"Q_Y={entry.qy.counts} already registered")
        self.forward[entry.qx] = entry
        self.reverse[entry.qy] = entry

    def by_y(self, qy: EmpiricalType) -> RegistryEntry:
        try:
            return self.reverse[qy]
        except KeyError:
            raise KeyError(f"Q_Y={qy.counts} is not registered") from None

    def check(self) -> None:
        for qx, e in self.forward.items():
            assert self.reverse[e.qy].qx == qx, f"registry not injective at {qx.counts}"

    def __len__(self):
        return len(self.forward)


def _repair(qx, joint, policy, constraint, G, ky, used):
    old = joint.col_type()
    best = None
    for cand in conditional_types(qx, ky, policy.candidate_cap):
        qy = cand.col_type()
        if qy in used or not _joint_ok(cand, G, constraint, policy.equivocation_floor)[0]:
            continue
        key = (int(np.abs(np.subtract(qy.counts, old.counts)).sum()),
               int(np.abs(cand.array - joint.array).sum()), cand.counts)
        if best is None or key < best[0]:
            best = (key, cand)
    return None if best is None else best[1]


def build_registry(n: int, policy: MappingPolicy, constraint: CompressionConstraint, G, W=None,
                   ky: int | None = None, type_cap: int = 1_000_000) -> TypeRegistry:
    """Assign a joint type to every source n-type with an injective Q_X -> Q_Y."""
    G = np.asarray(G, dtype=float)
    kx = G.size
    ky = ky or kx
    if policy.delta > 0 and ky < kx:
        raise ConfigError(f"|Y|={ky} < |X|={kx} requires delta = 0 mode")
    reg = TypeRegistry(n, kx, ky, policy.delta, policy.epsilon)
    types = enumerate_types(n, kx, type_cap)
    low = [t for t in types if policy.is_low_entropy(t)]
    high = [t for t in types if not policy.is_low_entropy(t)]
    for t in low:
        a = np.zeros((kx, ky), dtype=int)
        a[np.arange(kx), np.arange(kx)] = t.counts
        reg.add(RegistryEntry(t, JointEmpiricalType.from_array(a), identity=True))
    collisions = []
    for t in high:
        joint = select_test_channel(t, policy, constraint, G, W, ky)
        repaired = False
        if joint.col_type() in reg.reverse:
            fixed = _repair(t, joint, policy, constraint, G, ky, reg.reverse)
            if fixed is None:
                collisions.append((t.counts, reg.reverse[joint.col_type()].qx.counts, joint.col_type().counts))
                continue
            reg.repairs.append((t, joint.col_type(), fixed.col_type()))
            joint, repaired = fixed, True
        entry = RegistryEntry(t, joint, repaired=repaired)
        if entropy(entry.qy.probs) < policy.entropy_threshold:
            reg.notes.append(f"Q_X={t.counts} maps to low-entropy Q_Y={entry.qy.counts} (boundary of the identity convention)")
        reg.add(entry)
    if collisions:
        lines = "; ".join(f"Q_X={a} vs Q_X={b} on Q_Y={c}" for a, b, c in collisions)
        raise InfeasibleError(f"cannot repair Q_X -> Q_Y collisions at n={n}: {lines}")
    reg.check()
    return reg


# -- keyed ranking PRF ----------------------------------------------------------

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLD = np.uint64(0x9E3779B97F4A7C15)
DOMAIN_ENCODER = 0x5EED_0001
DOMAIN_ML_TIEBREAK = 0x5EED_0002


def _mix(h: np.ndarray) -> np.ndarray:
    h = h ^ (h >> np.uint64(30))
    h = h * _M1
    h = h ^ (h >> np.uint64(27))
    h = h * _M2
    return h ^ (h >> np.uint64(31))


def rank_pairs(xs: np.ndarray, ys: np.ndarray, seed: int, domain: int = DOMAIN_ENCODER) -> np.ndarray:
    """Vectorised keyed PRF over aligned rows of xs and ys (splitmix64 chain)."""
    xs = np.atleast_2d(np.asarray(xs)).astype(np.uint64)
    ys = np.atleast_2d(np.asarray(ys)).astype(np.uint64)
    with np.errstate(over="ignore"):
        h0 = _mix(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) ^ _mix(np.uint64(domain) * _GOLD))
        h = np.full(xs.shape[0], h0, dtype=np.uint64)
        for i in range(xs.shape[1]):
            token = (xs[:, i] << np.uint64(32)) | (ys[:, i] << np.uint64(8)) | np.uint64(i & 0xFF)
            h = _mix(h + (token + np.uint64(1)) * _GOLD)
        h = _mix(h ^ np.uint64(xs.shape[1]))
    return h


def rank(x, y, seed: int, domain: int = DOMAIN_ENCODER) -> int:
    """64-bit pseudorandom rank of y in the ordering keyed by (x, seed)."""
    return int(rank_pairs(np.asarray(x)[None, :], np.asarray(y)[None, :], seed, domain)[0])


def argmin_rank(x_idx, xs, ys, seed, domain=DOMAIN_ENCODER):
    """For aligned pair arrays pick, per distinct x index, the pair with the
    smallest rank; rank collisions fall back to lexicographic y."""
    r = rank_pairs(xs, ys, seed, domain)
    keys = [ys[:, j] for j in range(ys.shape[1] - 1, -1, -1)] + [r, x_idx]
    order = np.lexsort(keys)
    first = np.ones(order.size, dtype=bool)
    first[1:] = x_idx[order][1:] != x_idx[order][:-1]
    return order[first]


# -- codebook and encoder ---------------------------------------------------------

def subcodebook_size(entry: RegistryEntry, n: int, delta: float) -> int:
    return math.ceil(math.exp(n * (entry.mutual_info + delta)))


def _row_types(xs: np.ndarray, k: int) -> np.ndarray:
    return np.stack([(xs == a).sum(axis=1) for a in range(k)], axis=1)


def match_joint(xs: np.ndarray, ys: np.ndarray, target: np.ndarray, chunk: int = 64) -> np.ndarray:
    """Boolean (len(xs), len(ys)) mask of pairs whose joint type equals ``target``."""
    kx, ky = target.shape
    out = np.zeros((xs.shape[0], ys.shape[0]), dtype=bool)
    yin = [(ys == b).astype(np.int32) for b in range(ky)]
    for s in range(0, xs.shape[0], chunk):
        part = xs[s:s + chunk]
        mask = np.ones((part.shape[0], ys.shape[0]), dtype=bool)
        for a in range(kx):
            xa = (part == a).astype(np.int32)
            for b in range(ky):
                mask &= (xa @ yin[b].T) == target[a, b]
        out[s:s + chunk] = mask
    return out


@dataclass
class Codebook:
    registry: TypeRegistry
    sub_codebooks: dict[EmpiricalType, np.ndarray]
    ranking_seed: int

    @property
    def n(self) -> int:
        return self.registry.n

    @property
    def error_word(self) -> np.ndarray:
        return np.zeros(self.n, dtype=np.int8)

    def rows_for_y(self, qy: EmpiricalType) -> np.ndarray | None:
        entry = self.registry.reverse.get(qy)
        if entry is None or entry.identity:
            return None
        return self.sub_codebooks[entry.qx]

    def total_rows(self) -> int:
        return sum(len(v) for v in self.sub_codebooks.values())


def build_codebook(registry: TypeRegistry, rng: np.random.Generator, max_rows: int = DEFAULT_MAX_ROWS) -> Codebook:
    """Draw every sub-codebook C_Q i.i.d. uniformly (with replacement) from T(Q_Y)."""
    high = [e for e in registry.forward.values() if not e.identity]
    sizes = {e.qx: subcodebook_size(e, registry.n, registry.delta) for e in high}
    for e in high:
        if sizes[e.qx] > max_rows:
            raise CapExceededError(f"|C_Q|={sizes[e.qx]} for Q_X={e.qx.counts} exceeds cap {max_rows}")
    ranking_seed = int(rng.integers(0, 2 ** 63))
    streams = rng.spawn(len(high)) if high else []
    subs = {}
    for e, child in zip(high, streams):
        subs[e.qx] = sample_from_type_class(e.qy, child, size=sizes[e.qx]).astype(np.int8)
    return Codebook(registry, subs, ranking_seed)


IDENTITY, CODEWORD, ERROR = "identity", "codeword", "error"


class LossyEncoder:
    """The encoder f(x) defined by a codebook and its ranking seed."""

    def __init__(self, codebook: Codebook, brute_force_cap: int = DEFAULT_BRUTE_FORCE_CAP):
        self.codebook = codebook
        self.brute_force_cap = brute_force_cap
        self._table = None

    @property
    def registry(self) -> TypeRegistry:
        return self.codebook.registry

    @property
    def n(self) -> int:
        return self.codebook.n

    def encode_batch(self, xs) -> tuple[np.ndarray, np.ndarray]:
        """Encode rows of xs. Returns (ys, status) with status in
        {IDENTITY, CODEWORD, ERROR} per row."""
        xs = np.atleast_2d(np.asarray(xs, dtype=np.int8))
        reg = self.registry
        ys = np.zeros_like(xs)
        status = np.empty(xs.shape[0], dtype=object)
        counts = _row_types(xs, reg.kx)
        keys = [tuple(c) for c in counts.tolist()]
        groups: dict[tuple, list[int]] = {}
        for i, key in enumerate(keys):
            groups.setdefault(key, []).append(i)
        for key, idx in groups.items():
            idx = np.asarray(idx)
            entry = reg.forward[EmpiricalType(key)]
            if entry.identity:
                ys[idx] = xs[idx]
                status[idx] = IDENTITY
                continue
            book = self.codebook.sub_codebooks[entry.qx]
            mask = match_joint(xs[idx], book, entry.joint.array)
            ii, jj = np.nonzero(mask)
            status[idx] = ERROR
            if ii.size:
                pick = argmin_rank(ii, xs[idx][ii], book[jj], self.codebook.ranking_seed)
                ys[idx[ii[pick]]] = book[jj[pick]]
                status[idx[ii[pick]]] = CODEWORD
        return ys, status

    def encode_with_status(self, x) -> tuple[np.ndarray, str]:
        ys, status = self.encode_batch(np.asarray(x)[None, :])
        return ys[0], status[0]

    def encode(self, x) -> np.ndarray:
        return self.encode_with_status(x)[0]

    def __call__(self, x):
        return self.encode(x)

    def table(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(all x, f(x), status) over X^n; brute-force regime only."""
        if self._table is None:
            xs = all_sequences(self.n, self.registry.kx, self.brute_force_cap)
            ys, status = self.encode_batch(xs)
            self._table = (xs, ys, status)
        return self._table

    def inverse_image(self, y) -> np.ndarray:
        """Every x with f(x) = y, as rows."""
        xs, ys, _ = self.table()
        y = np.asarray(y, dtype=np.int8)
        return xs[np.all(ys == y, axis=1)]


# -- concentration diagnostics ---------------------------------------------------

@dataclass
class ConcentrationReport:
    n: int
    delta: float
    epsilon: float
    window: tuple[float, float]
    x_counts: list[int]
    y_checks: list[tuple[int, float]] = field(default_factory=list)
    skipped_low_entropy: int = 0

    @property
    def fraction_in_window(self) -> float:
        lo, hi = self.window
        if not self.x_counts:
            return math.nan
        return float(np.mean([lo <= c <= hi for c in self.x_counts]))

    @property
    def fraction_preimage_ok(self) -> float:
        if not self.y_checks:
            return math.nan
        return float(np.mean([c >= thr for c, thr in self.y_checks]))

    def passes(self, min_fraction: float = 0.95) -> bool:
        ok = self.fraction_in_window >= min_fraction
        if self.y_checks:
            ok = ok and self.fraction_preimage_ok >= min_fraction
        return bool(ok)


def intersection_count(enc: LossyEncoder, x) -> int:
    """|C_Q intersect T(Q_{Y|X}|x)| for a high-entropy x."""
    x = np.asarray(x, dtype=np.int8)
    entry = enc.registry.forward[EmpiricalType(tuple(np.bincount(x, minlength=enc.registry.kx)))]
    if entry.identity:
        raise ValueError("low-entropy input has no sub-codebook")
    book = enc.codebook.sub_codebooks[entry.qx]
    return int(match_joint(x[None, :], book, entry.joint.array).sum())


def preimage_count(enc: LossyEncoder, y) -> int:
    """|T(Q_{X|Y}|y) intersect f^{-1}(y)| by encoding the conditional class."""
    y = np.asarray(y, dtype=np.int8)
    qy = EmpiricalType(tuple(np.bincount(y, minlength=enc.registry.ky)))
    entry = enc.registry.by_y(qy)
    xs = list(conditional_type_class(entry.joint, y))
    if not xs:
        return 0
    ys, _ = enc.encode_batch(np.stack(xs))
    return int(np.all(ys == y, axis=1).sum())


def concentration_diagnostic(enc: LossyEncoder, xs, ys=None, class_cap: int = 200_000) -> ConcentrationReport:
    """Check the concentration windows of a drawn encoder on sampled inputs.

    ``xs``: sampled source words; low-entropy ones are skipped.
    ``ys``: optional codewords for the preimage check (needs small classes).
    """
    reg = enc.registry
    n, d, e = reg.n, reg.delta, reg.epsilon
    window = (math.exp(n * (d - e)), math.exp(n * (d + e)))
    counts, skipped = [], 0
    for x in np.atleast_2d(xs):
        entry = reg.forward[EmpiricalType(tuple(np.bincount(x, minlength=reg.kx)))]
        if entry.identity:
            skipped += 1
            continue
        counts.append(intersection_count(enc, x))
    rep = ConcentrationReport(n, d, e, window, counts, skipped_low_entropy=skipped)
    if ys is not None:
        for y in np.atleast_2d(ys):
            qy = EmpiricalType(tuple(np.bincount(y, minlength=reg.ky)))
            entry = reg.by_y(qy)
            if entry.identity:
                continue
            if conditional_type_class_size(entry.joint.transpose(), given="row") > class_cap:
                raise CapExceededError(f"conditional class of {qy.counts} too large for preimage check")
            thr = math.exp(n * (entry.measures.h_x_given_y - d - 2 * e))
            rep.y_checks.append((preimage_count(enc, y), thr))
    return rep


# -- binary sidecar ------------------------------------------------------------

MAGIC = b"VQIDCB\x00\x01"
FORMAT_VERSION = 1


def save_codebook(path, codebook: Codebook) -> None:
    reg = codebook.registry
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HIHHddQI", FORMAT_VERSION, reg.n, reg.kx, reg.ky,
                             reg.delta, reg.epsilon, codebook.ranking_seed, len(reg.forward)))
        for qx, entry in reg.forward.items():
            fh.write(struct.pack(f"<{reg.kx}I", *qx.counts))
            fh.write(struct.pack(f"<{reg.kx * reg.ky}I", *entry.joint.array.ravel().tolist()))
            fh.write(struct.pack("<BB", entry.identity, entry.repaired))
            rows = codebook.sub_codebooks.get(qx)
            m = 0 if rows is None else rows.shape[0]
            fh.write(struct.pack("<Q", m))
            if m:
                fh.write(np.ascontiguousarray(rows, dtype=np.uint8).tobytes())


def load_codebook(path) -> Codebook:
    data = Path(path).read_bytes()
    if data[:len(MAGIC)] != MAGIC:
        raise ConfigError(f"{path}: not a codebook file (bad magic)")
    off = len(MAGIC)
    head = struct.Struct("<HIHHddQI")
    version, n, kx, ky, delta, eps, seed, count = head.unpack_from(data, off)
    if version != FORMAT_VERSION:
        raise ConfigError(f"{path}: unsupported codebook format version {version}")
    off += head.size
    reg = TypeRegistry(n, kx, ky, delta, eps)
    subs = {}
    for _ in range(count):
        qx = EmpiricalType(struct.unpack_from(f"<{kx}I", data, off))
        off += 4 * kx
        flat = struct.unpack_from(f"<{kx * ky}I", data, off)
        off += 4 * kx * ky
        identity, repaired = struct.unpack_from("<BB", data, off)
        off += 2
        (m,) = struct.unpack_from("<Q", data, off)
        off += 8
        joint = JointEmpiricalType.from_array(np.asarray(flat).reshape(kx, ky))
        reg.add(RegistryEntry(qx, joint, bool(identity), bool(repaired)))
        if m:
            rows = np.frombuffer(data, dtype=np.uint8, count=m * n, offset=off).reshape(m, n)
            subs[qx] = rows.astype(np.int8)
            off += m * n
    reg.check()
    return Codebook(reg, subs, seed)
