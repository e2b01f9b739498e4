import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from vqident.types_core import (
    EmpiricalType,
    JointEmpiricalType,
    all_sequences,
    conditional_type_class,
    conditional_type_class_size,
    divergence,
    empirical_joint,
    entropy,
    enumerate_types,
    joint_measures,
    multinomial,
    mutual_information,
    num_types,
    same_conditional_type,
    sample_from_type_class,
    type_class,
    type_class_size,
    weighted_conditional_divergence,
)


def seq(s):
    return np.array([int(c) for c in s], dtype=np.int8)


@pytest.mark.parametrize("p, expected", [
    ((0.5, 0.5), math.log(2)),
    ((1.0, 0.0), 0.0),
    ((0.8, 0.2), 0.500402),
])
def test_entropy_examples(p, expected):
    assert entropy(p) == pytest.approx(expected, abs=1e-6)


def test_divergence_examples():
    assert divergence((0.3, 0.7), (0.3, 0.7)) == 0.0
    assert divergence((0.8, 0.2), (0.5, 0.5)) == pytest.approx(0.192745, abs=1e-6)
    assert divergence((1, 0), (0, 1)) == math.inf


def test_divergence_dimension_mismatch():
    with pytest.raises(ValueError):
        divergence((0.5, 0.5), (0.2, 0.3, 0.5))


def test_mutual_information_examples():
    assert mutual_information(np.full((2, 2), 0.25)) == pytest.approx(0.0, abs=1e-15)
    assert mutual_information(np.diag([0.5, 0.5])) == pytest.approx(math.log(2))
    q = [[0.4, 0.1], [0.1, 0.4]]
    assert mutual_information(q) == pytest.approx(0.192745, abs=1e-6)
    assert mutual_information(q) == pytest.approx(oracles.mi(q), abs=1e-12)


def test_joint_measures_consistent():
    q = np.array([[0.1, 0.2, 0.05], [0.3, 0.15, 0.2]])
    m = joint_measures(q)
    assert m.h_x + m.h_y_given_x == pytest.approx(m.h_y + m.h_x_given_y)
    assert m.mi == pytest.approx(oracles.mi(q))


def test_weighted_conditional_divergence():
    w = np.array([[0.9, 0.1], [0.5, 0.5]])
    assert weighted_conditional_divergence(w, w, (0.5, 0.5)) == 0.0
    other = np.array([[0.9, 0.1], [0.1, 0.9]])
    assert weighted_conditional_divergence(other, w, (1.0, 0.0)) == 0.0
    a = np.array([[0.9, 0.1], [0.9, 0.1]])
    b = np.array([[0.5, 0.5], [0.5, 0.5]])
    assert weighted_conditional_divergence(a, b, (0.5, 0.5)) == pytest.approx(0.368064, abs=1e-6)
    assert weighted_conditional_divergence(a, b, (0.5, 0.5)) == pytest.approx(oracles.kl((0.9, 0.1), (0.5, 0.5)))
    assert weighted_conditional_divergence([[1, 0]], [[0, 1]], [1.0]) == math.inf


def test_enumerate_types_examples():
    assert [t.counts for t in enumerate_types(2, 2)] == [(2, 0), (1, 1), (0, 2)]
    assert len(enumerate_types(4, 2)) == 5
    brute = {tuple(int(c) for c in np.bincount(s, minlength=3))
             for s in itertools.product(range(3), repeat=4)}
    assert {t.counts for t in enumerate_types(4, 3)} == brute
    assert len(enumerate_types(4, 3)) == 15 == num_types(4, 3)


def test_type_class_size_examples():
    assert type_class_size(EmpiricalType((2, 2))) == 6
    assert sum(1 for s in itertools.product((0, 1), repeat=4) if sum(s) == 2) == 6
    assert type_class_size(EmpiricalType((4, 0))) == 1
    assert type_class_size(EmpiricalType((1, 1, 1))) == 6
    assert multinomial((30, 30, 30)) == math.factorial(90) // math.factorial(30) ** 3


def test_empirical_joint_examples():
    assert empirical_joint(seq("0011"), seq("0011")).array.tolist() == [[2, 0], [0, 2]]
    assert empirical_joint(seq("0101"), seq("0011")).array.tolist() == [[1, 1], [1, 1]]
    assert empirical_joint(seq("0000"), seq("1111")).array.tolist() == [[0, 4], [0, 0]]
    with pytest.raises(ValueError):
        empirical_joint(seq("010"), seq("0011"))


def test_sample_from_type_class_examples(rng):
    assert sample_from_type_class(EmpiricalType((4, 0)), rng).tolist() == [0, 0, 0, 0]
    draws = sample_from_type_class(EmpiricalType((1, 1)), rng, size=4000)
    frac = np.mean(draws[:, 0] == 0)
    assert abs(frac - 0.5) < 4 * math.sqrt(0.25 / 4000)


def test_sample_from_type_class_frequencies(rng):
    draws = sample_from_type_class(EmpiricalType((2, 2)), rng, size=6000)
    assert (draws.sum(axis=1) == 2).all()
    _, counts = np.unique(draws, axis=0, return_counts=True)
    assert len(counts) == 6
    assert np.all(np.abs(counts / 6000 - 1 / 6) <= 0.02)


def test_same_conditional_type_examples():
    y = seq("0110")
    assert same_conditional_type(y, y, seq("1010"))
    assert not same_conditional_type(seq("0011"), seq("1100"), seq("0011"))
    assert same_conditional_type(seq("0101"), seq("1010"), seq("0000"))
    with pytest.raises(ValueError):
        same_conditional_type(seq("01"), seq("010"), seq("000"))


def test_type_class_enumeration_matches_size():
    t = EmpiricalType((2, 1, 2))
    members = list(type_class(t))
    assert len(members) == type_class_size(t)
    assert len({m.tobytes() for m in members}) == len(members)


def test_conditional_type_class():
    x = seq("001011")
    y = seq("011010")
    joint = empirical_joint(x, y)
    members = list(conditional_type_class(joint, y))
    assert len(members) == conditional_type_class_size(joint, given="col")
    assert all(empirical_joint(m, y).counts == joint.counts for m in members)


def test_all_sequences_cap():
    assert all_sequences(3, 2, cap=8).shape == (8, 3)
    with pytest.raises(Exception):
        all_sequences(10, 2, cap=100)


@given(st.integers(1, 9), st.integers(1, 4))
def test_type_sizes_partition_sequence_space(n, k):
    assert sum(type_class_size(t) for t in enumerate_types(n, k)) == k ** n


@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=5))
def test_entropy_bounds(w):
    p = np.array(w) / sum(w)
    assert -1e-12 <= entropy(p) <= math.log(len(p)) + 1e-12
    assert entropy(p) == pytest.approx(oracles.h(p), abs=1e-12)


@given(st.lists(st.floats(0.01, 1.0), min_size=4, max_size=4),
       st.lists(st.floats(0.01, 1.0), min_size=4, max_size=4))
def test_divergence_nonnegative(a, b):
    p, q = np.array(a) / sum(a), np.array(b) / sum(b)
    assert divergence(p, q) >= -1e-12
    assert divergence(p, q) == pytest.approx(oracles.kl(p, q), abs=1e-12)


@given(st.lists(st.integers(0, 1), min_size=1, max_size=12),
       st.lists(st.integers(0, 2), min_size=1, max_size=12))
def test_joint_type_marginals(xs, ys):
    m = min(len(xs), len(ys))
    j = empirical_joint(np.array(xs[:m]), np.array(ys[:m]), 2, 3)
    assert isinstance(j, JointEmpiricalType)
    assert j.n == m
    assert j.row_type().counts == tuple(np.bincount(xs[:m], minlength=2))
