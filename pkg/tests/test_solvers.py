import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vqident.errors import SolverError
from vqident.solvers import kl_projection, transport_feasible


def brute_min(K, row, col, steps=2001):
    best = math.inf
    lo, hi = max(0.0, row[0] + col[0] - 1), min(row[0], col[0])
    for t in np.linspace(lo, hi, steps):
        J = np.array([[t, row[0] - t], [col[0] - t, 1 - row[0] - col[0] + t]])
        J = np.maximum(J, 0)
        pos = J > 1e-15
        if np.any(pos & (K == 0)):
            continue
        best = min(best, float(np.sum(J[pos] * np.log(J[pos] / K[pos]))))
    return best


def test_product_kernel_is_zero():
    r, c = np.array([0.3, 0.7]), np.array([0.6, 0.4])
    p = kl_projection(np.outer(r, c), r, c)
    assert p.value == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(p.plan, np.outer(r, c))


def test_marginals_respected():
    rng = np.random.default_rng(0)
    K = rng.random((3, 4))
    r, c = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(4))
    p = kl_projection(K, r, c)
    assert np.allclose(p.plan.sum(axis=1), r, atol=1e-10)
    assert np.allclose(p.plan.sum(axis=0), c, atol=1e-10)


def test_infeasible_support():
    K = np.eye(2)
    p = kl_projection(K, np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    assert p.value == math.inf
    assert not transport_feasible(K > 0, np.array([1.0, 0.0]), np.array([0.0, 1.0]))


def test_mass_mismatch():
    with pytest.raises(ValueError):
        kl_projection(np.ones((2, 2)), [0.5, 0.5], [0.5, 0.2])


def test_iteration_cap_reports_residual():
    K = np.array([[1.0, 1e-8], [1e-8, 1.0]])
    with pytest.raises(SolverError) as info:
        kl_projection(K, np.array([0.5, 0.5]), np.array([0.99, 0.01]), tol=1e-15, max_iter=2)
    assert info.value.residual > 0


@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95),
       st.lists(st.floats(0.01, 1.0), min_size=4, max_size=4))
def test_matches_brute_force(r0, c0, k):
    K = np.array(k).reshape(2, 2)
    r, c = np.array([r0, 1 - r0]), np.array([c0, 1 - c0])
    p = kl_projection(K, r, c)
    assert p.value <= brute_min(K, r, c) + 1e-9
    assert p.value == pytest.approx(brute_min(K, r, c), abs=1e-4)
