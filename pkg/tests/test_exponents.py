import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from vqident import exponents as ex
from vqident.ensemble import CompressionConstraint, check_compression_constraint
from vqident.types_core import divergence, mutual_information

G8 = np.array([0.8, 0.2])
W_NOISY = np.array([[0.9, 0.1], [0.2, 0.8]])
FAST = ex.ExponentOptions(starts=12, refine=2)


def random_instance(rng, ky=2):
    q_xy = rng.dirichlet(np.ones(2 * ky)).reshape(2, ky)
    q_zy = rng.dirichlet(np.ones(2), size=ky)
    W = rng.dirichlet(np.ones(2), size=2)
    return q_xy, q_zy, W


def induced(q_xy, W):
    q_x_given_y = (q_xy / q_xy.sum(axis=0)).T
    return q_x_given_y @ W


class TestAlgebra:
    def test_min_max_identities(self):
        # exact in rational arithmetic
        rng = np.random.default_rng(0)
        for a, b in rng.normal(size=(10_000, 2)):
            a, b = Fraction(a), Fraction(b)
            assert ex.min_identity(a, b) == min(a, b)
            assert ex.max_identity(a, b) == max(a, b)


class TestInner:
    def test_induced_kernel_is_zero_with_bayes_witness(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            q_xy, _, W = random_instance(rng)
            res = ex.inner_divergence_min(q_xy, induced(q_xy, W), W)
            assert abs(res.value) <= 1e-8
            q_x_given_y = (q_xy / q_xy.sum(axis=0)).T
            for y in range(2):
                joint = q_x_given_y[y][:, None] * W
                bayes = joint / joint.sum(axis=0)
                assert np.allclose(res.posterior[y], bayes, atol=1e-7)

    def test_witness_consistency(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            q_xy, q_zy, W = random_instance(rng, ky=3)
            res = ex.inner_divergence_min(q_xy, q_zy, W)
            q_x_given_y = (q_xy / q_xy.sum(axis=0)).T
            recon = np.einsum("yxz,yz->yx", res.posterior, q_zy)
            assert np.allclose(recon, q_x_given_y, atol=1e-8)

    def test_deterministic_x_given_y(self):
        q_xy = np.array([[0.4, 0.0], [0.0, 0.6]])
        q_zy = np.array([[0.3, 0.7], [0.5, 0.5]])
        res = ex.inner_divergence_min(q_xy, q_zy, W_NOISY)
        want = 0.4 * divergence(q_zy[0], W_NOISY[0]) + 0.6 * divergence(q_zy[1], W_NOISY[1])
        assert res.value == pytest.approx(want, abs=1e-10)

    def test_grid_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            q_xy, q_zy, W = random_instance(rng)
            res = ex.inner_divergence_min(q_xy, q_zy, W)
            assert res.value == pytest.approx(oracles.grid_inner_min_binary(q_xy, q_zy, W), abs=1e-4)

    def test_zero_only_when_induced(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            q_xy, _, W = random_instance(rng)
            k = induced(q_xy, W)
            bumped = k.copy()
            bumped[0] = (bumped[0] + np.array([0.05, -0.05])).clip(0.01, 0.99)
            bumped[0] /= bumped[0].sum()
            if np.abs(bumped - k).max() < 1e-3:
                continue
            assert ex.inner_divergence_min(q_xy, bumped, W).value > 1e-6


class TestObjective:
    def test_rate_term_is_max_of_positive_parts(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            a, b, d, R = rng.random(4)
            want = max(max(a - b, 0.0), max(a + d - R, 0.0))
            assert ex.rate_term(a, b, d, R) == pytest.approx(want, abs=1e-15)
            assert ex.rate_term(a, b, d, R, kind="dd") == pytest.approx(max(a - R, 0.0), abs=1e-15)

    def test_reported_value_reproduces(self):
        res = ex.exponent_fixed_mapping(G8, W_NOISY, ex.identity_mapping(2), 0.05, FAST)
        terms = ex.objective_terms(G8, W_NOISY, res.qx, res.qyx, res.qzy, 0.05)
        assert terms.total == pytest.approx(res.value, abs=1e-8)
        assert min(terms.divergence, terms.inner, terms.rate) >= 0
        assert terms.divergence == pytest.approx(divergence(res.qx, G8), abs=1e-12)
        assert abs(res.qx.sum() - 1) < 1e-9 and np.allclose(res.qzy.sum(axis=1), 1, atol=1e-9)
        json.dumps(res.to_dict())


class TestFixedMapping:
    def test_zero_rate_closed_form(self):
        res = ex.exponent_fixed_mapping(G8, np.eye(2), ex.identity_mapping(2), 0.0)
        assert res.value == pytest.approx(-math.log(0.68), abs=1e-3)
        assert np.abs(res.qx - np.array([16, 1]) / 17).sum() < 1e-2
        assert res.nonconvex_outer

    def test_uniform_source(self):
        res = ex.exponent_fixed_mapping((0.5, 0.5), np.eye(2), ex.identity_mapping(2), 0.0, FAST)
        assert res.value == pytest.approx(math.log(2), abs=1e-3)

    def test_non_increasing_in_rate(self):
        rates = [0.0, 0.05, 0.1, 0.2, 0.4]
        vals = [r.value for r in ex.exponent_curve(G8, W_NOISY, ex.identity_mapping(2), rates, opts=FAST)]
        assert all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))

    def test_dd_examples(self):
        e, dd = ex.exponent_pair(G8, np.eye(2), ex.identity_mapping(2), 0.0, FAST)
        assert dd.value == pytest.approx(-math.log(0.8), abs=1e-3)
        assert dd.value <= e.value + 1e-6
        e, dd = ex.exponent_pair((0.5, 0.5), np.eye(2), ex.identity_mapping(2), 0.0, FAST)
        assert dd.value == pytest.approx(math.log(2), abs=1e-3)


class TestClosedForms:
    def test_values(self):
        z = ex.zero_rate_closed_forms(G8)
        assert z.E0 == pytest.approx(0.385662, abs=1e-6)
        assert z.E0_dd == pytest.approx(0.223144, abs=1e-6)
        assert np.allclose(z.Qstar, [16 / 17, 1 / 17])
        v, q = oracles.e0_grid(G8)
        assert abs(z.E0 - v) < 1e-5
        assert abs(z.E0_dd - oracles.e0_dd_grid(G8)) < 1e-5

    def test_uniform_and_point_mass(self):
        z = ex.zero_rate_closed_forms(np.full(3, 1 / 3))
        assert z.E0 == pytest.approx(math.log(3)) and z.E0_dd == pytest.approx(math.log(3))
        z = ex.zero_rate_closed_forms((1.0, 0.0))
        assert z.E0 == 0.0 and z.E0_dd == 0.0

    @given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=5))
    def test_e0_dominates(self, w):
        z = ex.zero_rate_closed_forms(np.array(w) / sum(w))
        assert z.E0 >= z.E0_dd - 1e-12


class TestLinearity:
    def test_zero_rate_is_exact(self):
        rep = ex.low_rate_linearity_check(G8, np.eye(2), ex.identity_mapping(2), [0.0, 0.02], opts=FAST)
        assert rep.deviations[0] == pytest.approx(0.0, abs=1e-9)
        assert rep.holds

    def test_reports_breakdown(self):
        rep = ex.low_rate_linearity_check(G8, np.eye(2), ex.identity_mapping(2), [0.0, 0.1, 0.3], opts=FAST)
        assert len(rep.deviations) == 3
        assert rep.max_linear_rate is not None


class TestMinMaxMin:
    OPTS = ex.MinMaxMinOptions(kernel_step=0.1, qx_starts=8)

    def test_loose_constraint_matches_identity(self):
        c = CompressionConstraint(rate=10.0, excess_exponent=10.0)
        r = ex.exponent_minmaxmin(G8, np.eye(2), c, 0.0, opts=self.OPTS)
        fixed = ex.exponent_fixed_mapping(G8, np.eye(2), ex.identity_mapping(2), 0.0, FAST)
        assert r.value == pytest.approx(fixed.value, abs=1e-3)
        assert "mapping_table" in r.meta

    def test_zero_compression_rate(self):
        c = CompressionConstraint(rate=0.0, excess_exponent=10.0)
        r = ex.exponent_minmaxmin(G8, W_NOISY, c, 0.0, opts=self.OPTS)
        restricted = min(ex.exponent_fixed_mapping(G8, W_NOISY, ex.constant_mapping((p, 1 - p)), 0.0, FAST).value
                         for p in (0.2, 0.5, 0.8))
        assert r.value == pytest.approx(restricted, abs=1e-6)
        for k in r.meta["mapping_table"].values():
            assert check_compression_constraint(G8, np.asarray(k), c, G8).mutual_info <= 1e-9

    def test_dominates_feasible_fixed_mapping(self):
        c = CompressionConstraint(rate=0.2, excess_exponent=10.0)
        r = ex.exponent_minmaxmin(G8, W_NOISY, c, 0.05, opts=self.OPTS)
        blend = ex.default_mapping(G8, c, 2)
        fixed = ex.exponent_fixed_mapping(G8, W_NOISY, blend, 0.05, FAST)
        assert r.value >= fixed.value - 1e-6


class TestCapacity:
    def test_zero_rate(self):
        assert ex.identification_capacity((0.5, 0.5), W_NOISY, 0.0).value == pytest.approx(0.0, abs=1e-9)

    def test_bsc(self, bsc):
        for p in (0.05, 0.1, 0.3):
            res = ex.identification_capacity((0.5, 0.5), bsc(p), 1.0)
            assert res.value == pytest.approx(math.log(2) - ex.binary_entropy(p), abs=1e-6)

    def test_monotone_and_bounded(self):
        curve = ex.capacity_curve(G8, W_NOISY, [0.0, 0.05, 0.1, 0.2, 0.4])
        vals = [c.value for c in curve]
        assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))
        for rc, c in zip([0.0, 0.05, 0.1, 0.2, 0.4], curve):
            assert c.mi_xy <= rc + 1e-7
            assert c.value <= math.log(2) + 1e-12
            joint = (np.asarray(G8)[:, None] * c.kernel)
            assert c.value == pytest.approx(mutual_information(joint.T @ W_NOISY), abs=1e-9)
