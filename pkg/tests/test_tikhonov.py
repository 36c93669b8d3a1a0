import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from funcar.arh import lag_cov
from funcar.estimators import CovPair
from funcar.hilbert import BasisSpec, HilbertOperator, schatten_norm
from funcar.tikhonov import (
    choose_alpha,
    estimate_rho,
    k_alpha,
    oracle_rho_star,
    population_phi,
    regularized_resolvent,
    source_condition_check,
)

from _models import (
    column_solve_minimizer,
    gradient_descent_minimizer,
    objective,
    random_stationary_model,
    source_model,
)


def sym(a, basis=None):
    a = np.asarray(a, dtype=float)
    return HilbertOperator.symmetrized(a, basis or BasisSpec(a.shape[0]))


def diag_pair(lam, mu):
    lam, mu = np.asarray(lam, float), np.asarray(mu, float)
    basis = BasisSpec(lam.size)
    return CovPair(sym(np.diag(lam), basis), HilbertOperator(np.diag(mu * lam), basis))


class TestKAlpha:
    def test_identity(self):
        np.testing.assert_allclose(k_alpha(BasisSpec(3).identity(), 1.0).coords, 0.5 * np.eye(3), atol=1e-15)

    def test_diagonal_closed_form(self):
        np.testing.assert_allclose(k_alpha(sym(np.diag([2.0, 1.0])), 2.0).coords, np.diag([1 / 3, 1 / 3]), atol=1e-15)

    @pytest.mark.parametrize("alpha", [0.0, -1.0, math.nan])
    def test_rejects_bad_alpha(self, alpha):
        with pytest.raises(ValueError):
            k_alpha(BasisSpec(2).identity(), alpha)

    def test_self_adjoint_output(self):
        rng = np.random.default_rng(0)
        r0 = sym(rng.standard_normal((6, 6)))
        k = k_alpha(r0, 0.1)
        assert k.self_adjoint
        lam, v = np.linalg.eigh(r0.coords)
        np.testing.assert_allclose(k.coords, (v * (lam / (lam ** 2 + 0.1))) @ v.T, atol=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(arrays(float, (6, 6), elements=st.floats(-5, 5)), st.sampled_from([1e-4, 1e-2, 0.01, 1.0]))
    def test_operator_bounds(self, a, alpha):
        r0 = sym(a)
        assert schatten_norm(regularized_resolvent(r0, alpha), math.inf) <= (1 / alpha) * (1 + 1e-10)
        assert schatten_norm(k_alpha(r0, alpha), math.inf) <= (1 / math.sqrt(alpha)) * (1 + 1e-10)

    def test_null_direction_of_large_operator(self):
        # rank one with ||R0|| = 24: forming R0^2 first would push the
        # resolvent past 1/alpha by more than 1e-10 relative
        r0 = sym(np.full((6, 6), 4.0))
        res = schatten_norm(regularized_resolvent(r0, 1e-4), math.inf)
        assert res <= 1e4 * (1 + 1e-12)

    def test_indefinite_bound_example(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            vals = rng.uniform(-1, 1, 8)
            r0 = sym((np.linalg.qr(rng.standard_normal((8, 8)))[0] * vals) @ np.linalg.qr(rng.standard_normal((8, 8)))[0].T)
            assert schatten_norm(k_alpha(r0, 0.01), math.inf) <= 10 * (1 + 1e-10)


class TestEstimateRho:
    def test_diagonal_closed_form(self):
        lam, mu, alpha = np.array([1.0, 0.5, 0.2]), np.array([0.8, 0.4, -0.3]), 0.05
        est = estimate_rho(diag_pair(lam, mu), alpha)
        np.testing.assert_allclose(est.rho_hat.coords, np.diag(mu * lam ** 2 / (lam ** 2 + alpha)), atol=1e-14)
        np.testing.assert_array_equal(est.rho_hat.coords, est.phi_hat.coords.T)
        assert est.alpha == alpha

    def test_zero_r1(self):
        basis = BasisSpec(4)
        pair = CovPair(sym(np.diag([1, 2, 3, 4.0]), basis), basis.zeros())
        for alpha in (1e-6, 1.0, 10.0):
            assert not estimate_rho(pair, alpha).rho_hat.coords.any()

    def test_small_alpha(self):
        est = estimate_rho(diag_pair([1.0, 0.5], [0.8, 0.4]), 1e-6)
        np.testing.assert_allclose(est.rho_hat.coords, np.diag([0.8, 0.4]), atol=1e-4)

    def test_rejects_bad_alpha(self):
        with pytest.raises(ValueError):
            estimate_rho(diag_pair([1.0], [0.5]), 0.0)

    @pytest.mark.parametrize("seed", range(10))
    def test_minimizer_oracles(self, seed):
        rng = np.random.default_rng(seed)
        basis = BasisSpec(3)
        r0 = sym(rng.standard_normal((3, 3)), basis)
        r1 = HilbertOperator(rng.standard_normal((3, 3)), basis)
        alpha = float(rng.uniform(0.05, 1.0))
        phi = estimate_rho(CovPair(r0, r1), alpha).phi_hat.coords
        r_m1 = r1.coords.T
        np.testing.assert_allclose(phi, column_solve_minimizer(r0.coords, r_m1, alpha), atol=1e-10)
        gd = gradient_descent_minimizer(r0.coords, r_m1, alpha)
        assert np.linalg.norm(phi - gd) < 1e-6
        # perturbations never decrease the objective
        base = objective(r0.coords, r_m1, alpha, phi)
        for _ in range(20):
            assert objective(r0.coords, r_m1, alpha, phi + 1e-3 * rng.standard_normal((3, 3))) >= base

    def test_adjoint_consistency(self):
        rng = np.random.default_rng(4)
        model = random_stationary_model(rng, J=6)
        pair = CovPair(lag_cov(model, 0) + sym(0.01 * rng.standard_normal((6, 6)), model.basis),
                       lag_cov(model, 1))
        est = estimate_rho(pair, 0.01)
        rho_star = model.rho.coords.T
        for p in (1, 2, math.inf):
            a = schatten_norm(est.phi_hat.coords - rho_star, p)
            b = schatten_norm(est.rho_hat.coords - model.rho.coords, p)
            assert a == pytest.approx(b, rel=1e-12)


class TestOracle:
    def test_diagonal(self):
        lam, mu = np.array([1.0, 0.25, 0.1]), np.array([0.5, -0.2, 0.7])
        pair = diag_pair(lam, mu)
        sol = oracle_rho_star(pair.r0_hat, pair.r1_hat)
        np.testing.assert_allclose(sol.phi.coords, np.diag(mu), atol=1e-13)
        assert sol.residual < 1e-14

    def test_zero_r1(self):
        basis = BasisSpec(3)
        assert not oracle_rho_star(sym(np.eye(3), basis), basis.zeros()).phi.coords.any()

    @pytest.mark.parametrize("seed", range(5))
    def test_model_round_trip(self, seed):
        model = random_stationary_model(np.random.default_rng(seed))
        sol = oracle_rho_star(lag_cov(model, 0), lag_cov(model, 1))
        np.testing.assert_allclose(sol.phi.coords, model.rho.coords.T, atol=1e-6)

    def test_population_limit(self):
        model = random_stationary_model(np.random.default_rng(1), J=5)
        r0, r1 = lag_cov(model, 0), lag_cov(model, 1)
        rho_star = model.rho.coords.T
        errs = [np.linalg.norm(population_phi(r0, r1, 10.0 ** -k).coords - rho_star) for k in range(1, 9)]
        assert all(b <= a for a, b in zip(errs, errs[1:]))
        assert errs[-1] <= 1e-5

    def test_deterministic_source_bound(self):
        rng = np.random.default_rng(3)
        model, w = source_model(rng, J=8)
        r0, r1 = lag_cov(model, 0), lag_cov(model, 1)
        rho_star = model.rho.coords.T
        for p in (1, 2, math.inf):
            chk = source_condition_check(r0, model.rho, p)
            assert chk.satisfied
            assert chk.w_norm == pytest.approx(schatten_norm(w, p), rel=1e-6)
            for k in range(1, 7):
                alpha = 10.0 ** -k
                err = schatten_norm(population_phi(r0, r1, alpha).coords - rho_star, p)
                assert err <= math.sqrt(alpha) * chk.w_norm + 1e-10


class TestSourceCheck:
    def test_identity_case(self):
        r0 = sym(np.diag(np.arange(1, 31, dtype=float) ** -2.0))
        chk = source_condition_check(r0, r0, p=math.inf)
        assert chk.satisfied
        assert chk.w_norm == pytest.approx(1.0, abs=1e-6)
        np.testing.assert_allclose(chk.w.coords, np.eye(30), atol=1e-6)

    def test_summable_ratio(self):
        j = np.arange(1, 31, dtype=float)
        basis = BasisSpec(30)
        chk = source_condition_check(sym(np.diag(j ** -2), basis), HilbertOperator(np.diag(j ** -3), basis), p=2)
        assert chk.satisfied
        np.testing.assert_allclose(chk.w.coords, np.diag(1 / j), atol=1e-10)
        # partial-sum oracle
        assert chk.w_norm ** 2 == pytest.approx(sum(1.0 / k ** 2 for k in range(1, 31)), abs=1e-6)
        assert chk.w_norm ** 2 == pytest.approx(1.6122, abs=1e-4)
        assert not chk.appears_unbounded

    def test_growing_ratio(self):
        norms = []
        for J in (10, 30, 60):
            j = np.arange(1, J + 1, dtype=float)
            basis = BasisSpec(J)
            chk = source_condition_check(sym(np.diag(j ** -2), basis), HilbertOperator(np.diag(1 / j), basis),
                                         p=math.inf, budget=20.0)
            norms.append(chk.w_norm)
            assert chk.appears_unbounded
            assert chk.growth_slope == pytest.approx(1.0, abs=1e-6)
        assert norms == pytest.approx([10, 30, 60], abs=1e-6)
        assert not chk.satisfied

    def test_residual_detects_missing_range(self):
        basis = BasisSpec(2)
        r0 = sym(np.diag([1.0, 0.0]), basis)
        rho = HilbertOperator([[0.5, 0.0], [0.0, 0.5]], basis)
        chk = source_condition_check(r0, rho)
        assert not chk.satisfied and chk.residual == pytest.approx(0.5)


class TestChooseAlpha:
    def test_fourth_root(self):
        assert choose_alpha(1e-4, 1.0) == pytest.approx(0.1)
        assert choose_alpha(1.0, 0.5) == 0.5
        assert choose_alpha(1 / 4096, 1.0) == pytest.approx(0.125)

    @pytest.mark.parametrize("g,c", [(0, 1), (-1, 1), (1, 0)])
    def test_rejects(self, g, c):
        with pytest.raises(ValueError):
            choose_alpha(g, c)
