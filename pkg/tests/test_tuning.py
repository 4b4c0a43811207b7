import math

import numpy as np
import numpy.testing as npt
import pytest

import ppselect.tuning as tuning
from ppselect.errors import ConvergenceError
from ppselect.lasso import fit_al
from ppselect.likelihood import mle, score
from ppselect.tuning import (
    GridSpec,
    adaptive_weights,
    bic,
    lambda_max,
    restricted_mle,
    select_lambda,
)

from conftest import random_scheme


class TestAdaptiveWeights:
    def test_formula(self):
        beta = np.array([2.0, -0.5, 4.0])
        w = adaptive_weights(beta, lam=0.3, nu=1.0)
        npt.assert_allclose(w.values, 0.3 / np.abs(beta))

    def test_exponent(self):
        beta = np.array([4.0])
        w = adaptive_weights(beta, lam=1.0, nu=2.0)
        assert w.values[0] == pytest.approx(1.0 / 16.0)

    def test_zero_pilot_freezes_coordinate(self):
        w = adaptive_weights(np.array([1.0, 0.0]), lam=0.5)
        assert w.values[1] == np.inf
        npt.assert_array_equal(w.frozen, [False, True])

    def test_zero_lambda_is_unpenalized_everywhere(self):
        w = adaptive_weights(np.array([1.0, 0.0]), lam=0.0)
        npt.assert_array_equal(w.values, [0.0, 0.0])

    def test_unpenalized_index(self):
        w = adaptive_weights(np.array([2.0, 2.0]), lam=1.0, unpenalized=0)
        assert w.values[0] == 0.0
        assert w.values[1] == 0.5

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            adaptive_weights(np.array([1.0]), lam=-0.1)
        with pytest.raises(ValueError):
            adaptive_weights(np.array([1.0]), lam=0.1, nu=0.0)


class TestBic:
    def test_recomputed_from_parts(self, small_scheme):
        fit = mle(small_scheme)
        want = -2.0 * fit.loglik + fit.n_nonzero * math.log(
            small_scheme.n_data)
        assert bic(fit, small_scheme) == pytest.approx(want, rel=1e-12)


class TestRestrictedMle:
    def test_matches_full_mle_on_all_columns(self, small_scheme):
        full = mle(small_scheme).beta
        sub = restricted_mle(small_scheme, range(small_scheme.n_columns))
        npt.assert_allclose(sub, full, rtol=0, atol=1e-8)

    def test_score_vanishes_on_subset_only(self):
        scheme = random_scheme(19, n_cov=2, standardize=True)
        beta = restricted_mle(scheme, [0])
        g = score(scheme, beta)
        assert abs(g[0]) < 1e-6
        assert beta[1] == 0.0 and beta[2] == 0.0


class TestLambdaMax:
    def test_boundary_property(self):
        # just above the threshold the null fit satisfies the KKT
        # system, so nothing but the intercept enters; well below it at
        # least one covariate must enter
        scheme = random_scheme(23, n_cov=3, standardize=True)
        pilot = mle(scheme).beta
        lmax = lambda_max(scheme, pilot, unpenalized=0)
        above = fit_al(scheme, adaptive_weights(pilot, lmax * 1.0001,
                                                unpenalized=0))
        assert above.support == (0,)
        below = fit_al(scheme, adaptive_weights(pilot, lmax * 0.9,
                                                unpenalized=0))
        assert len(below.support) > 1

    def test_matches_direct_formula(self):
        scheme = random_scheme(29, n_cov=2, standardize=True)
        pilot = mle(scheme).beta
        null_beta = restricted_mle(scheme, [0])
        g = score(scheme, null_beta) / scheme.n_data
        want = max(abs(g[j]) * abs(pilot[j]) for j in (1, 2))
        assert lambda_max(scheme, pilot, unpenalized=0) == pytest.approx(
            want, rel=1e-10)


class TestGridSpec:
    def test_geometric_grid(self):
        grid = GridSpec(n=5, min_ratio=1e-2).build(10.0)
        npt.assert_allclose(grid, np.geomspace(10.0, 0.1, 5))
        assert grid[0] > grid[-1]

    def test_explicit_values_win(self):
        grid = GridSpec(values=(0.5, 0.1)).build(99.0)
        npt.assert_array_equal(grid, [0.5, 0.1])

    def test_degenerate_lambda_max(self):
        npt.assert_array_equal(GridSpec(n=4).build(0.0), [0.0])

    def test_validation(self):
        with pytest.raises(ValueError):
            GridSpec(n=0)
        with pytest.raises(ValueError):
            GridSpec(min_ratio=2.0)


class TestSelectLambda:
    def test_selects_true_support(self):
        scheme = random_scheme(31, n_cov=3, standardize=True)
        path = select_lambda(scheme, method="al")
        assert path.selected is not None
        assert len(path.lambdas) == 50
        assert not path.errors
        assert path.selected_lambda == path.lambdas[path.selected_index]

    def test_bic_tie_prefers_larger_lambda(self):
        scheme = random_scheme(37, n_cov=2, standardize=True)
        lmax = lambda_max(scheme, mle(scheme).beta, unpenalized=0)
        grid = GridSpec(values=(2.0 * lmax, 2.0 * lmax, lmax * 1.01))
        path = select_lambda(scheme, method="al", grid=grid)
        # all three fits are the null model with identical BIC
        assert len(set(np.round(path.bics, 9))) == 1
        assert path.selected_index == 0

    def test_al_and_alds_paths_share_grid(self):
        scheme = random_scheme(41, n_cov=2, standardize=True)
        a = select_lambda(scheme, method="al")
        b = select_lambda(scheme, method="alds")
        npt.assert_array_equal(a.lambdas, b.lambdas)
        assert a.method == "al" and b.method == "alds"

    def test_warm_start_matches_cold_fit(self):
        scheme = random_scheme(43, n_cov=3, standardize=True)
        path = select_lambda(scheme, method="al")
        pilot = mle(scheme).beta
        cold = fit_al(scheme, adaptive_weights(pilot, path.selected_lambda,
                                               unpenalized=0))
        npt.assert_allclose(path.selected.beta, cold.beta, rtol=0, atol=1e-6)

    def test_selected_lambda_attached_to_fit(self):
        scheme = random_scheme(47, n_cov=2, standardize=True)
        path = select_lambda(scheme, method="alds")
        assert path.selected.lam == path.selected_lambda

    def test_unknown_method_rejected(self, small_scheme):
        with pytest.raises(ValueError, match="method"):
            select_lambda(small_scheme, method="ridge")

    def test_partial_failures_recorded(self, monkeypatch):
        scheme = random_scheme(53, n_cov=2, standardize=True)
        real = tuning.fit_al
        calls = {"k": 0}

        def flaky(*args, **kwargs):
            calls["k"] += 1
            if calls["k"] % 7 == 3:
                raise ConvergenceError("induced failure")
            return real(*args, **kwargs)

        monkeypatch.setattr(tuning, "fit_al", flaky)
        path = select_lambda(scheme, method="al")
        assert path.errors
        for idx in path.errors:
            assert path.fits[idx] is None
            assert np.isinf(path.bics[idx])
        assert path.selected is not None

    def test_all_failures_raise(self, monkeypatch):
        scheme = random_scheme(59, n_cov=2, standardize=True)

        def broken(*args, **kwargs):
            raise ConvergenceError("induced failure")

        monkeypatch.setattr(tuning, "fit_al", broken)
        with pytest.raises(ConvergenceError):
            select_lambda(scheme, method="al")
