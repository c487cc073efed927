import numpy as np
import pytest

from survbv import (
    CV_CINDEX,
    DegenerateFold,
    FIXED_LAMBDA,
    PathConfig,
    PathSolution,
    SurvivalDataset,
    SyntheticSpec,
    concordance_index,
    fit_cox,
    fit_l1,
    fit_path,
    generate_synthetic,
    gradient,
    lambda_max,
    select_model,
)
from survbv.coxfit import CoxWorkspace, standardize_columns
from survbv.coxpath import cv_fold_assignment
from conftest import make_survival_data


def kkt_residuals(data, beta, lam):
    """Worst KKT violation of an L1 solution, on the standardized scale."""
    X_std, sd, active = standardize_columns(data.covariates)
    b_std = np.asarray(beta) * sd
    ws = CoxWorkspace(data.times, data.events)
    g = X_std.T @ ws.eta_gradient(X_std @ b_std) / data.n
    nonzero = b_std != 0
    worst_active = np.max(np.abs(np.abs(g[nonzero]) - lam)) if nonzero.any() else 0.0
    inactive = ~nonzero & active
    worst_inactive = max(0.0, np.max(np.abs(g[inactive])) - lam) if inactive.any() else 0.0
    return worst_active, worst_inactive


class TestLambdaMax:
    def test_constant_covariates(self):
        data = SurvivalDataset.from_arrays(np.full((10, 2), 1.0), np.arange(1, 11), np.ones(10))
        assert lambda_max(data) == 0.0

    def test_fit_at_lambda_max_is_null(self, rng):
        data = make_survival_data(rng, 50, 4, censor_rate=0.3)
        lmax = lambda_max(data)
        np.testing.assert_array_equal(fit_l1(data, lmax), np.zeros(4))
        np.testing.assert_array_equal(fit_l1(data, 2 * lmax), np.zeros(4))

    def test_matches_gradient_at_zero(self, rng):
        data = make_survival_data(rng, 40, 6, censor_rate=0.3)
        X_std, _, _ = standardize_columns(data.covariates)
        std_data = SurvivalDataset.from_arrays(X_std, data.times, data.events)
        g0 = gradient(np.zeros(6), std_data)
        assert lambda_max(data) == pytest.approx(np.max(np.abs(g0)) / data.n, rel=1e-12)


class TestFitL1:
    def test_zero_lambda_matches_newton(self, rng):
        data = make_survival_data(rng, 300, 4, censor_rate=0.3)
        b_cd = fit_l1(data, 0.0)
        b_newton = fit_cox(data).beta
        assert np.max(np.abs(b_cd - b_newton)) <= 1e-4

    def test_first_entrant_is_argmax_covariate(self, rng):
        data = make_survival_data(rng, 80, 5, censor_rate=0.3)
        X_std, _, _ = standardize_columns(data.covariates)
        std_data = SurvivalDataset.from_arrays(X_std, data.times, data.events)
        g0 = np.abs(gradient(np.zeros(5), std_data)) / data.n
        lmax = lambda_max(data)
        lam = 0.99 * lmax
        beta = fit_l1(data, lam)
        entered = set(np.flatnonzero(beta != 0))
        assert entered == {int(np.argmax(g0))}
        worst_active, worst_inactive = kkt_residuals(data, beta, lam)
        assert worst_active <= 1e-4 and worst_inactive <= 1e-4

    def test_objective_trace_non_increasing(self, rng):
        data = make_survival_data(rng, 60, 4, censor_rate=0.3)
        trace = []
        fit_l1(data, 0.3 * lambda_max(data), config=PathConfig(), trace=trace)
        assert len(trace) >= 2
        assert all(b <= a + 1e-12 for a, b in zip(trace, trace[1:]))

    def test_negative_lambda_rejected(self, rng):
        data = make_survival_data(rng, 20, 2)
        with pytest.raises(ValueError):
            fit_l1(data, -0.1)


class TestFitPath:
    def test_single_covariate_activation_monotone(self, rng):
        data = make_survival_data(rng, 60, 1, censor_rate=0.2, beta=[1.0])
        path = fit_path(data, PathConfig(n_lambda=40, selection=FIXED_LAMBDA, fixed_lambda=0.0))
        assert np.all(np.diff(path.nonzero_counts) >= 0)

    def test_fixed_lambda_max_selects_null_model(self, rng):
        data = make_survival_data(rng, 50, 3, censor_rate=0.3)
        lmax = lambda_max(data)
        path = fit_path(data, PathConfig(selection=FIXED_LAMBDA, fixed_lambda=lmax))
        assert path.selected_index == 0
        np.testing.assert_array_equal(path.selected_beta, np.zeros(3))
        scores = data.covariates @ path.selected_beta
        assert concordance_index(scores, data) == 0.5

    def test_grid_shape_and_warm_start_head(self, rng):
        data = make_survival_data(rng, 50, 3, censor_rate=0.3)
        path = fit_path(data, PathConfig(n_lambda=25, selection=FIXED_LAMBDA, fixed_lambda=0.0))
        assert path.lambdas.size == 25
        assert np.all(np.diff(path.lambdas) < 0)
        assert path.lambdas[0] == lambda_max(data)
        np.testing.assert_array_equal(path.betas[0], np.zeros(3))

    def test_no_signal_data_degenerates_to_null_path(self):
        data = SurvivalDataset.from_arrays(np.full((12, 2), 4.0), np.arange(1, 13), np.ones(12))
        path = fit_path(data)
        assert path.lambdas.size == 1
        np.testing.assert_array_equal(path.selected_beta, np.zeros(2))

    def test_cv_recovers_true_support(self):
        hits = 0
        for seed in range(10):
            r = np.random.default_rng(1000 + seed)
            X = r.standard_normal((200, 6))
            beta_true = np.array([1.0, -1.0, 0.0, 0.0, 0.0, 0.0])
            T = r.standard_exponential(200) / np.exp(X @ beta_true)
            C = r.standard_exponential(200) / 0.3
            data = SurvivalDataset.from_arrays(X, np.maximum(np.minimum(T, C), 1e-12),
                                               (T <= C).astype(int))
            path = fit_path(data, PathConfig(n_lambda=40, seed=seed))
            support = set(np.flatnonzero(path.selected_beta != 0))
            if {0, 1} <= support:
                hits += 1
        assert hits >= 9

    def test_kkt_along_path(self, rng):
        data = make_survival_data(rng, 100, 5, censor_rate=0.3)
        path = fit_path(data, PathConfig(n_lambda=30, selection=FIXED_LAMBDA, fixed_lambda=0.0))
        for lam, beta in zip(path.lambdas, path.betas):
            worst_active, worst_inactive = kkt_residuals(data, beta, lam)
            assert worst_active <= 1e-4
            assert worst_inactive <= 1e-4

    def test_warm_equals_cold(self, rng):
        data = make_survival_data(rng, 80, 4, censor_rate=0.3)
        config = PathConfig(n_lambda=20, selection=FIXED_LAMBDA, fixed_lambda=0.0)
        path = fit_path(data, config)
        for i in range(0, 20, 4):
            cold = fit_l1(data, float(path.lambdas[i]), config=config)
            assert np.max(np.abs(cold - path.betas[i])) <= 1e-5

    def test_l1_norm_monotone_in_lambda(self, rng):
        data = make_survival_data(rng, 80, 4, censor_rate=0.3)
        path = fit_path(data, PathConfig(n_lambda=30, selection=FIXED_LAMBDA, fixed_lambda=0.0))
        norms = np.abs(path.betas).sum(axis=1)
        assert np.all(np.diff(norms) >= -1e-8)

    def test_degenerate_fold_raises(self):
        r = np.random.default_rng(4)
        X = r.standard_normal((30, 2))
        events = np.zeros(30, dtype=int)
        events[[3, 11, 24]] = 1  # 3 events cannot cover 5 folds
        data = SurvivalDataset.from_arrays(X, r.uniform(1, 9, 30), events)
        with pytest.raises(DegenerateFold):
            fit_path(data, PathConfig(n_lambda=5))


class TestSelectModel:
    def test_single_lambda_path(self, rng):
        data = make_survival_data(rng, 40, 3, censor_rate=0.3)
        path = PathSolution(
            lambdas=np.array([0.05]),
            betas=np.zeros((1, 3)),
            selected_index=0,
            selection_scores=np.zeros(1),
            nonzero_counts=np.zeros(1, dtype=int),
            selection_rule="cv_deviance",
        )
        assert select_model(path, data, PathConfig()) == 0

    def test_matches_straight_line_cv_oracle(self, rng):
        data = make_survival_data(rng, 90, 4, censor_rate=0.3, beta=[1.0, -0.7, 0.0, 0.0])
        config = PathConfig(n_lambda=3, lambda_min_ratio=0.05, seed=17)
        path = fit_path(data, config)

        # independent recomputation: same folds, straight loops, naive scoring
        folds = cv_fold_assignment(data, config.cv_folds, config.seed)
        from conftest import naive_log_partial_likelihood

        deviances = np.zeros((config.cv_folds, path.lambdas.size))
        for f in range(config.cv_folds):
            train = data.subset(np.flatnonzero(folds != f))
            held = data.subset(np.flatnonzero(folds == f))
            for i, lam in enumerate(path.lambdas):
                beta = fit_l1(train, float(lam), config=config)
                deviances[f, i] = -2.0 * naive_log_partial_likelihood(beta, held)
        oracle_index = int(np.argmin(deviances.sum(axis=0)))
        assert select_model(path, data, config) == oracle_index
        np.testing.assert_allclose(path.selection_scores, deviances.sum(axis=0), rtol=1e-8)

        # dominance sanity: when one lambda wins in every fold it must be chosen
        winners = set(np.argmin(deviances, axis=1))
        if len(winners) == 1:
            assert path.selected_index == winners.pop()

    def test_cindex_selection_runs(self, rng):
        data = make_survival_data(rng, 90, 4, censor_rate=0.3, beta=[1.0, -0.7, 0.0, 0.0])
        config = PathConfig(n_lambda=10, selection=CV_CINDEX, seed=3)
        path = fit_path(data, config)
        assert path.selection_rule == CV_CINDEX
        assert 0 <= path.selected_index < 10
        assert np.all(path.selection_scores >= 0) and np.all(path.selection_scores <= 1)

    def test_ties_break_toward_larger_lambda(self):
        scores = np.array([2.0, 1.0, 1.0])
        assert int(np.argmin(scores)) == 1  # first occurrence is the larger lambda


class TestPathConfigValidation:
    def test_bad_values(self):
        with pytest.raises(ValueError):
            PathConfig(n_lambda=1)
        with pytest.raises(ValueError):
            PathConfig(lambda_min_ratio=1.5)
        with pytest.raises(ValueError):
            PathConfig(selection="bogus")
        with pytest.raises(ValueError):
            PathConfig(selection=FIXED_LAMBDA)
        with pytest.raises(ValueError):
            PathConfig(cv_folds=1)

    def test_min_ratio_default_depends_on_shape(self):
        config = PathConfig()
        assert config.resolved_min_ratio(100, 5) == 0.01
        assert config.resolved_min_ratio(5, 100) == 0.05
