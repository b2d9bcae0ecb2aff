"""Gaussian machinery: datasets, covariances, partial correlations, the
conditional-independence decision rule, adjusted regression coefficients,
DAG likelihoods, and the information criterion."""

import itertools

import numpy as np
import pytest

from causalspan import (
    CITestConfig,
    CovMatrix,
    Dataset,
    DegenerateDataError,
    InsufficientSampleError,
    NumericalRankError,
    PDGraph,
    beta_given_s,
    bic_score,
    correlation_matrix,
    dag_mle,
    fisher_z_dependent,
    partial_correlation,
    sample_covariance,
    structural_covariance,
)
from conftest import recursive_partial_correlation, weighted_cov


def make_dataset(values, names=None, response=None):
    values = np.asarray(values, dtype=float)
    p = values.shape[1]
    names = names or tuple(f"c{k}" for k in range(p))
    return Dataset(values, names, p - 1 if response is None else response)


class TestDataset:
    def test_basic_properties(self):
        d = make_dataset([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        assert d.n == 3 and d.n_columns == 2
        assert d.covariates == (0,)

    def test_rejects_single_row(self):
        with pytest.raises(Exception):
            make_dataset([[1.0, 2.0]])

    def test_rejects_nonfinite(self):
        with pytest.raises(Exception):
            make_dataset([[1.0, np.nan], [2.0, 3.0]])

    def test_rejects_duplicate_names(self):
        with pytest.raises(Exception):
            Dataset(np.zeros((3, 2)) + np.arange(3)[:, None], ("a", "a"), 1)

    def test_standardize_covariates_only(self):
        rng = np.random.default_rng(0)
        vals = rng.normal(size=(200, 3)) * np.array([3.0, 0.5, 7.0]) + 1.0
        d = make_dataset(vals, response=2).standardize()
        assert d.standardized
        means = d.values.mean(axis=0)
        assert np.allclose(means, 0.0, atol=1e-12)
        assert np.isclose(d.values[:, 0].std(ddof=1), 1.0)
        assert np.isclose(d.values[:, 1].std(ddof=1), 1.0)
        # The response keeps its scale; only its mean is removed.
        assert abs(d.values[:, 2].std(ddof=1) - 7.0) < 1.0

    def test_standardize_names_constant_covariate(self):
        vals = np.column_stack([np.ones(5), np.arange(5.0)])
        d = Dataset(vals, ("flat", "resp"), 1)
        with pytest.raises(DegenerateDataError, match="flat"):
            d.standardize()

    def test_resample_rows(self):
        d = make_dataset([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        r = d.resample_rows(np.array([2, 0, 2]))
        assert np.array_equal(r.values, [[5.0, 6.0], [1.0, 2.0], [5.0, 6.0]])
        assert r.names == d.names and r.response == d.response


class TestCovMatrix:
    def test_population_flag(self):
        c = CovMatrix(np.eye(2))
        assert c.is_population
        assert not CovMatrix(np.eye(2), n=50).is_population

    def test_rejects_asymmetric(self):
        with pytest.raises(Exception):
            CovMatrix(np.array([[1.0, 0.5], [0.2, 1.0]]))

    def test_rejects_negative_definite(self):
        with pytest.raises(Exception):
            CovMatrix(np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_correlation_unit_diagonal(self):
        c = CovMatrix(np.array([[4.0, 2.0], [2.0, 9.0]]))
        r = c.correlation()
        assert np.allclose(np.diag(r.values), 1.0)
        assert np.isclose(r.values[0, 1], 2.0 / 6.0)

    def test_sample_covariance_denominators(self):
        d = make_dataset([[0.0, 0.0], [2.0, 4.0]])
        assert np.isclose(sample_covariance(d).values[0, 0], 2.0)
        assert np.isclose(sample_covariance(d, ml=True).values[0, 0], 1.0)

    def test_correlation_matrix_names_constant_column(self):
        vals = np.column_stack([np.ones(4), np.arange(4.0)])
        d = Dataset(vals, ("flat", "resp"), 1)
        with pytest.raises(DegenerateDataError, match="flat"):
            correlation_matrix(d)


class TestPartialCorrelation:
    def test_order_zero_is_plain_correlation(self):
        c = CovMatrix(np.array([[2.0, 1.0], [1.0, 3.0]]))
        assert np.isclose(partial_correlation(c, 0, 1), 1.0 / np.sqrt(6.0))

    def test_matches_recursion_on_random_models(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            p = int(rng.integers(4, 7))
            w = np.tril(rng.uniform(1.0, 2.0, (p, p)), -1) * (
                rng.random((p, p)) < 0.5
            )
            cov = CovMatrix(structural_covariance(w))
            idx = list(range(p))
            for i, j in itertools.combinations(idx, 2):
                others = [k for k in idx if k not in (i, j)]
                for size in range(min(3, len(others)) + 1):
                    for s in itertools.combinations(others, size):
                        got = partial_correlation(cov, i, j, s)
                        want = recursive_partial_correlation(cov.values, i, j, s)
                        assert got == pytest.approx(want, abs=1e-9)

    def test_clipped_to_unit_interval(self):
        near = 1.0 - 1e-9
        c = CovMatrix(np.array([[1.0, near], [near, 1.0]]))
        assert abs(partial_correlation(c, 0, 1)) <= 1.0

    def test_singular_conditioning_raises(self):
        # Conditioning on a perfect copy makes the precision submatrix
        # singular beyond the condition limit.
        base = np.array([[1.0, 1.0, 0.3], [1.0, 1.0, 0.3], [0.3, 0.3, 1.0]])
        c = CovMatrix(base)
        with pytest.raises(NumericalRankError):
            partial_correlation(c, 0, 2, (1,))


class TestDependenceRule:
    def test_moderate_correlation_at_n100_is_dependent(self):
        assert fisher_z_dependent(0.5, 100, 0, 0.01)

    def test_tiny_correlation_is_independent(self):
        assert not fisher_z_dependent(0.01, 100, 0, 0.01)

    def test_threshold_monotone_in_n(self):
        rho = 0.2
        dependent = [fisher_z_dependent(rho, n, 0, 0.01) for n in (30, 100, 1000)]
        assert dependent == sorted(dependent)

    def test_sign_symmetric(self):
        assert fisher_z_dependent(-0.5, 100, 0, 0.01) == fisher_z_dependent(
            0.5, 100, 0, 0.01
        )

    def test_perfect_correlation_always_dependent(self):
        assert fisher_z_dependent(1.0, 10, 0, 1e-12)

    def test_conditioning_set_consumes_sample(self):
        # Same correlation, bigger conditioning set: less evidence.
        assert fisher_z_dependent(0.4, 60, 0, 0.01)
        assert not fisher_z_dependent(0.4, 60, 40, 0.01)

    def test_insufficient_sample_raises(self):
        with pytest.raises(InsufficientSampleError):
            fisher_z_dependent(0.5, 5, 2, 0.01)

    def test_alpha_bounds_enforced(self):
        with pytest.raises(Exception):
            CITestConfig(alpha=0.0)
        with pytest.raises(Exception):
            CITestConfig(alpha=1.0)


class TestBetaGivenS:
    def test_response_in_adjustment_set_gives_zero(self):
        c = CovMatrix(np.eye(3))
        assert beta_given_s(c, 0, (2,), 2) == 0.0

    def test_identical_covariate_response_rejected(self):
        c = CovMatrix(np.eye(3))
        with pytest.raises(ValueError):
            beta_given_s(c, 1, (), 1)

    def test_covariate_inside_set_rejected(self):
        c = CovMatrix(np.eye(3))
        with pytest.raises(ValueError):
            beta_given_s(c, 0, (0,), 2)

    def test_dual_routes_agree(self):
        rng = np.random.default_rng(17)
        w = np.zeros((4, 4))
        w[1, 0], w[2, 1], w[3, 1], w[3, 2] = 0.9, -0.7, 1.3, 0.5
        cov = structural_covariance(w)
        ch = np.linalg.cholesky(cov)
        vals = rng.normal(size=(60_000, 4)) @ ch.T
        d = make_dataset(vals, response=3)
        c = CovMatrix(sample_covariance(d).values, n=d.n)
        for s in [(), (0,), (1,), (0, 1), (1, 2), (0, 2)]:
            i = next(k for k in (2, 0, 1) if k not in s)
            a = beta_given_s(d, i, s, 3)
            b = beta_given_s(c, i, s, 3)
            assert a == pytest.approx(b, abs=1e-8)

    def test_known_adjusted_coefficients(self, hub_direct_model):
        w, evars = hub_direct_model
        cov = weighted_cov(w, evars)
        # Adjusting each child for the hub recovers its direct weight; the
        # hub's marginal coefficient is the mixture 0.4.
        assert beta_given_s(cov, 0, (1,), 3) == pytest.approx(-1.0, abs=1e-12)
        assert beta_given_s(cov, 1, (), 3) == pytest.approx(0.4, abs=1e-12)
        assert beta_given_s(cov, 2, (1,), 3) == pytest.approx(-1.0, abs=1e-12)

    def test_rank_deficient_design_raises(self):
        vals = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 1.0], [3.0, 3.0, 5.0]])
        d = make_dataset(vals, response=2)
        with pytest.raises(NumericalRankError):
            beta_given_s(d, 0, (1,), 2)


class TestDagMle:
    @staticmethod
    def gaussian_loglik(values, mean, cov):
        n, p = values.shape
        centered = values - mean
        prec = np.linalg.inv(cov)
        quad = float(np.einsum("ij,jk,ik->", centered, prec, centered))
        _, logdet = np.linalg.slogdet(cov)
        return -0.5 * (n * p * np.log(2 * np.pi) + n * logdet + quad)

    def test_complete_dag_reaches_saturated_fit(self):
        rng = np.random.default_rng(23)
        vals = rng.normal(size=(300, 3)) @ np.array(
            [[1.0, 0.0, 0.0], [0.4, 1.0, 0.0], [0.2, -0.3, 1.0]]
        )
        d = make_dataset(vals)
        dag = PDGraph(3, directed=[(0, 1), (0, 2), (1, 2)])
        fit = dag_mle(d, dag)
        ml_cov = sample_covariance(d, ml=True).values
        assert np.allclose(fit.covariance, ml_cov, atol=1e-10)
        assert fit.loglik == pytest.approx(
            self.gaussian_loglik(vals, vals.mean(axis=0), ml_cov), rel=1e-10
        )

    def test_empty_dag_is_diagonal(self):
        rng = np.random.default_rng(29)
        vals = rng.normal(size=(500, 3))
        fit = dag_mle(make_dataset(vals), PDGraph(3))
        assert np.allclose(fit.covariance, np.diag(np.diag(fit.covariance)))

    def test_loglik_matches_density_for_any_dag(self):
        rng = np.random.default_rng(31)
        vals = rng.normal(size=(200, 4))
        vals[:, 2] += 0.8 * vals[:, 0]
        vals[:, 3] += -0.6 * vals[:, 2]
        d = make_dataset(vals)
        dag = PDGraph(4, directed=[(0, 2), (2, 3)])
        fit = dag_mle(d, dag)
        assert fit.loglik == pytest.approx(
            self.gaussian_loglik(vals, fit.mean, fit.covariance), rel=1e-10
        )

    def test_supergraph_never_fits_worse(self):
        rng = np.random.default_rng(37)
        vals = rng.normal(size=(150, 3))
        vals[:, 1] += vals[:, 0]
        d = make_dataset(vals)
        small = PDGraph(3, directed=[(0, 1)])
        big = PDGraph(3, directed=[(0, 1), (0, 2), (1, 2)])
        assert dag_mle(d, big).loglik >= dag_mle(d, small).loglik - 1e-9


class TestBic:
    def test_penalty_counts_structural_nonzeros(self):
        rng = np.random.default_rng(41)
        vals = rng.normal(size=(100, 3))
        d = make_dataset(vals)
        empty = PDGraph(3)
        chain = PDGraph(3, directed=[(0, 1), (1, 2)])
        n = 100
        fit_e, fit_c = dag_mle(d, empty), dag_mle(d, chain)
        # empty: 3 variances + 3 means; chain: all pairs linked by a shared
        # ancestor -> 6 nonzero entries + 3 means.
        assert bic_score(d, empty) == pytest.approx(
            -2 * fit_e.loglik + np.log(n) * 6, rel=1e-12
        )
        assert bic_score(d, chain) == pytest.approx(
            -2 * fit_c.loglik + np.log(n) * 9, rel=1e-12
        )

    def test_prefers_true_model_at_scale(self):
        rng = np.random.default_rng(43)
        w = np.zeros((3, 3))
        w[1, 0], w[2, 1] = 1.2, -0.9
        ch = np.linalg.cholesky(structural_covariance(w))
        vals = rng.normal(size=(4000, 3)) @ ch.T
        d = make_dataset(vals)
        chain = PDGraph(3, directed=[(0, 1), (1, 2)])
        empty = PDGraph(3)
        assert bic_score(d, chain) < bic_score(d, empty)

    def test_complete_dag_parameter_count(self):
        rng = np.random.default_rng(47)
        vals = rng.normal(size=(80, 3))
        d = make_dataset(vals)
        complete = PDGraph(3, directed=[(0, 1), (0, 2), (1, 2)])
        fit = dag_mle(d, complete)
        assert bic_score(d, complete) == pytest.approx(
            -2 * fit.loglik + np.log(80) * (6 + 3), rel=1e-12
        )


class TestStructuralCovariance:
    def test_empty_system_is_identity(self):
        assert np.allclose(structural_covariance(np.zeros((3, 3))), np.eye(3))

    def test_chain_propagates_variance(self):
        w = np.zeros((2, 2))
        w[1, 0] = 1.0
        cov = structural_covariance(w)
        assert cov[1, 1] == pytest.approx(2.0)
        assert cov[0, 1] == pytest.approx(1.0)

    def test_error_variances_scale(self):
        w = np.zeros((2, 2))
        cov = structural_covariance(w, np.array([4.0, 9.0]))
        assert np.allclose(cov, np.diag([4.0, 9.0]))
