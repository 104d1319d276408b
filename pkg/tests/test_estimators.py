"""Estimator tests driven by exhaustive enumeration.

The expectation and covariance targets come from brute-force enumeration of
every assignment (the populations are small enough that the randomization
distribution is computed exactly), so the closed-form expressions are checked
against an independent oracle rather than against themselves.
"""

import numpy as np
import pytest

from finpop import designs, estimators, popstats
from finpop.errors import SingularMatrixError, ValidationError

Z_975 = 1.9599639845400542355  # mpmath, dps=40

# N=5, two arms, two outcome coordinates per arm
_TABLE_5 = np.array(
    [
        [[1.0, 0.5], [0.0, 1.0]],
        [[3.0, 1.0], [1.0, 0.0]],
        [[2.0, 2.5], [5.0, 2.0]],
        [[4.0, 0.0], [2.0, 4.0]],
        [[0.0, 1.5], [2.0, 1.0]],
    ]
)
_SIZES_5 = (2, 3)
# per-coordinate difference of arm means: K = 2 rows
_CONTRAST_5 = np.stack([np.eye(2), -np.eye(2)])


def _enumerated_estimates(table, sizes, contrast):
    """tau_hat over every assignment, one row per assignment."""
    table = popstats.as_table(table)
    rows = []
    for lab in designs.enumerate_partitions(sizes):
        lab = np.asarray(lab)
        observed = table[np.arange(table.shape[0]), lab - 1]
        rows.append(estimators.tau_hat(lab, observed, contrast))
    return np.array(rows)


def _enumerated_cov_estimates(table, sizes, contrast):
    """cov_estimator over every assignment."""
    table = popstats.as_table(table)
    rows = []
    for lab in designs.enumerate_partitions(sizes):
        lab = np.asarray(lab)
        observed = table[np.arange(table.shape[0]), lab - 1]
        rows.append(estimators.cov_estimator(lab, observed, contrast))
    return np.array(rows)


# =========================================================================
# Point estimator: unbiasedness and exact covariance
# =========================================================================


def test_tau_hat_hand_values():
    labels = np.array([1, 1, 2, 2])
    y = np.array([1.0, 3.0, 0.0, 2.0])
    assert estimators.tau_hat(labels, y, [1.0, -1.0])[0] == pytest.approx(1.0)
    assert estimators.tau_true([[1.0, 0.0], [3.0, 2.0]], [1.0, -1.0])[0] == pytest.approx(
        1.0
    )


def test_tau_hat_unbiased_by_enumeration():
    draws = _enumerated_estimates(_TABLE_5, _SIZES_5, _CONTRAST_5)
    target = estimators.tau_true(_TABLE_5, _CONTRAST_5)
    assert draws.mean(axis=0) == pytest.approx(target, abs=1e-12)


def test_exact_covariance_matches_enumeration():
    draws = _enumerated_estimates(_TABLE_5, _SIZES_5, _CONTRAST_5)
    dev = draws - draws.mean(axis=0)
    empirical = dev.T @ dev / dev.shape[0]
    formula = estimators.neyman_cov_true(_TABLE_5, _CONTRAST_5, _SIZES_5)
    assert formula == pytest.approx(empirical, abs=1e-12)


def test_two_assignment_instance_has_variance_four():
    # table [[1,0],[3,2]], sizes (1,1): estimates {-1, 3}, variance 4
    table = [[1.0, 0.0], [3.0, 2.0]]
    cov = estimators.neyman_cov_true(table, [1.0, -1.0], (1, 1))
    assert cov[0, 0] == pytest.approx(4.0, abs=1e-14)
    draws = _enumerated_estimates(table, (1, 1), [1.0, -1.0])
    assert sorted(draws[:, 0].tolist()) == [-1.0, 3.0]


def test_tau_hat_rejects_label_gaps():
    with pytest.raises(ValidationError):
        estimators.tau_hat(np.array([1, 1, 1, 1]), np.zeros(4), [1.0, -1.0])


# =========================================================================
# Covariance estimator and its exact upward bias
# =========================================================================


def test_cov_estimator_bias_is_s2_tau_over_n():
    draws = _enumerated_cov_estimates(_TABLE_5, _SIZES_5, _CONTRAST_5)
    expected_vhat = draws.mean(axis=0)
    truth = estimators.neyman_cov_true(_TABLE_5, _CONTRAST_5, _SIZES_5)
    structure = popstats.pot_cov_structure(_TABLE_5, _CONTRAST_5)
    n = _TABLE_5.shape[0]
    assert expected_vhat - truth == pytest.approx(structure.s2_tau / n, abs=1e-12)


def test_cov_estimator_rejects_singleton_arm():
    labels = np.array([1, 2, 2, 2])
    with pytest.raises(ValidationError, match="fewer than 2"):
        estimators.cov_estimator(labels, np.arange(4.0), [1.0, -1.0])


# =========================================================================
# Intervals and regions
# =========================================================================


def test_neyman_ci_frozen_endpoints():
    # tau_hat = 1, V_hat = s2_1/2 + s2_0/2 = 2, halfwidth = z * sqrt(2)
    labels = np.array([1, 1, 2, 2])
    y = np.array([1.0, 3.0, 0.0, 2.0])
    lo, hi = estimators.neyman_ci(labels, y, 0.05)
    half = Z_975 * np.sqrt(2.0)
    assert lo == pytest.approx(1.0 - half, abs=1e-12)
    assert hi == pytest.approx(1.0 + half, abs=1e-12)


def test_wald_interval_equals_neyman_ci():
    # chi2_quantile(1, 1 - alpha) is the square of the normal quantile
    rng = np.random.default_rng(2)
    labels = np.array([1] * 5 + [2] * 6)
    y = rng.normal(size=11)
    report = estimators.EstimateReport(
        point=estimators.tau_hat(labels, y, [1.0, -1.0]),
        cov=estimators.cov_estimator(labels, y, [1.0, -1.0]),
        sizes=(5, 6),
        method="difference_in_means",
    )
    for alpha in (0.05, 0.10, 0.32):
        region = estimators.wald_region(report, alpha)
        assert region.interval() == pytest.approx(
            estimators.neyman_ci(labels, y, alpha), abs=1e-12
        )


def test_wald_region_membership():
    report = estimators.EstimateReport(
        point=np.array([1.0, -1.0]),
        cov=np.eye(2),
        sizes=(3, 3),
        method="test",
    )
    region = estimators.wald_region(report, 0.05)
    assert region.contains([1.0, -1.0])
    assert region.contains([1.1, -0.9])
    assert not region.contains([10.0, 10.0])


def test_wald_region_rejects_singular_cov():
    # duplicated contrast rows make the estimated covariance rank deficient
    rng = np.random.default_rng(3)
    labels = np.array([1, 1, 1, 2, 2, 2])
    y = rng.normal(size=6)
    cov = estimators.cov_estimator(labels, y, [[1.0, 1.0], [-1.0, -1.0]])
    report = estimators.EstimateReport(
        point=np.zeros(2), cov=cov, sizes=(3, 3), method="test"
    )
    with pytest.raises(SingularMatrixError):
        estimators.wald_region(report, 0.05)


def test_neyman_ci_requires_two_per_arm():
    with pytest.raises(ValidationError):
        estimators.neyman_ci(np.array([1, 2, 2]), np.arange(3.0), 0.05)


# =========================================================================
# Regression adjustment
# =========================================================================

_REG_TABLE = np.array(
    [[1.0, 0.0], [4.0, 2.0], [2.0, 3.0], [8.0, 5.0], [9.0, 4.0], [12.0, 10.0]]
)
_REG_X = np.array([-5.0, -3.0, -1.0, 1.0, 3.0, 5.0])[:, None]
_REG_SIZES = (3, 3)


def _enumerated_adjusted(table, x, sizes, beta1, beta0):
    estimates = []
    for lab in designs.enumerate_partitions(sizes):
        lab = np.asarray(lab)
        observed = table[np.arange(table.shape[0]), lab - 1]
        report = estimators.regression_adjusted(lab, observed, x, beta1, beta0)
        estimates.append(report.point[0])
    return np.array(estimates)


def test_regression_adjusted_zero_beta_is_difference_in_means():
    labels = np.array([1, 1, 1, 2, 2, 2])
    y = _REG_TABLE[np.arange(6), labels - 1]
    report = estimators.regression_adjusted(labels, y, _REG_X, [0.0], [0.0])
    assert report.point[0] == pytest.approx(
        estimators.tau_hat(labels, y, [1.0, -1.0])[0], abs=1e-14
    )


def test_regression_adjusted_unbiased_for_any_fixed_coefficients():
    target = estimators.tau_true(_REG_TABLE, [1.0, -1.0])[0]
    for beta1, beta0 in (([0.0], [0.0]), ([1.3], [-0.4]), ([0.8], [0.8])):
        draws = _enumerated_adjusted(_REG_TABLE, _REG_X, _REG_SIZES, beta1, beta0)
        assert draws.mean() == pytest.approx(target, abs=1e-12)


def test_population_ls_coefficients_minimize_enumerated_variance():
    beta1_opt = estimators.finite_pop_ls(_REG_TABLE[:, 0], _REG_X)
    beta0_opt = estimators.finite_pop_ls(_REG_TABLE[:, 1], _REG_X)
    best = _enumerated_adjusted(_REG_TABLE, _REG_X, _REG_SIZES, beta1_opt, beta0_opt)
    best_var = best.var()
    rng = np.random.default_rng(11)
    for _ in range(25):
        b1 = beta1_opt + rng.normal(scale=0.7, size=1)
        b0 = beta0_opt + rng.normal(scale=0.7, size=1)
        draws = _enumerated_adjusted(_REG_TABLE, _REG_X, _REG_SIZES, b1, b0)
        assert draws.var() >= best_var - 1e-12


def test_fit_ls_coefs_matches_lstsq_oracle():
    rng = np.random.default_rng(8)
    n = 40
    labels = designs.draw_partition((22, 18), rng)
    x = rng.normal(size=(n, 2))
    y = 1.0 + x @ np.array([2.0, -1.0]) + rng.normal(scale=0.3, size=n)
    beta1, beta0 = estimators.fit_ls_coefs(labels, y, x)
    for q, beta in ((1, beta1), (2, beta0)):
        mask = labels == q
        design = np.column_stack([np.ones(mask.sum()), x[mask]])
        coef, *_ = np.linalg.lstsq(design, y[mask], rcond=None)
        assert beta == pytest.approx(coef[1:], abs=1e-10)


def test_fit_ls_coefs_needs_enough_observations():
    labels = np.array([1, 1, 2, 2, 2])
    x = np.random.default_rng(0).normal(size=(5, 2))
    with pytest.raises(ValidationError, match="K \\+ 1"):
        estimators.fit_ls_coefs(labels, np.arange(5.0), x)


def test_regression_adjusted_requires_centered_covariates():
    labels = np.array([1, 1, 2, 2])
    x = np.array([[1.0], [2.0], [3.0], [4.0]])
    with pytest.raises(ValidationError, match="centered"):
        estimators.regression_adjusted(labels, np.arange(4.0), x, [0.0], [0.0])


# =========================================================================
# Cluster-randomized adjustment
# =========================================================================


def test_cluster_adjusted_unbiased_by_enumeration():
    rng = np.random.default_rng(21)
    m, n_units = 4, 11
    totals = rng.normal(size=(m, 2)) * 3.0  # potential totals per arm
    x_totals = rng.normal(size=(m, 1))
    x_totals = x_totals - x_totals.mean(axis=0)
    gamma1, gamma0 = np.array([0.6]), np.array([-0.2])
    target = (m / n_units) * (totals[:, 0].mean() - totals[:, 1].mean())
    estimates = []
    for lab in designs.enumerate_partitions((2, 2)):
        lab = np.asarray(lab)
        observed = totals[np.arange(m), lab - 1]
        report = estimators.cluster_adjusted(
            lab, observed, x_totals, n_units, gamma1, gamma0
        )
        estimates.append(report.point[0])
    assert np.mean(estimates) == pytest.approx(target, abs=1e-12)


def test_cluster_adjusted_without_covariates():
    labels = np.array([1, 2, 1, 2])
    totals = np.array([4.0, 1.0, 6.0, 3.0])
    report = estimators.cluster_adjusted(labels, totals, None, 10)
    assert report.point[0] == pytest.approx((4.0 / 10.0) * (5.0 - 2.0))


def test_cluster_adjusted_validates_unit_count():
    with pytest.raises(ValidationError):
        estimators.cluster_adjusted(np.array([1, 2, 1, 2]), np.ones(4), None, 3)


# =========================================================================
# Factorial effects
# =========================================================================


def test_factorial_effects_hand_example():
    spec = designs.factorial_contrasts(2)
    labels = np.array([1, 1, 2, 2, 3, 3, 4, 4])
    y = np.array([5.0, 6.0, 4.0, 4.0, 2.0, 3.0, 1.0, 0.5])
    effects = estimators.factorial_effects(labels, y, spec)
    means = np.array([5.5, 4.0, 2.5, 0.75])
    assert effects == pytest.approx(0.5 * (spec.generators.T @ means))
    assert effects[0] == pytest.approx(3.125)
    assert effects[1] == pytest.approx(1.625)
    assert effects[2] == pytest.approx(-0.125)


def test_factorial_null_moments_unbalanced_sizes():
    # sizes (1,2,2,1): the two main effects correlate at exactly 1/3 under
    # the sharp null; each main effect is uncorrelated with the interaction
    spec = designs.factorial_contrasts(2)
    variances, correlations = estimators.factorial_null_moments(
        5.0 / 3.0, (1, 2, 2, 1), spec
    )
    assert np.all(variances == variances[0])
    assert correlations[0, 1] == pytest.approx(1.0 / 3.0, abs=1e-15)
    assert correlations[0, 2] == pytest.approx(0.0, abs=1e-15)
    assert correlations[1, 2] == pytest.approx(0.0, abs=1e-15)
    assert np.diag(correlations) == pytest.approx(np.ones(3))


def test_factorial_null_moments_match_enumeration_balanced():
    # sharp null: the same outcome vector is seen whatever the assignment
    spec = designs.factorial_contrasts(2)
    y = np.array([1.0, 2.0, 3.0, 4.0])
    v_n = popstats.pop_moments(y).variance
    variances, correlations = estimators.factorial_null_moments(v_n, (1, 1, 1, 1), spec)
    draws = np.array(
        [
            estimators.factorial_effects(np.asarray(lab), y, spec)
            for lab in designs.enumerate_partitions((1, 1, 1, 1))
        ]
    )
    dev = draws - draws.mean(axis=0)
    empirical = dev.T @ dev / draws.shape[0]
    assert np.diag(empirical) == pytest.approx(variances, abs=1e-12)
    d = np.sqrt(np.diag(empirical))
    assert empirical / np.outer(d, d) == pytest.approx(correlations, abs=1e-12)


def test_factorial_effects_rejects_wrong_arm_count():
    spec = designs.factorial_contrasts(2)
    with pytest.raises(ValidationError):
        estimators.factorial_effects(np.array([1, 2, 3]), np.arange(3.0), spec)
