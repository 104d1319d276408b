"""Randomization-test tests.

Frozen constants were computed by hand (rank algebra on N = 4) or with mpmath
at 40 decimal digits (normal and chi-square tails). Exact p-values are checked
against full enumeration; Monte Carlo p-values against the exact ones at the
resolution the replication count supports.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from finpop import designs, randtests
from finpop.errors import DegenerateInputError, TieError, ValidationError

# mpmath, dps=40
CHI2_SF_24_1 = 0.12133525035848214653
SQRT_24 = 1.5491933384829667541
P_MAX_RANK = 0.060667625179241073265  # 1 - Phi(sqrt(2.4))
HYPER_NORMAL_P = 0.38647623077123266493  # 2(1 - Phi(0.5 / sqrt(1/3)))

# canonical N=4 instance: arm 1 holds ranks {3,4}, arm 2 holds {1,2}
_LAB4 = np.array([2, 2, 1, 1])
_Y4 = np.array([1.0, 2.0, 3.0, 4.0])


# =========================================================================
# Rank transforms
# =========================================================================


def test_rank_transform_strict_orders_values():
    assert randtests.rank_transform([3.0, 1.0, 2.0]).tolist() == [3.0, 1.0, 2.0]


def test_rank_transform_strict_rejects_ties():
    with pytest.raises(TieError):
        randtests.rank_transform([1.0, 2.0, 2.0, 3.0])


def test_rank_transform_midrank_averages_ties():
    ranks = randtests.rank_transform([1.0, 2.0, 2.0, 3.0], "midrank")
    assert ranks.tolist() == [1.0, 2.5, 2.5, 4.0]


def test_rank_transform_rejects_unknown_policy():
    with pytest.raises(ValidationError):
        randtests.rank_transform([1.0, 2.0], "dense")


# =========================================================================
# Two-arm statistics
# =========================================================================


def test_diff_and_wilcoxon_stats_hand_values():
    assert randtests.diff_in_means_stat(_LAB4, _Y4) == pytest.approx(2.0)
    # ranks equal values here, so the rank difference matches
    assert randtests.wilcoxon_stat(_LAB4, _Y4) == pytest.approx(2.0)


def test_standardized_rank_means_hand_values():
    tilde = randtests.standardized_rank_means(_LAB4, _Y4)
    # sqrt(12 * 2 / (5 * 2)) * (Rbar_q - 2.5) = sqrt(2.4) * (+/-1)
    assert tilde == pytest.approx([SQRT_24, -SQRT_24], abs=1e-12)


def test_standardized_rank_means_rejects_non_permutation():
    with pytest.raises(TieError):
        randtests.standardized_rank_means(_LAB4, np.array([1.0, 2.0, 2.0, 4.0]))


def test_standardized_rank_means_null_moments_by_enumeration():
    sizes = (2, 3)
    ranks = np.arange(1.0, 6.0)
    draws = np.array(
        [
            randtests.standardized_rank_means(np.asarray(lab), ranks)
            for lab in designs.enumerate_partitions(sizes)
        ]
    )
    assert draws.mean(axis=0) == pytest.approx(np.zeros(2), abs=1e-12)
    emp_cov = draws.T @ draws / draws.shape[0]
    assert emp_cov == pytest.approx(randtests.rank_null_cov(sizes), abs=1e-12)


def test_rank_null_cov_closed_form():
    cov = randtests.rank_null_cov((2, 3, 5))
    n = 10.0
    for q, n_q in enumerate((2.0, 3.0, 5.0)):
        assert cov[q, q] == pytest.approx(1.0)
        for r, n_r in enumerate((2.0, 3.0, 5.0)):
            if q != r:
                expected = -np.sqrt(n_q * n_r / ((n - n_q) * (n - n_r)))
                assert cov[q, r] == pytest.approx(expected, abs=1e-15)


# =========================================================================
# Rank analysis of variance
# =========================================================================


def test_kruskal_wallis_canonical_value():
    result = randtests.kruskal_wallis(_LAB4, _Y4)
    assert result.statistic == pytest.approx(2.4, abs=1e-12)
    assert result.p_value == pytest.approx(CHI2_SF_24_1, abs=1e-12)
    assert result.method == "chi2_approx"


def test_kruskal_wallis_dual_forms_agree_on_random_instances():
    rng = np.random.default_rng(15)
    for _ in range(50):
        q_arms = int(rng.integers(2, 5))
        sizes = rng.integers(1, 5, size=q_arms)
        n = int(sizes.sum())
        if n < q_arms + 1:
            continue
        labels = designs.draw_partition(sizes.tolist(), rng)
        y = rng.permutation(np.arange(1.0, n + 1.0))
        result = randtests.kruskal_wallis(labels, y)  # internal check active
        ranks = randtests.rank_transform(y)
        tilde = randtests.standardized_rank_means(labels, ranks)
        counts = np.array([np.sum(labels == q) for q in range(1, q_arms + 1)])
        h_std = float(((n - counts) / n) @ (tilde**2))
        assert result.statistic == pytest.approx(h_std, abs=1e-10)


def test_kruskal_wallis_constant_outcome_is_degenerate():
    result = randtests.kruskal_wallis(
        np.array([1, 1, 2, 2]), np.ones(4), tie_policy="midrank"
    )
    assert result.statistic == 0.0
    assert result.p_value == 1.0
    assert "degenerate" in result.method


def test_kruskal_wallis_tags_tie_adjustment():
    result = randtests.kruskal_wallis(
        np.array([1, 1, 2, 2]), np.array([1.0, 1.0, 2.0, 3.0]), tie_policy="midrank"
    )
    assert result.method == "chi2_approx,ties_adjusted"


def test_kruskal_wallis_chi2_close_to_exact_enumeration():
    # moderate N: the chi-square approximation should land near the exact
    # randomization p-value of the same statistic
    rng = np.random.default_rng(4)
    labels = designs.draw_partition((3, 3, 3), rng)
    y = rng.permutation(np.arange(1.0, 10.0))
    approx = randtests.kruskal_wallis(labels, y)
    exact = randtests.exact_randomization_pvalue(
        lambda lab, yy: randtests.kruskal_wallis(lab, yy).statistic,
        labels,
        y,
        alternative="greater",
    )
    assert abs(approx.p_value - exact.p_value) < 0.08


# =========================================================================
# Joint max-of-two-statistics rule
# =========================================================================


def test_joint_test_rank_mode_perfectly_correlated():
    # y already equals its ranks, so the two statistics coincide: rho = 1,
    # the standardized value is sqrt(2.4), and p = 1 - Phi(sqrt(2.4))
    result = randtests.joint_test(_LAB4, _Y4, alpha=0.05)
    assert result.correlation == pytest.approx(1.0, abs=1e-12)
    assert result.standardized[0] == pytest.approx(SQRT_24, abs=1e-12)
    assert result.standardized[1] == pytest.approx(SQRT_24, abs=1e-12)
    assert result.p_value == pytest.approx(P_MAX_RANK, abs=1e-9)
    assert not result.reject  # critical value is Phi^-1(0.95) = 1.6449 > 1.5492


def test_joint_test_rejects_at_looser_level():
    result = randtests.joint_test(_LAB4, _Y4, alpha=0.10)
    assert result.reject  # Phi^-1(0.90) = 1.2816 < sqrt(2.4)


def test_joint_test_two_outcome_antithetic_pair():
    # second outcome = -first: rho = -1, max(z, -z) = |z|, p is two-sided
    rng = np.random.default_rng(6)
    labels = np.array([1, 1, 1, 2, 2, 2])
    y1 = rng.normal(size=6)
    y = np.column_stack([y1, -y1])
    result = randtests.joint_test(labels, y, alpha=0.05, mode="two_outcome")
    assert result.correlation == pytest.approx(-1.0, abs=1e-12)
    z = abs(result.standardized[0])
    from finpop import distlib

    assert result.p_value == pytest.approx(
        2.0 * (1.0 - distlib.std_normal_cdf(z)), abs=1e-9
    )


def test_joint_test_correlation_matches_corrcoef():
    rng = np.random.default_rng(9)
    labels = np.array([1] * 5 + [2] * 5)
    y = rng.normal(size=(10, 2))
    result = randtests.joint_test(labels, y, mode="two_outcome")
    assert result.correlation == pytest.approx(
        np.corrcoef(y[:, 0], y[:, 1])[0, 1], abs=1e-12
    )


def test_joint_test_rejects_degenerate_and_bad_mode():
    labels = np.array([1, 1, 2, 2])
    with pytest.raises(DegenerateInputError):
        randtests.joint_test(labels, np.ones(4), tie_policy="midrank")
    with pytest.raises(ValidationError):
        randtests.joint_test(labels, np.arange(4.0), mode="bogus")


# =========================================================================
# Rank functionals and their normal reference
# =========================================================================


def test_extreme_rank_stats_hand_values():
    labels = np.array([1, 1, 2, 2, 3, 3])
    ranks = np.array([6.0, 5.0, 1.0, 2.0, 3.0, 4.0])
    largest, spread = randtests.extreme_rank_stats(labels, ranks)
    assert largest == pytest.approx(5.5)
    assert spread == pytest.approx(4.0)


def test_dose_rank_stat_hand_value():
    labels = np.array([1, 1, 2, 2])
    doses = np.array([0.0, 1.0])
    assert randtests.dose_rank_stat(labels, _Y4, doses) == pytest.approx(3.5)


def test_rank_stat_normal_pvalue_is_seeded_and_bounded():
    a = randtests.rank_stat_normal_pvalue((4, 4, 4), 10.5, "max", 4000, 13)
    b = randtests.rank_stat_normal_pvalue((4, 4, 4), 10.5, "max", 4000, 13)
    assert a.p_value == b.p_value
    assert a.method == "normal_approx(B=4000)"
    assert a.alternative == "greater"
    assert 0.0 < a.p_value <= 1.0
    sky_high = randtests.rank_stat_normal_pvalue((4, 4, 4), 1e9, "max", 999, 13)
    assert sky_high.p_value == pytest.approx(1.0 / 1000.0)


def test_rank_stat_normal_pvalue_tracks_enumeration():
    # max arm rank mean on (3,3,3): compare the normal reference with the
    # exact randomization tail. Arm rank sums are integers over 3 slots, so
    # the exact law is a lattice with step 1/3; evaluating the continuous
    # reference half a step below the observed value removes the bias that
    # P(lattice >= t) carries its atom at t while P(continuous >= t) does not.
    rng = np.random.default_rng(10)
    labels = designs.draw_partition((3, 3, 3), rng)
    y = rng.permutation(np.arange(1.0, 10.0))
    ranks = randtests.rank_transform(y)
    observed = randtests.extreme_rank_stats(labels, ranks)[0]
    exact = randtests.exact_randomization_pvalue(
        lambda lab, yy: randtests.extreme_rank_stats(lab, randtests.rank_transform(yy))[0],
        labels,
        y,
        alternative="greater",
    )
    approx = randtests.rank_stat_normal_pvalue(
        (3, 3, 3), observed - 1.0 / 6.0, "max", 40000, 5
    )
    assert abs(approx.p_value - exact.p_value) < 0.05


def test_rank_stat_normal_pvalue_validates_inputs():
    with pytest.raises(ValidationError):
        randtests.rank_stat_normal_pvalue((3, 3), 1.0, "max", 0, 1)
    with pytest.raises(ValidationError):
        randtests.rank_stat_normal_pvalue((3, 3), 1.0, "slope", 10, 1)
    with pytest.raises(ValidationError):
        randtests.rank_stat_normal_pvalue((3, 3), 1.0, "dose", 10, 1, doses=[1.0])


# =========================================================================
# Hypergeometric count test
# =========================================================================


def test_hypergeom_null_moments_hand_values():
    # N=4, n=2, two ones: mean 1, variance 1/3
    labels = np.array([1, 1, 2, 2])
    y = np.array([1, 0, 1, 0])
    result = randtests.hypergeom_test(labels, y)
    assert result.null_mean == pytest.approx(1.0)
    assert result.null_variance == pytest.approx(1.0 / 3.0, abs=1e-15)


def test_hypergeom_exact_tail_fractions():
    labels = np.array([1, 1, 2, 2])
    y_obs2 = np.array([1, 1, 0, 0])  # both ones in arm 1
    two_sided = randtests.hypergeom_test(labels, y_obs2)
    assert two_sided.p_value == pytest.approx(1.0 / 3.0, abs=1e-15)  # {0,2} of 6
    greater = randtests.hypergeom_test(labels, y_obs2, alternative="greater")
    assert greater.p_value == pytest.approx(1.0 / 6.0, abs=1e-15)
    centered = randtests.hypergeom_test(labels, np.array([1, 0, 1, 0]))
    assert centered.p_value == 1.0  # observed at the null mean


def test_hypergeom_normal_mode_continuity_correction():
    labels = np.array([1, 1, 2, 2])
    y = np.array([1, 1, 0, 0])
    result = randtests.hypergeom_test(labels, y, mode="normal")
    assert result.p_value == pytest.approx(HYPER_NORMAL_P, abs=1e-12)


def test_hypergeom_all_ones_is_degenerate():
    labels = np.array([1, 1, 2, 2])
    for mode in ("exact", "normal"):
        assert randtests.hypergeom_test(labels, np.ones(4), mode=mode).p_value == 1.0


def test_hypergeom_rejects_nonbinary_outcome():
    with pytest.raises(ValidationError):
        randtests.hypergeom_test(np.array([1, 2]), np.array([0.5, 1.0]))


# =========================================================================
# Exact and Monte Carlo engines
# =========================================================================


def test_exact_pvalue_hand_enumeration():
    # diff of means on (2,2) with y = (1,2,3,4): |diff| = 2 for 2 of the 6
    # assignments, diff >= 2 for exactly 1
    result = randtests.exact_randomization_pvalue(
        randtests.diff_in_means_stat, _LAB4, _Y4
    )
    assert result.p_value == pytest.approx(2.0 / 6.0, abs=1e-15)
    assert result.method == "exact(count=6)"
    greater = randtests.exact_randomization_pvalue(
        randtests.diff_in_means_stat, _LAB4, _Y4, alternative="greater"
    )
    assert greater.p_value == pytest.approx(1.0 / 6.0, abs=1e-15)


def test_exact_pvalue_includes_observed_assignment():
    # the observed assignment always counts itself, so p >= 1/#assignments
    rng = np.random.default_rng(14)
    for _ in range(5):
        labels = designs.draw_partition((3, 3), rng)
        y = rng.normal(size=6)
        result = randtests.exact_randomization_pvalue(
            randtests.diff_in_means_stat, labels, y
        )
        assert result.p_value >= 1.0 / 20.0 - 1e-15


def test_mc_pvalue_tracks_exact():
    rng = np.random.default_rng(16)
    labels = designs.draw_partition((4, 4), rng)
    y = rng.normal(size=8)
    exact = randtests.exact_randomization_pvalue(
        randtests.diff_in_means_stat, labels, y
    )
    mc = randtests.mc_randomization_pvalue(
        randtests.diff_in_means_stat, labels, y, 20000, 99
    )
    assert abs(mc.p_value - exact.p_value) < 0.015
    assert mc.method == "monte_carlo(B=20000, seed=99)"


def test_mc_pvalue_is_seeded_and_add_one():
    labels = np.array([1, 1, 1, 2, 2, 2])
    y = np.array([10.0, 11.0, 12.0, 0.0, 1.0, 2.0])
    a = randtests.mc_randomization_pvalue(
        randtests.diff_in_means_stat, labels, y, 500, 7, alternative="greater"
    )
    b = randtests.mc_randomization_pvalue(
        randtests.diff_in_means_stat, labels, y, 500, 7, alternative="greater"
    )
    assert a.p_value == b.p_value
    assert a.p_value >= 1.0 / 501.0  # the +1 convention keeps p positive


def test_mc_pvalue_super_uniform_under_sharp_null():
    # with B=99, P(p <= 0.05) must not exceed 0.05 (up to MC noise)
    rng = np.random.default_rng(20)
    y = rng.normal(size=12)
    hits = 0
    trials = 400
    for _ in range(trials):
        labels = designs.draw_partition((6, 6), rng)
        result = randtests.mc_randomization_pvalue(
            randtests.diff_in_means_stat, labels, y, 99, rng
        )
        hits += result.p_value <= 0.05
    assert hits / trials <= 0.05 + 0.03


@given(st.integers(min_value=0, max_value=10**6))
@settings(max_examples=15, deadline=None)
def test_exact_two_sided_pvalue_bounds(seed):
    rng = np.random.default_rng(seed)
    labels = designs.draw_partition((3, 2), rng)
    y = rng.normal(size=5)
    result = randtests.exact_randomization_pvalue(
        randtests.diff_in_means_stat, labels, y
    )
    assert 0.0 < result.p_value <= 1.0


def test_engines_reject_bad_arguments():
    with pytest.raises(ValidationError):
        randtests.mc_randomization_pvalue(
            randtests.diff_in_means_stat, _LAB4, _Y4, 0, 1
        )
    with pytest.raises(ValidationError):
        randtests.exact_randomization_pvalue(
            randtests.diff_in_means_stat, _LAB4, _Y4, alternative="sideways"
        )
