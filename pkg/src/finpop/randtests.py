"""Sharp-null randomization tests.

Under the sharp null every potential outcome is known, so the randomization
distribution of any statistic is known exactly: it can be enumerated, sampled
by Monte Carlo, or approximated by the normal/chi-square limits. This module
provides the statistics (difference in means, rank statistics, counts), the
three reference-distribution engines, and the joint-test rule based on the
maximum of two correlated standardized statistics.

Ranks default to the strict no-ties policy. Midranks are opt-in; with ties
present the rank-variance identities that the no-ties theory relies on (for
example the closed-form null variance N(N+1)/12) no longer hold verbatim, so
tie-adjusted results are tagged as such.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb

import numpy as np
from scipy.stats import rankdata

from . import distlib
from .designs import as_rng, draw_partition_batch, enumerate_partitions, multinomial_count
from .errors import (
    DegenerateInputError,
    InternalCheckError,
    TieError,
    ValidationError,
)
from .estimators import arm_sizes

__all__ = [
    "TestResult",
    "JointTestResult",
    "rank_transform",
    "diff_in_means_stat",
    "wilcoxon_stat",
    "standardized_rank_means",
    "rank_null_cov",
    "kruskal_wallis",
    "joint_test",
    "extreme_rank_stats",
    "dose_rank_stat",
    "rank_stat_normal_pvalue",
    "hypergeom_test",
    "mc_randomization_pvalue",
    "exact_randomization_pvalue",
]

_MC_CHUNK = 1024


@dataclass(frozen=True)
class TestResult:
    """Outcome of a single randomization test."""

    statistic: float
    p_value: float
    method: str
    alternative: str | None = None
    null_mean: float | None = None
    null_variance: float | None = None


@dataclass(frozen=True)
class JointTestResult:
    """Outcome of the max-of-two-statistics joint rule."""

    statistics: tuple[float, float]
    standardized: tuple[float, float]
    correlation: float
    critical_value: float
    alpha: float
    reject: bool
    p_value: float
    method: str


def rank_transform(y, policy: str = "strict") -> np.ndarray:
    """Ascending ranks of y. `strict` raises on ties; `midrank` averages the
    positions of tied values."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise ValidationError("rank transform expects a non-empty 1-d array")
    if policy not in ("strict", "midrank"):
        raise ValidationError(f"tie policy must be 'strict' or 'midrank', got {policy!r}")
    values, counts = np.unique(y, return_counts=True)
    if policy == "strict" and np.any(counts > 1):
        raise TieError(values[counts > 1].tolist())
    return rankdata(y, method="average")


def _two_arm_means(labels, y) -> tuple[float, float, int, int]:
    labels = np.asarray(labels)
    y = np.asarray(y, dtype=float)
    counts = arm_sizes(labels, 2)
    return (
        float(y[labels == 1].mean()),
        float(y[labels == 2].mean()),
        int(counts[0]),
        int(counts[1]),
    )


def diff_in_means_stat(labels, y) -> float:
    """Treated-minus-control mean difference (arm 1 minus arm 2)."""
    m1, m0, _, _ = _two_arm_means(labels, y)
    return m1 - m0


def wilcoxon_stat(labels, y, tie_policy: str = "strict") -> float:
    """Treated-minus-control difference of mean ranks."""
    return diff_in_means_stat(labels, rank_transform(y, tie_policy))


def standardized_rank_means(labels, ranks) -> np.ndarray:
    """Standardized arm rank means under the sharp null:
    sqrt(12 n_q / ((N + 1)(N - n_q))) (Rbar_q - (N + 1) / 2).

    Requires untied ranks (a permutation of 1..N); the vector has exact null
    mean zero and covariance rank_null_cov(sizes).
    """
    labels = np.asarray(labels)
    ranks = np.asarray(ranks, dtype=float)
    n = ranks.size
    if not np.array_equal(np.sort(ranks), np.arange(1, n + 1, dtype=float)):
        raise TieError(ranks.tolist())
    counts = arm_sizes(labels)
    q_arms = counts.size
    out = np.empty(q_arms)
    for q in range(1, q_arms + 1):
        n_q = counts[q - 1]
        r_bar = ranks[labels == q].mean()
        out[q - 1] = np.sqrt(12.0 * n_q / ((n + 1.0) * (n - n_q))) * (r_bar - (n + 1.0) / 2.0)
    return out


def rank_null_cov(sizes) -> np.ndarray:
    """Exact sharp-null covariance of the standardized rank means: unit
    diagonal, off-diagonal entries -sqrt(n_q n_r / ((N - n_q)(N - n_r)))."""
    sizes = np.asarray([int(s) for s in sizes], dtype=float)
    if sizes.ndim != 1 or sizes.size < 2 or np.any(sizes < 1):
        raise ValidationError("need at least two positive arm sizes")
    n = sizes.sum()
    ratio = np.sqrt(sizes / (n - sizes))
    cov = -np.outer(ratio, ratio)
    np.fill_diagonal(cov, 1.0)
    return cov


def kruskal_wallis(labels, y, tie_policy: str = "strict") -> TestResult:
    """Rank analysis-of-variance statistic over Q arms with its chi-square
    (Q - 1) upper-tail p-value.

    For untied ranks the statistic is computed by two algebraically equal
    forms, (N - 1) sum_q n_q (Rbar_q - Rbar)^2 / sum_i (R_i - Rbar)^2 and
    sum_q ((N - n_q)/N) Rtilde_q^2, and any disagreement beyond rounding is an
    internal error. With midranks and ties present only the first form is
    valid; the result is tagged ties_adjusted.
    """
    ranks = rank_transform(y, tie_policy)
    labels = np.asarray(labels)
    counts = arm_sizes(labels)
    q_arms = counts.size
    if q_arms < 2:
        raise ValidationError("the test needs at least two arms")
    n = ranks.size
    grand = (n + 1.0) / 2.0  # midranks preserve the total, so Rbar = (N+1)/2
    ss_total = float(np.sum((ranks - grand) ** 2))
    ties_present = np.unique(ranks).size < n
    if ss_total == 0.0:
        return TestResult(
            statistic=0.0,
            p_value=1.0,
            method="chi2_approx,degenerate",
            null_mean=float(q_arms - 1),
        )
    arm_means = np.array([ranks[labels == q].mean() for q in range(1, q_arms + 1)])
    h_anova = (n - 1.0) * float(counts @ (arm_means - grand) ** 2) / ss_total
    method = "chi2_approx"
    if not ties_present:
        tilde = standardized_rank_means(labels, ranks)
        h_std = float(((n - counts) / n) @ (tilde**2))
        if abs(h_anova - h_std) > 1e-10 * max(1.0, abs(h_anova)):
            raise InternalCheckError(
                f"rank statistic forms disagree: {h_anova!r} vs {h_std!r}"
            )
    else:
        method = "chi2_approx,ties_adjusted"
    return TestResult(
        statistic=h_anova,
        p_value=distlib.chi2_sf(h_anova, q_arms - 1),
        method=method,
        null_mean=float(q_arms - 1),
    )


def _pooled_sd(values: np.ndarray) -> float:
    dev = values - values.mean()
    return float(np.sqrt(dev @ dev / (values.size - 1)))


def joint_test(labels, y, alpha: float = 0.05, mode: str = "rank", tie_policy: str = "strict") -> JointTestResult:
    """Two-arm joint test that rejects when the larger of two standardized
    statistics exceeds the critical value c with
    P(max of a correlated standard-normal pair > c) = alpha.

    mode 'rank' pairs the difference in means of y with the difference in mean
    ranks (y is a length-N vector); mode 'two_outcome' pairs the differences
    in means of two outcome columns (y is an (N, 2) matrix). The correlation
    entering the critical value is the pooled finite-population correlation of
    the two unit-level series. Upper-tail rule; the p-value is
    P(max > observed max).
    """
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must be in (0, 1), got {alpha}")
    labels = np.asarray(labels)
    y = np.asarray(y, dtype=float)
    if mode == "rank":
        if y.ndim != 1:
            raise ValidationError("mode 'rank' expects a single outcome vector")
        first, second = y, rank_transform(y, tie_policy)
    elif mode == "two_outcome":
        if y.ndim != 2 or y.shape[1] != 2:
            raise ValidationError("mode 'two_outcome' expects an (N, 2) outcome matrix")
        first, second = y[:, 0], y[:, 1]
    else:
        raise ValidationError(f"mode must be 'rank' or 'two_outcome', got {mode!r}")
    counts = arm_sizes(labels, 2)
    n1, n0 = int(counts[0]), int(counts[1])
    n = n1 + n0
    s_first, s_second = _pooled_sd(first), _pooled_sd(second)
    if s_first == 0.0 or s_second == 0.0:
        raise DegenerateInputError("zero pooled variance: statistics cannot be standardized")
    dev1 = first - first.mean()
    dev2 = second - second.mean()
    rho = float(dev1 @ dev2 / (n - 1) / (s_first * s_second))
    rho = min(1.0, max(-1.0, rho))
    scale = np.sqrt(n1 * n0 / n)
    stats = (diff_in_means_stat(labels, first), diff_in_means_stat(labels, second))
    standardized = (scale * stats[0] / s_first, scale * stats[1] / s_second)
    critical = distlib.solve_gamma_c(rho, alpha)
    observed_max = max(standardized)
    p_value = 1.0 - distlib.bvn_lower_orthant(observed_max, rho)
    return JointTestResult(
        statistics=(float(stats[0]), float(stats[1])),
        standardized=(float(standardized[0]), float(standardized[1])),
        correlation=rho,
        critical_value=float(critical),
        alpha=alpha,
        reject=bool(observed_max > critical),
        p_value=float(min(1.0, max(0.0, p_value))),
        method="normal_approx",
    )


def extreme_rank_stats(labels, ranks) -> tuple[float, float]:
    """(largest arm rank mean, largest minus smallest arm rank mean)."""
    labels = np.asarray(labels)
    ranks = np.asarray(ranks, dtype=float)
    counts = arm_sizes(labels)
    means = np.array([ranks[labels == q].mean() for q in range(1, counts.size + 1)])
    return float(means.max()), float(means.max() - means.min())


def dose_rank_stat(labels, ranks, doses) -> float:
    """Dose-weighted sum of arm rank means, sum_q dose_q Rbar_q."""
    labels = np.asarray(labels)
    ranks = np.asarray(ranks, dtype=float)
    counts = arm_sizes(labels)
    doses = np.asarray(doses, dtype=float)
    if doses.shape != (counts.size,):
        raise ValidationError(f"need one dose per arm ({counts.size}), got shape {doses.shape}")
    means = np.array([ranks[labels == q].mean() for q in range(1, counts.size + 1)])
    return float(doses @ means)


def rank_stat_normal_pvalue(
    sizes, observed: float, kind: str, b: int, seed, doses=None
) -> TestResult:
    """Upper-tail p-value of a rank-mean functional under its limiting normal
    law: standardized rank means are simulated from N(0, V_R) with V_R the
    exact null covariance, mapped back to arm rank means, and the functional
    (max, range, or dose-weighted sum) is compared with the observed value.

    This standardizes each arm rank mean by its exact null mean and variance,
    which is one concrete reading of "properly standardized"; the simulated
    functional is the corresponding multivariate-normal functional.
    """
    if b < 1:
        raise ValidationError(f"replication count must be >= 1, got {b}")
    sizes_arr = np.asarray([int(s) for s in sizes], dtype=float)
    n = float(sizes_arr.sum())
    cov = rank_null_cov(sizes_arr)
    w, v = np.linalg.eigh(cov)
    root = v * np.sqrt(np.clip(w, 0.0, None))
    rng = as_rng(seed)
    tilde = rng.standard_normal((int(b), sizes_arr.size)) @ root.T
    sd = np.sqrt((n + 1.0) * (n - sizes_arr) / (12.0 * sizes_arr))
    means = (n + 1.0) / 2.0 + tilde * sd
    if kind == "max":
        sims = means.max(axis=1)
    elif kind == "range":
        sims = means.max(axis=1) - means.min(axis=1)
    elif kind == "dose":
        doses = np.asarray(doses, dtype=float)
        if doses.shape != (sizes_arr.size,):
            raise ValidationError("need one dose per arm")
        sims = means @ doses
    else:
        raise ValidationError(f"kind must be 'max', 'range', or 'dose', got {kind!r}")
    count = int(np.sum(sims >= observed))
    return TestResult(
        statistic=float(observed),
        p_value=(1 + count) / (b + 1),
        method=f"normal_approx(B={int(b)})",
        alternative="greater",
    )


def hypergeom_test(labels, y, mode: str = "exact", alternative: str = "two_sided") -> TestResult:
    """Count test for a binary outcome in a two-arm experiment.

    The statistic is the number of ones in arm 1. Under the sharp null it is
    hypergeometric with mean n N_1 / N and variance
    N_1 (N - N_1) n (N - n) / (N^2 (N - 1)). Mode 'exact' sums the
    hypergeometric law directly (tail ordering by |x - mean| when two-sided);
    mode 'normal' applies the normal approximation with a 0.5 continuity
    correction, which is used precisely because the statistic is
    lattice-valued.
    """
    labels = np.asarray(labels)
    y_arr = np.asarray(y)
    if not np.isin(y_arr, (0, 1)).all():
        raise ValidationError("outcome must be binary with values 0 and 1")
    y_arr = y_arr.astype(np.int64)
    counts = arm_sizes(labels, 2)
    n, n_total = int(counts[0]), int(labels.size)
    ones_total = int(y_arr.sum())
    observed = int(y_arr[labels == 1].sum())
    if alternative not in ("two_sided", "greater", "less"):
        raise ValidationError(f"unknown alternative {alternative!r}")
    mean_frac = Fraction(n * ones_total, n_total)
    null_mean = float(mean_frac)
    null_var = (
        ones_total * (n_total - ones_total) * n * (n_total - n)
        / (n_total**2 * (n_total - 1.0))
    )
    lo = max(0, n - (n_total - ones_total))
    hi = min(n, ones_total)
    if mode == "exact":
        total = comb(n_total, n)
        weight = 0
        for x in range(lo, hi + 1):
            if alternative == "greater":
                extreme = x >= observed
            elif alternative == "less":
                extreme = x <= observed
            else:
                extreme = abs(x - mean_frac) >= abs(observed - mean_frac)
            if extreme:
                weight += comb(ones_total, x) * comb(n_total - ones_total, n - x)
        p_value = float(Fraction(weight, total))
        method = "exact"
    elif mode == "normal":
        sd = float(np.sqrt(null_var))
        if sd == 0.0:
            p_value = 1.0
        elif alternative == "greater":
            p_value = 1.0 - distlib.std_normal_cdf((observed - null_mean - 0.5) / sd)
        elif alternative == "less":
            p_value = distlib.std_normal_cdf((observed - null_mean + 0.5) / sd)
        else:
            shifted = abs(observed - null_mean) - 0.5
            if shifted <= 0.0:
                p_value = 1.0
            else:
                p_value = min(1.0, 2.0 * (1.0 - distlib.std_normal_cdf(shifted / sd)))
        method = "normal_approx"
    else:
        raise ValidationError(f"mode must be 'exact' or 'normal', got {mode!r}")
    return TestResult(
        statistic=float(observed),
        p_value=p_value,
        method=method,
        alternative=alternative,
        null_mean=null_mean,
        null_variance=float(null_var),
    )


def _is_extreme(ref: np.ndarray, observed: float, alternative: str) -> np.ndarray:
    if alternative == "greater":
        return ref >= observed
    if alternative == "less":
        return ref <= observed
    if alternative == "two_sided":
        return np.abs(ref) >= abs(observed)
    raise ValidationError(f"unknown alternative {alternative!r}")


def mc_randomization_pvalue(
    stat_fn, labels, y, b: int, seed, alternative: str = "two_sided"
) -> TestResult:
    """Monte Carlo randomization p-value with the observed-included convention
    p = (1 + #{reference stats as or more extreme}) / (B + 1), which is valid
    (super-uniform) at any B.

    `stat_fn(labels, y)` must be a pure function. Two-sided ordering is by
    absolute value, appropriate for statistics centered at zero under the
    null; max-type statistics should use alternative='greater'.
    """
    if b < 1:
        raise ValidationError(f"replication count must be >= 1, got {b}")
    labels = np.asarray(labels)
    y = np.asarray(y)
    sizes = arm_sizes(labels).tolist()
    observed = float(stat_fn(labels, y))
    rng = as_rng(seed)
    count = 0
    remaining = int(b)
    while remaining > 0:
        chunk = min(_MC_CHUNK, remaining)
        batch = draw_partition_batch(sizes, chunk, rng)
        ref = np.array([stat_fn(batch[i], y) for i in range(chunk)])
        count += int(np.sum(_is_extreme(ref, observed, alternative)))
        remaining -= chunk
    seed_tag = seed if isinstance(seed, (int, np.integer)) else "external"
    return TestResult(
        statistic=observed,
        p_value=(1 + count) / (b + 1),
        method=f"monte_carlo(B={int(b)}, seed={seed_tag})",
        alternative=alternative,
    )


def exact_randomization_pvalue(
    stat_fn, labels, y, alternative: str = "two_sided", cap: int | None = None
) -> TestResult:
    """Exact randomization p-value: the proportion of all assignments whose
    statistic is as or more extreme than the observed one (the observed
    assignment is part of the enumeration, so p > 0 always)."""
    if alternative not in ("two_sided", "greater", "less"):
        raise ValidationError(f"unknown alternative {alternative!r}")
    labels = np.asarray(labels)
    y = np.asarray(y)
    sizes = arm_sizes(labels).tolist()
    observed = float(stat_fn(labels, y))
    count = 0
    total = multinomial_count(sizes)
    for assignment in enumerate_partitions(sizes, cap):
        ref = float(stat_fn(assignment, y))
        if alternative == "greater":
            count += ref >= observed
        elif alternative == "less":
            count += ref <= observed
        else:
            count += abs(ref) >= abs(observed)
    return TestResult(
        statistic=observed,
        p_value=count / total,
        method=f"exact(count={total})",
        alternative=alternative,
    )
