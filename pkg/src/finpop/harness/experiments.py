"""Verification campaigns.

Three campaign families:

* run_oracle_suite: exhaustive enumeration over all assignments of small
  bundled instances, checking the closed-form estimator moments, the
  variance-estimator bias, the membership-indicator covariances, the
  standardized-rank-mean covariance, and the regression-adjustment variance
  decomposition, each as a max-abs discrepancy.
* run_clt_experiment: Monte Carlo Kolmogorov-Smirnov ladders for the
  standardized sample mean against N(0,1) (kind 'clt') and for the squared
  covariate imbalance against chi-square (kind 'rerand'), with the finite-N
  condition diagnostic reported alongside every ladder step.
* run_coverage_experiment: empirical coverage of the two-arm normal interval
  and the chi-square Wald region over random assignments of a fixed table.

Randomness is drawn from generators derived as (seed, stream ints) per chunk
of at most 4096 replicates, so any chunk is reproducible in isolation and a
replicate-parallel run reduces to the same metric values as a serial one.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .. import designs, distlib, estimators, popstats, randtests
from ..errors import DegenerateInputError, ValidationError
from .reports import MetricResult, Report

__all__ = [
    "ExperimentConfig",
    "synthetic_population",
    "coverage_table",
    "run_oracle_suite",
    "run_clt_experiment",
    "run_coverage_experiment",
    "run_suite",
]

_CHUNK = 4096

# derive_rng stream tags
_STREAM_POP = 0
_STREAM_ASSIGN = 1

CLT_POPULATIONS = ("ranks", "lognormal", "two_point", "spike", "constant")
COVERAGE_TABLES = ("additive", "heterogeneous")
SUITES = ("oracle", "clt", "rerand", "coverage", "all")

_GAP_TOL = 1e-10
_INDICATOR_TOL = 1e-12


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings of one campaign; a Report is a pure function of this and of
    nothing else (timing aside).

    population names a synthetic generator for kind 'clt'/'rerand' and a
    table construction for kind 'coverage'. ns is the ladder of population
    sizes (a single entry is allowed). tol gates the final KS distance or the
    coverage band.
    """

    kind: str
    seed: int
    reps: int = 20000
    alpha: float = 0.05
    population: str = "ranks"
    ns: tuple[int, ...] = (16, 64, 256, 1024)
    n_covariates: int = 2
    accept_target: float = 0.2
    tol: float = 0.02
    cap: int | None = None

    def __post_init__(self):
        if self.kind not in ("oracle", "clt", "rerand", "coverage"):
            raise ValidationError(f"unknown experiment kind {self.kind!r}")
        if self.seed is None or isinstance(self.seed, bool):
            raise ValidationError("an integer seed is required")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "reps", int(self.reps))
        if self.reps < 1:
            raise ValidationError(f"replication count must be >= 1, got {self.reps}")
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError(f"alpha must be in (0, 1), got {self.alpha}")
        ns = tuple(int(n) for n in self.ns)
        if not ns or any(n < 4 for n in ns):
            raise ValidationError(f"population sizes must all be >= 4, got {list(ns)}")
        object.__setattr__(self, "ns", ns)
        if self.n_covariates < 1:
            raise ValidationError("need at least one covariate for imbalance")
        if not 0.0 < self.accept_target < 1.0:
            raise ValidationError(
                f"acceptance target must be in (0, 1), got {self.accept_target}"
            )
        if self.tol <= 0.0:
            raise ValidationError(f"tolerance must be positive, got {self.tol}")

    def echo(self) -> dict:
        out = {
            "kind": self.kind,
            "seed": self.seed,
            "reps": self.reps,
            "alpha": self.alpha,
            "tol": self.tol,
        }
        if self.kind in ("clt", "rerand", "coverage"):
            out["population"] = self.population
            out["ns"] = list(self.ns)
        if self.kind == "rerand":
            out["n_covariates"] = self.n_covariates
            out["accept_target"] = self.accept_target
        if self.kind == "oracle" and self.cap is not None:
            out["cap"] = self.cap
        return out


def _gap_metric(name: str, value: float, tol: float, checks: str) -> MetricResult:
    value = float(value)
    return MetricResult(name=name, value=value, tolerance=tol,
                        passed=value <= tol, checks=checks)


def _info_metric(name: str, value: float, checks: str) -> MetricResult:
    return MetricResult(name=name, value=float(value), tolerance=None,
                        passed=True, checks=checks)


# ---------------------------------------------------------------------------
# enumeration oracle

# N = 6 units, Q = 3 arms, sizes (2, 2, 2): 90 assignments.
_ORACLE_TABLE = np.array([
    [1.0, 2.0, 0.0],
    [3.0, 1.0, 4.0],
    [2.0, 5.0, 1.0],
    [4.0, 0.0, 3.0],
    [0.0, 2.0, 2.0],
    [5.0, 3.0, 1.0],
])
_ORACLE_SIZES = (2, 2, 2)
# (Q, K): arm 1 minus arm 3 and arm 2 minus arm 3
_ORACLE_CONTRAST = np.array([
    [1.0, 0.0],
    [0.0, 1.0],
    [-1.0, -1.0],
])

# two-arm instance whose enumerated estimator variance is exactly 4
_TWO_POINT_TABLE = np.array([[1.0, 0.0], [3.0, 2.0]])

# two-arm regression instance: centered covariate, sizes (3, 3), 20 assignments
_REG_X = np.array([-5.0, -3.0, -1.0, 1.0, 3.0, 5.0])
_REG_TABLE = np.array([
    [1.0, 0.0],
    [4.0, 2.0],
    [2.0, 3.0],
    [8.0, 5.0],
    [9.0, 4.0],
    [12.0, 10.0],
])


def _enumerated_estimates(table, sizes, contrast, cap, with_vhat: bool):
    """Stack tau_hat (and optionally the variance estimate) over every
    assignment of the design."""
    table = np.asarray(table, dtype=float)
    n = table.shape[0]
    idx = np.arange(n)
    taus, vhats = [], []
    for labels in designs.enumerate_partitions(sizes, cap):
        y = table[idx, labels - 1]
        taus.append(estimators.tau_hat(labels, y, contrast))
        if with_vhat:
            vhats.append(estimators.cov_estimator(labels, y, contrast))
    taus = np.stack(taus)
    vhats = np.stack(vhats) if with_vhat else None
    return taus, vhats


def _pop_cov(values: np.ndarray) -> np.ndarray:
    dev = values - values.mean(axis=0)
    return dev.T @ dev / values.shape[0]


def _moment_metrics(metrics, table, sizes, contrast, cap, prefix=""):
    n = np.asarray(table).shape[0]
    with_vhat = all(int(s) >= 2 for s in sizes)
    taus, vhats = _enumerated_estimates(table, sizes, contrast, cap, with_vhat)
    mean_gap = np.max(np.abs(taus.mean(axis=0) - estimators.tau_true(table, contrast)))
    truth_cov = estimators.neyman_cov_true(table, contrast, sizes)
    cov_gap = np.max(np.abs(_pop_cov(taus) - truth_cov))
    metrics.append(_gap_metric(
        prefix + "estimator_mean_gap", mean_gap, _GAP_TOL,
        "mean of the contrast estimate over all assignments vs the population contrast",
    ))
    metrics.append(_gap_metric(
        prefix + "estimator_cov_gap", cov_gap, _GAP_TOL,
        "covariance of the contrast estimate over all assignments vs the "
        "closed-form arm-variance combination",
    ))
    if with_vhat:
        s2_tau = popstats.pot_cov_structure(table, contrast).s2_tau
        bias_gap = np.max(np.abs(vhats.mean(axis=0) - truth_cov - s2_tau / n))
        metrics.append(_gap_metric(
            prefix + "vhat_bias_gap", bias_gap, _GAP_TOL,
            "mean of the variance estimator minus the true covariance vs the "
            "effect-heterogeneity term S2_tau / N",
        ))


def _indicator_metric(metrics, sizes, cap):
    sizes = tuple(int(s) for s in sizes)
    n = sum(sizes)
    q_arms = len(sizes)
    inds = np.stack([
        (labels[:, np.newaxis] == np.arange(1, q_arms + 1)).astype(float)
        for labels in designs.enumerate_partitions(sizes, cap)
    ])  # (count, N, Q)
    count = inds.shape[0]
    emp_mean = inds.mean(axis=0)
    flat = inds.reshape(count, n * q_arms)
    emp_cov = flat.T @ flat / count - np.outer(emp_mean.ravel(), emp_mean.ravel())
    gap = 0.0
    for i in range(n):
        for q in range(1, q_arms + 1):
            gap = max(gap, abs(emp_mean[i, q - 1] - sizes[q - 1] / n))
            for j in range(n):
                for r in range(1, q_arms + 1):
                    truth = designs.indicator_cov(sizes, i, j, q, r)
                    emp = emp_cov[i * q_arms + q - 1, j * q_arms + r - 1]
                    gap = max(gap, abs(emp - truth))
    metrics.append(_gap_metric(
        "indicator_cov_gap", gap, _INDICATOR_TOL,
        "membership-indicator means and covariances over all assignments vs "
        "the four-case closed forms",
    ))


def _rank_cov_metric(metrics, sizes, cap):
    sizes = tuple(int(s) for s in sizes)
    n = sum(sizes)
    ranks = np.arange(1.0, n + 1.0)  # sharp null: ranks are fixed over assignments
    stats = np.stack([
        randtests.standardized_rank_means(labels, ranks)
        for labels in designs.enumerate_partitions(sizes, cap)
    ])
    mean_gap = np.max(np.abs(stats.mean(axis=0)))
    cov_gap = np.max(np.abs(_pop_cov(stats) - randtests.rank_null_cov(sizes)))
    metrics.append(_gap_metric(
        "rank_mean_cov_gap", max(mean_gap, cov_gap), _GAP_TOL,
        "mean and covariance of the standardized rank means over all "
        "assignments vs zero and the unit-diagonal closed form",
    ))


def _regression_metric(metrics, cap):
    table, x = _REG_TABLE, _REG_X
    sizes = (3, 3)
    n = table.shape[0]
    idx = np.arange(n)
    beta_fixed = (np.zeros(1), np.zeros(1))
    beta_opt = (
        estimators.finite_pop_ls(table[:, 0], x),
        estimators.finite_pop_ls(table[:, 1], x),
    )
    fixed_vals, opt_vals = [], []
    for labels in designs.enumerate_partitions(sizes, cap):
        y = table[idx, labels - 1]
        fixed_vals.append(
            estimators.regression_adjusted(labels, y, x, *beta_fixed).point[0]
        )
        opt_vals.append(
            estimators.regression_adjusted(labels, y, x, *beta_opt).point[0]
        )
    fixed_vals = np.asarray(fixed_vals)
    opt_vals = np.asarray(opt_vals)
    var_gap = abs(
        (np.var(fixed_vals) - np.var(opt_vals)) - np.var(fixed_vals - opt_vals)
    )
    metrics.append(_gap_metric(
        "regression_decomposition_gap", var_gap, _GAP_TOL,
        "excess enumerated variance of an arbitrary-coefficient adjusted "
        "estimator over the least-squares one vs the variance of their "
        "difference (exact orthogonal decomposition)",
    ))
    mean_gap = abs(opt_vals.mean() - float(table[:, 0].mean() - table[:, 1].mean()))
    metrics.append(_gap_metric(
        "regression_unbiasedness_gap", mean_gap, _GAP_TOL,
        "mean of the adjusted estimator with fixed coefficients and centered "
        "covariates over all assignments vs the true effect",
    ))


def run_oracle_suite(config: ExperimentConfig) -> Report:
    """Exhaustive-enumeration checks on the bundled desk-scale instances."""
    if config.kind != "oracle":
        raise ValidationError(f"oracle suite got config kind {config.kind!r}")
    start = time.perf_counter()
    metrics: list[MetricResult] = []
    cap = config.cap

    _moment_metrics(metrics, _ORACLE_TABLE, _ORACLE_SIZES, _ORACLE_CONTRAST, cap)
    _indicator_metric(metrics, _ORACLE_SIZES, cap)
    _rank_cov_metric(metrics, _ORACLE_SIZES, cap)
    _regression_metric(metrics, cap)

    # sharp null: the heterogeneity term vanishes, so the variance estimator
    # is exactly unbiased
    sharp = np.stack([_ORACLE_TABLE[:, 0]] * 2, axis=1)
    taus, vhats = _enumerated_estimates(sharp, (3, 3), [1.0, -1.0], cap, True)
    truth = estimators.neyman_cov_true(sharp, [1.0, -1.0], (3, 3))
    sharp_gap = abs(float(vhats.mean(axis=0)[0, 0] - truth[0, 0]))
    metrics.append(_gap_metric(
        "sharp_null_bias", sharp_gap, _INDICATOR_TOL,
        "variance-estimator bias under equal potential-outcome columns; "
        "the heterogeneity term is exactly zero",
    ))

    # two-assignment design with enumerated estimator variance exactly 4
    taus, _ = _enumerated_estimates(_TWO_POINT_TABLE, (1, 1), [1.0, -1.0], cap, False)
    metrics.append(_gap_metric(
        "two_assignment_var_gap", abs(float(_pop_cov(taus)[0, 0]) - 4.0), _GAP_TOL,
        "enumerated variance of the two-arm estimator on the size-(1,1) "
        "instance vs its hand-computed value 4",
    ))

    return Report(experiment=config.echo(), metrics=tuple(metrics),
                  wall_clock_s=time.perf_counter() - start)


# ---------------------------------------------------------------------------
# Monte Carlo campaigns

def synthetic_population(name: str, n: int) -> np.ndarray:
    """Deterministic populations exercising the normality condition.

    ranks and lognormal satisfy it (the latter with a heavy tail), two_point
    is a lattice case, spike concentrates all variance in one unit so the
    condition fails, constant is degenerate.
    """
    n = int(n)
    if n < 2:
        raise ValidationError(f"population size must be >= 2, got {n}")
    if name == "ranks":
        return np.arange(1.0, n + 1.0)
    if name == "lognormal":
        grid = (np.arange(n) + 0.5) / n
        return np.exp(np.array([distlib.std_normal_quantile(p) for p in grid]))
    if name == "two_point":
        return np.repeat([0.0, 1.0], [n - n // 2, n // 2])
    if name == "spike":
        pop = np.zeros(n)
        pop[-1] = float(n)
        return pop
    if name == "constant":
        return np.ones(n)
    raise ValidationError(
        f"unknown population {name!r}; choose from {list(CLT_POPULATIONS)}"
    )


def _ks_distance(sample: np.ndarray, cdf) -> float:
    x = np.sort(np.asarray(sample, dtype=float))
    b = x.size
    f = np.array([cdf(v) for v in x])
    return float(np.max(np.maximum(f - np.arange(b) / b,
                                   np.arange(1, b + 1) / b - f)))


def _batched(reps: int, seed: int, *stream: int):
    """Yield (chunk_size, rng) pairs covering reps replicates."""
    done, chunk_idx = 0, 0
    while done < reps:
        m = min(_CHUNK, reps - done)
        yield m, designs.derive_rng(seed, *stream, chunk_idx)
        done += m
        chunk_idx += 1


def _srs_standardized(pop: np.ndarray, n: int, reps: int, seed: int,
                      n_index: int) -> np.ndarray:
    n_total = pop.size
    mean, var = popstats.srs_mean_var(pop, n)
    if var <= 0.0:
        raise DegenerateInputError("constant population: nothing to standardize")
    sd = math.sqrt(var)
    out = np.empty(reps)
    done = 0
    for m, rng in _batched(reps, seed, _STREAM_ASSIGN, n_index):
        labels = designs.draw_partition_batch((n, n_total - n), m, rng)
        sums = (labels == 1) @ pop
        out[done:done + m] = (sums / n - mean) / sd
        done += m
    return out


def _ladder_metrics(metrics, ks_values, tol):
    if len(ks_values) >= 2:
        drops = np.diff(ks_values)
        metrics.append(MetricResult(
            name="ks_min_drop",
            value=float(-np.max(drops)),
            tolerance=0.0,
            passed=bool(np.all(drops < 0.0)),
            checks="smallest decrease of the KS distance along the size ladder; "
                   "positive means strictly decreasing throughout",
        ))
    metrics.append(_gap_metric(
        "ks_final", ks_values[-1], tol,
        "KS distance at the largest population size",
    ))


def _run_clt_srs(config: ExperimentConfig, metrics: list) -> None:
    ks_values = []
    for n_index, n_total in enumerate(config.ns):
        pop = synthetic_population(config.population, n_total)
        n = n_total // 2
        condition = popstats.hajek_condition_stat(pop, n)
        stats = _srs_standardized(pop, n, config.reps, config.seed, n_index)
        ks = _ks_distance(stats, distlib.std_normal_cdf)
        ks_values.append(ks)
        metrics.append(_info_metric(
            f"ks_n{n_total}", ks,
            "KS distance of the standardized sample mean to the standard "
            "normal cdf",
        ))
        metrics.append(_info_metric(
            f"condition_n{n_total}", condition,
            "finite-N normality condition (max squared deviation over "
            "variance, scaled by the smaller group size)",
        ))
    _ladder_metrics(metrics, ks_values, config.tol)


def _rerand_covariates(n_total: int, k: int, seed: int, n_index: int) -> np.ndarray:
    rng = designs.derive_rng(seed, _STREAM_POP, n_index)
    x = rng.standard_normal((n_total, k))
    return x - x.mean(axis=0)


def _run_clt_rerand(config: ExperimentConfig, metrics: list) -> None:
    k = config.n_covariates
    threshold = distlib.chi2_quantile(k, config.accept_target)
    ks_values = []
    for n_index, n_total in enumerate(config.ns):
        x = _rerand_covariates(n_total, k, config.seed, n_index)
        n1 = n_total // 2
        n0 = n_total - n1
        s2_x = x.T @ x / (n_total - 1)
        root = designs.inv_sqrt_psd(n_total / (n1 * n0) * s2_x)
        q_stats = np.empty(config.reps)
        done = 0
        for m, rng in _batched(config.reps, config.seed, _STREAM_ASSIGN, n_index):
            labels = designs.draw_partition_batch((n1, n0), m, rng)
            mask = labels == 1
            tau_x = (mask @ x) / n1 - ((~mask) @ x) / n0
            delta = tau_x @ root.T
            q_stats[done:done + m] = np.einsum("ij,ij->i", delta, delta)
            done += m
        ks = _ks_distance(q_stats, lambda v: distlib.chi2_cdf(v, k))
        ks_values.append(ks)
        accept_rate = float(np.mean(q_stats <= threshold))
        metrics.append(_info_metric(
            f"ks_n{n_total}", ks,
            "KS distance of the squared standardized covariate imbalance to "
            f"the chi-square({k}) cdf",
        ))
        metrics.append(_info_metric(
            f"condition_n{n_total}",
            max(popstats.hajek_condition_stat(x[:, j], n1) for j in range(k)),
            "worst finite-N normality condition over covariate columns",
        ))
        metrics.append(_gap_metric(
            f"acceptance_rate_gap_n{n_total}",
            abs(accept_rate - config.accept_target), config.tol,
            "rejection-sampling acceptance rate at the chi-square quantile "
            f"threshold vs the {config.accept_target} tail target",
        ))
    _ladder_metrics(metrics, ks_values, config.tol)


def run_clt_experiment(config: ExperimentConfig) -> Report:
    """KS convergence ladder for kind 'clt' (standardized sample mean) or
    kind 'rerand' (squared covariate imbalance against chi-square)."""
    if config.kind not in ("clt", "rerand"):
        raise ValidationError(f"CLT experiment got config kind {config.kind!r}")
    start = time.perf_counter()
    metrics: list[MetricResult] = []
    if config.kind == "clt":
        _run_clt_srs(config, metrics)
    else:
        _run_clt_rerand(config, metrics)
    return Report(experiment=config.echo(), metrics=tuple(metrics),
                  wall_clock_s=time.perf_counter() - start)


# ---------------------------------------------------------------------------
# coverage

def coverage_table(kind: str, n: int) -> np.ndarray:
    """Fixed two-arm tables: 'additive' shifts a normal-quantile population by
    a constant (zero heterogeneity, so nominal coverage is attained exactly in
    the limit); 'heterogeneous' makes the effect strongly unit-dependent, so
    intervals are conservative."""
    n = int(n)
    if n < 4:
        raise ValidationError(f"table size must be >= 4, got {n}")
    base = np.array([distlib.std_normal_quantile((i + 0.5) / n) for i in range(n)])
    if kind == "additive":
        return np.stack([base + 1.0, base], axis=1)
    if kind == "heterogeneous":
        return np.stack([-0.5 * base, base], axis=1)
    raise ValidationError(
        f"unknown coverage table {kind!r}; choose from {list(COVERAGE_TABLES)}"
    )


def _coverage_counts(table, n1, reps, seed, n_index, alpha):
    n_total = table.shape[0]
    n0 = n_total - n1
    y1, y0 = table[:, 0], table[:, 1]
    tau = float(y1.mean() - y0.mean())
    z_half = distlib.std_normal_quantile(1.0 - alpha / 2.0)
    chi_q = distlib.chi2_quantile(1, 1.0 - alpha)
    neyman_hits = 0
    wald_hits = 0
    for m, rng in _batched(reps, seed, _STREAM_ASSIGN, n_index):
        labels = designs.draw_partition_batch((n1, n0), m, rng)
        mask = labels == 1
        s1 = mask @ y1
        s0 = (~mask) @ y0
        m1, m0 = s1 / n1, s0 / n0
        sq1 = mask @ (y1 * y1)
        sq0 = (~mask) @ (y0 * y0)
        var1 = (sq1 - n1 * m1 * m1) / (n1 - 1)
        var0 = (sq0 - n0 * m0 * m0) / (n0 - 1)
        tau_hat = m1 - m0
        v_hat = var1 / n1 + var0 / n0
        err = np.abs(tau_hat - tau)
        neyman_hits += int(np.sum(err <= z_half * np.sqrt(v_hat)))
        wald_hits += int(np.sum(err * err <= chi_q * v_hat))
    return neyman_hits / reps, wald_hits / reps, tau


def run_coverage_experiment(config: ExperimentConfig) -> Report:
    """Empirical coverage of the nominal 1 - alpha interval and Wald region.

    Under the additive table coverage must sit inside the +/- tol band around
    1 - alpha; under the heterogeneous table the interval is conservative, so
    coverage is gated from below at 1 - alpha.
    """
    if config.kind != "coverage":
        raise ValidationError(f"coverage experiment got config kind {config.kind!r}")
    start = time.perf_counter()
    metrics: list[MetricResult] = []
    nominal = 1.0 - config.alpha
    for n_index, n_total in enumerate(config.ns):
        table = coverage_table(config.population, n_total)
        neyman, wald, tau = _coverage_counts(
            table, n_total // 2, config.reps, config.seed, n_index, config.alpha
        )
        suffix = f"_n{n_total}" if len(config.ns) > 1 else ""
        s2_tau = float(popstats.pot_cov_structure(table, [1.0, -1.0]).s2_tau[0, 0])
        metrics.append(_info_metric(
            "true_tau" + suffix, tau, "population contrast of the fixed table"))
        metrics.append(_info_metric(
            "s2_tau" + suffix, s2_tau,
            "effect-heterogeneity variance of the fixed table"))
        for name, value in (("neyman_coverage", neyman), ("wald_coverage", wald)):
            if config.population == "additive":
                metrics.append(MetricResult(
                    name=name + suffix, value=value, tolerance=config.tol,
                    passed=abs(value - nominal) <= config.tol,
                    checks=f"fraction of intervals covering the true contrast; "
                           f"zero heterogeneity, so gated to {nominal} +/- {config.tol}",
                ))
            else:
                metrics.append(MetricResult(
                    name=name + suffix, value=value, tolerance=config.tol,
                    passed=value >= nominal - 1e-12,
                    checks="fraction of intervals covering the true contrast; "
                           f"heterogeneous effects, so gated from below at {nominal}",
                ))
    return Report(experiment=config.echo(), metrics=tuple(metrics),
                  wall_clock_s=time.perf_counter() - start)


# ---------------------------------------------------------------------------
# suite composition

def _suite_configs(suite, seed, reps, alpha, population, ns, cap):
    def cfg(kind, default_reps, default_ns, default_pop):
        return ExperimentConfig(
            kind=kind,
            seed=seed,
            reps=default_reps if reps is None else reps,
            alpha=alpha,
            population=default_pop if population is None else population,
            ns=default_ns if ns is None else tuple(ns),
            cap=cap,
        )

    if suite == "oracle":
        return [("oracle", cfg("oracle", 1, (16,), "ranks"))]
    if suite == "clt":
        return [("clt", cfg("clt", 20000, (16, 64, 256, 1024), "ranks"))]
    if suite == "rerand":
        return [("rerand", cfg("rerand", 20000, (256,), "ranks"))]
    if suite == "coverage":
        runs = []
        for pop in COVERAGE_TABLES if population is None else (population,):
            label = "coverage_" + pop
            runs.append((label, ExperimentConfig(
                kind="coverage", seed=seed,
                reps=10000 if reps is None else reps,
                alpha=alpha, population=pop,
                ns=(200,) if ns is None else tuple(ns),
                tol=0.01,
            )))
        return runs
    raise ValidationError(f"unknown suite {suite!r}; choose from {list(SUITES)}")


_RUNNERS = {
    "oracle": run_oracle_suite,
    "clt": run_clt_experiment,
    "rerand": run_clt_experiment,
    "coverage": run_coverage_experiment,
}


def run_suite(suite: str, seed: int, reps: int | None = None, alpha: float = 0.05,
              population: str | None = None, ns=None, cap: int | None = None) -> Report:
    """Run a named verification suite and merge its component reports."""
    start = time.perf_counter()
    if suite == "all":
        parts = []
        for name in ("oracle", "clt", "rerand", "coverage"):
            parts.extend(_suite_configs(name, seed, reps, alpha, population, ns, cap))
    else:
        parts = _suite_configs(suite, seed, reps, alpha, population, ns, cap)
    metrics: list[MetricResult] = []
    echoes = []
    for label, config in parts:
        report = _RUNNERS[config.kind](config)
        echoes.append({"name": label, **report.experiment})
        prefix = label + "." if len(parts) > 1 else ""
        for m in report.metrics:
            metrics.append(MetricResult(
                name=prefix + m.name, value=m.value, tolerance=m.tolerance,
                passed=m.passed, checks=m.checks,
            ))
    return Report(experiment={"suite": suite, "runs": echoes},
                  metrics=tuple(metrics),
                  wall_clock_s=time.perf_counter() - start)
