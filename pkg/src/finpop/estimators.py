"""Point estimators, exact repeated-sampling moments, variance estimators,
and confidence regions for completely randomized Q-arm experiments.

The estimand is a general contrast tau(A) = sum_q A_q Ybar(q) with one K x p
coefficient matrix per arm. Over the uniform random partition the plug-in
estimator is exactly unbiased with covariance
    sum_q A_q S2_q A_q' / n_q - S2_tau / N,
and the observable variance estimator overshoots by exactly S2_tau / N, the
effect-heterogeneity term that has no unbiased estimator. Those three facts
are what the enumeration oracle in the harness checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import distlib
from .designs import FactorialSpec
from .errors import SingularMatrixError, ValidationError
from .popstats import as_contrast, as_table, pot_cov_structure, unit_contrasts

__all__ = [
    "EstimateReport",
    "WaldRegion",
    "arm_sizes",
    "tau_true",
    "tau_hat",
    "neyman_cov_true",
    "cov_estimator",
    "wald_region",
    "neyman_ci",
    "regression_adjusted",
    "fit_ls_coefs",
    "finite_pop_ls",
    "cluster_adjusted",
    "factorial_effects",
    "factorial_null_moments",
]

_SINGULARITY_RTOL = 1e-10


@dataclass(frozen=True)
class EstimateReport:
    """A point estimate with its estimated covariance.

    point: length-K estimate; cov: K x K estimated covariance (symmetric PSD);
    sizes: arm sizes used; method: short tag describing the estimator.
    """

    point: np.ndarray
    cov: np.ndarray
    sizes: tuple[int, ...]
    method: str


@dataclass(frozen=True)
class WaldRegion:
    """Ellipsoidal confidence region {mu : (t - mu)' V^{-1} (t - mu) <= q}."""

    center: np.ndarray
    shape: np.ndarray
    alpha: float
    chi2_threshold: float

    def contains(self, mu) -> bool:
        d = np.atleast_1d(np.asarray(mu, dtype=float)) - self.center
        stat = float(d @ np.linalg.solve(self.shape, d))
        return stat <= self.chi2_threshold

    def interval(self) -> tuple[float, float]:
        """Endpoints for the scalar (K = 1) case."""
        if self.center.shape != (1,):
            raise ValidationError("interval endpoints exist only for scalar regions")
        half = float(np.sqrt(self.chi2_threshold * self.shape[0, 0]))
        c = float(self.center[0])
        return c - half, c + half


def _check_labels(labels, q_arms: int | None = None) -> tuple[np.ndarray, int]:
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size == 0:
        raise ValidationError("labels must be a non-empty 1-d vector of arm labels")
    if q_arms is None:
        q_arms = int(labels.max())
    if labels.min() < 1 or labels.max() > q_arms:
        raise ValidationError(f"arm labels must lie in 1..{q_arms}")
    return labels.astype(np.int64), q_arms


def arm_sizes(labels, q_arms: int | None = None) -> np.ndarray:
    """Counts per arm, length Q; every arm must be nonempty."""
    labels, q_arms = _check_labels(labels, q_arms)
    counts = np.bincount(labels, minlength=q_arms + 1)[1:]
    if np.any(counts == 0):
        empty = np.flatnonzero(counts == 0) + 1
        raise ValidationError(f"arms {empty.tolist()} have no observations")
    return counts


def _as_outcomes(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, np.newaxis]
    if y.ndim != 2 or y.shape[0] == 0:
        raise ValidationError("outcomes must have shape (N,) or (N, p)")
    if not np.all(np.isfinite(y)):
        raise ValidationError("outcomes contain non-finite values")
    return y


def _arm_means(labels: np.ndarray, y: np.ndarray, q_arms: int) -> np.ndarray:
    means = np.empty((q_arms, y.shape[1]))
    for q in range(1, q_arms + 1):
        means[q - 1] = y[labels == q].mean(axis=0)
    return means


def tau_true(table, contrast) -> np.ndarray:
    """Population contrast tau(A) = sum_q A_q Ybar(q)."""
    t = as_table(table)
    a = as_contrast(contrast, t.shape[1])
    return np.einsum("qkp,qp->k", a, t.mean(axis=0))


def tau_hat(labels, y, contrast) -> np.ndarray:
    """Plug-in contrast estimate from one realized assignment."""
    y = _as_outcomes(y)
    q_arms = np.asarray(contrast).shape[0]
    labels, _ = _check_labels(labels, q_arms)
    a = as_contrast(contrast, q_arms)
    if a.shape[2] != y.shape[1]:
        raise ValidationError(
            f"contrast outcome dimension {a.shape[2]} != data dimension {y.shape[1]}"
        )
    arm_sizes(labels, q_arms)  # rejects empty arms
    return np.einsum("qkp,qp->k", a, _arm_means(labels, y, q_arms))


def neyman_cov_true(table, contrast, sizes) -> np.ndarray:
    """Exact repeated-sampling covariance of the contrast estimator:
    sum_q A_q S2_q A_q' / n_q - S2_tau / N."""
    t = as_table(table)
    n, q_arms, _ = t.shape
    a = as_contrast(contrast, q_arms)
    sizes = [int(s) for s in sizes]
    if len(sizes) != q_arms or any(s < 1 for s in sizes):
        raise ValidationError(f"need {q_arms} positive arm sizes, got {sizes}")
    if sum(sizes) != n:
        raise ValidationError(f"arm sizes {sizes} must sum to N = {n}")
    structure = pot_cov_structure(t, a)
    cov = -structure.s2_tau / n
    for q in range(q_arms):
        cov = cov + a[q] @ structure.s2_within[q] @ a[q].T / sizes[q]
    return cov


def _arm_sample_cov(y_arm: np.ndarray) -> np.ndarray:
    dev = y_arm - y_arm.mean(axis=0)
    return dev.T @ dev / (y_arm.shape[0] - 1)


def cov_estimator(labels, y, contrast) -> np.ndarray:
    """Observable covariance estimator sum_q A_q s2_q A_q' / n_q, with
    arm-wise sample covariances (divisor n_q - 1).

    Its expectation exceeds the true covariance by exactly S2_tau / N, so
    intervals built from it are conservative.
    """
    y = _as_outcomes(y)
    q_arms = np.asarray(contrast).shape[0]
    labels, _ = _check_labels(labels, q_arms)
    a = as_contrast(contrast, q_arms)
    counts = arm_sizes(labels, q_arms)
    if np.any(counts < 2):
        small = np.flatnonzero(counts < 2) + 1
        raise ValidationError(
            f"arms {small.tolist()} have fewer than 2 observations; "
            "sample covariances are undefined"
        )
    k = a.shape[1]
    out = np.zeros((k, k))
    for q in range(1, q_arms + 1):
        s2 = _arm_sample_cov(y[labels == q])
        out += a[q - 1] @ s2 @ a[q - 1].T / counts[q - 1]
    return out


def wald_region(report: EstimateReport, alpha: float) -> WaldRegion:
    """Chi-square-calibrated confidence region around the point estimate."""
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must be in (0, 1), got {alpha}")
    cov = np.asarray(report.cov, dtype=float)
    k = cov.shape[0]
    w = np.linalg.eigvalsh(cov)
    if w[-1] <= 0.0 or w[0] < _SINGULARITY_RTOL * w[-1]:
        raise SingularMatrixError(
            f"estimated covariance is numerically singular (eigenvalue {w[0]:.6g} "
            f"vs max {w[-1]:.6g}); consider dropping redundant contrast rows"
        )
    return WaldRegion(
        center=np.asarray(report.point, dtype=float),
        shape=cov,
        alpha=alpha,
        chi2_threshold=distlib.chi2_quantile(k, 1.0 - alpha),
    )


def neyman_ci(labels, y, alpha: float) -> tuple[float, float]:
    """Two-arm scalar confidence interval
    tau_hat +/- Phi^{-1}(1 - alpha/2) (s2_1/n_1 + s2_0/n_0)^{1/2}."""
    y = _as_outcomes(y)
    if y.shape[1] != 1:
        raise ValidationError("this interval is defined for scalar outcomes")
    labels, q_arms = _check_labels(labels)
    if q_arms != 2:
        raise ValidationError("this interval is defined for two-arm data")
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must be in (0, 1), got {alpha}")
    counts = arm_sizes(labels, 2)
    if np.any(counts < 2):
        raise ValidationError("both arms need at least 2 observations")
    point = float(tau_hat(labels, y, [1.0, -1.0])[0])
    v = float(cov_estimator(labels, y, [1.0, -1.0])[0, 0])
    half = distlib.std_normal_quantile(1.0 - alpha / 2.0) * float(np.sqrt(v))
    return point - half, point + half


def _check_centered(x: np.ndarray, what: str) -> None:
    scale = max(1.0, float(np.max(np.abs(x))))
    if np.max(np.abs(x.mean(axis=0))) > 1e-8 * scale:
        raise ValidationError(f"{what} must be centered (column means zero)")


def _as_covariates(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, np.newaxis]
    if x.ndim != 2 or x.shape[0] != n:
        raise ValidationError(f"covariates must have shape ({n}, K)")
    if not np.all(np.isfinite(x)):
        raise ValidationError("covariates contain non-finite values")
    return x


def regression_adjusted(labels, y, x, beta1, beta0) -> EstimateReport:
    """Covariate-adjusted two-arm estimator
    (1/n_1) sum_treated (Y_i - beta1'X_i) - (1/n_0) sum_control (Y_i - beta0'X_i)
    with variance estimate s2_1(beta1)/n_1 + s2_0(beta0)/n_0 on the adjusted
    outcomes.

    The coefficients must not depend on the realized assignment; with fixed
    coefficients and centered covariates the estimator is exactly unbiased.
    Plugging in estimated coefficients keeps the same variance formula, which
    is justified asymptotically (not exactly) and tagged accordingly by
    callers that do so.
    """
    y = _as_outcomes(y)
    if y.shape[1] != 1:
        raise ValidationError("regression adjustment is defined for scalar outcomes")
    labels, q_arms = _check_labels(labels)
    if q_arms != 2:
        raise ValidationError("regression adjustment is defined for two-arm data")
    x = _as_covariates(x, y.shape[0])
    _check_centered(x, "covariates")
    beta1 = np.atleast_1d(np.asarray(beta1, dtype=float))
    beta0 = np.atleast_1d(np.asarray(beta0, dtype=float))
    if beta1.shape != (x.shape[1],) or beta0.shape != (x.shape[1],):
        raise ValidationError(f"coefficients must have length {x.shape[1]}")
    counts = arm_sizes(labels, 2)
    if np.any(counts < 2):
        raise ValidationError("both arms need at least 2 observations")
    adj1 = y[:, 0] - x @ beta1
    adj0 = y[:, 0] - x @ beta0
    treated = labels == 1
    control = labels == 2
    point = adj1[treated].mean() - adj0[control].mean()
    var = float(np.var(adj1[treated], ddof=1)) / counts[0] + float(
        np.var(adj0[control], ddof=1)
    ) / counts[1]
    return EstimateReport(
        point=np.array([point]),
        cov=np.array([[var]]),
        sizes=(int(counts[0]), int(counts[1])),
        method="regression_adjusted",
    )


def _ls_solve(s_xx: np.ndarray, s_xy: np.ndarray, what: str) -> np.ndarray:
    w = np.linalg.eigvalsh(s_xx)
    if w[-1] <= 0.0 or w[0] < _SINGULARITY_RTOL * w[-1]:
        cond = float("inf") if w[0] <= 0.0 else float(w[-1] / w[0])
        raise SingularMatrixError(
            f"{what} covariate covariance is singular (condition number {cond:.3g})"
        )
    return np.linalg.solve(s_xx, s_xy)


def fit_ls_coefs(labels, y, x) -> tuple[np.ndarray, np.ndarray]:
    """Arm-wise least-squares slopes of Y on X:
    beta_z = (arm sample cov of X)^{-1} (arm sample cov of X with Y)."""
    y = _as_outcomes(y)
    if y.shape[1] != 1:
        raise ValidationError("least-squares adjustment is defined for scalar outcomes")
    labels, q_arms = _check_labels(labels)
    if q_arms != 2:
        raise ValidationError("least-squares adjustment is defined for two-arm data")
    x = _as_covariates(x, y.shape[0])
    counts = arm_sizes(labels, 2)
    if np.any(counts < x.shape[1] + 1):
        raise ValidationError(
            f"each arm needs at least K + 1 = {x.shape[1] + 1} observations"
        )
    coefs = []
    for q in (1, 2):
        mask = labels == q
        dev_x = x[mask] - x[mask].mean(axis=0)
        dev_y = y[mask, 0] - y[mask, 0].mean()
        n_q = int(mask.sum())
        s_xx = dev_x.T @ dev_x / (n_q - 1)
        s_xy = dev_x.T @ dev_y / (n_q - 1)
        coefs.append(_ls_solve(s_xx, s_xy, f"arm {q}"))
    return coefs[0], coefs[1]


def finite_pop_ls(y_col, x) -> np.ndarray:
    """Population least-squares slope of one potential-outcome column on X:
    beta_z = (S2_X)^{-1} S_{X, Y(z)}, all divisors N - 1."""
    y_col = np.asarray(y_col, dtype=float)
    if y_col.ndim != 1 or y_col.size < 2:
        raise ValidationError("need a 1-d outcome column with N >= 2")
    x = _as_covariates(x, y_col.size)
    dev_x = x - x.mean(axis=0)
    dev_y = y_col - y_col.mean()
    n = y_col.size
    s_xx = dev_x.T @ dev_x / (n - 1)
    s_xy = dev_x.T @ dev_y / (n - 1)
    return _ls_solve(s_xx, s_xy, "population")


def cluster_adjusted(
    cluster_labels, y_totals, x_totals, n_units: int, gamma1=None, gamma0=None
) -> EstimateReport:
    """Cluster-randomized adjusted estimator on cluster totals:
    (M/N) [ (1/m_1) sum_treated (Ytot_j - gamma1'Xtot_j)
            - (1/m_0) sum_control (Ytot_j - gamma0'Xtot_j) ],
    with variance estimate (M/N)^2 (s2_1/m_1 + s2_0/m_0) on adjusted totals.

    Cluster totals of covariates must be centered; including cluster size as a
    covariate column is recommended but not required.
    """
    y_totals = np.asarray(y_totals, dtype=float)
    if y_totals.ndim != 1 or y_totals.size == 0:
        raise ValidationError("cluster totals must be a non-empty 1-d array")
    m_clusters = y_totals.size
    cluster_labels, q_arms = _check_labels(cluster_labels, 2)
    if cluster_labels.size != m_clusters:
        raise ValidationError("one label per cluster is required")
    n_units = int(n_units)
    if n_units < m_clusters:
        raise ValidationError(f"unit count {n_units} below cluster count {m_clusters}")
    if x_totals is None:
        x = np.zeros((m_clusters, 1))
        gamma1 = gamma1 if gamma1 is not None else np.zeros(1)
        gamma0 = gamma0 if gamma0 is not None else np.zeros(1)
    else:
        x = _as_covariates(x_totals, m_clusters)
        _check_centered(x, "cluster covariate totals")
        gamma1 = np.zeros(x.shape[1]) if gamma1 is None else np.atleast_1d(np.asarray(gamma1, float))
        gamma0 = np.zeros(x.shape[1]) if gamma0 is None else np.atleast_1d(np.asarray(gamma0, float))
    counts = arm_sizes(cluster_labels, 2)
    if np.any(counts < 2):
        raise ValidationError("both cluster arms need at least 2 clusters")
    adj1 = y_totals - x @ gamma1
    adj0 = y_totals - x @ gamma0
    treated = cluster_labels == 1
    control = cluster_labels == 2
    scale = m_clusters / n_units
    point = scale * (adj1[treated].mean() - adj0[control].mean())
    var = scale**2 * (
        float(np.var(adj1[treated], ddof=1)) / counts[0]
        + float(np.var(adj0[control], ddof=1)) / counts[1]
    )
    return EstimateReport(
        point=np.array([point]),
        cov=np.array([[var]]),
        sizes=(int(counts[0]), int(counts[1])),
        method="cluster_adjusted",
    )


def factorial_effects(labels, y, spec: FactorialSpec) -> np.ndarray:
    """All 2^K - 1 factorial effect estimates:
    tau_hat_k = 2^{-(K-1)} sum_q g_kq Ybar_hat(q)."""
    y = _as_outcomes(y)
    if y.shape[1] != 1:
        raise ValidationError("factorial effects are defined for scalar outcomes")
    labels, _ = _check_labels(labels, spec.q_arms)
    arm_sizes(labels, spec.q_arms)
    means = _arm_means(labels, y, spec.q_arms)[:, 0]
    return 2.0 ** (-(spec.k - 1)) * (spec.generators.T @ means)


def factorial_null_moments(v_n: float, sizes, spec: FactorialSpec):
    """Sharp-null moments of the factorial effect estimates.

    Under the sharp null every arm sees the same fixed population with
    variance v_n, so
        Var_0(tau_hat_k) = 2^{-2(K-1)} v_n sum_q 1/n_q        (same for all k)
        Corr_0(tau_hat_k, tau_hat_m)
            = sum_q g_kq g_mq / n_q  /  sum_q 1/n_q.
    Returns (variances, correlations).
    """
    if v_n < 0.0:
        raise ValidationError(f"population variance must be >= 0, got {v_n}")
    sizes = np.asarray([int(s) for s in sizes], dtype=float)
    if sizes.shape != (spec.q_arms,) or np.any(sizes < 1):
        raise ValidationError(f"need {spec.q_arms} positive arm sizes")
    inv = 1.0 / sizes
    total = float(inv.sum())
    n_effects = spec.q_arms - 1
    variances = np.full(n_effects, 2.0 ** (-2 * (spec.k - 1)) * v_n * total)
    g = spec.generators.astype(float)
    correlations = (g.T * inv) @ g / total
    return variances, correlations
