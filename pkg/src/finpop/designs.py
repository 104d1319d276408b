"""Assignment mechanisms: simple random sampling, random partitions into Q
arms, rerandomization, cluster expansion, factorial contrast matrices, and the
exhaustive enumeration oracle used to verify closed-form moments.

Conventions used across the package:
  - arm labels are 1..Q; `sizes[q-1]` is the number of units in arm q;
  - unit indices are 0-based positions into the label vector;
  - every stochastic operation takes an explicit `seed`, either an integer or
    an existing numpy Generator. Integer seeds build a counter-based Philox
    generator, and replicate streams derive their keys by hashing
    (base_seed, stream index), so concurrent replicates never overlap.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from itertools import combinations
from typing import Iterator

import numpy as np

from .errors import (
    EnumerationCapError,
    RejectionLimitError,
    SingularMatrixError,
    ValidationError,
)

__all__ = [
    "derive_rng",
    "as_rng",
    "draw_srs",
    "draw_partition",
    "draw_partition_batch",
    "multinomial_count",
    "enumeration_cap",
    "enumerate_partitions",
    "indicator_cov",
    "FactorialSpec",
    "factorial_contrasts",
    "inv_sqrt_psd",
    "compute_delta",
    "draw_rerandomized",
    "cluster_expand",
]

DEFAULT_ENUM_CAP = 10_000_000
ENUM_CAP_ENV_VAR = "FINPOP_ENUM_CAP"


def derive_rng(base_seed: int, *stream: int) -> np.random.Generator:
    """Deterministic generator for (base_seed, stream...), Philox-backed."""
    ss = np.random.SeedSequence(entropy=(int(base_seed), *map(int, stream)))
    return np.random.Generator(np.random.Philox(seed=ss))


def as_rng(seed) -> np.random.Generator:
    """Accept an integer seed or pass an existing Generator through."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ValidationError("a seed is required; stochastic operations are explicit")
    return derive_rng(seed)


def _check_sizes(sizes) -> list[int]:
    sizes = [int(s) for s in sizes]
    if not sizes or any(s < 1 for s in sizes):
        raise ValidationError(f"arm sizes must be a non-empty list of positive counts, got {sizes}")
    return sizes


def _label_template(sizes: list[int]) -> np.ndarray:
    return np.repeat(np.arange(1, len(sizes) + 1, dtype=np.int64), sizes)


def draw_partition(sizes, seed) -> np.ndarray:
    """One assignment, uniform over the N! / (n_1! ... n_Q!) label vectors.

    A Fisher-Yates shuffle of the label multiset; exactness follows from the
    uniformity of the permutation.
    """
    sizes = _check_sizes(sizes)
    rng = as_rng(seed)
    return rng.permutation(_label_template(sizes))


def draw_partition_batch(sizes, b: int, seed) -> np.ndarray:
    """b independent assignments as a (b, N) matrix, row-wise Fisher-Yates."""
    sizes = _check_sizes(sizes)
    if b < 1:
        raise ValidationError(f"batch size must be >= 1, got {b}")
    rng = as_rng(seed)
    out = np.tile(_label_template(sizes), (b, 1))
    rng.permuted(out, axis=1, out=out)
    return out


def draw_srs(n_total: int, n: int, seed) -> np.ndarray:
    """Inclusion vector of a simple random sample: exactly n ones among
    n_total entries, each subset with probability n! (N - n)! / N!."""
    n_total, n = int(n_total), int(n)
    if n_total < 1:
        raise ValidationError(f"population size must be >= 1, got {n_total}")
    if not 1 <= n <= n_total:
        raise ValidationError(f"sample size must satisfy 1 <= n <= {n_total}, got {n}")
    if n == n_total:
        return np.ones(n_total, dtype=np.int64)
    labels = draw_partition((n, n_total - n), seed)
    return (labels == 1).astype(np.int64)


def multinomial_count(sizes) -> int:
    """N! / (n_1! ... n_Q!), the number of distinct assignments."""
    sizes = _check_sizes(sizes)
    count = math.factorial(sum(sizes))
    for s in sizes:
        count //= math.factorial(s)
    return count


def enumeration_cap(cap: int | None = None) -> int:
    """Resolve the enumeration cap: explicit argument, else the
    FINPOP_ENUM_CAP environment variable, else the built-in default."""
    if cap is not None:
        cap = int(cap)
        if cap < 1:
            raise ValidationError(f"enumeration cap must be >= 1, got {cap}")
        return cap
    env = os.environ.get(ENUM_CAP_ENV_VAR)
    if env is None:
        return DEFAULT_ENUM_CAP
    try:
        cap = int(env)
    except ValueError as exc:
        raise ValidationError(
            f"{ENUM_CAP_ENV_VAR} must be an integer, got {env!r}"
        ) from exc
    if cap < 1:
        raise ValidationError(f"{ENUM_CAP_ENV_VAR} must be >= 1, got {cap}")
    return cap


def enumerate_partitions(sizes, cap: int | None = None) -> Iterator[np.ndarray]:
    """Yield every assignment exactly once, in lexicographic label order.

    Refuses up front (with the exact count) when the multinomial count exceeds
    the cap; see `enumeration_cap` for how the cap is resolved.
    """
    sizes = _check_sizes(sizes)
    count = multinomial_count(sizes)
    cap_value = enumeration_cap(cap)
    if count > cap_value:
        raise EnumerationCapError(count, cap_value)

    def generate() -> Iterator[np.ndarray]:
        a = _label_template(sizes).tolist()  # ascending, the lex minimum
        n = len(a)
        while True:
            yield np.asarray(a, dtype=np.int64)
            i = n - 2
            while i >= 0 and a[i] >= a[i + 1]:
                i -= 1
            if i < 0:
                return
            j = n - 1
            while a[j] <= a[i]:
                j -= 1
            a[i], a[j] = a[j], a[i]
            a[i + 1 :] = a[:i:-1]

    return generate()


def indicator_cov(sizes, i: int, j: int, q: int, r: int) -> float:
    """Exact covariance of the arm-membership indicators 1{L_i = q} and
    1{L_j = r} under a uniform random partition.

    Four cases: for the same unit, n_q (N - n_q) / N^2 when q = r and
    -n_q n_r / N^2 otherwise; across units the same expressions scaled by
    -1 / (N - 1).
    """
    sizes = _check_sizes(sizes)
    n_total = sum(sizes)
    q_arms = len(sizes)
    if not (0 <= i < n_total and 0 <= j < n_total):
        raise ValidationError(f"unit indices must be in [0, {n_total}), got {i}, {j}")
    if not (1 <= q <= q_arms and 1 <= r <= q_arms):
        raise ValidationError(f"arm labels must be in [1, {q_arms}], got {q}, {r}")
    n_q, n_r = sizes[q - 1], sizes[r - 1]
    n_sq = float(n_total) ** 2
    if i == j:
        if q == r:
            return n_q * (n_total - n_q) / n_sq
        return -n_q * n_r / n_sq
    if q == r:
        return -n_q * (n_total - n_q) / (n_sq * (n_total - 1))
    return n_q * n_r / (n_sq * (n_total - 1))


@dataclass(frozen=True)
class FactorialSpec:
    """Contrast structure of a 2^K factorial design.

    levels: (Q, K) matrix of factor levels, rows in lexicographic order with
    factor 1 slowest-varying and the +1 block first. generators: (Q, Q - 1)
    matrix whose first K columns are the factor-level columns and whose
    remaining columns are elementwise products over factor subsets, ordered by
    subset size and then lexicographically. names label the columns, e.g.
    "2" for a main effect and "1:3" for an interaction.

    The row and column orderings are a convention of this package; any fixed
    ordering gives the same inference.
    """

    k: int
    levels: np.ndarray
    generators: np.ndarray
    names: tuple[str, ...]

    @property
    def q_arms(self) -> int:
        return 2**self.k


def factorial_contrasts(k: int) -> FactorialSpec:
    """Build the level rows and the full +/-1 contrast matrix for K factors."""
    k = int(k)
    if not 1 <= k <= 12:
        raise ValidationError(f"factor count must satisfy 1 <= K <= 12, got {k}")
    q_arms = 2**k
    # itertools.product order = lexicographic with the first factor slowest.
    levels = np.empty((q_arms, k), dtype=np.int64)
    for col in range(k):
        block = 2 ** (k - col - 1)
        pattern = np.repeat(np.array([1, -1], dtype=np.int64), block)
        levels[:, col] = np.tile(pattern, q_arms // (2 * block))
    columns = []
    names = []
    for size in range(1, k + 1):
        for subset in combinations(range(k), size):
            col = np.prod(levels[:, subset], axis=1)
            columns.append(col)
            names.append(":".join(str(f + 1) for f in subset))
    generators = np.stack(columns, axis=1)
    return FactorialSpec(k=k, levels=levels, generators=generators, names=tuple(names))


def inv_sqrt_psd(mat: np.ndarray) -> np.ndarray:
    """Symmetric inverse square root of a symmetric PSD matrix.

    Eigenvalues below 1e-10 times the largest are treated as singular.
    """
    mat = np.asarray(mat, dtype=float)
    w, v = np.linalg.eigh(mat)
    w_max = float(w[-1])
    if w_max <= 0.0 or float(w[0]) < 1e-10 * w_max:
        raise SingularMatrixError(
            f"matrix is numerically singular: eigenvalue {float(w[0]):.6g} "
            f"is below 1e-10 x max eigenvalue {w_max:.6g}"
        )
    return (v * (1.0 / np.sqrt(w))) @ v.T


def compute_delta(labels, x) -> np.ndarray:
    """Standardized covariate imbalance of a two-arm assignment:
    delta = (N / (n_1 n_0) * S2_X)^(-1/2) (Xbar_1 - Xbar_0),
    with the symmetric PSD inverse root and S2_X the population covariance of
    the centered covariates (divisor N - 1).
    """
    labels = np.asarray(labels)
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, np.newaxis]
    n_total = labels.shape[0]
    if x.shape[0] != n_total:
        raise ValidationError(f"covariates have {x.shape[0]} rows, expected {n_total}")
    treated = labels == 1
    control = labels == 2
    n1, n0 = int(treated.sum()), int(control.sum())
    if n1 + n0 != n_total or n1 == 0 or n0 == 0:
        raise ValidationError("imbalance is defined for two-arm assignments with labels 1 and 2")
    col_means = x.mean(axis=0)
    scale = max(1.0, float(np.max(np.abs(x))))
    if np.max(np.abs(col_means)) > 1e-8 * scale:
        raise ValidationError("covariates must be centered (column means zero)")
    s2_x = x.T @ x / (n_total - 1)
    tau_x = x[treated].mean(axis=0) - x[control].mean(axis=0)
    root = inv_sqrt_psd(n_total / (n1 * n0) * s2_x)
    return root @ tau_x


def draw_rerandomized(sizes, x, threshold: float, seed, max_tries: int = 100_000):
    """Rejection-sample assignments until the squared imbalance delta'delta
    falls at or below `threshold`; returns (assignment, tries used)."""
    sizes = _check_sizes(sizes)
    if len(sizes) != 2:
        raise ValidationError("rerandomization is defined for two-arm designs")
    if max_tries < 1:
        raise ValidationError(f"max_tries must be >= 1, got {max_tries}")
    rng = as_rng(seed)
    for tries in range(1, max_tries + 1):
        labels = draw_partition(sizes, rng)
        delta = compute_delta(labels, x)
        if float(delta @ delta) <= threshold:
            return labels, tries
    raise RejectionLimitError(max_tries, accepted=0)


def cluster_expand(cluster_labels, membership) -> np.ndarray:
    """Expand a cluster-level assignment to units: each unit inherits the arm
    of its cluster. `membership[i]` is the cluster id (1..M) of unit i."""
    cluster_labels = np.asarray(cluster_labels, dtype=np.int64)
    membership = np.asarray(membership, dtype=np.int64)
    m_clusters = cluster_labels.shape[0]
    if membership.ndim != 1 or membership.size == 0:
        raise ValidationError("membership must be a non-empty 1-d array of cluster ids")
    bad = (membership < 1) | (membership > m_clusters)
    if np.any(bad):
        raise ValidationError(
            f"units {np.flatnonzero(bad).tolist()} map to unknown clusters "
            f"(valid ids are 1..{m_clusters})"
        )
    return cluster_labels[membership - 1]
