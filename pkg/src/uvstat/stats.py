"""Evaluation of U- and V-statistics and an exact tiny-instance moment oracle.

U sums the kernel over increasing index tuples, V over all ordered tuples
including diagonals; neither carries a combinatorial normalization (the
classical average is a separate operation).  Scalar evaluation enumerates
index tuples lexicographically and accumulates with compensated summation,
so chunked or parallel enumeration orders reproduce the serial value.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, product

import numpy as np

from . import process
from .errors import BudgetExceededError, DegenerateVarianceError, SpecError
from .kernels import Kernel


@dataclass(frozen=True)
class StatisticConfig:
    mode: str  # "U" | "V"
    n: int
    kernel: Kernel

    def __post_init__(self):
        if self.mode not in ("U", "V"):
            raise SpecError("mode must be 'U' or 'V'")
        if self.n < 1:
            raise SpecError("n must be >= 1")
        if self.mode == "U" and self.n < self.kernel.order:
            raise SpecError("U-mode requires n >= kernel order")


@dataclass(frozen=True)
class MomentPair:
    mean: float
    variance: float
    method: str  # "exact_enumeration" | "monte_carlo"
    n_replicates: int | None = None
    mean_se: float = 0.0
    variance_se: float = 0.0

    def __post_init__(self):
        if self.variance < 0:
            raise SpecError("variance must be nonnegative")


def _chunk_bounds_by_leading_index(n: int, r: int, chunks: int) -> list[tuple[int, int]]:
    """Split the leading-index range into chunks balanced by C(n-1-j1, r-1)."""
    counts = [math.comb(n - 1 - j1, r - 1) for j1 in range(n - r + 1)]
    total = sum(counts)
    bounds = []
    start = 0
    acc = 0
    target = total / max(chunks, 1)
    for j1, c in enumerate(counts):
        acc += c
        if acc >= target * (len(bounds) + 1) and j1 + 1 < len(counts):
            bounds.append((start, j1 + 1))
            start = j1 + 1
    bounds.append((start, len(counts)))
    return bounds


def u_statistic(path, kernel: Kernel, chunks: int = 1) -> float:
    """Sum of the kernel over all increasing r-tuples of positions."""
    x = np.asarray(path, dtype=float)
    n = len(x)
    r = kernel.order
    if n < r:
        raise SpecError(f"path of length {n} is shorter than kernel order {r}")
    partials = []
    for lo, hi in _chunk_bounds_by_leading_index(n, r, chunks):
        terms = (
            kernel.eval((j1 + 1, *(j + 1 for j in rest)),
                        (x[j1], *(x[j] for j in rest)))
            for j1 in range(lo, hi)
            for rest in combinations(range(j1 + 1, n), r - 1)
        )
        partials.append(math.fsum(terms))
    return math.fsum(partials)


def v_statistic(path, kernel: Kernel) -> float:
    """Sum of the kernel over all ordered r-tuples, diagonals included."""
    x = np.asarray(path, dtype=float)
    n = len(x)
    if n < 1:
        raise SpecError("path must be nonempty")
    r = kernel.order
    return math.fsum(
        kernel.eval(tuple(j + 1 for j in idx), tuple(x[j] for j in idx))
        for idx in product(range(n), repeat=r)
    )


def classical_u(path, kernel: Kernel) -> float:
    """u_statistic / C(n, r), the classical average form."""
    x = np.asarray(path, dtype=float)
    total = u_statistic(x, kernel)
    c = math.comb(len(x), kernel.order)
    try:
        return total / c
    except OverflowError:
        warnings.warn(
            "binomial coefficient exceeds float range; dividing in log space",
            stacklevel=2,
        )
        log_c = math.lgamma(len(x) + 1) - math.lgamma(kernel.order + 1) \
            - math.lgamma(len(x) - kernel.order + 1)
        return math.copysign(math.exp(math.log(abs(total)) - log_c), total) \
            if total else 0.0


def standardize(value: float, moments: MomentPair) -> float:
    if moments.variance <= 0:
        raise DegenerateVarianceError(
            f"variance {moments.variance!r} is not positive"
        )
    return (value - moments.mean) / math.sqrt(moments.variance)


# ---------------------------------------------------------------------------
# Batched evaluation (vectorized fast path for order-2 kernels)


@lru_cache(maxsize=64)
def _pair_index_vectors(n: int, mode: str) -> tuple[np.ndarray, np.ndarray]:
    if mode == "U":
        return np.triu_indices(n, k=1)
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return ii.ravel(), jj.ravel()


def batch_statistic(paths: np.ndarray, kernel: Kernel, mode: str) -> np.ndarray:
    """Statistic value for each row of ``paths``; matches the scalar evaluators.

    Rows are independent, so per-row results do not depend on the batch split.
    """
    paths = np.asarray(paths, dtype=float)
    if paths.ndim != 2:
        raise SpecError("paths must be a (batch, n) array")
    n = paths.shape[1]
    if kernel.order == 2 and kernel.pair is not None:
        iu, ju = _pair_index_vectors(n, mode)
        terms = kernel.pair(paths[:, iu], paths[:, ju])
        if kernel.weight is not None:
            terms = terms * np.asarray(kernel.weight(iu + 1, ju + 1), dtype=float)
        return terms.sum(axis=1)
    fn = u_statistic if mode == "U" else v_statistic
    return np.array([fn(row, kernel) for row in paths])


# ---------------------------------------------------------------------------
# Exact moments by full path enumeration


def exact_moments(
    spec: process.ProcessSpec,
    config: StatisticConfig,
    budget: int = 2**22,
) -> MomentPair:
    """Exact mean and variance of the statistic over the full path law.

    Requires a finite-alphabet model; the outcome count |alphabet|^n (or the
    innovation analogue) must stay within ``budget``, else a
    BudgetExceededError points the caller at Monte Carlo estimation.
    """
    first = []
    second = []
    for values, probs in process.enumerate_paths(spec, config.n, budget=budget):
        stat = batch_statistic(values, config.kernel, config.mode)
        first.append(math.fsum(probs * stat))
        second.append(math.fsum(probs * stat * stat))
    mean = math.fsum(first)
    var = math.fsum(second) - mean * mean
    return MomentPair(mean=mean, variance=max(var, 0.0), method="exact_enumeration")


def monte_carlo_moments(values: np.ndarray) -> MomentPair:
    """Sample mean/variance (1/N normalization) with standard errors."""
    v = np.asarray(values, dtype=float)
    n = len(v)
    mean = math.fsum(v) / n
    centered = v - mean
    m2 = math.fsum(centered**2) / n
    m4 = math.fsum(centered**4) / n
    return MomentPair(
        mean=mean,
        variance=m2,
        method="monte_carlo",
        n_replicates=n,
        mean_se=math.sqrt(m2 / n),
        variance_se=math.sqrt(max(m4 - m2 * m2, 0.0) / n),
    )
