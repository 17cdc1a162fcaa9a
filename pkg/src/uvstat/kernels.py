"""Bounded kernels of order r, their projections, and long-run variance.

A kernel evaluates r sample values taken at r (1-based) positions; the
built-in families are order 2.  Position-dependent kernels carry a weight
function on index pairs.  Order-2 position-independent kernels additionally
expose a vectorized ``pair`` function which the statistic layer uses for
batched evaluation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from functools import partial
from typing import Callable

import numpy as np

from . import process
from .errors import PreconditionError, SpecError

PairFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Kernel:
    """Bounded measurable kernel f_{j1..jr} with uniform bound F.

    ``pair`` (order 2, position-independent part) and ``weight`` (the
    position-dependent coefficient, if any) must be vectorized over numpy
    arrays.  ``symmetric`` asserts invariance under permuting the values of a
    position-independent kernel.
    """

    name: str
    order: int
    bound: float
    symmetric: bool
    index_dependent: bool
    pair: PairFn | None = None
    weight: PairFn | None = None
    fn: Callable | None = None  # generic (indices, values) -> float

    def eval(self, indices, values) -> float:
        """Evaluate at 1-based positions ``indices`` with sample ``values``."""
        if len(indices) != self.order or len(values) != self.order:
            raise SpecError(f"kernel has order {self.order}")
        if self.order == 2 and self.pair is not None:
            out = float(self.pair(np.float64(values[0]), np.float64(values[1])))
            if self.weight is not None:
                out *= float(self.weight(np.int64(indices[0]), np.int64(indices[1])))
            return out
        if self.fn is None:
            raise SpecError(f"kernel {self.name} has no scalar evaluator")
        return float(self.fn(tuple(indices), tuple(values)))


# vectorized builtin pair functions (module-level: picklable)


def _pair_product(x, y):
    return np.multiply(x, y)


def _pair_match(x, y):
    return np.equal(x, y).astype(float)


def _pair_sign_diff(x, y):
    return np.sign(np.subtract(x, y))


def _pair_clipped_abs_diff(x, y, clip):
    return np.minimum(np.abs(np.subtract(x, y)), clip)


def _pair_centered_product(x, y, mu):
    return np.multiply(np.subtract(x, mu), np.subtract(y, mu))


def _weight_alternating(i, j):
    return np.where((np.add(i, j)) % 2 == 0, 1.0, -1.0)


def make_kernel(
    name: str,
    order: int,
    bound: float,
    fn: Callable,
    symmetric: bool = False,
    index_dependent: bool = False,
) -> Kernel:
    """Custom kernel from a scalar evaluator (indices, values) -> float."""
    if order < 1 or bound < 0:
        raise SpecError("order must be >= 1 and bound >= 0")
    return Kernel(name, order, float(bound), symmetric, index_dependent, fn=fn)


def builtin_kernel(name: str, **params) -> Kernel:
    """Construct one of the built-in order-2 kernel families.

    product(bound=1)            x*y on alphabets with |x*y| <= bound
    match_indicator()           1{x = y}
    kendall_sign()              sign(x - y)
    clipped_gini(clip=1)        min(|x - y|, clip)
    weighted_product(coeff="alternating", bound=1)   c(i,j)*x*y, |c| <= 1
    degenerate_product(mu, bound=1)                  (x - mu)*(y - mu)
    """
    def _pop_bound(default=1.0):
        b = float(params.pop("bound", default))
        if b <= 0:
            raise SpecError("bound must be positive")
        return b

    if name == "product":
        bound = _pop_bound()
        kern = Kernel("product", 2, bound, True, False, pair=_pair_product)
    elif name == "match_indicator":
        kern = Kernel("match_indicator", 2, 1.0, True, False, pair=_pair_match)
    elif name == "kendall_sign":
        kern = Kernel("kendall_sign", 2, 1.0, False, False, pair=_pair_sign_diff)
    elif name == "clipped_gini":
        clip = float(params.pop("clip", 1.0))
        if clip <= 0:
            raise SpecError("clip must be positive")
        kern = Kernel(
            "clipped_gini", 2, clip, True, False,
            pair=partial(_pair_clipped_abs_diff, clip=clip),
        )
    elif name == "weighted_product":
        bound = _pop_bound()
        coeff = params.pop("coeff", "alternating")
        if coeff == "alternating":
            weight = _weight_alternating
        elif callable(coeff):
            weight = coeff
        else:
            raise SpecError(f"unknown weighted_product coefficient {coeff!r}")
        kern = Kernel(
            "weighted_product", 2, bound, False, True,
            pair=_pair_product, weight=weight,
        )
    elif name == "degenerate_product":
        if "mu" not in params:
            raise SpecError("degenerate_product requires mu")
        mu = float(params.pop("mu"))
        bound = _pop_bound()
        kern = Kernel(
            "degenerate_product", 2, bound, True, False,
            pair=partial(_pair_centered_product, mu=mu),
        )
    else:
        raise SpecError(f"unknown kernel {name!r}")
    if params:
        raise SpecError(f"unexpected kernel parameters {sorted(params)}")
    return kern


def audit_bound(kernel: Kernel, alphabet, weights_extent: int = 0) -> float:
    """Max |f| over the full alphabet^r grid (position-independent part).

    For position-dependent kernels the weight is scanned over 1-based index
    pairs up to ``weights_extent``.
    """
    grid = np.array(
        np.meshgrid(*[np.asarray(alphabet, dtype=float)] * kernel.order,
                    indexing="ij")
    ).reshape(kernel.order, -1).T
    if kernel.order == 2 and kernel.pair is not None:
        vals = np.abs(kernel.pair(grid[:, 0], grid[:, 1]))
        worst = float(vals.max())
        if kernel.weight is not None and weights_extent:
            ii, jj = np.meshgrid(
                np.arange(1, weights_extent + 1),
                np.arange(1, weights_extent + 1),
                indexing="ij",
            )
            worst *= float(np.abs(kernel.weight(ii, jj)).max())
        return worst
    return max(
        abs(kernel.eval(tuple(range(1, kernel.order + 1)), tuple(row)))
        for row in grid
    )


# ---------------------------------------------------------------------------
# Projection under independent copies of the marginal


@dataclass(frozen=True)
class ProjectionResult:
    """Full-kernel mean, first projection, and (optionally) long-run variance."""

    theta: float
    f1: Callable[[np.ndarray], np.ndarray]
    method: str  # "exact" | "monte_carlo"
    theta_se: float = 0.0
    f1_table: tuple[tuple[float, float], ...] | None = None
    sigma2: float | None = None
    sigma2_se: float = 0.0
    lag_cutoff: int | None = None


def _f1_from_table(values: np.ndarray, table: np.ndarray, x):
    idx = np.searchsorted(values, np.asarray(x, dtype=float))
    idx = np.clip(idx, 0, len(values) - 1)
    return table[idx]


def _f1_from_sample(kernel: Kernel, frozen: np.ndarray, x):
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    xs = np.atleast_1d(x)
    if kernel.order == 2 and kernel.pair is not None:
        out = kernel.pair(xs[:, None], frozen[None, :, 0]).mean(axis=1)
    else:
        out = np.array([
            math.fsum(
                kernel.eval(tuple(range(1, kernel.order + 1)), (float(v), *row))
                for row in frozen
            ) / len(frozen)
            for v in xs
        ])
    return float(out[0]) if scalar else out


def hoeffding_projection(
    spec: process.ProcessSpec,
    kernel: Kernel,
    samples: int = 20000,
    seed: int = 0,
) -> ProjectionResult:
    """theta = E f(X~_1..X~_r) and f1(x) = E f(x, X~_2..X~_r) over independent copies.

    Defined for symmetric position-independent kernels only.  Exact weighted
    sums when the marginal is a finite alphabet, Monte Carlo with a reported
    standard error otherwise.
    """
    if kernel.index_dependent:
        raise PreconditionError("projection is undefined for position-dependent kernels")
    if not kernel.symmetric:
        raise PreconditionError("projection requires a symmetric kernel")
    r = kernel.order
    marginal = process.marginal_distribution(spec)
    if marginal is not None:
        values, probs = marginal
        grid = np.array(
            np.meshgrid(*[values] * r, indexing="ij")
        ).reshape(r, -1).T
        pgrid = np.array(
            np.meshgrid(*[probs] * r, indexing="ij")
        ).reshape(r, -1).T
        if r == 2 and kernel.pair is not None:
            fvals = kernel.pair(grid[:, 0], grid[:, 1])
        else:
            fvals = np.array([
                kernel.eval(tuple(range(1, r + 1)), tuple(row)) for row in grid
            ])
        w = pgrid.prod(axis=1)
        theta = float(math.fsum(fvals * w))
        # f1 by summing out all but the first coordinate
        k = len(values)
        fmat = fvals.reshape((k,) * r)
        tailw = np.array(
            np.meshgrid(*[probs] * (r - 1), indexing="ij")
        ).reshape(r - 1, -1).T.prod(axis=1) if r > 1 else np.array([1.0])
        table = fmat.reshape(k, -1) @ tailw
        order = np.argsort(values)
        sorted_vals = values[order]
        sorted_table = table[order]
        return ProjectionResult(
            theta=theta,
            f1=partial(_f1_from_table, sorted_vals, sorted_table),
            method="exact",
            f1_table=tuple(zip(map(float, sorted_vals), map(float, sorted_table))),
        )
    # continuous marginal: frozen Monte Carlo draws
    rng = np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=(seed, 0xF1)))
    )
    draws = process.sample_marginal(spec, rng, samples * r).reshape(samples, r)
    if r == 2 and kernel.pair is not None:
        fvals = kernel.pair(draws[:, 0], draws[:, 1])
    else:
        fvals = np.array([
            kernel.eval(tuple(range(1, r + 1)), tuple(row)) for row in draws
        ])
    theta = float(fvals.mean())
    theta_se = float(fvals.std(ddof=1) / math.sqrt(samples))
    frozen = process.sample_marginal(spec, rng, samples * (r - 1)).reshape(
        samples, r - 1
    )
    return ProjectionResult(
        theta=theta,
        f1=partial(_f1_from_sample, kernel, frozen),
        method="monte_carlo",
        theta_se=theta_se,
    )


def _lag_covariance(
    spec: process.ProcessSpec, proj: ProjectionResult, t: int
) -> float:
    """E f1(X_1) f1(X_{1+t}) - theta^2, exact where the joint law is available."""
    if process.is_iid(spec):
        return 0.0
    if isinstance(spec, process.FiniteMarkov):
        states = np.asarray(spec.states)
        pi = process._markov_pi(spec)
        pt = process._markov_power(spec, t)
        f1v = np.asarray(proj.f1(states), dtype=float)
        joint = pi[:, None] * pt
        return float(f1v @ joint @ f1v - proj.theta**2)
    if isinstance(spec, process.MDependentWindow):
        if t >= spec.window:
            return 0.0
        if isinstance(spec.base, process.IIDDiscrete):
            acc = 0.0
            for values, probs in process.enumerate_joint(spec, (1, 1 + t)):
                acc += float(
                    np.sum(probs * proj.f1(values[:, 0]) * proj.f1(values[:, 1]))
                )
            return acc - proj.theta**2
    raise SpecError(
        f"exact lag covariances unavailable for {type(spec).__name__}"
    )


def yoshihara_sigma2(
    spec: process.ProcessSpec,
    proj: ProjectionResult,
    lag_cutoff: int,
    tail_tol: float | None = None,
    samples: int = 200_000,
    seed: int = 1,
) -> float:
    """Long-run variance of the first projection along the sequence.

    (E f1^2(X_1) - theta^2) + 2 * sum_{t<=lag_cutoff} (E f1(X_1) f1(X_{1+t}) - theta^2).
    Warns when the mixing tail bound 2 F^2 sum_{t>lag_cutoff} beta(t) exceeds
    ``tail_tol``; the bound uses F = max |f1| <= kernel bound.
    """
    if lag_cutoff < 1:
        raise SpecError("lag_cutoff must be >= 1")
    marginal = process.marginal_distribution(spec)
    if marginal is not None:
        values, probs = marginal
        f1v = np.asarray(proj.f1(values), dtype=float)
        var0 = float(probs @ (f1v**2) - proj.theta**2)
        f1_bound = float(np.abs(f1v).max())
    else:
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(entropy=(seed, 0x52)))
        )
        draws = process.sample_marginal(spec, rng, samples)
        f1v = np.asarray(proj.f1(draws), dtype=float)
        var0 = float((f1v**2).mean() - proj.theta**2)
        f1_bound = float(np.abs(f1v).max())
    lag_sum = math.fsum(
        _lag_covariance(spec, proj, t) for t in range(1, lag_cutoff + 1)
    )
    sigma2 = var0 + 2.0 * lag_sum
    tol = 1e-6 * f1_bound**2 if tail_tol is None else tail_tol
    tail = 2.0 * f1_bound**2 * process.beta_tail_sum(spec, lag_cutoff)
    if tail > tol:
        warnings.warn(
            f"sigma2 truncation tail bound {tail:.3e} exceeds tolerance {tol:.3e}; "
            "increase lag_cutoff",
            stacklevel=2,
        )
    return sigma2


def with_sigma2(proj: ProjectionResult, sigma2: float, lag_cutoff: int) -> ProjectionResult:
    return replace(proj, sigma2=sigma2, lag_cutoff=lag_cutoff)
