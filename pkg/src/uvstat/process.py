"""Strictly stationary sequence models with computable mixing coefficients.

Four model families are provided: i.i.d. draws from a finite alphabet,
i.i.d. uniforms on [0, 1), sliding-window functions of an i.i.d. innovation
sequence (m-dependent output), and finite-state Markov chains started from
their stationary distribution.  Every family supports deterministic seeded
path sampling and an absolute-regularity coefficient ``beta(t)`` that is
either exact or an explicit upper bound.

Sampling is counter-based: each path owns a Philox stream keyed by its seed,
so replicate streams are independent and insensitive to evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterator

import numpy as np

from .errors import BudgetExceededError, SpecError

PROB_TOL = 1e-12

EXACT = "exact"
UPPER_BOUND = "upper_bound"


def _as_prob_vector(values, what: str) -> tuple[float, ...]:
    p = np.asarray(values, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise SpecError(f"{what} must be a nonempty 1-d probability vector")
    if np.any(p < 0):
        raise SpecError(f"{what} has negative entries")
    if abs(float(p.sum()) - 1.0) > PROB_TOL:
        raise SpecError(f"{what} sums to {p.sum()!r}, not 1 within {PROB_TOL}")
    return tuple(float(v) for v in p)


@dataclass(frozen=True)
class IIDDiscrete:
    """I.i.d. draws from a finite real alphabet."""

    alphabet: tuple[float, ...]
    probs: tuple[float, ...]

    def __init__(self, alphabet, probs):
        object.__setattr__(self, "alphabet", tuple(float(a) for a in alphabet))
        object.__setattr__(self, "probs", _as_prob_vector(probs, "probs"))
        if len(self.alphabet) != len(self.probs):
            raise SpecError("alphabet and probs must have equal length")
        if len(set(self.alphabet)) != len(self.alphabet):
            raise SpecError("alphabet values must be distinct")


@dataclass(frozen=True)
class IIDUniform01:
    """I.i.d. uniforms on [0, 1)."""


@dataclass(frozen=True)
class MDependentWindow:
    """Sliding-window functional X_t = g(e_t, ..., e_{t+w-1}) of i.i.d. innovations.

    The output sequence is (w-1)-dependent: blocks separated by at least w
    innovations are independent.  ``window_map`` must accept an array whose
    last axis has length ``window`` and reduce it, vectorized over leading
    axes; it is assumed bounded.
    """

    window: int
    base: "IIDDiscrete | IIDUniform01"
    window_map: Callable[[np.ndarray], np.ndarray]
    map_name: str = "custom"

    def __post_init__(self):
        if self.window < 1:
            raise SpecError("window must be a positive integer")
        if not isinstance(self.base, (IIDDiscrete, IIDUniform01)):
            raise SpecError("base must be IIDDiscrete or IIDUniform01")


@dataclass(frozen=True)
class FiniteMarkov:
    """Irreducible aperiodic finite Markov chain, started stationary."""

    states: tuple[float, ...]
    transition: tuple[tuple[float, ...], ...]

    def __init__(self, states, transition):
        object.__setattr__(self, "states", tuple(float(s) for s in states))
        P = np.asarray(transition, dtype=float)
        k = len(self.states)
        if P.shape != (k, k):
            raise SpecError(f"transition must be {k}x{k}")
        for row in P:
            _as_prob_vector(row, "transition row")
        if len(set(self.states)) != k:
            raise SpecError("state values must be distinct")
        if not _is_primitive(P > 0):
            raise SpecError("transition matrix must be irreducible and aperiodic")
        object.__setattr__(
            self, "transition", tuple(tuple(float(v) for v in row) for row in P)
        )


ProcessSpec = IIDDiscrete | IIDUniform01 | MDependentWindow | FiniteMarkov


def two_state_chain(p: float, q: float, states=(0.0, 1.0)) -> FiniteMarkov:
    """Two-state chain with transition [[1-p, p], [q, 1-q]]."""
    return FiniteMarkov(states, [[1.0 - p, p], [q, 1.0 - q]])


def _is_primitive(adj: np.ndarray) -> bool:
    # Wielandt: a k-state matrix is primitive iff A^((k-1)^2 + 1) > 0.
    k = adj.shape[0]
    exponent = (k - 1) ** 2 + 1
    result = np.eye(k, dtype=bool)
    base = adj.copy()
    e = exponent
    while e:
        if e & 1:
            result = (result.astype(np.int64) @ base.astype(np.int64)) > 0
        base = (base.astype(np.int64) @ base.astype(np.int64)) > 0
        e >>= 1
    return bool(result.all())


def stationary_distribution(transition) -> np.ndarray:
    """Solve pi P = pi, sum(pi) = 1 for an irreducible aperiodic P."""
    P = np.asarray(transition, dtype=float)
    k = P.shape[0]
    if P.shape != (k, k):
        raise SpecError("transition matrix must be square")
    for row in P:
        _as_prob_vector(row, "transition row")
    if not _is_primitive(P > 0):
        raise SpecError("transition matrix must be irreducible and aperiodic")
    # (P^T - I) pi = 0 with the last equation replaced by sum(pi) = 1.
    a = P.T - np.eye(k)
    a[-1, :] = 1.0
    b = np.zeros(k)
    b[-1] = 1.0
    pi = np.linalg.solve(a, b)
    if np.any(pi <= 0):
        raise SpecError("stationary distribution has nonpositive entries")
    if not np.allclose(pi @ P, pi, atol=1e-10):
        raise SpecError("stationary distribution solve did not converge")
    return pi


@lru_cache(maxsize=256)
def _markov_pi(spec: FiniteMarkov) -> np.ndarray:
    return stationary_distribution(spec.transition)


@lru_cache(maxsize=4096)
def _markov_power(spec: FiniteMarkov, t: int) -> np.ndarray:
    return np.linalg.matrix_power(np.asarray(spec.transition), t)


# ---------------------------------------------------------------------------
# Sampling


def _uniforms_needed(spec: ProcessSpec, n: int) -> int:
    if isinstance(spec, MDependentWindow):
        return n + spec.window - 1
    return n


def _discrete_digits(cum: np.ndarray, u: np.ndarray) -> np.ndarray:
    # inverse CDF on [0,1): u in [cum[j-1], cum[j]) -> j
    digits = np.searchsorted(cum, u, side="right")
    return np.minimum(digits, len(cum) - 1)


def _paths_from_uniforms(spec: ProcessSpec, u: np.ndarray) -> np.ndarray:
    """Map a (B, m) block of i.i.d. uniforms to (B, n) sample paths."""
    if isinstance(spec, IIDUniform01):
        return u
    if isinstance(spec, IIDDiscrete):
        cum = np.cumsum(spec.probs)
        cum[-1] = 1.0
        return np.asarray(spec.alphabet)[_discrete_digits(cum, u)]
    if isinstance(spec, FiniteMarkov):
        pi = _markov_pi(spec)
        cum_pi = np.cumsum(pi)
        cum_pi[-1] = 1.0
        cum_rows = np.cumsum(np.asarray(spec.transition), axis=1)
        cum_rows[:, -1] = 1.0
        n = u.shape[1]
        digits = np.empty(u.shape, dtype=np.int64)
        digits[:, 0] = _discrete_digits(cum_pi, u[:, 0])
        for t in range(1, n):
            rows = cum_rows[digits[:, t - 1]]
            digits[:, t] = np.minimum(
                np.sum(rows <= u[:, t, None], axis=1), len(spec.states) - 1
            )
        return np.asarray(spec.states)[digits]
    if isinstance(spec, MDependentWindow):
        innov = _paths_from_uniforms(spec.base, u)
        windows = np.lib.stride_tricks.sliding_window_view(
            innov, spec.window, axis=1
        )
        out = np.asarray(spec.window_map(windows), dtype=float)
        if out.shape != innov.shape[:-1] + (innov.shape[1] - spec.window + 1,):
            raise SpecError("window_map must reduce the trailing window axis")
        return out
    raise SpecError(f"unknown process spec {type(spec).__name__}")


def _path_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def sample_path(spec: ProcessSpec, n: int, seed: int) -> np.ndarray:
    """One stationary path of length n, deterministic given (spec, n, seed)."""
    if n < 1:
        raise SpecError("n must be >= 1")
    u = _path_rng(seed).random((1, _uniforms_needed(spec, n)))
    return _paths_from_uniforms(spec, u)[0]


def replicate_seed(master_seed: int, n: int, index: int) -> np.random.SeedSequence:
    """Stream key for replicate ``index`` of a size-n experiment."""
    return np.random.SeedSequence(entropy=(master_seed, n), spawn_key=(index,))


def sample_paths(
    spec: ProcessSpec, n: int, n_paths: int, master_seed: int, start: int = 0
) -> np.ndarray:
    """Paths for replicates [start, start + n_paths), one stream per replicate."""
    m = _uniforms_needed(spec, n)
    u = np.empty((n_paths, m))
    for i in range(n_paths):
        rng = np.random.Generator(
            np.random.Philox(replicate_seed(master_seed, n, start + i))
        )
        u[i] = rng.random(m)
    return _paths_from_uniforms(spec, u)


# ---------------------------------------------------------------------------
# Mixing coefficients


@dataclass(frozen=True)
class BetaValue:
    value: float
    exactness: str


def beta_coefficient(spec: ProcessSpec, t: int) -> BetaValue:
    """Absolute-regularity coefficient at lag t.

    For i.i.d. models beta(t) = 0.  For the sliding-window model beta(t) = 0
    exactly once the windows cannot overlap (t >= w); below that no generic
    bound tighter than 1 is attempted.  For a finite Markov chain with
    stationary start the coefficient equals the pi-average total-variation
    distance between the t-step rows and pi; by the Markov property this
    realizes the supremum over the whole future sigma-algebra.
    """
    if t < 1:
        raise SpecError("t must be >= 1")
    if isinstance(spec, (IIDDiscrete, IIDUniform01)):
        return BetaValue(0.0, EXACT)
    if isinstance(spec, MDependentWindow):
        if t >= spec.window:
            return BetaValue(0.0, EXACT)
        return BetaValue(1.0, UPPER_BOUND)
    if isinstance(spec, FiniteMarkov):
        pi = _markov_pi(spec)
        pt = _markov_power(spec, t)
        tv_rows = 0.5 * np.abs(pt - pi[None, :]).sum(axis=1)
        return BetaValue(float(pi @ tv_rows), EXACT)
    raise SpecError(f"unknown process spec {type(spec).__name__}")


class BetaProfile:
    """Lag -> (beta(t), exactness) table for a process spec."""

    def __init__(self, spec: ProcessSpec):
        self.spec = spec

    def at(self, t: int) -> BetaValue:
        return beta_coefficient(self.spec, t)

    def values(self, t_max: int) -> list[tuple[int, float, str]]:
        out = []
        for t in range(1, t_max + 1):
            b = self.at(t)
            out.append((t, b.value, b.exactness))
        return out


def beta_tail_sum(spec: ProcessSpec, t_from: int, horizon: int = 10_000) -> float:
    """Sum of beta(t) for t > t_from, truncated once terms fall below 1e-18."""
    total = 0.0
    for t in range(t_from + 1, t_from + horizon + 1):
        v = beta_coefficient(spec, t).value
        total += v
        if v < 1e-18:
            break
    return total


# ---------------------------------------------------------------------------
# Exact finite-dimensional laws (used by oracles and bound audits)


def is_iid(spec: ProcessSpec) -> bool:
    return isinstance(spec, (IIDDiscrete, IIDUniform01))


def marginal_distribution(spec: ProcessSpec):
    """(values, probs) of the one-dimensional marginal, or None if continuous."""
    if isinstance(spec, IIDDiscrete):
        return np.asarray(spec.alphabet), np.asarray(spec.probs)
    if isinstance(spec, FiniteMarkov):
        return np.asarray(spec.states), _markov_pi(spec)
    if isinstance(spec, MDependentWindow) and isinstance(spec.base, IIDDiscrete):
        vals, probs = _window_value_table(spec)
        return vals, probs
    return None


def _window_value_table(spec: MDependentWindow):
    base = spec.base
    k = len(base.alphabet)
    w = spec.window
    grids = np.array(
        np.meshgrid(*[np.asarray(base.alphabet)] * w, indexing="ij")
    ).reshape(w, -1).T
    pgrids = np.array(
        np.meshgrid(*[np.asarray(base.probs)] * w, indexing="ij")
    ).reshape(w, -1).T
    values = np.asarray(spec.window_map(grids), dtype=float)
    probs = pgrids.prod(axis=1)
    # collapse duplicates
    uniq, inv = np.unique(values, return_inverse=True)
    agg = np.zeros(len(uniq))
    np.add.at(agg, inv, probs)
    return uniq, agg


def _digit_grid(k: int, length: int, start: int, stop: int) -> np.ndarray:
    """Rows start..stop-1 of the base-k enumeration of {0..k-1}^length."""
    idx = np.arange(start, stop, dtype=np.int64)
    powers = k ** np.arange(length - 1, -1, -1, dtype=np.int64)
    return (idx[:, None] // powers) % k


def enumerate_joint(
    spec: ProcessSpec,
    indices: tuple[int, ...],
    budget: int = 2**22,
    chunk: int = 65536,
) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Exact joint law of (X_i : i in indices), yielded as (values, probs) chunks.

    ``indices`` are 1-based positions, strictly increasing.  Supported for
    finite-alphabet models; for the sliding-window model the contiguous range
    of covered innovations is enumerated, so widely spread indices can be
    expensive.
    """
    idx = tuple(int(i) for i in indices)
    if any(i < 1 for i in idx) or any(b <= a for a, b in zip(idx, idx[1:])):
        raise SpecError("indices must be strictly increasing and >= 1")
    if isinstance(spec, IIDDiscrete):
        k = len(spec.alphabet)
        total = k ** len(idx)
        if total > budget:
            raise BudgetExceededError(
                f"joint enumeration needs {total} outcomes > budget {budget}"
            )
        alphabet = np.asarray(spec.alphabet)
        probs = np.asarray(spec.probs)
        for start in range(0, total, chunk):
            digits = _digit_grid(k, len(idx), start, min(start + chunk, total))
            yield alphabet[digits], probs[digits].prod(axis=1)
        return
    if isinstance(spec, FiniteMarkov):
        k = len(spec.states)
        total = k ** len(idx)
        if total > budget:
            raise BudgetExceededError(
                f"joint enumeration needs {total} outcomes > budget {budget}"
            )
        states = np.asarray(spec.states)
        pi = _markov_pi(spec)
        gaps = [b - a for a, b in zip(idx, idx[1:])]
        powers = [_markov_power(spec, g) for g in gaps]
        for start in range(0, total, chunk):
            digits = _digit_grid(k, len(idx), start, min(start + chunk, total))
            p = pi[digits[:, 0]].copy()
            for j, pw in enumerate(powers):
                p *= pw[digits[:, j], digits[:, j + 1]]
            yield states[digits], p
        return
    if isinstance(spec, MDependentWindow) and isinstance(spec.base, IIDDiscrete):
        base = spec.base
        k = len(base.alphabet)
        lo, hi = idx[0], idx[-1] + spec.window - 1
        length = hi - lo + 1
        total = k**length
        if total > budget:
            raise BudgetExceededError(
                f"joint enumeration needs {total} outcomes > budget {budget}"
            )
        alphabet = np.asarray(base.alphabet)
        probs = np.asarray(base.probs)
        cols = [i - lo for i in idx]
        for start in range(0, total, chunk):
            digits = _digit_grid(k, length, start, min(start + chunk, total))
            innov = alphabet[digits]
            windows = np.lib.stride_tricks.sliding_window_view(
                innov, spec.window, axis=1
            )
            values = np.asarray(spec.window_map(windows), dtype=float)[:, cols]
            yield values, probs[digits].prod(axis=1)
        return
    raise SpecError(
        "exact joint laws require a finite-alphabet model "
        f"(got {type(spec).__name__})"
    )


def enumerate_paths(
    spec: ProcessSpec, n: int, budget: int = 2**22, chunk: int = 65536
) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Exact path law over {1..n}, yielded as (paths, probs) chunks."""
    return enumerate_joint(spec, tuple(range(1, n + 1)), budget=budget, chunk=chunk)


def sample_marginal(
    spec: ProcessSpec, rng: np.random.Generator, size: int
) -> np.ndarray:
    """I.i.d. draws from the one-dimensional marginal law of the process."""
    if isinstance(spec, IIDUniform01):
        return rng.random(size)
    if isinstance(spec, IIDDiscrete):
        cum = np.cumsum(spec.probs)
        cum[-1] = 1.0
        return np.asarray(spec.alphabet)[_discrete_digits(cum, rng.random(size))]
    if isinstance(spec, FiniteMarkov):
        pi = _markov_pi(spec)
        cum = np.cumsum(pi)
        cum[-1] = 1.0
        return np.asarray(spec.states)[_discrete_digits(cum, rng.random(size))]
    if isinstance(spec, MDependentWindow):
        innov = sample_marginal(spec.base, rng, size * spec.window).reshape(
            size, spec.window
        )
        return np.asarray(spec.window_map(innov), dtype=float)
    raise SpecError(f"unknown process spec {type(spec).__name__}")


# JSON-friendly map presets for MDependentWindow (picklable, CLI-exposable).


def window_mean(w: np.ndarray) -> np.ndarray:
    return w.mean(axis=-1)


def window_max(w: np.ndarray) -> np.ndarray:
    return w.max(axis=-1)


def window_parity(w: np.ndarray) -> np.ndarray:
    return np.sum(w, axis=-1) % 2.0


WINDOW_MAPS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "mean": window_mean,
    "max": window_max,
    "parity": window_parity,
}
