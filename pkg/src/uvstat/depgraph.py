"""Implicit proximity graph on statistic terms, with counting bounds and
exact factorization audits.

Vertices are the index tuples of the statistic's terms (increasing tuples in
U-mode, all tuples in V-mode).  Two vertices are adjacent when some pair of
their coordinates is within m, and every vertex carries a loop.  The graph is
never materialized: adjacency is a predicate, neighborhoods are enumerated on
demand, and only the counting bounds scale to large n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

from . import process
from .errors import BudgetExceededError, PreconditionError, SpecError
from .kernels import Kernel

DEFAULT_ENUMERATION_BUDGET = 10**7


@dataclass(frozen=True)
class GraphSpec:
    n: int
    r: int
    m: int
    mode: str  # "U" | "V"

    def __post_init__(self):
        if self.mode not in ("U", "V"):
            raise SpecError("mode must be 'U' or 'V'")
        if self.n < 1 or self.r < 1 or self.m < 0:
            raise SpecError("need n >= 1, r >= 1, m >= 0")
        if self.mode == "U" and self.n < self.r:
            raise SpecError("U-mode requires n >= r")

    @property
    def vertex_count(self) -> int:
        if self.mode == "U":
            return math.comb(self.n, self.r)
        return self.n**self.r


def _check_vertex(v, spec: GraphSpec) -> tuple[int, ...]:
    t = tuple(int(j) for j in v)
    if len(t) != spec.r:
        raise SpecError(f"vertex {t} does not have {spec.r} coordinates")
    if any(j < 1 or j > spec.n for j in t):
        raise SpecError(f"vertex {t} out of range 1..{spec.n}")
    if spec.mode == "U" and any(b <= a for a, b in zip(t, t[1:])):
        raise SpecError(f"U-mode vertex {t} must be strictly increasing")
    return t


def vertices(spec: GraphSpec, budget: int = DEFAULT_ENUMERATION_BUDGET) -> np.ndarray:
    """All vertices as an integer array of shape (T, r)."""
    if spec.vertex_count > budget:
        raise BudgetExceededError(
            f"{spec.vertex_count} vertices exceed budget {budget}; "
            "use the counting bounds instead"
        )
    rng = range(1, spec.n + 1)
    if spec.mode == "U":
        it = combinations(rng, spec.r)
    else:
        it = product(rng, repeat=spec.r)
    return np.array(list(it), dtype=np.int64).reshape(spec.vertex_count, spec.r)


def adjacent(a, b, spec: GraphSpec) -> bool:
    """True iff a == b (loop) or some coordinate pair is within m."""
    ta = _check_vertex(a, spec)
    tb = _check_vertex(b, spec)
    if ta == tb:
        return True
    return any(abs(ja - jb) <= spec.m for ja in ta for jb in tb)


def neighborhood_mask(a, all_vertices: np.ndarray, spec: GraphSpec) -> np.ndarray:
    ta = _check_vertex(a, spec)
    mask = np.zeros(len(all_vertices), dtype=bool)
    for ja in ta:
        mask |= (np.abs(all_vertices - ja) <= spec.m).any(axis=1)
    return mask


def neighborhood_vertices(
    a, spec: GraphSpec, budget: int = DEFAULT_ENUMERATION_BUDGET
) -> np.ndarray:
    verts = vertices(spec, budget=budget)
    return verts[neighborhood_mask(a, verts, spec)]


def neighborhood_count(
    a, spec: GraphSpec, budget: int = DEFAULT_ENUMERATION_BUDGET
) -> int:
    """Exact neighborhood size |L(a)| by enumeration (loop included)."""
    verts = vertices(spec, budget=budget)
    return int(neighborhood_mask(a, verts, spec).sum())


def neighborhood_counts_all(
    spec: GraphSpec, budget: int = DEFAULT_ENUMERATION_BUDGET
) -> tuple[np.ndarray, np.ndarray]:
    """(vertices, exact neighborhood counts) for every vertex, vectorized."""
    verts = vertices(spec, budget=budget)
    t = len(verts)
    if t * t * spec.r * spec.r > 32 * budget:
        raise BudgetExceededError("pairwise distance table exceeds budget")
    diff = np.abs(verts[:, None, :, None] - verts[None, :, None, :])
    min_dist = diff.min(axis=(2, 3))
    counts = (min_dist <= spec.m).sum(axis=1)
    return verts, counts


def _tail_count(spec: GraphSpec) -> int:
    # C(n, r-1) in U-mode, n^(r-1) in V-mode
    if spec.mode == "U":
        return math.comb(spec.n, spec.r - 1)
    return spec.n ** (spec.r - 1)


def neighborhood_bound(spec: GraphSpec) -> float:
    """Counting bound r^2 (2m+1) C(n, r-1), with n^(r-1) in V-mode."""
    return spec.r**2 * (2 * spec.m + 1) * _tail_count(spec)


def strong_set_bound(set_size: int, spec: GraphSpec) -> float:
    """Bound on |L(V')| for a vertex set of the given size."""
    if set_size < 1:
        raise SpecError("set_size must be >= 1")
    return spec.r**2 * set_size * (2 * spec.m + 1) * _tail_count(spec)


def q_bound(R: int, F: float, spec: GraphSpec) -> float:
    """Bound r^2 R F (2m+1) C(n, r-1) on the conditional absolute-sum over L(V')."""
    if R < 1:
        raise SpecError("R must be >= 1")
    if F < 0:
        raise SpecError("F must be nonnegative")
    return spec.r**2 * R * F * (2 * spec.m + 1) * _tail_count(spec)


def m_bound(F: float, spec: GraphSpec) -> float:
    """Bound F * C(n, r) (or F * n^r) on the summed absolute means."""
    if F < 0:
        raise SpecError("F must be nonnegative")
    if spec.mode == "U":
        return F * math.comb(spec.n, spec.r)
    return F * spec.n**spec.r


def gamma(R: int, beta_m: float) -> tuple[float, bool]:
    """Near-factorization coefficient 8 R beta(m); flag marks values >= 1.

    Values >= 1 fall outside the (0, 1) range the factorization property
    demands, but the raw value is still informative in the rate terms, so it
    is reported rather than rejected.
    """
    if R < 1:
        raise SpecError("R must be >= 1")
    if not 0.0 <= beta_m <= 1.0:
        raise SpecError("beta_m must lie in [0, 1]")
    value = 8.0 * R * beta_m
    return value, value >= 1.0


@dataclass(frozen=True)
class GraphBounds:
    neighborhood_bound: float
    strong_set_bound: float
    q_bound: float
    m_bound: float
    gamma: float
    gamma_out_of_range: bool


def bounds_summary(
    spec: GraphSpec, R: int, F: float, beta_m: float, set_size: int | None = None
) -> GraphBounds:
    g, flagged = gamma(R, beta_m)
    return GraphBounds(
        neighborhood_bound=neighborhood_bound(spec),
        strong_set_bound=strong_set_bound(set_size if set_size else R, spec),
        q_bound=q_bound(R, F, spec),
        m_bound=m_bound(F, spec),
        gamma=g,
        gamma_out_of_range=flagged,
    )


# ---------------------------------------------------------------------------
# Exact factorization-gap audits


def _term_values(
    vertex: tuple[int, ...],
    kernel: Kernel,
    values: np.ndarray,
    index_pos: dict[int, int],
) -> np.ndarray:
    cols = [index_pos[j] for j in vertex]
    if kernel.order == 2 and kernel.pair is not None:
        out = kernel.pair(values[:, cols[0]], values[:, cols[1]])
        if kernel.weight is not None:
            out = out * float(kernel.weight(np.int64(vertex[0]), np.int64(vertex[1])))
        return out
    return np.array([
        kernel.eval(vertex, tuple(row[cols])) for row in values
    ])


def _expected_products(
    spec: process.ProcessSpec,
    kernel: Kernel,
    vertex_sets: list[list[tuple[int, ...]]],
    budget: int,
) -> list[float]:
    all_indices = sorted({j for vs in vertex_sets for v in vs for j in v})
    index_pos = {j: c for c, j in enumerate(all_indices)}
    sums = [[] for _ in vertex_sets]
    for values, probs in process.enumerate_joint(
        spec, tuple(all_indices), budget=budget
    ):
        for out, vs in zip(sums, vertex_sets):
            prod = np.ones(len(values))
            for v in vs:
                prod *= _term_values(v, kernel, values, index_pos)
            out.append(math.fsum(prod * probs))
    return [math.fsum(s) for s in sums]


@dataclass(frozen=True)
class FactorizationGap:
    gap: float
    bound: float
    separated: bool


def factorization_gap(
    spec: process.ProcessSpec,
    kernel: Kernel,
    v1,
    v2,
    graph: GraphSpec,
    budget: int = 2**22,
) -> FactorizationGap:
    """|E prod(V1 u V2) - E prod(V1) E prod(V2)| with its mixing bound.

    The bound 8 |V1 u V2| F^{|V1 u V2|} beta(m) certifies near-factorization
    only when no edge joins V1 and V2 (``separated``); the gap is reported
    either way.
    """
    set1 = [_check_vertex(v, graph) for v in v1]
    set2 = [_check_vertex(v, graph) for v in v2]
    if not set1 or not set2:
        raise SpecError("both vertex sets must be nonempty")
    if set(set1) & set(set2):
        raise SpecError("vertex sets must be disjoint")
    separated = not any(adjacent(a, b, graph) for a in set1 for b in set2)
    e_union, e1, e2 = _expected_products(
        spec, kernel, [set1 + set2, set1, set2], budget
    )
    size = len(set1) + len(set2)
    beta_m = process.beta_coefficient(spec, graph.m).value if graph.m >= 1 else 1.0
    bound = 8.0 * size * kernel.bound**size * beta_m
    return FactorizationGap(
        gap=abs(e_union - e1 * e2), bound=bound, separated=separated
    )


def covariance_gap(
    spec: process.ProcessSpec,
    g1,
    indices1,
    g2,
    indices2,
    gap_m: int,
    bound1: float,
    bound2: float,
    budget: int = 2**22,
) -> tuple[float, float]:
    """|E g1 g2 - E g1 E g2| for index sets separated by more than gap_m.

    ``g1`` and ``g2`` take a (batch, |I|) array of sample values (columns in
    index order) and must be bounded by bound1, bound2.  Raises when some
    cross-pair of indices is within gap_m: the mixing inequality does not
    apply there.
    """
    i1 = tuple(sorted(int(i) for i in indices1))
    i2 = tuple(sorted(int(i) for i in indices2))
    if not i1 or not i2:
        raise SpecError("index sets must be nonempty")
    if gap_m < 1:
        raise SpecError("gap_m must be >= 1")
    if min(abs(a - b) for a in i1 for b in i2) <= gap_m:
        raise PreconditionError(
            f"index sets are not separated by more than {gap_m}"
        )
    all_idx = tuple(sorted(set(i1) | set(i2)))
    pos = {j: c for c, j in enumerate(all_idx)}
    c1 = [pos[j] for j in i1]
    c2 = [pos[j] for j in i2]
    parts = [[], [], []]
    for values, probs in process.enumerate_joint(spec, all_idx, budget=budget):
        a = np.asarray(g1(values[:, c1]), dtype=float)
        b = np.asarray(g2(values[:, c2]), dtype=float)
        parts[0].append(math.fsum(a * b * probs))
        parts[1].append(math.fsum(a * probs))
        parts[2].append(math.fsum(b * probs))
    e12, e1, e2 = (math.fsum(p) for p in parts)
    beta = process.beta_coefficient(spec, gap_m).value
    bound = 8.0 * (len(i1) + len(i2)) * bound1 * bound2 * beta
    return abs(e12 - e1 * e2), bound
