"""Monte Carlo verification harness for the standardized-statistic limit law.

For each n in a grid, N replicate paths are simulated on independent
counter-based streams keyed by (master seed, n, replicate index); the
statistic is computed per replicate, standardized, and compared with the
standard normal law through empirical moments (with delete-block jackknife
standard errors) and the Kolmogorov-Smirnov distance.  A log-log regression
of the measured variances across the grid estimates the variance-growth
exponent and flags degenerate scaling.

Aggregation uses exact compensated sums over the replicate arrays, so
results are identical for serial and parallel schedules.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import process, stats
from .conditions import variance_scaling_estimate
from .errors import ConfigError, SpecError
from .kernels import Kernel

_SQRT2 = math.sqrt(2.0)

VAR_CONDITION_VIOLATED = "variance condition violated"


def normal_cdf(x):
    """Standard normal distribution function Phi via the C-library erfc.

    Absolute error is far below 1e-7 everywhere.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return 0.5 * math.erfc(-float(arr) / _SQRT2)
    flat = arr.ravel()
    out = np.fromiter(
        (0.5 * math.erfc(-v / _SQRT2) for v in flat), dtype=float, count=len(flat)
    )
    return out.reshape(arr.shape)


def normal_moment(k: int) -> float:
    """k-th moment of the standard normal law: 0 for odd k, (k-1)!! for even."""
    if k < 0:
        raise SpecError("moment order must be nonnegative")
    if k % 2 == 1:
        return 0.0
    return float(math.prod(range(k - 1, 0, -2))) if k else 1.0


def ks_distance(sample) -> float:
    """sup_x |F_hat(x) - Phi(x)| evaluated at the sorted sample points."""
    z = np.sort(np.asarray(sample, dtype=float))
    n = len(z)
    if n == 0:
        raise SpecError("sample must be nonempty")
    cdf = normal_cdf(z)
    i = np.arange(1, n + 1, dtype=float)
    d_plus = float(np.max(i / n - cdf))
    d_minus = float(np.max(cdf - (i - 1) / n))
    return max(d_plus, d_minus)


# ---------------------------------------------------------------------------
# Experiment configuration and result


@dataclass(frozen=True)
class ExperimentConfig:
    """One verification run: process x kernel x mode over an n grid.

    ``spec`` may be a single process or a mapping n -> process (the sequence
    law is allowed to change with n).  ``centering`` picks how E and D of the
    statistic are obtained: "exact_oracle" (full enumeration), "estimated"
    (from the replicate pool), or "auto" (exact when affordable).
    """

    spec: process.ProcessSpec | Mapping[int, process.ProcessSpec]
    kernel: Kernel
    mode: str
    n_grid: tuple[int, ...]
    replicates: int
    seed: int
    centering: str = "auto"
    moment_orders: int = 6
    jackknife_blocks: int = 100
    batch_size: int = 128
    oracle_budget: int = 2**22
    kappa_flag_threshold: float = 0.2

    def __post_init__(self):
        if self.mode not in ("U", "V"):
            raise ConfigError("mode must be 'U' or 'V'")
        if self.replicates < 100:
            raise ConfigError("need at least 100 replicates")
        ns = list(self.n_grid)
        if not ns or sorted(ns) != ns or len(set(ns)) != len(ns):
            raise ConfigError("n_grid must be nonempty and strictly increasing")
        if self.centering not in ("auto", "exact_oracle", "estimated"):
            raise ConfigError(f"unknown centering {self.centering!r}")
        if self.moment_orders < 2:
            raise ConfigError("moment_orders must be >= 2")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")

    def spec_for(self, n: int) -> process.ProcessSpec:
        if isinstance(self.spec, Mapping):
            if n not in self.spec:
                raise ConfigError(f"no process spec supplied for n={n}")
            return self.spec[n]
        return self.spec


@dataclass
class PerNResult:
    n: int
    moments: stats.MomentPair       # of the raw statistic
    centering: str
    status: str                     # "ok" | VAR_CONDITION_VIOLATED
    z_moments: list[dict]           # [{"k", "value", "se"}]
    ks: float | None
    seconds: float


@dataclass
class ExperimentResult:
    config_echo: dict
    per_n: list[PerNResult]
    scaling: dict
    trends: dict

    def ks_values(self) -> list[float | None]:
        return [r.ks for r in self.per_n]

    def to_json_dict(self, include_timings: bool = False) -> dict:
        per_n = []
        for r in self.per_n:
            entry = {
                "n": r.n,
                "mean": r.moments.mean,
                "var": r.moments.variance,
                "var_method": r.moments.method,
                "centering": r.centering,
                "status": r.status,
                "moments": r.z_moments,
                "ks": r.ks,
            }
            if include_timings:
                entry["seconds"] = r.seconds
            per_n.append(entry)
        return {
            "config": self.config_echo,
            "per_n": per_n,
            "scaling": self.scaling,
            "trends": self.trends,
        }

    def to_csv_rows(self, include_timings: bool = False):
        k_max = max(
            (len(r.z_moments) for r in self.per_n), default=0
        )
        header = ["n", "mean", "var"] + [f"m{k+1}" for k in range(k_max)] + ["ks"]
        if include_timings:
            header.append("seconds")
        rows = []
        for r in self.per_n:
            vals = [m["value"] for m in r.z_moments]
            vals += [None] * (k_max - len(vals))
            row = [r.n, r.moments.mean, r.moments.variance, *vals, r.ks]
            if include_timings:
                row.append(r.seconds)
            rows.append(row)
        return header, rows


def _simulate_values(
    spec: process.ProcessSpec,
    kernel: Kernel,
    mode: str,
    n: int,
    replicates: int,
    seed: int,
    batch_size: int,
    jobs: int,
) -> np.ndarray:
    """Per-replicate statistic values, batch-deterministic by construction."""
    starts = list(range(0, replicates, batch_size))

    def run_batch(start: int) -> tuple[int, np.ndarray]:
        count = min(batch_size, replicates - start)
        paths = process.sample_paths(spec, n, count, seed, start=start)
        return start, stats.batch_statistic(paths, kernel, mode)

    values = np.empty(replicates)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for start, vals in pool.map(run_batch, starts):
                values[start:start + len(vals)] = vals
    else:
        for start in starts:
            s, vals = run_batch(start)
            values[s:s + len(vals)] = vals
    return values


def _raw_power_sums(values: np.ndarray, k_max: int) -> list[float]:
    return [math.fsum(values**k) for k in range(1, k_max + 1)]


def _standardized_moments_from_sums(
    sums: list[float], count: int, k_max: int
) -> list[float]:
    """Central standardized moments m_1..m_k from raw power sums."""
    raw = [s / count for s in sums]
    mean = raw[0]
    central = [0.0] * (k_max + 1)
    central[0] = 1.0
    for k in range(1, k_max + 1):
        acc = 0.0
        for j in range(k + 1):
            rj = 1.0 if j == 0 else raw[j - 1]
            acc += math.comb(k, j) * rj * (-mean) ** (k - j)
        central[k] = acc
    var = central[2]
    if var <= 0:
        return [0.0] * k_max
    scale = math.sqrt(var)
    return [central[k] / scale**k for k in range(1, k_max + 1)]


def _jackknife_moments(
    values: np.ndarray, k_max: int, blocks: int
) -> tuple[list[float], list[float]]:
    """Standardized moments of the sample with delete-block jackknife SEs."""
    n = len(values)
    blocks = min(blocks, n)
    sums = _raw_power_sums(values, k_max)
    full = _standardized_moments_from_sums(sums, n, k_max)
    bounds = [
        (n * i // blocks, n * (i + 1) // blocks) for i in range(blocks)
    ]
    leave_out = []
    for lo, hi in bounds:
        block_sums = _raw_power_sums(values[lo:hi], k_max)
        rest = [s - bs for s, bs in zip(sums, block_sums)]
        leave_out.append(
            _standardized_moments_from_sums(rest, n - (hi - lo), k_max)
        )
    arr = np.asarray(leave_out)
    ses = np.sqrt((blocks - 1) / blocks * ((arr - arr.mean(axis=0)) ** 2).sum(axis=0))
    return full, [float(s) for s in ses]


def _degenerate_threshold(kernel: Kernel, n: int, mode: str) -> float:
    terms = math.comb(n, kernel.order) if mode == "U" else n**kernel.order
    return 1e-12 * (kernel.bound * terms) ** 2


def run_experiment(
    config: ExperimentConfig,
    jobs: int = 1,
    config_echo: dict | None = None,
) -> ExperimentResult:
    """Run the full grid; deterministic given the configuration.

    Per-n degeneracy (variance below the resolution of the statistic's
    scale) is recorded as a status instead of aborting the remaining grid.
    """
    per_n: list[PerNResult] = []
    measured: list[tuple[int, float]] = []
    for n in config.n_grid:
        t0 = time.perf_counter()
        spec = config.spec_for(n)
        values = _simulate_values(
            spec, config.kernel, config.mode, n,
            config.replicates, config.seed, config.batch_size, max(jobs, 1),
        )
        mc_pair = stats.monte_carlo_moments(values)
        centering = config.centering
        if centering == "auto":
            affordable = True
            try:
                marginal = process.marginal_distribution(spec)
                affordable = (
                    marginal is not None
                    and len(marginal[0]) ** n <= config.oracle_budget
                )
            except Exception:
                affordable = False
            centering = "exact_oracle" if affordable else "estimated"
        if centering == "exact_oracle":
            pair = stats.exact_moments(
                spec,
                stats.StatisticConfig(config.mode, n, config.kernel),
                budget=config.oracle_budget,
            )
        else:
            pair = mc_pair
        if pair.variance <= _degenerate_threshold(config.kernel, n, config.mode):
            per_n.append(PerNResult(
                n=n, moments=pair, centering=centering,
                status=VAR_CONDITION_VIOLATED, z_moments=[], ks=None,
                seconds=time.perf_counter() - t0,
            ))
            continue
        z = (values - pair.mean) / math.sqrt(pair.variance)
        mk, ses = _jackknife_moments(z, config.moment_orders, config.jackknife_blocks)
        per_n.append(PerNResult(
            n=n,
            moments=pair,
            centering=centering,
            status="ok",
            z_moments=[
                {"k": k + 1, "value": mk[k], "se": ses[k]}
                for k in range(config.moment_orders)
            ],
            ks=ks_distance(z),
            seconds=time.perf_counter() - t0,
        ))
        measured.append((n, mc_pair.variance))

    scaling: dict = {"slope": None, "kappa_hat": None, "flagged": None}
    if len(measured) >= 3:
        slope, intercept, resid = variance_scaling_estimate(
            [n for n, _ in measured], [d for _, d in measured]
        )
        kappa_hat = slope - 2 * (config.kernel.order - 1)
        scaling = {
            "slope": slope,
            "intercept": intercept,
            "residual": resid,
            "kappa_hat": kappa_hat,
            "flagged": kappa_hat <= config.kappa_flag_threshold,
        }

    ks_seq = [r.ks for r in per_n if r.ks is not None]
    trends = {
        "ks_strictly_decreasing": _strictly_decreasing(ks_seq),
        "ks_decreasing_top_half": _strictly_decreasing(
            ks_seq[len(ks_seq) // 2:]
        ),
    }
    return ExperimentResult(
        config_echo=config_echo or {},
        per_n=per_n,
        scaling=scaling,
        trends=trends,
    )


def _strictly_decreasing(seq) -> bool:
    return len(seq) >= 2 and all(b < a for a, b in zip(seq, seq[1:]))


# ---------------------------------------------------------------------------
# Threshold evaluation (CI gate for the CLI)


def evaluate_thresholds(result: ExperimentResult, thresholds: dict) -> list[str]:
    """Return human-readable descriptions of violated acceptance thresholds."""
    known = {
        "ks_final_max", "ks_strictly_decreasing", "ks_decreasing_top_half",
        "abs_m3_final_max", "abs_m4_minus_3_final_max", "kappa_hat_min",
        "require_all_nondegenerate",
    }
    unknown = set(thresholds) - known
    if unknown:
        raise ConfigError(f"unknown threshold keys {sorted(unknown)}")
    violations = []
    final = result.per_n[-1]
    ks_seq = [r.ks for r in result.per_n]

    def final_moment(k: int) -> float | None:
        for m in final.z_moments:
            if m["k"] == k:
                return m["value"]
        return None

    if thresholds.get("require_all_nondegenerate"):
        for r in result.per_n:
            if r.status != "ok":
                violations.append(f"n={r.n}: {r.status}")
    if "ks_final_max" in thresholds:
        if final.ks is None or final.ks > thresholds["ks_final_max"]:
            violations.append(
                f"final KS {final.ks!r} exceeds {thresholds['ks_final_max']}"
            )
    if thresholds.get("ks_strictly_decreasing"):
        if None in ks_seq or not _strictly_decreasing(ks_seq):
            violations.append(f"KS sequence {ks_seq} is not strictly decreasing")
    if thresholds.get("ks_decreasing_top_half"):
        half = [k for k in ks_seq if k is not None][len(ks_seq) // 2:]
        if None in ks_seq or not _strictly_decreasing(half):
            violations.append(
                f"KS sequence {ks_seq} is not decreasing over the top half"
            )
    if "abs_m3_final_max" in thresholds:
        m3 = final_moment(3)
        if m3 is None or abs(m3) > thresholds["abs_m3_final_max"]:
            violations.append(f"|m3| = {m3!r} exceeds {thresholds['abs_m3_final_max']}")
    if "abs_m4_minus_3_final_max" in thresholds:
        m4 = final_moment(4)
        if m4 is None or abs(m4 - 3) > thresholds["abs_m4_minus_3_final_max"]:
            violations.append(
                f"|m4 - 3| = {None if m4 is None else abs(m4 - 3)!r} exceeds "
                f"{thresholds['abs_m4_minus_3_final_max']}"
            )
    if "kappa_hat_min" in thresholds:
        kh = result.scaling.get("kappa_hat")
        if kh is None or kh < thresholds["kappa_hat_min"]:
            violations.append(
                f"kappa_hat {kh!r} below {thresholds['kappa_hat_min']}"
            )
    return violations
