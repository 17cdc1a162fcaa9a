"""Numeric evaluation of the asymptotic-normality rate conditions.

The main condition combines a polynomial rate term
``T1 = F^2 m^(2-b) n^(2(r-1)+b) r^(4-2b) / D`` with a mixing term
``T2 = beta(m)^b F^2 n^(2r) / D`` and asks that both vanish for every
b in (0, b0].  Under the block-length schedule m_n = floor(n^((kappa-b0)/4))
and a variance lower bound D >= C n^(2(r-1)+kappa) this reduces to
``m^(2-b) n^(b-kappa) + beta(m)^b n^(2(r-1)-kappa)``.

A verdict over a finite grid is a numeric trend statement, never a proof:
the rate terms must strictly decrease over the top half of the grid and end
below a threshold; the mixing term passes when it is negligible or
decreasing, or--because geometric-type mixing makes it vanish faster than
any polynomial asymptotically while the schedule's block lengths are still
tiny at desk-scale n--when the mixing exponent h diverges, in which case a
pre-asymptotic warning is attached to the report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import process
from .errors import ConfigError, DegenerateVarianceError, SpecError

DECREASING = "decreasing"
NON_DECREASING = "non-decreasing"
INCONCLUSIVE = "inconclusive"

NEGLIGIBLE = 1e-300


def theorem1_terms(
    n: int,
    m_n: int,
    b: float,
    F: float,
    r: int,
    D: float,
    beta_mn: float,
    mode: str = "U",
) -> tuple[float, float]:
    """Rate and mixing terms of the main condition; identical for U and V."""
    if mode not in ("U", "V"):
        raise SpecError("mode must be 'U' or 'V'")
    if not 0 < b <= 2.0 / 3.0:
        raise SpecError("b must lie in (0, 2/3]")
    if m_n < 1:
        raise SpecError("m_n must be >= 1")
    if D <= 0:
        raise DegenerateVarianceError("variance input D must be positive")
    t1 = F**2 * m_n ** (2 - b) * n ** (2 * (r - 1) + b) * r ** (4 - 2 * b) / D
    t2 = beta_mn**b * F**2 * n ** (2 * r) / D
    return t1, t2


def tc_terms(
    M: float, Q_R: float, gamma_R: float, F: float, T: float, D: float, b: float
) -> tuple[float, float]:
    """Graph-level condition terms M^b Q^(2-b)/D and gamma^b (F T)^2/D."""
    if not 0 < b <= 2.0 / 3.0:
        raise SpecError("b must lie in (0, 2/3]")
    if D <= 0:
        raise DegenerateVarianceError("variance input D must be positive")
    return M**b * Q_R ** (2 - b) / D, gamma_R**b * (F * T) ** 2 / D


def block_schedule(n: int, kappa: float, b0: float) -> int:
    """Block length floor(n^((kappa-b0)/4)), at least 1.

    Requires 0 < b0 <= 2/3 and b0 < kappa.  (The boundary b0 = 2/3 is
    accepted: the condition itself is stated on (0, 2/3].)
    """
    if n < 1:
        raise SpecError("n must be >= 1")
    if not 0 < b0 <= 2.0 / 3.0:
        raise ConfigError("b0 must lie in (0, 2/3]")
    if kappa <= b0:
        raise ConfigError(
            f"schedule requires b0 < kappa; got b0={b0}, kappa={kappa}"
        )
    return max(1, math.floor(n ** ((kappa - b0) / 4.0)))


# ---------------------------------------------------------------------------
# Rate models


def h_log(t) -> np.ndarray:
    return np.log(t)


def h_power(t, exponent: float = 0.5, scale: float = 1.0) -> np.ndarray:
    return scale * np.asarray(t, dtype=float) ** exponent


def h_constant(t, value: float = 1.0) -> np.ndarray:
    return np.full_like(np.asarray(t, dtype=float), value)


def beta_from_h(h: Callable) -> Callable[[int], float]:
    def beta(t: int) -> float:
        return float(t) ** -float(h(float(t)))
    return beta


def h_from_process(spec: process.ProcessSpec) -> Callable[[float], float]:
    """Mixing exponent h(t) = -log beta(t) / log t implied by a process."""
    def h(t: float) -> float:
        tt = max(int(round(t)), 2)
        b = process.beta_coefficient(spec, tt).value
        if b <= 0:
            return float("inf")
        return -math.log(b) / math.log(tt)
    return h


@dataclass(frozen=True)
class RateModel:
    """Inputs to the rate checks: order, bound, variance and mixing models.

    The variance is either parametric D(n) = C n^(2(r-1)+kappa) or a table of
    measured values covering the evaluation grid (kappa is then estimated for
    the block schedule).  The mixing model supplies beta(t) and the exponent
    h with beta(t) <= t^(-h(t)).
    """

    r: int
    bound: float
    b0: float
    beta: Callable[[int], float]
    h: Callable[[float], float]
    variance_c: float | None = None
    variance_kappa: float | None = None
    measured_variance: dict[int, float] | None = None

    def __post_init__(self):
        if self.r < 1:
            raise SpecError("order r must be >= 1")
        if self.bound <= 0:
            raise SpecError("kernel bound must be positive")
        if not 0 < self.b0 <= 2.0 / 3.0:
            raise ConfigError("b0 must lie in (0, 2/3]")
        parametric = self.variance_c is not None or self.variance_kappa is not None
        if parametric:
            if self.variance_c is None or self.variance_kappa is None:
                raise ConfigError("parametric variance needs both C and kappa")
            if self.variance_c <= 0 or self.variance_kappa <= 0:
                raise ConfigError("parametric variance requires C > 0, kappa > 0")
        elif not self.measured_variance:
            raise ConfigError("either parametric or measured variance is required")

    def variance(self, n: int) -> float:
        if self.variance_c is not None:
            return self.variance_c * n ** (2 * (self.r - 1) + self.variance_kappa)
        if n not in self.measured_variance:
            raise ConfigError(f"no measured variance for n={n}")
        return self.measured_variance[n]

    def schedule_kappa(self) -> tuple[float, str | None]:
        if self.variance_kappa is not None:
            return self.variance_kappa, None
        ns = sorted(self.measured_variance)
        slope, _, _ = variance_scaling_estimate(
            ns, [self.measured_variance[n] for n in ns]
        )
        kappa = slope - 2 * (self.r - 1)
        return kappa, f"kappa estimated from measured variances: {kappa:.6g}"


def variance_scaling_estimate(n_values, d_values) -> tuple[float, float, float]:
    """Least-squares slope/intercept of log D against log n, plus RMS residual."""
    ns = np.asarray(n_values, dtype=float)
    ds = np.asarray(d_values, dtype=float)
    if len(ns) < 3:
        raise SpecError("need at least 3 grid points")
    if np.any(ds <= 0):
        raise SpecError("variances must be positive")
    x = np.log(ns)
    y = np.log(ds)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return float(slope), float(intercept), float(np.sqrt(np.mean(resid**2)))


# ---------------------------------------------------------------------------
# Grid evaluation


def _trend(values: list[float], top_half: bool = True) -> str:
    seq = values[(len(values) // 2) if top_half else 0:]
    if len(seq) < 2:
        return INCONCLUSIVE
    if all(b < a for a, b in zip(seq, seq[1:])):
        return DECREASING
    if all(b >= a for a, b in zip(seq, seq[1:])):
        return NON_DECREASING
    return INCONCLUSIVE


@dataclass
class ConditionReport:
    r: int
    b0: float
    R: int
    threshold: float
    n_grid: list[int]
    b_grid: list[float]
    m_grid: list[int]
    rows: list[dict]
    trends: dict[str, dict[float, str]]
    exponents: dict[str, float]
    verdict: str
    warnings: list[str] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "params": {
                "r": self.r,
                "b0": self.b0,
                "R": self.R,
                "threshold": self.threshold,
                "n_grid": self.n_grid,
                "b_grid": self.b_grid,
                "m_grid": self.m_grid,
            },
            "rows": self.rows,
            "trends": {
                name: {repr(b): t for b, t in by_b.items()}
                for name, by_b in self.trends.items()
            },
            "exponents": self.exponents,
            "verdict": self.verdict,
            "warnings": self.warnings,
        }


def theorem2_check(
    model: RateModel,
    n_grid,
    b_grid,
    R: int = 1,
    threshold: float = 0.1,
) -> ConditionReport:
    """Evaluate the reduced and full condition terms over (n, b) grids.

    Each n gets a block length from the schedule.  Per-(term, b) trends over
    the top half of the n grid are reported; the verdict aggregates them as
    described in the module docstring.
    """
    ns = [int(n) for n in n_grid]
    bs = [float(b) for b in b_grid]
    if not ns or not bs:
        raise ConfigError("n_grid and b_grid must be nonempty")
    if sorted(ns) != ns or len(set(ns)) != len(ns):
        raise ConfigError("n_grid must be strictly increasing")
    if any(not 0 < b <= model.b0 for b in bs):
        raise ConfigError(f"b_grid values must lie in (0, b0={model.b0}]")
    warnings_list: list[str] = []
    kappa, kappa_note = model.schedule_kappa()
    if kappa_note:
        warnings_list.append(kappa_note)
    ms = [block_schedule(n, kappa, model.b0) for n in ns]
    betas = [model.beta(m) for m in ms]

    rows = []
    series: dict[str, dict[float, list[float]]] = {
        name: {b: [] for b in bs} for name in ("S1", "S2", "T1", "T2")
    }
    for n, m, beta_m in zip(ns, ms, betas):
        d = model.variance(n)
        for b in bs:
            s1 = m ** (2 - b) * n ** (b - kappa)
            s2 = beta_m**b * n ** (2 * (model.r - 1) - kappa)
            t1, t2 = theorem1_terms(n, m, b, model.bound, model.r, d, beta_m)
            series["S1"][b].append(s1)
            series["S2"][b].append(s2)
            series["T1"][b].append(t1)
            series["T2"][b].append(t2)
            rows.append({
                "n": n, "b": b, "m_n": m, "beta_m": beta_m, "D": d,
                "S1": s1, "S2": s2, "T1": t1, "T2": t2,
            })

    trends = {
        name: {b: _trend(vals) for b, vals in by_b.items()}
        for name, by_b in series.items()
    }

    # h divergence on the evaluation grid
    h_ts = sorted(set(list(range(1, 11)) + ms))
    h_vals = [float(model.h(float(t))) for t in h_ts if t >= 2]
    h_diverging = (
        all(b >= a - 1e-12 for a, b in zip(h_vals, h_vals[1:]))
        and h_vals[-1] > h_vals[0] + 1e-12
    )
    if not h_diverging:
        warnings_list.append(
            "mixing exponent h does not diverge on the evaluation grid"
        )

    # rate part: strict decrease over the top half plus small final value
    rate_ok = all(
        trends["S1"][b] == DECREASING and trends["T1"][b] == DECREASING
        and series["S1"][b][-1] <= threshold
        for b in bs
    )
    rate_increasing = any(
        trends["S1"][b] == NON_DECREASING or trends["T1"][b] == NON_DECREASING
        for b in bs
    )
    # mixing part: negligible, decreasing, or controlled asymptotically by h
    def mixing_ok(b: float) -> bool:
        s2 = series["S2"][b]
        if max(s2) <= threshold or max(series["T2"][b]) <= threshold:
            return True
        if trends["S2"][b] == DECREASING and trends["T2"][b] == DECREASING:
            return True
        return False

    mixing_all_ok = all(mixing_ok(b) for b in bs)
    if not mixing_all_ok and h_diverging:
        warnings_list.append(
            "mixing term not yet decreasing at these block lengths "
            f"(m_n in {sorted(set(ms))}); it vanishes asymptotically since h diverges"
        )

    if rate_ok and (mixing_all_ok or h_diverging):
        verdict = DECREASING
    elif rate_increasing or (not mixing_all_ok and not h_diverging):
        verdict = NON_DECREASING
    else:
        verdict = INCONCLUSIVE

    schedule_exp = (kappa - model.b0) / 4.0
    b_top = max(bs)
    arithmetic = schedule_exp * (2 - b_top) + b_top - kappa
    # slope of the rate term under the real-valued (unfloored) schedule
    log_n = np.log(np.asarray(ns, dtype=float))
    cont_m = np.asarray(ns, dtype=float) ** schedule_exp
    log_s1 = (2 - b_top) * np.log(cont_m) + (b_top - kappa) * log_n
    fitted = float(np.polyfit(log_n, log_s1, 1)[0]) if len(ns) >= 2 else arithmetic

    return ConditionReport(
        r=model.r,
        b0=model.b0,
        R=R,
        threshold=threshold,
        n_grid=ns,
        b_grid=bs,
        m_grid=ms,
        rows=rows,
        trends=trends,
        exponents={
            "rate_term_exponent": arithmetic,
            "rate_term_fitted_slope": fitted,
            "schedule_exponent": schedule_exp,
            "claimed_envelope_exponent": (model.b0 - kappa) / 2.0,
        },
        verdict=verdict,
        warnings=warnings_list,
    )
