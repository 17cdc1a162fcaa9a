"""Strict JSON configuration parsing and deterministic serialization.

Config objects reject unknown keys so typos fail loudly.  All floats are
written with 17 significant digits, which round-trips IEEE doubles and keeps
output files byte-stable across runs.
"""

from __future__ import annotations

import json
import math
from typing import Any

from . import conditions, kernels, mc, process
from .errors import ConfigError


def _take(obj: dict, what: str, required: set[str], optional: set[str]) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{what} must be a JSON object")
    keys = set(obj)
    missing = required - keys
    if missing:
        raise ConfigError(f"{what} is missing keys {sorted(missing)}")
    unknown = keys - required - optional
    if unknown:
        raise ConfigError(f"{what} has unknown keys {sorted(unknown)}")
    return obj


# ---------------------------------------------------------------------------
# Process specs


def parse_process(obj: dict) -> process.ProcessSpec:
    _take(obj, "process", {"kind"}, set(obj) - {"kind"})
    kind = obj["kind"]
    try:
        if kind == "iid_discrete":
            _take(obj, "iid_discrete", {"kind", "alphabet", "probs"}, set())
            return process.IIDDiscrete(obj["alphabet"], obj["probs"])
        if kind == "iid_uniform01":
            _take(obj, "iid_uniform01", {"kind"}, set())
            return process.IIDUniform01()
        if kind == "finite_markov":
            _take(obj, "finite_markov", {"kind", "states", "transition"}, set())
            return process.FiniteMarkov(obj["states"], obj["transition"])
        if kind == "m_dependent_window":
            _take(
                obj, "m_dependent_window",
                {"kind", "window", "base", "map"}, set(),
            )
            map_name = obj["map"]
            if map_name not in process.WINDOW_MAPS:
                raise ConfigError(
                    f"unknown window map {map_name!r}; "
                    f"choose from {sorted(process.WINDOW_MAPS)}"
                )
            return process.MDependentWindow(
                int(obj["window"]),
                parse_process(obj["base"]),
                process.WINDOW_MAPS[map_name],
                map_name=map_name,
            )
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"invalid process spec: {exc}") from exc
    raise ConfigError(f"unknown process kind {kind!r}")


def process_to_json(spec: process.ProcessSpec) -> dict:
    if isinstance(spec, process.IIDDiscrete):
        return {
            "kind": "iid_discrete",
            "alphabet": list(spec.alphabet),
            "probs": list(spec.probs),
        }
    if isinstance(spec, process.IIDUniform01):
        return {"kind": "iid_uniform01"}
    if isinstance(spec, process.FiniteMarkov):
        return {
            "kind": "finite_markov",
            "states": list(spec.states),
            "transition": [list(row) for row in spec.transition],
        }
    if isinstance(spec, process.MDependentWindow):
        return {
            "kind": "m_dependent_window",
            "window": spec.window,
            "base": process_to_json(spec.base),
            "map": spec.map_name,
        }
    raise ConfigError(f"unserializable process spec {type(spec).__name__}")


# ---------------------------------------------------------------------------
# Kernels


def parse_kernel(obj: dict) -> kernels.Kernel:
    _take(obj, "kernel", {"name"}, set(obj) - {"name"})
    params = {k: v for k, v in obj.items() if k != "name"}
    try:
        return kernels.builtin_kernel(obj["name"], **params)
    except Exception as exc:
        raise ConfigError(f"invalid kernel: {exc}") from exc


def kernel_to_json(kernel: kernels.Kernel, params: dict | None = None) -> dict:
    return {"name": kernel.name, **(params or {})}


# ---------------------------------------------------------------------------
# Experiments


def parse_experiment(obj: dict) -> tuple[mc.ExperimentConfig, dict, dict]:
    """Parse a verify-clt config; returns (config, thresholds, echo dict)."""
    _take(
        obj, "experiment",
        {"kernel", "mode", "n_grid", "replicates", "seed"},
        {"process", "process_per_n", "centering", "moment_orders",
         "thresholds", "kappa_flag_threshold", "batch_size"},
    )
    if ("process" in obj) == ("process_per_n" in obj):
        raise ConfigError("provide exactly one of process / process_per_n")
    if "process" in obj:
        spec = parse_process(obj["process"])
    else:
        table = obj["process_per_n"]
        if not isinstance(table, dict):
            raise ConfigError("process_per_n must map n to process specs")
        spec = {}
        for key, sub in table.items():
            try:
                n_key = int(key)
            except ValueError as exc:
                raise ConfigError(f"process_per_n key {key!r} is not an n") from exc
            spec[n_key] = parse_process(sub)
    kernel = parse_kernel(obj["kernel"])
    thresholds = obj.get("thresholds", {})
    if not isinstance(thresholds, dict):
        raise ConfigError("thresholds must be a JSON object")
    try:
        config = mc.ExperimentConfig(
            spec=spec,
            kernel=kernel,
            mode=obj["mode"],
            n_grid=tuple(int(n) for n in obj["n_grid"]),
            replicates=int(obj["replicates"]),
            seed=int(obj["seed"]),
            centering=obj.get("centering", "auto"),
            moment_orders=int(obj.get("moment_orders", 6)),
            batch_size=int(obj.get("batch_size", 128)),
            kappa_flag_threshold=float(obj.get("kappa_flag_threshold", 0.2)),
        )
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"invalid experiment config: {exc}") from exc
    return config, thresholds, dict(obj)


# ---------------------------------------------------------------------------
# Rate models


def _parse_h(obj: dict):
    _take(obj, "h", {"kind"}, set(obj) - {"kind"})
    kind = obj["kind"]
    if kind == "log":
        _take(obj, "h log", {"kind"}, set())
        return conditions.h_log
    if kind == "power":
        _take(obj, "h power", {"kind"}, {"exponent", "scale"})
        exponent = float(obj.get("exponent", 0.5))
        scale = float(obj.get("scale", 1.0))
        return lambda t: conditions.h_power(t, exponent=exponent, scale=scale)
    if kind == "constant":
        _take(obj, "h constant", {"kind"}, {"value"})
        value = float(obj.get("value", 1.0))
        return lambda t: conditions.h_constant(t, value=value)
    raise ConfigError(f"unknown h kind {kind!r}")


def parse_rate_model(obj: dict) -> conditions.RateModel:
    _take(obj, "model", {"r", "bound", "b0", "variance", "beta"}, set())
    var = obj["variance"]
    _take(var, "variance", {"kind"}, set(var) - {"kind"})
    c = kappa = None
    measured = None
    if var["kind"] == "parametric":
        _take(var, "variance parametric", {"kind", "C", "kappa"}, set())
        c, kappa = float(var["C"]), float(var["kappa"])
    elif var["kind"] == "measured":
        _take(var, "variance measured", {"kind", "values"}, set())
        try:
            measured = {int(k): float(v) for k, v in var["values"].items()}
        except (AttributeError, ValueError) as exc:
            raise ConfigError("measured variance must map n to D") from exc
    else:
        raise ConfigError(f"unknown variance kind {var['kind']!r}")
    beta_obj = obj["beta"]
    _take(beta_obj, "beta", {"kind"}, set(beta_obj) - {"kind"})
    if beta_obj["kind"] == "power_h":
        _take(beta_obj, "beta power_h", {"kind", "h"}, set())
        h = _parse_h(beta_obj["h"])
        beta = conditions.beta_from_h(h)
    elif beta_obj["kind"] == "process":
        _take(beta_obj, "beta process", {"kind", "process"}, set())
        spec = parse_process(beta_obj["process"])
        beta = lambda t: process.beta_coefficient(spec, t).value
        h = conditions.h_from_process(spec)
    else:
        raise ConfigError(f"unknown beta kind {beta_obj['kind']!r}")
    try:
        return conditions.RateModel(
            r=int(obj["r"]),
            bound=float(obj["bound"]),
            b0=float(obj["b0"]),
            beta=beta,
            h=h,
            variance_c=c,
            variance_kappa=kappa,
            measured_variance=measured,
        )
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"invalid rate model: {exc}") from exc


# ---------------------------------------------------------------------------
# Deterministic serialization


def format_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        raise ConfigError(f"cannot serialize non-finite float {x!r}")
    return format(x, ".17g")


def dumps_canonical(obj: Any, indent: int = 0) -> str:
    """JSON text with floats at 17 significant digits, insertion-ordered keys."""
    pad = " " * indent
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, float):
        return format_float(obj)
    if isinstance(obj, (int, str)):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ",\n".join(
            f'{pad}  {json.dumps(str(k))}: {dumps_canonical(v, indent + 2)}'
            for k, v in obj.items()
        )
        return "{\n" + items + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = ",\n".join(
            f"{pad}  {dumps_canonical(v, indent + 2)}" for v in obj
        )
        return "[\n" + items + "\n" + pad + "]"
    # numpy scalars and similar
    if hasattr(obj, "item"):
        return dumps_canonical(obj.item(), indent)
    raise ConfigError(f"cannot serialize {type(obj).__name__}")


def write_json(path, obj: Any) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_canonical(obj))
        fh.write("\n")


def format_cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format_float(v)
    return str(v)


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_cell(v) for v in row) + "\n")


def load_json(path) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
