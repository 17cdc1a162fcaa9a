"""Command-line front end.

One JSON config file per run; flags only override the seed, output
directory, job count, and verbosity, and every run echoes its fully
resolved config into the output directory.  Exit codes: 0 success,
2 config error, 3 acceptance-threshold failure, 4 enumeration budget
exceeded.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import config as cfg
from . import conditions, depgraph, mc, process, stats
from .errors import BudgetExceededError, ConfigError, UvstatError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ACCEPTANCE = 3
EXIT_BUDGET = 4


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo(args, config_obj: dict) -> dict:
    echo = dict(config_obj)
    if args.seed is not None:
        echo["seed"] = args.seed
    return echo


def _resolved_seed(args, obj: dict, default=None):
    if args.seed is not None:
        return args.seed
    if "seed" in obj:
        return int(obj["seed"])
    if default is not None:
        return default
    raise ConfigError("no seed in config and no --seed override")


def cmd_beta(args) -> int:
    obj = cfg.load_json(args.config)
    parsed = cfg._take(obj, "beta config", {"process", "t_max"}, set())
    spec = cfg.parse_process(parsed["process"])
    t_max = int(parsed["t_max"])
    if t_max < 1:
        raise ConfigError("t_max must be >= 1")
    out = _out_dir(args)
    rows = process.BetaProfile(spec).values(t_max)
    cfg.write_csv(out / "beta.csv", ["t", "beta", "exactness"], rows)
    cfg.write_json(out / "run.json", {"command": "beta", "config": _echo(args, obj)})
    if args.verbose:
        print(f"wrote {out / 'beta.csv'}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    obj = cfg.load_json(args.config)
    parsed = cfg._take(obj, "simulate config", {"process", "n"}, {"seed"})
    spec = cfg.parse_process(parsed["process"])
    n = int(parsed["n"])
    seed = _resolved_seed(args, parsed)
    path = process.sample_path(spec, n, seed)
    out = _out_dir(args)
    cfg.write_csv(
        out / "path.csv", ["t", "value"],
        [(t + 1, float(x)) for t, x in enumerate(path)],
    )
    echo = _echo(args, obj)
    echo["seed"] = seed
    cfg.write_json(out / "run.json", {"command": "simulate", "config": echo})
    return EXIT_OK


def cmd_stat(args) -> int:
    obj = cfg.load_json(args.config)
    parsed = cfg._take(
        obj, "stat config", {"process", "kernel", "mode", "n"}, {"seed"}
    )
    spec = cfg.parse_process(parsed["process"])
    kernel = cfg.parse_kernel(parsed["kernel"])
    n = int(parsed["n"])
    seed = _resolved_seed(args, parsed)
    sc = stats.StatisticConfig(parsed["mode"], n, kernel)
    path = process.sample_path(spec, n, seed)
    value = (
        stats.u_statistic(path, kernel)
        if sc.mode == "U"
        else stats.v_statistic(path, kernel)
    )
    result = {
        "command": "stat",
        "config": {**_echo(args, obj), "seed": seed},
        "n": n,
        "mode": sc.mode,
        "value": value,
    }
    if sc.mode == "U":
        result["classical"] = stats.classical_u(path, kernel)
    out = _out_dir(args)
    cfg.write_json(out / "stat.json", result)
    return EXIT_OK


def cmd_oracle(args) -> int:
    obj = cfg.load_json(args.config)
    parsed = cfg._take(
        obj, "oracle config", {"process", "kernel", "mode", "n"}, {"budget"}
    )
    spec = cfg.parse_process(parsed["process"])
    kernel = cfg.parse_kernel(parsed["kernel"])
    sc = stats.StatisticConfig(parsed["mode"], int(parsed["n"]), kernel)
    budget = int(parsed.get("budget", 2**22))
    pair = stats.exact_moments(spec, sc, budget=budget)
    out = _out_dir(args)
    cfg.write_csv(
        out / "oracle.csv", ["n", "mode", "mean", "variance", "method"],
        [(sc.n, sc.mode, pair.mean, pair.variance, pair.method)],
    )
    cfg.write_json(out / "oracle.json", {
        "command": "oracle",
        "config": _echo(args, obj),
        "mean": pair.mean,
        "variance": pair.variance,
        "method": pair.method,
    })
    return EXIT_OK


def cmd_graph_audit(args) -> int:
    obj = cfg.load_json(args.config)
    parsed = cfg._take(
        obj, "graph-audit config",
        {"n_values", "r_values", "m_values"}, {"modes", "budget"},
    )
    modes = parsed.get("modes", ["U", "V"])
    budget = int(parsed.get("budget", depgraph.DEFAULT_ENUMERATION_BUDGET))
    rows = []
    for mode in modes:
        for r in parsed["r_values"]:
            for n in parsed["n_values"]:
                if mode == "U" and n < r:
                    continue
                for m in parsed["m_values"]:
                    spec = depgraph.GraphSpec(int(n), int(r), int(m), mode)
                    verts, counts = depgraph.neighborhood_counts_all(
                        spec, budget=budget
                    )
                    bound = depgraph.neighborhood_bound(spec)
                    for v, c in zip(verts, counts):
                        rows.append((
                            mode, n, r, m,
                            "|".join(str(int(j)) for j in v),
                            int(c), float(bound), float(c / bound),
                        ))
    out = _out_dir(args)
    cfg.write_csv(
        out / "graph_audit.csv",
        ["mode", "n", "r", "m", "vertex", "exact_count", "bound", "ratio"],
        rows,
    )
    cfg.write_json(out / "run.json", {"command": "graph-audit",
                                      "config": _echo(args, obj)})
    return EXIT_OK


def cmd_conditions(args) -> int:
    obj = cfg.load_json(args.config)
    parsed = cfg._take(
        obj, "conditions config",
        {"model", "n_grid", "b_grid"}, {"R", "threshold"},
    )
    model = cfg.parse_rate_model(parsed["model"])
    report = conditions.theorem2_check(
        model,
        parsed["n_grid"],
        parsed["b_grid"],
        R=int(parsed.get("R", 1)),
        threshold=float(parsed.get("threshold", 0.1)),
    )
    out = _out_dir(args)
    doc = report.to_json_dict()
    doc["config"] = _echo(args, obj)
    cfg.write_json(out / "conditions.json", doc)
    cfg.write_csv(
        out / "conditions.csv",
        ["n", "b", "m_n", "T1", "T2", "S1", "S2", "verdict"],
        [
            (row["n"], row["b"], row["m_n"], row["T1"], row["T2"],
             row["S1"], row["S2"], report.verdict)
            for row in report.rows
        ],
    )
    if args.verbose:
        print(f"verdict: {report.verdict}")
        for w in report.warnings:
            print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def cmd_verify_clt(args) -> int:
    obj = cfg.load_json(args.config)
    experiment, thresholds, echo = cfg.parse_experiment(obj)
    echo = _echo(args, echo)
    if args.seed is not None:
        experiment = mc.ExperimentConfig(
            **{**experiment.__dict__, "seed": args.seed}
        )
        echo["seed"] = args.seed
    if args.dry_run:
        print(cfg.dumps_canonical({
            "command": "verify-clt",
            "resolved_config": echo,
            "plan": [
                {"n": n, "replicates": experiment.replicates}
                for n in experiment.n_grid
            ],
        }))
        return EXIT_OK
    result = mc.run_experiment(experiment, jobs=args.jobs, config_echo=echo)
    out = _out_dir(args)
    doc = result.to_json_dict(include_timings=args.timings)
    violations = mc.evaluate_thresholds(result, thresholds)
    doc["violations"] = violations
    cfg.write_json(out / "report.json", doc)
    header, rows = result.to_csv_rows(include_timings=args.timings)
    cfg.write_csv(out / "report.csv", header, rows)
    cfg.write_csv(
        out / "ks.csv", ["n", "ks"],
        [(r.n, r.ks) for r in result.per_n],
    )
    cfg.write_csv(
        out / "m4.csv", ["n", "abs_m4_minus_3"],
        [
            (r.n,
             abs(next((m["value"] for m in r.z_moments if m["k"] == 4), float("nan")) - 3)
             if r.z_moments else None)
            for r in result.per_n
        ],
    )
    if violations:
        for v in violations:
            print(f"violation: {v}", file=sys.stderr)
        return EXIT_ACCEPTANCE
    return EXIT_OK


COMMANDS = {
    "beta": cmd_beta,
    "simulate": cmd_simulate,
    "stat": cmd_stat,
    "oracle": cmd_oracle,
    "graph-audit": cmd_graph_audit,
    "conditions": cmd_conditions,
    "verify-clt": cmd_verify_clt,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uvstat",
        description="U/V-statistics of mixing sequences: bounds, rate "
                    "conditions, and Monte Carlo limit-law verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="path to the JSON run configuration")
        p.add_argument("--out-dir", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel worker threads (replicates)")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "verify-clt":
            p.add_argument("--dry-run", action="store_true",
                           help="print the resolved plan and exit")
            p.add_argument("--timings", action="store_true",
                           help="include wall-clock seconds in outputs "
                                "(breaks byte-reproducibility)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except BudgetExceededError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConfigError, UvstatError, ValueError, KeyError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
