"""Command-line front end: ``mlbp gen | run | audit | plot | schema``.

Exit codes: 0 success, 1 runtime failure (e.g. the ADMM reference did not
converge), 2 configuration error, 3 bound audit failed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .datagen import GenerationError, InstanceSpec, generate_instance
from .experiments import (
    CONFIG_SCHEMA,
    ConfigError,
    ExperimentConfig,
    ReferenceNotConverged,
    run_bound_audit,
    run_experiment,
)
from .svg import plot_csv

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_AUDIT = 0, 1, 2, 3


def _out_dir(args, config):
    out = args.out or config.output_dir
    if out is None:
        raise ConfigError("no output directory: pass --out or set output_dir in the config")
    return Path(out)


def cmd_gen(args) -> int:
    try:
        doc = json.loads(Path(args.spec).read_text())
        spec = InstanceSpec.from_dict(doc)
    except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad instance spec {args.spec}: {exc}") from exc
    inst = generate_instance(spec)
    path = inst.save(args.out)
    print(f"wrote instance seed={spec.seed} to {path}")
    return EXIT_OK


def _print_audit(result) -> None:
    header = result.summary["header"]
    idx = {h: i for i, h in enumerate(header)}
    for r in result.summary["rows"]:
        status = "PASS" if r[idx["pass"]] else "FAIL"
        print(
            f"{status} trial={r[idx['trial']]} mu_factor={r[idx['mu_factor']]:.4g} eps={r[idx['eps']]:.1e} "
            f"gap={r[idx['gap']]:.3e} bound={r[idx['bound']]:.3e} slack={r[idx['slack']]:.3e}"
        )
    verdict = "PASS" if result.passed else "FAIL"
    print(f"bound audit {verdict}: min slack {result.summary['min_slack']:.3e}")


def cmd_run(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    out = _out_dir(args, config)
    result = run_experiment(config, out)
    for p in result.tables + result.figures:
        print(p)
    if config.kind == "bound-audit":
        _print_audit(result)
        return EXIT_OK if result.passed else EXIT_AUDIT
    return EXIT_OK


def cmd_audit(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    if config.kind != "bound-audit":
        raise ConfigError(f"audit needs a bound-audit config, got kind {config.kind!r}")
    out = args.out or config.output_dir
    result = run_bound_audit(config, out)
    _print_audit(result)
    return EXIT_OK if result.passed else EXIT_AUDIT


def _log_flag(v):
    return {"auto": "auto", "on": True, "off": False}[v]


def cmd_plot(args) -> int:
    y = args.y.split(",") if args.y else None
    try:
        path = plot_csv(args.csv, args.out, x=args.x, y=y, logx=_log_flag(args.logx), logy=_log_flag(args.logy),
                        title=args.title)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    print(path)
    return EXIT_OK


def cmd_schema(args) -> int:
    width = max(len(k) for k in CONFIG_SCHEMA)
    for k, v in CONFIG_SCHEMA.items():
        print(f"{k.ljust(width)}  {v}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mlbp", description="Multi-layer basis pursuit experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic instance")
    g.add_argument("--spec", required=True, help="JSON file with InstanceSpec fields")
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("--config", required=True)
    r.add_argument("--out", help="output directory (default: output_dir from the config)")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("audit", help="run a bound-audit config and report PASS/FAIL")
    a.add_argument("--config", required=True)
    a.add_argument("--out", help="also write the audit table here")
    a.set_defaults(func=cmd_audit)

    pl = sub.add_parser("plot", help="draw an SVG line chart from a CSV table")
    pl.add_argument("--csv", required=True)
    pl.add_argument("--out", required=True)
    pl.add_argument("--x", help="x column (default: first numeric column)")
    pl.add_argument("--y", help="comma-separated y columns (default: all other numeric columns)")
    pl.add_argument("--logx", choices=("auto", "on", "off"), default="auto")
    pl.add_argument("--logy", choices=("auto", "on", "off"), default="auto")
    pl.add_argument("--title")
    pl.set_defaults(func=cmd_plot)

    s = sub.add_parser("schema", help="print the experiment config keys")
    s.set_defaults(func=cmd_schema)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ReferenceNotConverged, GenerationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
