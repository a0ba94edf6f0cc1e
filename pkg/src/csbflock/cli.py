"""Command-line entry point.

    csbflock simulate run.ini [--n N] [--seed S] [--t-end T] [--kernel K] [--alpha A] [--model M]
    csbflock scenario fig1 [--seed S] [--n N] ...
    csbflock verify results/fig1-n10-seed42-...

Exit status: 0 all certificates pass, 1 a certificate failed, 2 the
simulation aborted, 3 bad configuration or unreadable input.

Environment: ``CSBFLOCK_OUTPUT_ROOT`` sets where results directories go,
``CSBFLOCK_THREADS`` how many scenarios run in parallel.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from datetime import datetime
from pathlib import Path

from . import experiments
from .config import ConfigError, RunConfig, parse_config, with_overrides
from .output import check_manifest, read_outputs, write_outputs

EXIT_OK, EXIT_CERT, EXIT_ABORT, EXIT_CONFIG = 0, 1, 2, 3


def _add_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, help="number of particles")
    p.add_argument("--seed", type=int, help="random seed for the initial data")
    p.add_argument("--t-end", type=float, dest="t_end", help="final time")
    p.add_argument("--kernel", choices=["singular", "regular"])
    p.add_argument("--alpha", type=float, help="kernel exponent")
    p.add_argument("--model", choices=["original", "simplified"], help="model variant")
    p.add_argument("--output-root", help="parent directory for results (default: $CSBFLOCK_OUTPUT_ROOT or the config)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="csbflock", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a single configuration file")
    sim.add_argument("config")
    _add_overrides(sim)

    scen = sub.add_parser("scenario", help="run a named experiment (fig1, fig2, fig3, fig5, all, ...)")
    scen.add_argument("name")
    _add_overrides(scen)

    ver = sub.add_parser("verify", help="re-evaluate certificates on a results directory")
    ver.add_argument("results_dir")
    return parser


def _overrides(args) -> dict:
    return {
        "n": args.n,
        "seed": args.seed,
        "t_end": args.t_end,
        "kernel": args.kernel,
        "alpha": args.alpha,
        "variant": args.model,
    }


def _output_root(args, config: RunConfig) -> Path:
    return Path(args.output_root or os.environ.get("CSBFLOCK_OUTPUT_ROOT") or config.output_dir)


def _run_dir(root: Path, name: str, seed: int) -> Path:
    stamp = datetime.now().strftime("%Y%m%d-%H%M%S-%f")
    return root / f"{name}-seed{seed}-{stamp}"


def _num(value):
    try:
        return repr(float(value))
    except (TypeError, ValueError):
        return repr(value)


def _report(result) -> None:
    for v in result.verdicts:
        status = "PASS" if v.passed else "FAIL"
        print(f"[{status}] {result.name}: {v.name} value={_num(v.value)} threshold={_num(v.threshold)} {v.detail}".rstrip())


def _status(results) -> int:
    if any(r.aborted for r in results):
        return EXIT_ABORT
    if not all(r.passed for r in results):
        return EXIT_CERT
    return EXIT_OK


def _finish(results, root_for) -> int:
    for result in results:
        _report(result)
        out = _run_dir(root_for(result), result.name, result.record.config.init.seed)
        write_outputs(result.record, result.summary(), out)
        print(f"results: {out}")
    return _status(results)


def cmd_simulate(args) -> int:
    try:
        config = parse_config(Path(args.config).read_text())
        config = with_overrides(config, **_overrides(args))
    except OSError as exc:
        print(f"error: cannot read {args.config}: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = experiments.run_config(config)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return _finish([result], lambda r: _output_root(args, config))


def cmd_scenario(args) -> int:
    try:
        names = experiments.expand(args.name)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_CONFIG
    if args.n is not None and args.name in ("fig1", *experiments.GROUPS["fig1"]):
        names = [f"fig1-n{args.n}"]
    seed = experiments.DEFAULT_SEED if args.seed is None else args.seed
    overrides = {k: v for k, v in _overrides(args).items() if k != "seed"}
    configs = []
    try:
        for name in names:
            config = experiments.build_scenario(name, seed).config()
            config = replace(with_overrides(config, **overrides), scenario=name)
            configs.append(config)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    results = [experiments.run_config(c) for c in configs]
    return _finish(results, lambda r: _output_root(args, r.record.config))


def cmd_verify(args) -> int:
    src = Path(args.results_dir)
    try:
        record, _ = read_outputs(src)
        tampered = check_manifest(src)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: cannot read results in {src}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    cert, verdicts = experiments.evaluate(record)
    result = experiments.ScenarioResult(record.config.scenario or "simulate", record, cert, verdicts)
    _report(result)
    if tampered:
        print(f"[FAIL] manifest: hash mismatch for {', '.join(tampered)}")
    code = _status([result])
    if code == EXIT_OK and tampered:
        code = EXIT_CERT
    return code


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    handler = {"simulate": cmd_simulate, "scenario": cmd_scenario, "verify": cmd_verify}[args.command]
    return handler(args)


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
