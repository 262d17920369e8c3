"""Command line interface: python -m minmax_surfaces <command>."""

from __future__ import annotations

import argparse
import logging
from pathlib import Path
import sys
from typing import Any

import numpy as np

from . import __version__
from .ambient import load_domain
from .artifacts import dumps, family_from_jsonl, read_csv, read_json, write_json
from .comb import run_harness
from .config_flow import ScenarioConfigFlow, load_config
from .const import (
    CONF_DIAGNOSTICS,
    CONF_DOMAIN,
    CONSTRAINED,
    DEFAULT_THREADS,
    EXIT_ASSERTION,
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_RUNTIME,
    UNCONSTRAINED,
)
from .coordinator import probe_point, resolve_output_dir, run_scenario
from .exceptions import ArtifactError, ConfigError, MinMaxError
from .parallel import set_thread_limit
from .plots import csv_plot
from .sweepout import minmax_report
from .tighten import class_for_mode
from .varifold import boundary_report, density_profiles, second_variation_spectrum, to_varifold, wedge_check

_LOGGER = logging.getLogger(__name__)


def _parse_args(argv: list[str] | None) -> argparse.Namespace:
    # options repeated after the subcommand must not reset the global values
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", default=argparse.SUPPRESS, help="logging level (default INFO)")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker cap")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")

    parser = argparse.ArgumentParser(prog="minmax_surfaces", description="Min-max solver for minimal hypersurfaces")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default="INFO", help="logging level (default INFO)")
    parser.add_argument("--threads", type=int, default=DEFAULT_THREADS, help="worker cap")
    parser.add_argument("--out", default=None, help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="run a scenario end to end")
    run.add_argument("--config", required=True, help="scenario JSON file")

    validate = sub.add_parser("validate-config", parents=[common], help="validate a scenario file")
    validate.add_argument("--config", required=True, help="scenario JSON file")

    comb = sub.add_parser("comb-test", parents=[common], help="combinatorial lemma harness")
    comb.add_argument("--seed", type=int, default=0)
    comb.add_argument("--instances", type=int, default=100)
    comb.add_argument("--p", type=int, choices=[1, 2], default=1)
    comb.add_argument("--kind", choices=["interval", "ball"], default="interval")

    diagnose = sub.add_parser("diagnose", parents=[common], help="varifold diagnostics of a stored family")
    diagnose.add_argument("--slices", required=True, help="slices.jsonl")
    diagnose.add_argument("--config", required=True, help="scenario JSON file")

    plot = sub.add_parser("plot", help="render a CSV profile as SVG")
    plot.add_argument("--csv", required=True)
    plot.add_argument("--out", dest="svg", required=True, help="SVG file")
    plot.add_argument("--title", default=None)
    plot.add_argument("--log-level", default=argparse.SUPPRESS)
    return parser.parse_args(argv)


def _cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    report = run_scenario(config, args.out)
    for assertion in report.assertions:
        print(f"{'PASS' if assertion.passed else 'FAIL'} {assertion.name}: {assertion.value} (target {assertion.target})")
    print(f"m0 = {report.critical['mass']:.9g}; report in {resolve_output_dir(config, args.out) / 'report.json'}")
    return EXIT_OK if report.passed else EXIT_ASSERTION


def _cmd_validate(args: argparse.Namespace) -> int:
    try:
        user_input = _read_json_object(args.config)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    config, errors = ScenarioConfigFlow.validate(user_input)
    if config is None:
        print(f"error: {errors['base']} at '{errors.get('path', '')}': {errors.get('message', '')}", file=sys.stderr)
        return EXIT_CONFIG
    print(dumps(config))
    return EXIT_OK


def _read_json_object(path: str) -> dict[str, Any]:
    try:
        data = read_json(path)
    except ArtifactError as err:
        raise ConfigError(str(err)) from err
    if not isinstance(data, dict):
        raise ConfigError("Config must be a JSON object")
    return data


def _cmd_comb(args: argparse.Namespace) -> int:
    report = run_harness(args.seed, args.instances, args.p, args.kind)
    print(dumps(report.to_dict()))
    return EXIT_OK if report.passed else EXIT_ASSERTION


def _cmd_diagnose(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    domain = load_domain(config[CONF_DOMAIN])
    family = family_from_jsonl(args.slices)
    report = minmax_report(domain, family)
    critical = family[report.argmax_t]
    cls = class_for_mode(family.mode)
    cfg = config[CONF_DIAGNOSTICS]
    result: dict[str, Any] = {"t": list(report.argmax_t), "mass": report.m0, "boundary": boundary_report(domain, critical).to_dict()}
    if family.mode == CONSTRAINED and not domain.gamma.is_empty:
        result["wedge"] = wedge_check(domain, critical).to_dict()
    try:
        result["spectrum"] = second_variation_spectrum(domain, critical, cls, cfg["spectrum_count"]).to_dict()
    except MinMaxError as err:
        result["spectrum"] = {"error": str(err)}
    probes = np.asarray(cfg["probes"], dtype=float) if cfg["probes"] else probe_point(critical)[None, :]
    densities = density_profiles(
        domain, to_varifold(domain, critical), probes, cfg["radii"], free_boundary=family.mode == UNCONSTRAINED
    )
    result["density"] = [d.to_dict() for d in densities]
    out = resolve_output_dir(config, args.out)
    write_json(Path(out) / "diagnose.json", result)
    print(dumps(result))
    return EXIT_OK


def _cmd_plot(args: argparse.Namespace) -> int:
    rows = read_csv(args.csv)
    svg = csv_plot(rows, args.title or Path(args.csv).stem)
    Path(args.svg).parent.mkdir(parents=True, exist_ok=True)
    Path(args.svg).write_text(svg, encoding="utf-8")
    return EXIT_OK


COMMANDS = {
    "run": _cmd_run,
    "validate-config": _cmd_validate,
    "comb-test": _cmd_comb,
    "diagnose": _cmd_diagnose,
    "plot": _cmd_plot,
}


def main(argv: list[str] | None = None) -> int:
    """Run the CLI and return its exit code."""
    args = _parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    set_thread_limit(args.threads)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (MinMaxError, OSError) as err:
        _LOGGER.error("Run failed: %s", err)
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
