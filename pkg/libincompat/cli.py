"""Command-line front end.

Exit codes: 0 on success, 1 on invalid input or failed validation, 2 when a solver finished with
warnings (no convergence, failed line search, or QW rows outside the sandwich).
"""

import argparse
import json
import logging
import os
import sys
from typing import Any

from libincompat import ElasticityLab
from libincompat.exceptions import IncompatException
from libincompat.model import ProblemConfig, default_config, load_config, save_mesh
from libincompat.utilities import Log, parse_eps_list
from libincompat.validation import SUITE_NAMES

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_WARNINGS = 2


def _write_text(directory: str, name: str, text: str) -> str:
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, name)
    with open(path, "w", encoding="utf-8", newline="\n") as output_file:
        output_file.write(text)
    return path


def _dump(data: Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def _emit(directory: str, name: str, data: Any) -> None:
    text = _dump(data)
    path = _write_text(directory, name, text)
    Log.info(f"Wrote {path}")
    sys.stdout.write(text)


def _load(args: argparse.Namespace) -> ProblemConfig:
    config = load_config(args.config) if args.config else default_config()
    return config.override(
        seed=args.seed,
        eps_list=parse_eps_list(args.eps) if args.eps else None,
        threads=args.threads,
        output=args.out,
    )


def cmd_mesh(args: argparse.Namespace) -> int:
    lab = ElasticityLab(_load(args))
    directory = lab.config.output_directory()
    tri, summary = lab.mesh()
    os.makedirs(directory, exist_ok=True)
    save_mesh(tri, os.path.join(directory, "mesh.json"))
    _emit(directory, "mesh_summary.json", summary.to_json())
    return EXIT_OK


def cmd_minimize(args: argparse.Namespace) -> int:
    lab = ElasticityLab(_load(args))
    report = lab.minimize()
    _emit(lab.config.output_directory(), "minimize.json", report.to_json())
    return EXIT_WARNINGS if report.warnings else EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    lab = ElasticityLab(_load(args))
    directory = lab.config.output_directory()
    report = lab.sweep()
    _write_text(directory, "sweep.csv", report.to_csv())
    _emit(directory, "sweep.json", report.to_json())
    converged = all(entry.converged for entry in report.entries)
    return EXIT_OK if converged else EXIT_WARNINGS


def cmd_qw(args: argparse.Namespace) -> int:
    lab = ElasticityLab(_load(args))
    table = lab.qw_table()
    text = table.to_csv()
    _write_text(lab.config.output_directory(), "qw.csv", text)
    sys.stdout.write(text)
    return EXIT_WARNINGS if table.violations else EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    lab = ElasticityLab(_load(args))
    results = lab.validate(args.suite)
    _emit(lab.config.output_directory(), "validate.json", [result.to_json() for result in results])
    return EXIT_OK if all(result.passed for result in results) else EXIT_INVALID


def cmd_curvature(args: argparse.Namespace) -> int:
    lab = ElasticityLab(_load(args))
    report = lab.curvature(args.grid)
    _emit(lab.config.output_directory(), "curvature.json", report.to_json())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="libincompat", description="Discrete incompatible elasticity on hexagonal lattices."
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="path to a JSON problem configuration")
    common.add_argument("--out", help="directory for reports (overrides output.directory)")
    common.add_argument("--seed", type=int, help="random seed (overrides seed)")
    common.add_argument("--threads", type=int, help="worker cap (overrides threads)")
    common.add_argument("--eps", help="comma separated lattice scales, e.g. 0.2,0.1,0.05")
    common.add_argument("--verbose", action="store_true", help="log debug messages to stderr")

    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("mesh", parents=[common], help="build a mesh").set_defaults(
        handler=cmd_mesh
    )
    commands.add_parser("minimize", parents=[common], help="minimize at one scale").set_defaults(
        handler=cmd_minimize
    )
    commands.add_parser("sweep", parents=[common], help="minimize across scales").set_defaults(
        handler=cmd_sweep
    )
    commands.add_parser("qw", parents=[common], help="tabulate QW estimates").set_defaults(
        handler=cmd_qw
    )
    validate = commands.add_parser("validate", parents=[common], help="run property suites")
    validate.add_argument("--suite", default="all", choices=("all", *SUITE_NAMES))
    validate.set_defaults(handler=cmd_validate)
    curvature = commands.add_parser("curvature", parents=[common], help="Gauss curvature")
    curvature.add_argument("--grid", type=int, default=ElasticityLab.Constants.CURVATURE_GRID)
    curvature.set_defaults(handler=cmd_curvature)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return int(args.handler(args))
    except (IncompatException, ValueError) as ex:
        sys.stderr.write(f"error: {ex}\n")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
