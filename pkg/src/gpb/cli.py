"""Command-line entry point: ``gpb <subcommand> --config file.json [overrides]``.

Exit status is 0 on success, 1 on a configuration error and 2 when a
factorization or eigensolve fails. ``GPB_SEED`` in the environment
overrides the config seed; an explicit ``--seed`` overrides both.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from ._linalg import NumericalError
from .experiments import EXPERIMENTS, ConfigError, ExperimentConfig, run

log = logging.getLogger("gpb")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2

DESCRIPTIONS = {
    "reproduce": "reproduction error of kernel and polynomial interpolants versus N",
    "boundary": "box-boundary constraint plus interior observations, test error versus N",
    "diagonal": "diagonal constraint plus interior observations, test error versus N",
    "eig": "Nystrom eigenpairs of the kernel on a constraint set",
    "condition": "constrained mean and variance at probe points",
}

COLUMN_HELP = {
    "reproduce": "CSV columns: function, backend, N, n_effective, max_error "
                 "(one row per function x backend x N; N=0 entries are skipped)",
    "boundary": "CSV columns: backend, N, n_effective, max_error (one row per backend x N)",
    "diagonal": "CSV columns: backend, N, n_effective, max_error (one row per backend x N)",
    "eig": "CSV columns: index, eigenvalue, node_0 .. node_{m-1} (one row per retained eigenpair)",
    "condition": "CSV columns: x1 .. xd (probe coordinates), mean, variance (one row per probe)",
}


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _backend_list(text: str) -> list[dict]:
    """``interpolation,spectral`` or a JSON list/object of backend specs."""
    text = text.strip()
    if text.startswith(("[", "{")):
        try:
            value = json.loads(text)
        except json.JSONDecodeError as exc:
            raise argparse.ArgumentTypeError(f"bad backend JSON: {exc}") from exc
        return value if isinstance(value, list) else [value]
    return [{"backend": name} for name in text.split(",") if name]


def _json_object(text: str) -> dict:
    try:
        value = json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"bad JSON: {exc}") from exc
    if not isinstance(value, dict):
        raise argparse.ArgumentTypeError("expected a JSON object")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gpb",
        description="Gaussian processes conditioned on function values over curves and boundaries.",
        epilog="Output is CSV; 'gpb <command> --help' lists its columns. "
               "Exit status: 0 success, 1 config error, 2 numerical failure. "
               "GPB_SEED overrides the config seed.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=DESCRIPTIONS[name], description=DESCRIPTIONS[name], epilog=COLUMN_HELP[name],
                           formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        p.add_argument("--config", type=Path, help="JSON config file")
        p.add_argument("--experiment", choices=EXPERIMENTS,
                       help="experiment name; must agree with the subcommand when given")
        p.add_argument("--kernel", type=_json_object, help='kernel JSON, e.g. \'{"family": "matern", "params": {"nu": 1.5}}\'')
        p.add_argument("--backend", type=_backend_list,
                       help="comma-separated backend names or a JSON list of backend specs")
        p.add_argument("--nodes", type=_int_list, help="comma-separated N values, e.g. 5,10,20,40")
        p.add_argument("--m-points", type=int, help="number of interior Latin hypercube observations")
        p.add_argument("--seed", type=int, help="random seed")
        p.add_argument("--out", help="output CSV path (stdout when omitted)")
        p.add_argument("--grid", type=int, help="test-set resolution")
        p.add_argument("--dat", action="store_true", default=None,
                       help="also write a whitespace-separated .dat mirror next to --out")
    return parser


def load_config(args: argparse.Namespace, environ=os.environ) -> ExperimentConfig:
    """Merge config file, environment and command-line overrides."""
    data: dict = {}
    if args.config is not None:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc.strerror}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{args.config}: config must be a JSON object")
        if data.setdefault("experiment", args.command) != args.command:
            raise ConfigError(f"config experiment {data['experiment']!r} does not match subcommand {args.command!r}")
    if args.experiment is not None and args.experiment != args.command:
        raise ConfigError(f"--experiment {args.experiment!r} does not match subcommand {args.command!r}")
    data["experiment"] = args.command
    if "GPB_SEED" in environ:
        try:
            data["seed"] = int(environ["GPB_SEED"])
        except ValueError as exc:
            raise ConfigError(f"GPB_SEED must be an integer, got {environ['GPB_SEED']!r}") from exc
    overrides = {
        "kernel": args.kernel,
        "backends": args.backend,
        "nodes": args.nodes,
        "m_points": args.m_points,
        "seed": args.seed,
        "out": args.out,
        "grid": args.grid,
        "dat": args.dat,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(data)


def _dat_mirror(csv_text: str) -> str:
    lines = csv_text.splitlines()
    if not lines:
        return ""
    out = ["# " + " ".join(lines[0].split(","))]
    out += [" ".join(line.split(",")) for line in lines[1:]]
    return "\n".join(out) + "\n"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        config = load_config(args)
        log.info("running %s with seed %d", config.experiment, config.seed)
        text = run(config)
    except ConfigError as exc:
        print(f"gpb: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"gpb: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        # invalid combinations detected while building forms stem from the config
        print(f"gpb: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if config.out is None:
        sys.stdout.write(text)
    else:
        out = Path(config.out)
        out.write_text(text)
        if config.dat:
            out.with_suffix(".dat").write_text(_dat_mirror(text))
        log.info("wrote %s", out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
