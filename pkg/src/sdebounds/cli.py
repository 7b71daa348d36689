"""``sdebounds`` command line.

Exit codes: 0 success, 2 bad configuration, 3 numerical failure
(divergence, unstable matrix), 4 file I/O error.
"""
from __future__ import annotations

import argparse
import json
import sys

from . import io
from .harness import ArtifactError, ConfigError, ExperimentConfig, run
from .sde import DivergenceError, UnstableMatrixError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def _floats(s):
    return [float(v) for v in s.split(",") if v.strip()]


def _ints(s):
    return [int(v) for v in s.split(",") if v.strip()]


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    d = argparse.SUPPRESS if suppress else None
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--config", default=d, help="JSON config; command-line flags override it")
    g.add_argument("--seed", type=int, default=d, help="master seed (unsigned 64-bit)")
    g.add_argument("--out", default=d, help="output directory for artifacts")
    g.add_argument("--threads", type=int, default=d, help="worker threads for trial loops")
    return g


def _ensemble_flags(p, plist=False):
    p.add_argument("--regime", choices=["sparse", "dense", "nonlinear"])
    p.add_argument("--p", type=_ints if plist else int, dest="p")
    p.add_argument("--k", type=int)
    p.add_argument("--a-min", type=float, dest="a_min")
    p.add_argument("--rho", type=float)


def _network_flags(p):
    p.add_argument("--grid", help="ROWSxCOLS, e.g. 3x3")
    p.add_argument("--topology", choices=["grid", "grid-with-diagonals"])
    p.add_argument("--rest-length", type=float, dest="rest_length")
    p.add_argument("--gamma-damp", type=float, dest="gamma_damp")
    p.add_argument("--sigma", type=float, help="noise amplitude on velocities")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdebounds",
        description="Drift-structure learning for linear and nonlinear SDEs: "
                    "simulation, lower bounds, l1 recovery and sample-complexity sweeps.",
        parents=[_global_flags(False)],
    )
    sub = parser.add_subparsers(dest="mode", required=True)
    gl = _global_flags(True)

    p = sub.add_parser("simulate", parents=[gl], help="simulate one trajectory")
    p.add_argument("--model", choices=["linear", "mass-spring"])
    _ensemble_flags(p)
    _network_flags(p)
    p.add_argument("--matrix", help="matrix file in 'p <dim>' / 'i j value' format")
    p.add_argument("--T", type=float, dest="T")
    p.add_argument("--eta", type=float)

    p = sub.add_parser("bound", parents=[gl], help="evaluate the observation-time lower bound")
    _ensemble_flags(p)
    for name in ("B", "L", "D"):
        p.add_argument(f"--{name}", type=float, dest=name)
    p.add_argument("--C", type=float, dest="C_const")

    p = sub.add_parser("estimate", parents=[gl], help="recover one sampled matrix")
    _ensemble_flags(p)
    p.add_argument("--T", type=float, dest="T")
    p.add_argument("--eta", type=float)
    p.add_argument("--lam-c", type=float, dest="lam_c")
    p.add_argument("--tau", type=float)

    p = sub.add_parser("phase", parents=[gl], help="success rate versus observation time")
    _ensemble_flags(p, plist=True)
    p.add_argument("--T-grid", type=_floats, dest="T_grid")
    p.add_argument("--trials", type=int)
    p.add_argument("--success-level", type=float, dest="success_level")
    p.add_argument("--eta", type=float)
    p.add_argument("--lam-c", type=float, dest="lam_c")
    p.add_argument("--tau", type=float)

    p = sub.add_parser("kzz", parents=[gl], help="check the mutual-information identity by Monte Carlo")
    p.add_argument("--preset", choices=["constant-pm1", "linear-four"])
    p.add_argument("--T", type=float, dest="T")
    p.add_argument("--paths", type=int)
    p.add_argument("--eta", type=float)

    p = sub.add_parser("reproduce-spring", parents=[gl], help="spring-network edge recovery")
    _network_flags(p)
    p.add_argument("--T-grid", type=_floats, dest="T_grid")
    p.add_argument("--trials", type=int)
    p.add_argument("--eta", type=float)
    p.add_argument("--lam-c", type=float, dest="lam_c")
    p.add_argument("--tau", type=float)
    p.add_argument("--save-every", type=int, dest="save_every")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values = {}
    if getattr(args, "config", None):
        try:
            values = io.read_json(args.config)
        except (OSError, ValueError) as exc:
            raise ArtifactError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(values, dict):
            raise ConfigError("config file must hold a JSON object")
    for key, val in vars(args).items():
        if key != "config" and val is not None:
            values[key] = val
    if values.get("seed", 0) < 0 or values.get("seed", 0) >= 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    try:
        return ExperimentConfig.from_dict(values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        result = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, UnstableMatrixError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(json.dumps(result, indent=2, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
