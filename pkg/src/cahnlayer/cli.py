"""Command line: ``run``, ``list-experiments`` and ``export-profile``."""

from __future__ import annotations

import argparse
import pathlib
import sys

from .errors import CahnLayerError
from .harness import EXPERIMENTS, ExperimentConfig, run_experiment, tomllib
from .minimizer1d import WeightFn, minimize_G
from .potential import potential_from_config
from .profile import recovery_profile


def _cmd_run(args) -> int:
    cfg = ExperimentConfig.from_toml(args.config)
    if args.workers is not None:
        cfg = ExperimentConfig(**{**cfg.__dict__, "workers": args.workers})
    result, summ = run_experiment(cfg, args.out)
    for line in result.lines():
        print(line)
    print(f"{result.experiment}: {'PASS' if result.passed else 'FAIL'} (config {summ['config_hash'][:12]})")
    return 0 if result.passed else 1


def _cmd_list(args) -> int:
    for name, exp in EXPERIMENTS.items():
        tag = " [slow]" if exp.slow else ""
        print(f"{name}  {exp.description}{tag}")
    return 0


def _potential(args):
    if args.potential_file:
        with open(args.potential_file, "rb") as fh:
            table = tomllib.load(fh)
        return potential_from_config(table.get("potential", table))
    return potential_from_config(args.potential)


def _cmd_export(args) -> int:
    spec = _potential(args)
    alpha = spec.a if args.alpha is None else args.alpha
    beta = spec.b if args.beta is None else args.beta
    if args.minimizer:
        weight = WeightFn.linear(args.slope, args.T)
        res = minimize_G(spec, weight, args.eps, alpha, beta, grid_size=args.grid_size, richardson=False)
        res.profile.to_csv(args.output)
        print(f"minimiser: {res.profile.t.size} nodes, G1={res.energies.G1:.12g} -> {args.output}")
    else:
        lo, hi = min(alpha, beta), max(alpha, beta)
        prof = recovery_profile(spec, args.eps, lo, hi, args.T)
        prof.to_csv(args.output)
        print(f"recovery profile: {prof.t.size} nodes, T_eps={prof.T_eps:.6g} -> {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cahnlayer", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment from a TOML config")
    r.add_argument("config", type=pathlib.Path)
    r.add_argument("--out", type=pathlib.Path, default=None, help="output directory (overrides the config)")
    r.add_argument("--workers", type=int, default=None)
    r.set_defaults(func=_cmd_run)

    ls = sub.add_parser("list-experiments", help="list the registered experiments")
    ls.set_defaults(func=_cmd_list)

    e = sub.add_parser("export-profile", help="write a 1D layer profile as CSV (t, v)")
    e.add_argument("--potential", default="quartic", help="'quartic' or 'asym_quartic(a,b)'")
    e.add_argument("--potential-file", type=pathlib.Path, help="TOML with a [potential] table")
    e.add_argument("--eps", type=float, required=True)
    e.add_argument("--alpha", type=float, default=None, help="value at t=0 (default: a)")
    e.add_argument("--beta", type=float, default=None, help="value at t=T (default: b)")
    e.add_argument("--T", type=float, default=1.0)
    e.add_argument("--minimizer", action="store_true", help="export the 1D minimiser instead")
    e.add_argument("--slope", type=float, default=1.0, help="weight slope for --minimizer")
    e.add_argument("--grid-size", type=int, default=256)
    e.add_argument("-o", "--output", type=pathlib.Path, default=pathlib.Path("profile.csv"))
    e.set_defaults(func=_cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CahnLayerError, OSError, ValueError) as ex:
        print(f"error: {ex}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
