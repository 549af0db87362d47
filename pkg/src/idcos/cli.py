"""Batch command line: convergence studies, stability maps and simulations.

Runs are declared in a flat INI-style config file and/or overridden by
flags; artifacts land in the output directory as CSV files plus a manifest.
Exit codes: 0 on success, 2 for configuration errors, 3 for solver failures.
"""

import argparse
import configparser
import sys

from .errors import SolverError, UsageError
from .harness import RunConfig, run_convergence, run_simulation, run_stability

_INT_TUPLE_FIELDS = {"corrections", "nt_list", "resolution"}
_FLOAT_TUPLE_FIELDS = {"snap_times", "re_range", "im_range"}
_INT_FIELDS = {"M", "grid_n", "order_space"}
_FLOAT_FIELDS = {"end_time", "dt"}


def _coerce(key, value):
    if key in _INT_TUPLE_FIELDS:
        return tuple(int(v) for v in str(value).split(","))
    if key in _FLOAT_TUPLE_FIELDS:
        return tuple(float(v) for v in str(value).split(","))
    if key in _INT_FIELDS:
        return int(value)
    if key in _FLOAT_FIELDS:
        return float(value)
    return value


def load_config_file(path):
    """Read a [run] section of key = value pairs into RunConfig kwargs."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise UsageError(f"cannot read config file {path}")
    if parser.has_section("run"):
        section = parser["run"]
    else:
        section = parser[parser.sections()[0]] if parser.sections() else {}
    kwargs = {}
    for key, value in dict(section).items():
        key = key.replace("-", "_")
        if key not in RunConfig.__dataclass_fields__:
            raise UsageError(f"unknown config key {key!r}")
        kwargs[key] = _coerce(key, value)
    return kwargs


def build_parser():
    parser = argparse.ArgumentParser(
        prog="idcos",
        description="Deferred-correction operator-splitting batch runs")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in ("convergence", "stability", "simulate"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="INI config file with a [run] section")
        p.add_argument("--problem")
        p.add_argument("--scheme", choices=("lie-trotter", "strang", "adi"))
        p.add_argument("--corrections", help="comma separated, e.g. 0,1,2")
        p.add_argument("--nt", dest="nt_list", help="time step ladder, comma separated")
        p.add_argument("--nt-unit", dest="nt_unit", choices=("substep", "macro"))
        p.add_argument("--sub-intervals", dest="M", type=int,
                       help="sub-intervals per macro step")
        p.add_argument("--grid", dest="grid_n", type=int)
        p.add_argument("--order-space", dest="order_space", type=int,
                       choices=(2, 4, 6))
        p.add_argument("--residual-mode", dest="residual_mode",
                       help="interpolant or oversampled(N)")
        p.add_argument("--residual-split", dest="residual_split",
                       choices=("argument", "additive"))
        p.add_argument("--out", dest="out_dir")
        p.add_argument("--name", dest="run_name")
        p.add_argument("--end-time", dest="end_time", type=float)
        if name == "simulate":
            p.add_argument("--dt", type=float)
            p.add_argument("--snap-times", dest="snap_times",
                           help="comma separated snapshot times")
        if name == "stability":
            p.add_argument("--re-range", dest="re_range")
            p.add_argument("--im-range", dest="im_range")
            p.add_argument("--resolution", dest="resolution")
    return parser


def config_from_args(args):
    kwargs = {"experiment": args.experiment}
    if getattr(args, "config", None):
        kwargs.update(load_config_file(args.config))
    kwargs["experiment"] = args.experiment
    for key in RunConfig.__dataclass_fields__:
        value = getattr(args, key, None)
        if value is not None:
            kwargs[key] = _coerce(key, value)
    return RunConfig(**kwargs)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (UsageError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        if cfg.experiment == "convergence":
            report = run_convergence(cfg)
            for cs in cfg.corrections:
                orders = ", ".join(f"{o:.2f}" for o in report.orders_for(cs))
                print(f"{cfg.problem} {cfg.scheme} corrections={cs}: orders {orders}")
        elif cfg.experiment == "stability":
            scans = run_stability(cfg)
            for scan in scans:
                print(f"{cfg.scheme} corrections={scan.corrections}: "
                      f"{len(scan.contours)} contour polylines")
        else:
            summaries = run_simulation(cfg)
            for snap in summaries:
                print(f"t={snap['time']:g}: min={snap['min']} max={snap['max']}")
    except UsageError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
