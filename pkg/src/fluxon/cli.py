"""Command-line front end.

    fluxon eval   --surface sphere:a=1 --point 0,0,-0.5
    fluxon field  --surface paraboloid:k_x=1,k_y=-0.5 --point 0.1,0.2,-0.3
    fluxon check  hankel flux
    fluxon sphere-compare --a 1 --theta 0.75
    fluxon smear  --w 1e-3 --point 0,0,0 --point 0,0,-0.01

Exit status: 0 on success, 1 if any check fails, 2 on usage errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import checks
from .errors import FluxonError
from .expansion import PHI0_SI, Charge, ExpansionParams, b_field_singular, psi_singular
from .geometry import LocalPoint, build_local_frame, surface_from_string, to_spherical
from .sphere import remainder_analysis
from .verification import SmearDensity, smeared_potential

SCHEMA = 1
COMMANDS = ("eval", "field", "check", "sphere-compare", "smear")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    surface: str = "sphere:a=1"
    nu: int = 1
    phi0: float = 1.0
    units: str = "dimensionless"
    d: float | None = None
    points: list = field(default_factory=list)
    suites: list = field(default_factory=list)
    a: float = 1.0
    theta: float = 0.75 * math.pi
    phi: float = 0.0
    r_min: float = 1e-6
    r_max: float = 1e-2
    n: int = 17
    k: float | None = None
    width: float = 1e-3
    output: str | None = None
    format: str = "csv"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise UsageError(f"unknown config keys {sorted(extra)}")
        cfg = cls(**data)
        cfg.points = [list(map(float, p)) for p in cfg.points]
        return cfg

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.nu not in (1, -1):
            raise UsageError("--nu must be +1 or -1")
        if self.units not in ("dimensionless", "si"):
            raise UsageError("--units must be 'dimensionless' or 'si'")
        if not self.phi0 > 0:
            raise UsageError("--phi0 must be positive")
        if self.d is not None and not self.d > 0:
            raise UsageError("--d must be positive")
        if self.format not in ("csv", "json"):
            raise UsageError("--format must be csv or json")
        if self.command in ("eval", "field", "smear") and not self.points:
            raise UsageError(f"{self.command} needs at least one --point")
        for p in self.points:
            if len(p) != 3 or not all(math.isfinite(c) for c in p):
                raise UsageError(f"point {p} must be three finite numbers")
        if self.command in ("eval", "field") and any(p == [0.0, 0.0, 0.0] for p in self.points):
            raise UsageError("the singular expansion is undefined at the charge; use 'smear' for r = 0")
        if self.command in ("eval", "field", "check", "smear"):
            try:
                surface_from_string(self.surface)
            except ValueError as exc:
                raise UsageError(str(exc)) from None
        bad = set(self.suites) - set(checks.SUITES)
        if bad:
            raise UsageError(f"unknown check suites {sorted(bad)}; choose from {list(checks.SUITES)}")
        if self.command == "sphere-compare":
            if not self.a > 0:
                raise UsageError("--a must be positive")
            if not (math.pi / 2 < self.theta <= math.pi):
                raise UsageError("--theta must lie in (pi/2, pi]")
            if not (0 < self.r_min < self.r_max) or self.n < 2:
                raise UsageError("need 0 < --r-min < --r-max and --n >= 2")
        if self.command == "smear" and not self.width > 0:
            raise UsageError("--w must be positive")

    @property
    def charge(self) -> Charge:
        return Charge(self.nu, PHI0_SI if self.units == "si" else self.phi0)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _point(text: str) -> list:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse point {text!r}") from None
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"point {text!r} needs three comma-separated numbers")
    return vals


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fluxon", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--surface", default="sphere:a=1", help="built-in surface, e.g. sphere:a=2 or paraboloid:k_x=1,k_y=-1")
    common.add_argument("--nu", type=int, default=1, help="charge sign, +1 or -1")
    common.add_argument("--phi0", type=float, default=None, help="flux quantum in dimensionless mode (default 1)")
    common.add_argument("--units", choices=["dimensionless", "si"], default="dimensionless")
    common.add_argument("--d", type=float, default=None,
                        help="gauge length of the logarithm (default 1; 2a for sphere-compare)")
    common.add_argument("--output", "-o", default=None, help="output file (default stdout)")
    common.add_argument("--format", choices=["csv", "json"], default="csv")

    for name in ("eval", "field", "smear"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--point", type=_point, action="append", default=[], metavar="X,Y,Z",
                       help="local-frame point; repeatable")
        if name == "smear":
            p.add_argument("--w", type=float, default=1e-3, help="Gaussian core width")

    p = sub.add_parser("check", parents=[common])
    p.add_argument("suites", nargs="*",
                   help=f"any of {', '.join(checks.SUITES)} (default: all)")

    p = sub.add_parser("sphere-compare", parents=[common])
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--theta", type=float, default=0.75 * math.pi, help="approach polar angle in radians")
    p.add_argument("--phi", type=float, default=0.0)
    p.add_argument("--r-min", type=float, default=1e-6, help="in units of a")
    p.add_argument("--r-max", type=float, default=1e-2, help="in units of a")
    p.add_argument("--n", type=int, default=17)
    p.add_argument("--k", type=float, default=None, help="override curvature (negative control)")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.units == "si" and args.phi0 is not None:
        raise UsageError("--phi0 cannot be combined with --units si")
    cfg = RunConfig(
        command=args.command,
        surface=args.surface,
        nu=args.nu,
        phi0=1.0 if args.phi0 is None else args.phi0,
        units=args.units,
        d=args.d if args.d is not None or args.command == "sphere-compare" else 1.0,
        output=args.output,
        format=args.format,
    )
    cfg.points = getattr(args, "point", []) or []
    cfg.suites = list(getattr(args, "suites", []) or [])
    if args.command == "smear":
        cfg.width = args.w
    if args.command == "sphere-compare":
        cfg.a, cfg.theta, cfg.phi = args.a, args.theta, args.phi
        cfg.r_min, cfg.r_max, cfg.n, cfg.k = args.r_min, args.r_max, args.n, args.k
    return cfg


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % (v + 0.0)  # drop negative zero
    return str(v)


def write_table(cfg: RunConfig, columns: list, rows: list, stream) -> None:
    if cfg.format == "json":
        doc = {"schema": SCHEMA, "command": cfg.command, "config": cfg.to_dict(),
               "columns": columns, "rows": [[checks._plain(v) for v in r] for r in rows]}
        json.dump(doc, stream, indent=1)
        stream.write("\n")
        return
    stream.write(f"#schema={SCHEMA} command={cfg.command}\n")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])


def write_reports(cfg: RunConfig, reports: list, stream) -> None:
    doc = {"schema": SCHEMA, "command": "check", "config": cfg.to_dict(),
           "passed": all(r.passed for r in reports), "reports": [r.to_dict() for r in reports]}
    if cfg.format == "json":
        json.dump(doc, stream, indent=1, allow_nan=True)
        stream.write("\n")
        return
    stream.write(f"#schema={SCHEMA} command=check\n")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["check", "passed", "max_residual", "threshold", "worst_point"])
    for r in reports:
        wp = "" if r.worst_point is None else " ".join(_fmt(c) for c in r.worst_point)
        w.writerow([r.name, _fmt(r.passed), _fmt(r.max_residual), _fmt(r.threshold), wp])


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _params(cfg: RunConfig) -> ExpansionParams:
    frame = build_local_frame(surface_from_string(cfg.surface))
    return ExpansionParams.from_frame(frame, cfg.d, cfg.charge)


def cmd_eval(cfg: RunConfig, stream) -> int:
    prm = _params(cfg)
    cols = ["x", "y", "z", "r", "theta", "phi", "k_x", "k_y", "d", "psi0", "psi1s", "psi1r", "total"]
    rows = []
    for p in cfg.points:
        pt = LocalPoint(*p)
        b = psi_singular(pt, prm)
        r, th, ph = to_spherical(pt)
        rows.append([*p, float(r), float(th), float(ph), prm.k_x, prm.k_y, prm.d, b.psi0, b.psi1s, b.psi1r, b.total])
    write_table(cfg, cols, rows, stream)
    return 0


def cmd_field(cfg: RunConfig, stream) -> int:
    prm = _params(cfg)
    cols = ["x", "y", "z", "B_r", "B_theta", "B_phi", "B_x", "B_y", "B_z"]
    rows = []
    for p in cfg.points:
        pt = LocalPoint(*p)
        fv = b_field_singular(pt, prm)
        rows.append([*p, fv.B_r, fv.B_theta, fv.B_phi, *map(float, fv.cartesian(pt))])
    write_table(cfg, cols, rows, stream)
    return 0


def _threads() -> int:
    raw = os.environ.get("FLUXON_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"FLUXON_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError("FLUXON_THREADS must be a positive integer")
    return n


def cmd_check(cfg: RunConfig, stream) -> int:
    suites = cfg.suites or list(checks.SUITES)
    patch = surface_from_string(cfg.surface)
    frame_params = ExpansionParams.from_frame(build_local_frame(patch), cfg.d, cfg.charge)
    # harmonicity and boundary need both curvature terms active
    generic = ExpansionParams(1.0, -0.3, cfg.d, cfg.charge)
    flux_params = frame_params if frame_params.k_x or frame_params.k_y else ExpansionParams(1.0, 1.0, cfg.d, cfg.charge)
    jobs = {
        "harmonicity": lambda: checks.run_harmonicity(generic),
        "boundary": lambda: checks.run_boundary(generic),
        "hankel": checks.run_hankel,
        "flux": lambda: checks.run_flux(flux_params),
        "rhs": lambda: checks.run_rhs(patch, frame_params),
    }
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        reports = list(pool.map(lambda name: jobs[name](), suites))
    write_reports(cfg, reports, stream)
    failed = [r for r in reports if not r.passed]
    for r in failed:
        print(f"check {r.name} FAILED: max residual {r.max_residual:.3g} (threshold {r.threshold:.3g}); "
              f"worst point {r.worst_point}", file=sys.stderr)
    return 1 if failed else 0


def cmd_sphere_compare(cfg: RunConfig, stream) -> int:
    r = cfg.a * np.geomspace(cfg.r_min, cfg.r_max, cfg.n)
    curve = remainder_analysis(cfg.a, cfg.theta, cfg.phi, r, cfg.charge, k=cfg.k, d=cfg.d)
    cols = ["r", "remainder", "remainder_half", "cauchy", "exact", "singular"]
    rows = [list(map(float, row)) for row in zip(curve.r, curve.remainder, curve.remainder_half,
                                                  curve.cauchy, curve.exact, curve.singular)]
    write_table(cfg, cols, rows, stream)
    print(f"cauchy slope {curve.cauchy_slope:.4f}, log coefficient {curve.log_coefficient:.6g}", file=sys.stderr)
    return 0


def cmd_smear(cfg: RunConfig, stream) -> int:
    prm = _params(cfg)
    dens = SmearDensity.gaussian(cfg.width, prm.charge)
    cols = ["x", "y", "z", "w", "smeared", "point"]
    rows = []
    for p in cfg.points:
        pt = LocalPoint(*p)
        sm = smeared_potential(dens, prm, pt)
        try:
            point_val = psi_singular(pt, prm).total
        except FluxonError:
            point_val = float("nan")
        rows.append([*p, cfg.width, sm, point_val])
    write_table(cfg, cols, rows, stream)
    return 0


HANDLERS = {
    "eval": cmd_eval,
    "field": cmd_field,
    "check": cmd_check,
    "sphere-compare": cmd_sphere_compare,
    "smear": cmd_smear,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = config_from_args(args)
        cfg.validate()
        _threads()
    except UsageError as exc:
        print(f"fluxon: error: {exc}", file=sys.stderr)
        return 2

    buf = io.StringIO()
    try:
        code = HANDLERS[cfg.command](cfg, buf)
    except FluxonError as exc:
        print(f"fluxon: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
