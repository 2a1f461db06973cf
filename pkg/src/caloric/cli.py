"""Command-line front end: ``caloric {extend,bowl,verify,perron}``.

Exit status is 0 when every requested check or tolerance is met, 1 when a
run finished but missed one (its artifacts are still written) and 2 for
bad input.
"""

import argparse
import configparser
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bowl import BoundaryData, CaloricBowl, solve_bowl
from .expr import Expression, ExpressionError
from .grid import DomainSpec, Lattice
from .perron import DegenerateDomainError, SweepConfig, perron_solve
from .poly import (
    Polynomial,
    PolynomialParseError,
    apply_heat,
    format_polynomial,
    parse_polynomial,
    solve_correction,
    substitute_paraboloid,
)
from .suites import (
    DEFAULT_TOLERANCE,
    SUITES,
    mean_value_suite,
    normalization_suite,
    reproduction_suite,
    supercaloric_suite,
)

log = logging.getLogger("caloric")

GLOBAL_DEFAULTS = {"dim": None, "tol": None, "out": None, "seed": 0, "resolution": 4, "verbose": False}


class InputError(ValueError):
    """Bad command-line or config input (exit status 2)."""


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _floats(text, what):
    try:
        return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())
    except ValueError:
        raise InputError(f"{what}: expected comma-separated numbers, got {text!r}") from None


def _echo(args, **extra):
    """Fully resolved run configuration, written into every report."""
    out = {
        "subcommand": args.command,
        "dim": args.dim,
        "tol": args.tol,
        "out": str(args.out) if args.out is not None else None,
        "seed": args.seed,
        "resolution": args.resolution,
        "version": __version__,
    }
    out.update(extra)
    return out


def _print_echo(echo):
    print("config: " + json.dumps(echo, sort_keys=True))


# -- extend ------------------------------------------------------------------------


def cmd_extend(args):
    dim = args.dim or 1
    args.dim = dim
    p = parse_polynomial(args.polynomial, dim)
    q = solve_correction(p)
    u = Polynomial.w(dim) * q + p
    checks = {
        "H u_p == 0": apply_heat(u).is_zero(),
        "u_p - p == w q": (u - p - Polynomial.w(dim) * q).is_zero(),
        "u_p == p on t = |x|^2": substitute_paraboloid(u - p).is_zero(),
    }
    echo = _echo(args, polynomial=args.polynomial)
    _print_echo(echo)
    print(f"p   = {format_polynomial(p)}")
    print(f"q   = {format_polynomial(q)}")
    print(f"u_p = {format_polynomial(u)}")
    for name, ok in checks.items():
        print(f"check {name}: {'PASS' if ok else 'FAIL'}")
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "extension.txt").write_text(format_polynomial(u) + "\n")
        _write_json(
            out / "extension.json",
            {
                "config": echo,
                "p": format_polynomial(p),
                "q": format_polynomial(q),
                "u_p": format_polynomial(u),
                "checks": checks,
            },
        )
    return 0 if all(checks.values()) else 1


# -- bowl ------------------------------------------------------------------------------


def _read_samples(path, dim, x0):
    """CSV with columns x1..xN (or x) and a value column named phi or value."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise InputError(f"{path}: no data rows")
    names = ["x"] if dim == 1 and "x" in rows[0] else [f"x{i + 1}" for i in range(dim)]
    value_key = next((k for k in ("phi", "value") if k in rows[0]), None)
    missing = [n for n in names if n not in rows[0]]
    if missing or value_key is None:
        raise InputError(f"{path}: need columns {names} and 'phi' or 'value'")
    try:
        x = np.array([[float(r[n]) for n in names] for r in rows])
        v = np.array([float(r[value_key]) for r in rows])
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None
    return BoundaryData.from_samples(x - np.asarray(x0), v)


def cmd_bowl(args):
    bottom = _floats(args.bottom, "--bottom")
    dim = args.dim or len(bottom) - 1
    args.dim = dim
    if len(bottom) != dim + 1:
        raise InputError(f"--bottom needs {dim + 1} coordinates for N={dim}, got {len(bottom)}")
    tol = args.tol if args.tol is not None else 1e-6
    args.tol = tol
    bowl = CaloricBowl(bottom, args.opening)
    if args.data is not None:
        phi = Expression(args.data, dim)
        data_desc = {"data": args.data}
    else:
        phi = _read_samples(args.data_file, dim, bottom[:-1])
        data_desc = {"data_file": str(args.data_file)}
    echo = _echo(
        args,
        bottom=list(bottom),
        opening=args.opening,
        degree=args.degree,
        max_degree=args.max_degree,
        **data_desc,
    )
    _print_echo(echo)
    sol = solve_bowl(bowl, phi, tol=tol, degree=args.degree, max_degree=args.max_degree)
    out = Path(args.out if args.out is not None else ".")
    out.mkdir(parents=True, exist_ok=True)
    (out / "bowl_solution.txt").write_text(format_polynomial(sol.u) + "\n")
    sol.write_residual_csv(out / "bowl_residuals.csv")
    report = sol.to_dict()
    report["config"] = echo
    _write_json(out / "bowl_report.json", report)
    print("degree  epsilon")
    for d, eps in sol.history:
        print(f"{d:6d}  {eps:.6e}")
    text = format_polynomial(sol.u)
    print(f"u = {text}" if len(text) <= 200 else f"u = ({len(sol.u.terms)} terms, see bowl_solution.txt)")
    status = "PASS" if sol.tolerance_met else "FAIL"
    print(f"certificate epsilon = {sol.epsilon:.6e} at degree {sol.degree} (tol {tol:g}): {status}")
    return 0 if sol.tolerance_met else 1


# -- verify ----------------------------------------------------------------------------


def cmd_verify(args):
    suite = args.suite
    dim = args.dim or 1
    args.dim = dim
    if suite in ("reproduction", "supercaloric") and dim != 1:
        raise InputError(f"suite {suite!r} runs in one space dimension only")
    tol = args.tol if args.tol is not None else DEFAULT_TOLERANCE[suite]
    args.tol = tol
    echo = _echo(args, suite=suite)
    _print_echo(echo)
    if suite == "normalization":
        res = normalization_suite(dim, args.resolution, tol)
    elif suite == "mean-value":
        res = mean_value_suite(dim, args.resolution, tol, args.seed)
    elif suite == "reproduction":
        res = reproduction_suite(tol, seed=args.seed)
    else:
        res = supercaloric_suite(args.resolution)
    for row in res.rows:
        label = ", ".join(f"{k}={_short(v)}" for k, v in row.items() if k != "pass")
        print(f"{'PASS' if row['pass'] else 'FAIL'}  {label}")
    for note in res.notes:
        print(note)
    verdict = "PASS" if res.passed else "FAIL"
    if suite == "supercaloric":
        print(f"{verdict}: suite {suite}")
    else:
        print(f"{verdict}: suite {suite}, worst error {res.worst:.3e} (tol {tol:g}, margin {tol - res.worst:.3e})")
    out = Path(args.out if args.out is not None else ".")
    out.mkdir(parents=True, exist_ok=True)
    stem = suite.replace("-", "_")
    res.write_csv(out / f"verify_{stem}.csv")
    report = res.to_dict()
    report["config"] = echo
    _write_json(out / f"verify_{stem}.json", report)
    return 0 if res.passed else 1


def _short(v):
    return f"{v:.3e}" if isinstance(v, float) else v


# -- perron -------------------------------------------------------------------------------


def _parse_boxes(text, dim):
    boxes = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        if ":" not in chunk:
            raise InputError(f"box {chunk.strip()!r}: expected 'lower : upper'")
        lo, hi = chunk.split(":")
        lo, hi = _floats(lo, "boxes"), _floats(hi, "boxes")
        if len(lo) != dim + 1 or len(hi) != dim + 1:
            raise InputError(f"box {chunk.strip()!r}: corners need {dim + 1} coordinates")
        boxes.append((lo, hi))
    return boxes


def load_perron_config(path, args):
    """Read the INI file and apply command-line overrides."""
    # ";" separates union boxes, so only "#" starts an inline comment
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    if not cp.read(path):
        raise InputError(f"cannot read config file {path}")
    for section in ("domain", "data"):
        if not cp.has_section(section):
            raise InputError(f"{path}: missing [{section}] section")
    dom = cp["domain"]
    try:
        lower = _floats(dom["lower"], "lower")
        upper = _floats(dom["upper"], "upper")
        shape = tuple(int(v) for v in dom["shape"].split(","))
        phi_text = cp["data"]["phi"]
    except KeyError as exc:
        raise InputError(f"{path}: missing key {exc}") from None
    except ValueError:
        raise InputError(f"{path}: shape must be comma-separated integers") from None
    dim = len(lower) - 1
    if args.dim is not None and args.dim != dim:
        raise InputError(f"--dim {args.dim} does not match the {dim + 1} domain coordinates")
    args.dim = dim
    if "boxes" in dom:
        domain = DomainSpec.union(_parse_boxes(dom["boxes"], dim))
    elif "predicate" in dom:
        pred = Expression(dom["predicate"], dim)
        domain = DomainSpec.from_predicate(lower, upper, pred, description=f"predicate: {dom['predicate']}")
    else:
        domain = DomainSpec.box(lower, upper)
    sw = cp["sweep"] if cp.has_section("sweep") else {}
    try:
        config = SweepConfig(
            opening=float(sw["opening"]) if "opening" in sw else None,
            schedule=sw.get("schedule", "time-major"),
            interpolation_order=int(sw.get("interpolation_order", 1)),
            degree=int(sw.get("degree", 8)),
            tol=args.tol if args.tol is not None else float(sw.get("tol", 1e-6)),
            max_sweeps=int(sw.get("max_sweeps", 500)),
            mode=sw.get("mode", "sequential"),
        )
    except ValueError as exc:
        raise InputError(f"{path}: [sweep] {exc}") from None
    args.tol = config.tol
    outsec = cp["output"] if cp.has_section("output") else {}
    out_dir = args.out if args.out is not None else outsec.get("dir", "perron_out")
    prefix = outsec.get("prefix", "perron")
    comparator = cp["data"].get("comparator")
    return {
        "domain": domain,
        "shape": shape,
        "phi": phi_text,
        "comparator": comparator,
        "sweep": config,
        "out": out_dir,
        "prefix": prefix,
    }


def cmd_perron(args):
    cfg = load_perron_config(args.config, args)
    dim = args.dim
    args.out = cfg["out"]
    lattice = Lattice(cfg["domain"], cfg["shape"])
    phi = Expression(cfg["phi"], dim)
    comparator = Expression(cfg["comparator"], dim) if cfg["comparator"] else None
    opening = cfg["sweep"].resolved_opening(lattice)
    echo = _echo(
        args,
        config_file=str(args.config),
        domain=cfg["domain"].to_dict(),
        shape=list(lattice.shape),
        phi=cfg["phi"],
        comparator=cfg["comparator"],
        resolved_opening=opening,
        prefix=cfg["prefix"],
    )
    _print_echo(echo)
    report = perron_solve(lattice, phi, cfg["sweep"], comparator=comparator, echo=echo)
    paths = report.write_outputs(cfg["out"], cfg["prefix"])
    print(f"sweeps: {report.sweeps} (upper {report.upper_result.sweeps}, lower {report.lower_result.sweeps})")
    print(f"final update: {report.final_update:.3e} (tol {report.tol:g})")
    print(f"upper-lower gap: {report.max_gap:.3e}")
    print(f"boundary bounds: m = {report.m:.6g}, M = {report.M:.6g}")
    for name, ok in report.bounds_check().items():
        print(f"check {name}: {'PASS' if ok else 'FAIL'}")
    if report.comparator_error is not None:
        print(f"comparator error (interior): {report.comparator_error:.3e}")
    print(f"converged: {'yes' if report.converged else 'NO'}")
    for key, path in paths.items():
        print(f"wrote {key}: {path}")
    return 0 if report.converged and report.sandwich_ok else 1


# -- entry point ---------------------------------------------------------------------------


def _global_parser():
    # defaults are suppressed so a flag given after the subcommand does not
    # overwrite one given before it
    g = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    g.add_argument("--dim", type=int, help="space dimension N (default: inferred or 1)")
    g.add_argument("--tol", type=float, help="tolerance (default depends on the subcommand)")
    g.add_argument("--out", type=Path, help="output directory")
    g.add_argument("--seed", type=int, help="seed for randomised comparators (default 0)")
    g.add_argument("--resolution", type=int, help="heat-ball quadrature resolution (default 4)")
    g.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return g


def build_parser():
    common = _global_parser()
    parser = argparse.ArgumentParser(prog="caloric", description=__doc__.splitlines()[0], parents=[common])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extend", parents=[common], help="caloric extension of a polynomial")
    p.add_argument("polynomial", help="polynomial text, e.g. '1/2*x^2 + t'")
    p.set_defaults(func=cmd_extend)

    p = sub.add_parser("bowl", parents=[common], help="solve the Dirichlet problem on a caloric bowl")
    p.add_argument("--bottom", default="0,0", help="bottom point x1,..,xN,t (default 0,0)")
    p.add_argument("--opening", type=float, default=1.0, help="opening radius r (default 1)")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="boundary data expression in x1..xN, t")
    src.add_argument("--data-file", type=Path, help="CSV of boundary samples (x1..xN, phi)")
    p.add_argument("--degree", type=int, help="fixed fit degree (skips escalation)")
    p.add_argument("--max-degree", type=int, default=14, help="escalation limit (default 14)")
    p.set_defaults(func=cmd_bowl)

    p = sub.add_parser("verify", parents=[common], help="run a verification suite")
    p.add_argument("suite", choices=SUITES)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("perron", parents=[common], help="Perron sweeps on a domain from an INI config")
    p.add_argument("config", type=Path)
    p.set_defaults(func=cmd_perron)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    for key, val in GLOBAL_DEFAULTS.items():
        if not hasattr(args, key):
            setattr(args, key, val)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (ExpressionError, PolynomialParseError) as exc:
        text = getattr(exc, "text", None) or _source_text(args)
        print(f"error: {exc}", file=sys.stderr)
        if text is not None:
            print(text, file=sys.stderr)
            print(" " * exc.position + "^", file=sys.stderr)
        return 2
    except DegenerateDomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (InputError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _source_text(args):
    return getattr(args, "polynomial", None)


if __name__ == "__main__":
    sys.exit(main())
