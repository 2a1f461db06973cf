"""Verification suites run by ``caloric verify``.

Each suite returns a :class:`SuiteResult` whose rows are plain dicts, so the
CLI can print them, dump them to CSV and fold them into a JSON report.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .grid import DomainSpec, GridFunction, Lattice
from .heatball import DEFAULT_RESOLUTION, build_heat_ball_quadrature, mean_value, translated
from .kernels import CaloricDisk, as_field, gw_kernel, reproduce
from .perron import classify_supercaloric
from .poly import caloric_extension, format_polynomial, random_polynomial

SUITES = ("normalization", "mean-value", "reproduction", "supercaloric")
RADII = (0.1, 0.5, 1.0)
REPRODUCTION_POINTS = ((0.0, 0.0), (0.3, 0.2), (-0.4, -0.3), (0.2, -0.5), (0.5, 0.5))
DEFAULT_TOLERANCE = {"normalization": 1e-8, "mean-value": 1e-6, "reproduction": 1e-6, "supercaloric": 0.0}


@dataclass
class SuiteResult:
    suite: str
    tolerance: float
    rows: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def passed(self):
        return all(r["pass"] for r in self.rows if "pass" in r)

    @property
    def worst(self):
        """Largest error among asserted rows (0 when there are none)."""
        errs = [r["error"] for r in self.rows if "pass" in r and "error" in r]
        return max(errs, default=0.0)

    def write_csv(self, path):
        keys = []
        for r in self.rows:
            keys.extend(k for k in r if k not in keys)
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=keys, lineterminator="\n")
            w.writeheader()
            for r in self.rows:
                w.writerow({k: _cell(v) for k, v in r.items()})

    def to_dict(self):
        return {
            "suite": self.suite,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "worst_error": self.worst,
            "rows": self.rows,
            "notes": self.notes,
        }


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _value_at(u, z):
    return float(np.asarray(as_field(u)(np.array([z]))).ravel()[0])


def pole_grid(dim):
    """3 x 3 poles in the (x1, t) plane, remaining coordinates zero."""
    poles = []
    for x in (-0.5, 0.0, 0.5):
        for t in (0.0, 0.5, 1.0):
            poles.append((x,) + (0.0,) * (dim - 1) + (t,))
    return poles


def caloric_comparators(dim, seed=0, n_random=2):
    """Named caloric functions used as oracles, all valid in dimension ``dim``."""
    gamma_pole = np.array((0.0,) * dim + (-6.0,))
    heat = "+".join(f"x{i + 1}^2" for i in range(dim)) + f"+{2 * dim}*t"
    out = {
        "constant": 2.5,
        f"{heat}": lambda p: np.sum(p[..., :-1] ** 2, axis=-1) + 2 * dim * p[..., -1],
        "x1^3+6*x1*t": lambda p: p[..., 0] ** 3 + 6 * p[..., 0] * p[..., -1],
        "exp(t)*cosh(x1)": lambda p: np.exp(p[..., -1]) * np.cosh(p[..., 0]),
        "gamma(z-(0,-6))": lambda p: gw_kernel(p - gamma_pole),
    }
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        u = caloric_extension(random_polynomial(rng, dim, 4))
        out[format_polynomial(u)] = u
    return out


def normalization_suite(dim=1, resolution=DEFAULT_RESOLUTION, tol=1e-8):
    res = SuiteResult("normalization", tol)
    for r in RADII:
        q = build_heat_ball_quadrature((0.0,) * (dim + 1), r, resolution, tol=np.inf)
        for pole in pole_grid(dim):
            err = abs(mean_value(1.0, pole, r, translated(q, pole)) - 1.0)
            res.rows.append({"pole": str(list(pole)), "r": r, "error": err, "pass": err <= tol})
    return res


def mean_value_suite(dim=1, resolution=DEFAULT_RESOLUTION, tol=1e-6, seed=0):
    res = SuiteResult("mean-value", tol)
    comps = caloric_comparators(dim, seed)
    for r in RADII:
        q = build_heat_ball_quadrature((0.0,) * (dim + 1), r, resolution, tol=np.inf)
        for pole in pole_grid(dim):
            moved = translated(q, pole)
            for name, u in comps.items():
                exact = _value_at(u, pole)
                err = abs(mean_value(u, pole, r, moved) - exact)
                res.rows.append(
                    {"comparator": name, "pole": str(list(pole)), "r": r, "error": err, "pass": err <= tol}
                )
    return res


def reproduction_suite(tol=1e-6, panels=96, seed=0):
    """Derived kernel asserted; the printed-formula kernel is only reported."""
    res = SuiteResult("reproduction", tol)
    disk = CaloricDisk((0.0, 0.0), 1.0)
    comps = caloric_comparators(1, seed)
    for name, u in comps.items():
        for z in REPRODUCTION_POINTS:
            exact = _value_at(u, z)
            derived, est = reproduce(u, z, disk, panels=panels)
            printed, _ = reproduce(u, z, disk, panels=panels, variant="printed")
            err = abs(derived - exact)
            scale = max(abs(exact), 1e-300)
            res.rows.append(
                {
                    "comparator": name,
                    "x1": z[0],
                    "t": z[1],
                    "exact": exact,
                    "derived": derived,
                    "error": err,
                    "quadrature_estimate": est,
                    "printed": printed,
                    "printed_residual": abs(printed - exact),
                    "printed_relative_residual": abs(printed - exact) / scale,
                    "pass": err <= tol,
                }
            )
    rel = [r["printed_relative_residual"] for r in res.rows]
    res.notes.append(f"printed-formula kernel: median relative residual {np.median(rel):.3g} (reported only)")
    return res


SUPERCALORIC_CASES = (
    ("t", lambda p: p[..., 1], "super"),
    ("x^2", lambda p: p[..., 0] ** 2, "sub"),
    ("x^2+2*t", lambda p: p[..., 0] ** 2 + 2 * p[..., 1], "caloric"),
    ("exp(t)*cosh(x)", lambda p: np.exp(p[..., 1]) * np.cosh(p[..., 0]), "caloric"),
)


def supercaloric_suite(resolution=DEFAULT_RESOLUTION, shape=(21, 21)):
    """Classifier on a grid over (-1, 1) x (0, 1); every tested node must agree."""
    res = SuiteResult("supercaloric", 0.0)
    lat = Lattice(DomainSpec.box((-1.0, 0.0), (1.0, 1.0)), shape)
    for name, f, expected in SUPERCALORIC_CASES:
        c = classify_supercaloric(GridFunction.sample(lat, f), resolution=resolution)
        counts = c.counts()
        tested = sum(v for k, v in counts.items() if k != "skipped")
        wrong = tested - counts[expected]
        res.rows.append(
            {
                "function": name,
                "expected": expected,
                "tested": tested,
                "skipped": counts["skipped"],
                "wrong": wrong,
                "worst_margin": c.worst_margin,
                "pass": wrong == 0 and tested > 0,
            }
        )
    return res
