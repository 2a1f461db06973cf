"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are printed even
under output capture) or directly with ``python3 tests/test_acceptance.py``.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate

from caloric.bowl import CaloricBowl, solve_bowl
from caloric.grid import INTERIOR, DomainSpec, GridFunction, Lattice
from caloric.heatball import build_heat_ball_quadrature, mean_value, translated
from caloric.kernels import CaloricDisk, gw_kernel, reproduce
from caloric.perron import SweepConfig, classify_supercaloric, perron_solve
from caloric.poly import (
    Polynomial,
    apply_heat,
    build_correction_system,
    caloric_extension,
    random_polynomial,
    substitute_paraboloid,
)


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def field_value(u, z):
    z = np.asarray(z, dtype=float)
    if isinstance(u, Polynomial):
        return float(u.evaluate_many(z[None, :])[0])
    return float(np.asarray(u(z[None, :])).ravel()[0])


# closed-form caloric comparators; each is checked below by finite differences
def comparators(dim):
    gamma_pole = np.array((0.0,) * dim + (-6.0,))
    out = {
        "constant": lambda p: np.full(p.shape[:-1], -1.75),
        "|x|^2+2Nt": lambda p: np.sum(p[..., :-1] ** 2, axis=-1) + 2 * dim * p[..., -1],
        "exp(t)cosh(x1)": lambda p: np.exp(p[..., -1]) * np.cosh(p[..., 0]),
        "Gamma(z-(0,-6))": lambda p: gw_kernel(p - gamma_pole),
    }
    if dim == 1:
        out["x^3+6xt"] = lambda p: p[..., 0] ** 3 + 6 * p[..., 0] * p[..., -1]
    return out


def heat_residual(f, z, dim, h=1e-3):
    """Fourth-order finite-difference ``(Lap - d/dt) f`` at ``z``."""
    z = np.asarray(z, dtype=float)
    total = 0.0
    for k in range(dim + 1):
        e = np.zeros(dim + 1)
        e[k] = h
        pts = np.array([z - 2 * e, z - e, z, z + e, z + 2 * e])
        v = f(pts)
        if k < dim:
            total += (-v[0] + 16 * v[1] - 30 * v[2] + 16 * v[3] - v[4]) / (12 * h * h)
        else:
            total -= (v[0] - 8 * v[1] + 8 * v[3] - v[4]) / (12 * h)
    return total


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_comparators_are_caloric(dim):
    rng = np.random.default_rng(dim)
    for f in comparators(dim).values():
        for z in rng.uniform(-0.5, 0.5, size=(4, dim + 1)):
            assert abs(heat_residual(f, z, dim)) < 1e-6


# -- 1 ---------------------------------------------------------------------------------


def test_criterion_01_exact_extension(capsys):
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    failures = 0
    count = 0
    for dim in (1, 2, 3):
        for m in range(9):
            for _ in range(200):
                p = random_polynomial(rng, dim, m)
                u = caloric_extension(p)
                if not (apply_heat(u).is_zero() and substitute_paraboloid(u - p).is_zero()):
                    failures += 1
                count += 1
    elapsed = time.perf_counter() - start
    ok = failures == 0 and elapsed < 60
    report(capsys, 1, ok, f"{count} extensions, {failures} inexact, {elapsed:.1f} s (limit 60 s)")


# -- 2 -----------------------------------------------------------------------------------------


def _fraction_det(rows):
    """Plain Gaussian elimination over Fractions, independent of the library's Bareiss."""
    a = [[Fraction(v) for v in r] for r in rows]
    n = len(a)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if a[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            det = -det
        det *= a[c][c]
        for r in range(c + 1, n):
            if a[r][c]:
                f = a[r][c] / a[c][c]
                a[r] = [x - f * y for x, y in zip(a[r], a[c])]
    return det


def test_criterion_02_invertibility(capsys):
    problems = []
    checked_independently = 0
    for dim in (1, 2, 3):
        for m in range(9):
            sys_ = build_correction_system(dim, m)
            if sys_.determinant == 0:
                problems.append(f"det 0 at N={dim}, m={m}")
            if len(sys_.basis) <= 60:
                if _fraction_det(sys_.matrix) != sys_.determinant:
                    problems.append(f"det mismatch at N={dim}, m={m}")
                checked_independently += 1
    s = build_correction_system(1, 2)
    pos = {a: i for i, a in enumerate(s.basis)}
    one, x, t, x2 = (0, 0), (1, 0), (0, 1), (2, 0)
    expected = {
        one: {one: -3},
        x: {x: -7},
        t: {x2: 1, t: -4},
        x2: {t: 2, x2: -13},
    }
    for col, entries in expected.items():
        for row in (one, x, t, x2):
            if s.matrix[pos[row]][pos[col]] != entries.get(row, 0):
                problems.append(f"entry T({col})[{row}]")
    if s.determinant != 1050:
        problems.append(f"N=1, m=2 det {s.determinant}")
    detail = f"27 systems nonsingular, {checked_independently} dets re-derived, N=1 m=2 det {s.determinant}"
    report(capsys, 2, not problems, detail if not problems else "; ".join(problems))


# -- 3 -------------------------------------------------------------------------------------------


def test_criterion_03_boundary_class(capsys):
    rng = np.random.default_rng(7)
    same = 0
    for k in range(50):
        dim = 1 + k % 3
        p = random_polynomial(rng, dim, 5)
        s = random_polynomial(rng, dim, 3)
        if s.is_zero():
            s = Polynomial.constant(dim, 1)
        same += caloric_extension(p) == caloric_extension(p + Polynomial.w(dim) * s)
    report(capsys, 3, same == 50, f"{same}/50 pairs give identical extensions")


# -- 4 ---------------------------------------------------------------------------------------------


def test_criterion_04_mean_value(capsys):
    start = time.perf_counter()
    worst = worst_norm = 0.0
    n = 0
    for dim in (1, 2, 3):
        comps = comparators(dim)
        for r in (0.1, 0.5, 1.0):
            base = build_heat_ball_quadrature((0.0,) * (dim + 1), r)
            for x0 in (-0.5, 0.0, 0.5):
                for t0 in (0.0, 0.5, 1.0):
                    pole = (x0,) + (0.0,) * (dim - 1) + (t0,)
                    q = translated(base, pole)
                    worst_norm = max(worst_norm, abs(mean_value(1.0, pole, r, q) - 1))
                    for f in comps.values():
                        worst = max(worst, abs(mean_value(f, pole, r, q) - field_value(f, pole)))
                        n += 1
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and worst_norm <= 1e-8 and elapsed < 120
    detail = f"{n} means, worst error {worst:.2e} (1e-6), normalisation {worst_norm:.2e} (1e-8), {elapsed:.1f} s"
    report(capsys, 4, ok, detail)


# -- 5 ---------------------------------------------------------------------------------------------


def test_criterion_05_reproduction(capsys, tmp_path):
    disk = CaloricDisk((0.0, 0.0), 1.0)
    points = [(0.0, 0.0), (0.3, 0.2), (-0.4, -0.3), (0.2, -0.5), (0.5, 0.5)]
    worst = 0.0
    printed_rel = []
    lines = ["comparator,x1,t,exact,derived_error,printed_residual"]
    for name, f in comparators(1).items():
        for z in points:
            exact = field_value(f, z)
            derived, _ = reproduce(f, z, disk)
            printed, _ = reproduce(f, z, disk, variant="printed")
            worst = max(worst, abs(derived - exact))
            if exact != 0:
                printed_rel.append(abs(printed - exact) / abs(exact))
            lines.append(f"{name},{z[0]!r},{z[1]!r},{exact!r},{abs(derived - exact)!r},{abs(printed - exact)!r}")
    artifact = tmp_path / "reproduction_discrepancy.csv"
    artifact.write_text("\n".join(lines) + "\n")
    detail = (
        f"derived kernel worst error {worst:.2e} (1e-6); printed-formula relative residual "
        f"median {np.median(printed_rel):.2f} (reported only, {artifact.name})"
    )
    report(capsys, 5, worst <= 1e-6, detail)


# -- 6 ---------------------------------------------------------------------------------------------


def _bowl_points(bowl, n, rng):
    """Uniform-ish points inside the open bowl."""
    dim = bowl.dim
    out = []
    while len(out) < n:
        x = rng.uniform(-bowl.opening, bowl.opening, dim)
        lo = float(x @ x)
        if lo >= bowl.opening**2:
            continue
        t = rng.uniform(lo, bowl.opening**2)
        out.append(np.concatenate([x, [t]]) + np.asarray(bowl.bottom))
    return np.array(out)


def test_criterion_06_bowl_certificate(capsys):
    bowl = CaloricBowl((0.0, 0.0), 1.0)
    rng = np.random.default_rng(11)
    pts = _bowl_points(bowl, 20, rng)
    cases = {
        "x^2+2t": lambda p: p[..., 0] ** 2 + 2 * p[..., 1],
        "exp(t)cosh(x)": lambda p: np.exp(p[..., 1]) * np.cosh(p[..., 0]),
    }
    problems = []
    notes = []
    for name, g in cases.items():
        for d in range(0, 11):
            sol = solve_bowl(bowl, g, degree=d)
            err = float(np.max(np.abs(sol(pts) - g(pts))))
            if err > sol.epsilon + 1e-12:
                problems.append(f"{name} d={d}: error {err:.2e} > eps {sol.epsilon:.2e}")
        notes.append(f"{name}: eps {sol.epsilon:.1e} at d=10, interior error {err:.1e}")
        if sol.epsilon > 1e-3:
            problems.append(f"{name}: eps {sol.epsilon:.2e} > 1e-3 at degree 10")
    report(capsys, 6, not problems, "; ".join(problems or notes))


# -- 7 ---------------------------------------------------------------------------------------------


def test_criterion_07_positivity(capsys):
    rng = np.random.default_rng(5)
    worst = np.inf
    bad = dipped = 0
    for k in range(50):
        dim = 1 + k % 2
        bottom = tuple(rng.uniform(-1, 1, dim + 1))
        bowl = CaloricBowl(bottom, rng.uniform(0.3, 2.0))
        a = rng.normal(size=(3, dim + 1))
        c = rng.normal(size=3)
        if k % 4 < 2:
            # smooth, nonnegative, not identically zero
            def phi(p, a=a, c=c):
                return np.sin(p @ a.T + c).sum(axis=-1) ** 2
        else:
            # kinked and vanishing on part of the boundary
            def phi(p, a=a, c=c):
                return np.maximum(np.sin(p @ a.T + c).sum(axis=-1), 0.0) ** 2

        sol = solve_bowl(bowl, phi, degree=8)
        u_min = float(np.min(sol(bowl.closure_samples(20))))
        worst = min(worst, u_min + sol.epsilon)
        bad += u_min < -sol.epsilon
        dipped += u_min < 0
    detail = f"50 fits, min over samples of u + eps = {worst:.2e} (must be >= 0); {dipped} dip below 0 within eps"
    report(capsys, 7, bad == 0, detail)


# -- 8 ---------------------------------------------------------------------------------------------


def test_criterion_08_classifier(capsys):
    lat = Lattice(DomainSpec.box((-1.0, 0.0), (1.0, 1.0)), (21, 21))
    # N = 1: M_r(t) = t - r / 3^(5/2) and, since x^2 + 2t is caloric, M_r(x^2) = x^2 + 2 r / 3^(5/2)
    c0 = integrate.quad(lambda s: s * math.sqrt(2 * s * math.log(1 / s)) ** 3 / (3 * 4 * s * s) * 2, 0, 1)[0]
    c0 *= (4 * math.pi) ** -0.5
    assert c0 == pytest.approx(3**-2.5, rel=1e-8)
    cases = [
        ("t", lambda p: p[..., 1], "super", lambda r: c0 * r),
        ("x^2", lambda p: p[..., 0] ** 2, "sub", lambda r: -2 * c0 * r),
        ("x^2+2t", lambda p: p[..., 0] ** 2 + 2 * p[..., 1], "caloric", lambda r: 0.0),
    ]
    problems = []
    notes = []
    for name, f, verdict, margin in cases:
        c = classify_supercaloric(GridFunction.sample(lat, f))
        tested = c.tested()
        n = int(tested.sum())
        agree = int(np.sum(c.verdicts[tested] == verdict))
        off = 0.0
        for j, r in enumerate(c.radii):
            dev = np.abs(c.margins[tested][:, j] - margin(r)) - c.bands[tested][:, j]
            off = max(off, float(np.max(dev)))
        if agree != n or n == 0:
            problems.append(f"{name}: {agree}/{n} {verdict}")
        if off > 0:
            problems.append(f"{name}: margin outside band by {off:.1e}")
        notes.append(f"{name} {agree}/{n} {verdict}")
    report(capsys, 8, not problems, "; ".join(problems or notes) + " (margins within quadrature bands)")


# -- 9 and 10 -------------------------------------------------------------------------------------------


PERRON_CASES = {
    "x^2+2t": lambda p: p[..., 0] ** 2 + 2 * p[..., 1],
    "exp(t)cosh(x)": lambda p: np.exp(p[..., 1]) * np.cosh(p[..., 0]),
}


def _perron_run(name, out_dir):
    start = time.perf_counter()
    lat = Lattice(DomainSpec.box((-1.0, 0.0), (1.0, 1.0)), (41, 41))
    f = PERRON_CASES[name]
    rep = perron_solve(lat, f, SweepConfig(mode="sequential"), comparator=f)
    paths = rep.write_outputs(out_dir, prefix="run")
    return rep, paths, time.perf_counter() - start


@pytest.fixture(scope="module")
def perron_runs(tmp_path_factory):
    runs = {}
    for name in PERRON_CASES:
        runs[name] = [_perron_run(name, tmp_path_factory.mktemp(f"run{k}")) for k in range(2)]
    return runs


def test_criterion_09_perron(capsys, perron_runs):
    problems = []
    notes = []
    elapsed = 0.0
    for name, runs in perron_runs.items():
        rep, _, seconds = runs[0]
        elapsed += seconds
        lat = rep.upper.lattice
        interior = lat.classes == INTERIOR
        exact = PERRON_CASES[name](lat.points)
        err = float(np.max(np.abs(rep.upper.values - exact)[interior]))
        lo, up = rep.lower.values, rep.upper.values
        tol = rep.tol
        sandwich = bool(np.all(rep.m - tol <= lo) and np.all(lo <= up + tol) and np.all(up <= rep.M + tol))
        gap = float(np.max(np.abs(up - lo)))
        checks = {
            "converged": rep.converged and rep.sweeps <= 500,
            "update": rep.final_update < 1e-6,
            "error": err <= 5e-2,
            "gap": gap <= 2 * tol,
            "sandwich": sandwich,
        }
        problems += [f"{name}: {k}" for k, v in checks.items() if not v]
        notes.append(f"{name}: {rep.sweeps} sweeps, update {rep.final_update:.1e}, error {err:.1e}, gap {gap:.1e}")
    if elapsed > 600:
        problems.append(f"runtime {elapsed:.0f} s")
    report(capsys, 9, not problems, "; ".join(problems or notes) + f"; {elapsed:.1f} s")


def test_criterion_10_determinism(capsys, perron_runs):
    mismatched = []
    compared = 0
    for name, ((_, a, _), (_, b, _)) in perron_runs.items():
        for key in ("upper", "lower", "trace"):
            compared += 1
            if a[key].read_bytes() != b[key].read_bytes():
                mismatched.append(f"{name}/{key}")
    report(capsys, 10, not mismatched, f"{compared - len(mismatched)}/{compared} CSV files byte-identical")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
