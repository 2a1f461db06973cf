"""Perron sweeps on a lattice: classification, regularisation, upper/lower solutions.

Every scheduled bowl ``B = B(z0, r)`` has its bottom on a lattice node, so
the regularisation ``u -> u_B`` is a fixed linear map of nearby grid values:
interpolate ``u`` onto the normal boundary of ``2B``, fit a polynomial, take
its exact caloric extension and evaluate it at the lattice nodes of
``B-hat = B + top(B)``.  Each map is assembled once and a sweep is then a
sequence of small gathers, matvecs and scatters.
"""

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from .bowl import (
    SAFETY_FACTOR,
    _dense_per_axis,
    _design,
    _fit_nodes_per_axis,
    ball_nodes,
    spatial_exponents,
)
from .grid import BOUNDARY, EXTERIOR, INTERIOR, GridFunction, Lattice, interpolation_stencil
from .heatball import build_heat_ball_quadrature
from .kernels import as_field
from .poly import Polynomial, spatial_caloric_extension

log = logging.getLogger(__name__)

SCHEDULES = ("time-major", "space-major")
MODES = ("sequential", "parallel")


class DegenerateDomainError(ValueError):
    pass


@dataclass(frozen=True)
class SweepConfig:
    """Sweep parameters.

    ``opening`` is the bowl opening ``r`` in domain units; ``None`` picks the
    smallest admissible value, ``max(3 h_x, sqrt(3 h_t))``.
    """

    opening: float = None
    schedule: str = "time-major"
    interpolation_order: int = 1
    degree: int = 8
    tol: float = 1e-6
    max_sweeps: int = 500
    mode: str = "sequential"

    def __post_init__(self):
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.interpolation_order not in (1, 2):
            raise ValueError("interpolation order must be 1 or 2")
        if self.degree < 0 or self.max_sweeps < 1 or not self.tol > 0:
            raise ValueError("need degree >= 0, max_sweeps >= 1 and tol > 0")

    def resolved_opening(self, lattice):
        h_x = max(lattice.spacing[:-1])
        h_t = lattice.spacing[-1]
        r_min = max(3 * h_x, math.sqrt(3 * h_t))
        if self.opening is None:
            return r_min
        if self.opening < r_min * (1 - 1e-12):
            raise ValueError(
                f"bowl opening {self.opening} spans fewer than 3 lattice steps (need r >= {r_min:.6g})"
            )
        return float(self.opening)


# -- linear regularisation operators -----------------------------------------------


@lru_cache(maxsize=None)
def _extension_basis(dim, degree):
    exps = spatial_exponents(dim, degree)
    return exps, [spatial_caloric_extension(Polynomial.monomial(dim, e + (0,))) for e in exps]


def _hat_offsets(lattice, r):
    """Integer offsets of lattice nodes in ``B-hat(0, r)``."""
    h = np.asarray(lattice.spacing)
    nx = [int(math.floor(r / hi + 1e-9)) for hi in h[:-1]]
    nt = int(math.floor(r * r / h[-1] + 1e-9))
    ranges = [range(-n, n + 1) for n in nx] + [range(0, nt + 1)]
    grids = np.meshgrid(*[np.array(list(rg)) for rg in ranges], indexing="ij")
    offs = np.stack([g.ravel() for g in grids], axis=-1)
    rel = offs * h
    r2 = np.sum(rel[:, :-1] ** 2, axis=-1)
    s = rel[:, -1]
    scale = r * r
    keep = (r2 < s - 1e-12 * scale) & (s <= scale * (1 + 1e-12))
    return offs[keep]


@dataclass(frozen=True, eq=False)
class BowlOperator:
    """``u[write] <- R @ u[read]`` plus residual maps for the certificate."""

    bottom: tuple
    read: np.ndarray
    write: np.ndarray
    R: np.ndarray
    Q: np.ndarray
    J: np.ndarray


@dataclass(frozen=True, eq=False)
class _Prototype:
    exps: list
    fit_xi: np.ndarray
    check_xi: np.ndarray
    VP: np.ndarray
    DP: np.ndarray
    hat_offsets: np.ndarray


def _prototype(lattice, r, degree):
    dim = lattice.dim
    rho = 2 * r
    n_fit = _fit_nodes_per_axis(dim, degree)
    fit_xi = np.asarray(ball_nodes(dim, n_fit))
    check_xi = np.asarray(ball_nodes(dim, _dense_per_axis(dim, n_fit)))
    exps, ext = _extension_basis(dim, degree)
    pinv = np.linalg.pinv(_design(fit_xi, exps))
    hat = _hat_offsets(lattice, r)
    rel = hat * np.asarray(lattice.spacing)
    scaled = np.concatenate([rel[:, :-1] / rho, rel[:, -1:] / rho**2], axis=-1)
    V = np.stack([e.evaluate_many(scaled) for e in ext], axis=-1)
    D_check = _design(check_xi, exps)
    return _Prototype(exps, fit_xi, check_xi, V @ pinv, D_check @ pinv, hat)


def _boundary_points(bottom, xi, rho):
    x = bottom[:-1] + rho * xi
    t = bottom[-1] + rho**2 * np.sum(xi * xi, axis=-1)
    return np.concatenate([x, t[:, None]], axis=-1)


def _stencil_matrix(lattice, points, order, columns):
    idx, w = interpolation_stencil(lattice, points, order, clamp=True)
    flat = lattice.flat_index(idx.reshape(-1, idx.shape[-1])).reshape(idx.shape[:2])
    mat = np.zeros((len(points), len(columns)))
    col = np.searchsorted(columns, flat)
    np.add.at(mat, (np.repeat(np.arange(len(points)), flat.shape[1]), col.ravel()), w.ravel())
    return mat, flat


def build_bowl_operator(lattice, bottom_index, r, degree, order, proto=None):
    """Linear map for ``u -> u_B`` at the bowl with bottom at ``bottom_index``."""
    proto = proto or _prototype(lattice, r, degree)
    bottom_index = np.asarray(bottom_index)
    bottom = lattice.points[tuple(bottom_index)]
    rho = 2 * r
    fit_pts = _boundary_points(bottom, proto.fit_xi, rho)
    check_pts = _boundary_points(bottom, proto.check_xi, rho)
    alt = 2 if order == 1 else 1
    # collect the read set first so all matrices share columns
    cols = set()
    for pts, o in ((fit_pts, order), (check_pts, order), (check_pts, alt)):
        idx, w = interpolation_stencil(lattice, pts, o, clamp=True)
        flat = lattice.flat_index(idx.reshape(-1, idx.shape[-1]))
        cols.update(flat[w.ravel() != 0].tolist())
    read = np.array(sorted(cols), dtype=np.int64)
    A_fit, _ = _stencil_matrix(lattice, fit_pts, order, read)
    A_check, _ = _stencil_matrix(lattice, check_pts, order, read)
    A_alt, _ = _stencil_matrix(lattice, check_pts, alt, read)
    write_idx = proto.hat_offsets + bottom_index
    write = lattice.flat_index(write_idx)
    return BowlOperator(
        bottom=tuple(float(v) for v in bottom),
        read=read,
        write=write,
        R=proto.VP @ A_fit,
        Q=proto.DP @ A_fit - A_check,
        J=A_check - A_alt,
    )


def _bowl_fits(lattice, bottom, r):
    """Whether ``2B(bottom, r)`` lies in the domain."""
    dom = lattice.domain
    rho = 2 * r
    if dom.predicate is None and not dom.boxes:
        lo, hi = np.asarray(dom.lower), np.asarray(dom.upper)
        tol = 1e-12 * (1 + np.abs(hi - lo))
        x0, t0 = bottom[:-1], bottom[-1]
        return bool(
            np.all(x0 - rho >= lo[:-1] - tol[:-1])
            and np.all(x0 + rho <= hi[:-1] + tol[:-1])
            and t0 >= lo[-1] - tol[-1]
            and t0 + rho * rho <= hi[-1] + tol[-1]
        )
    # sample the open doubled bowl, shrunk slightly off its boundary
    n = 9
    xi = np.asarray(ball_nodes(lattice.dim, n)) * (1 - 1e-9)
    lam = np.linspace(1e-9, 1 - 1e-9, n)
    r2 = np.sum(xi * xi, axis=-1)
    s = r2[:, None] + lam[None, :] * (1 - r2)[:, None]
    pts = np.concatenate([np.repeat(xi * rho, n, axis=0), (rho**2 * s).reshape(-1, 1)], axis=-1) + bottom
    return bool(np.all(dom.contains(pts)))


def schedule_bowls(lattice, config):
    """Bottom indices of admissible bowls in visiting order."""
    r = config.resolved_opening(lattice)
    idx = np.argwhere(lattice.classes == INTERIOR)
    keep = [i for i in idx if _bowl_fits(lattice, lattice.points[tuple(i)], r)]
    if not keep:
        raise DegenerateDomainError(
            f"no interior bowls at this resolution (opening {r:.6g}, lattice {lattice.shape})"
        )
    keep = np.array(keep)
    if config.schedule == "time-major":
        # t is the slowest key: earlier times are visited first
        order = np.lexsort(tuple(keep[:, k] for k in range(keep.shape[1] - 1, -1, -1))[::-1])
    else:
        order = np.lexsort(tuple(keep[:, k] for k in range(keep.shape[1] - 1, -1, -1)))
    return keep[order], r


def build_operators(lattice, config):
    bottoms, r = schedule_bowls(lattice, config)
    proto = _prototype(lattice, r, config.degree)
    ops = [build_bowl_operator(lattice, b, r, config.degree, config.interpolation_order, proto) for b in bottoms]
    return ops, r


def _colour(ops):
    """Greedy colouring so bowls sharing a colour touch disjoint nodes."""
    colours = []
    used = []
    for k, op in enumerate(ops):
        foot = set(op.read.tolist()) | set(op.write.tolist())
        for c, taken in enumerate(used):
            if taken.isdisjoint(foot):
                colours[c].append(k)
                taken |= foot
                break
        else:
            colours.append([k])
            used.append(foot)
    return colours


# -- grid-level operations ----------------------------------------------------------


def caloric_regularize(u, bottom, opening, degree=8, order=1):
    """``u_B``: ``u`` with ``B-hat`` replaced by the bowl solution on ``2B``.

    ``bottom`` is the lattice index (or coordinates of a lattice node) of the
    bowl's bottom.  Returns ``(new_grid, epsilon, interpolation_estimate)``.
    """
    lattice = u.lattice
    bottom = np.asarray(bottom)
    if bottom.dtype.kind == "f":
        pos = lattice.fractional_index(bottom)
        if np.max(np.abs(pos - np.rint(pos))) > 1e-9:
            raise ValueError("bowl bottom must be a lattice node")
        bottom = np.rint(pos).astype(np.int64)
    point = lattice.points[tuple(bottom)]
    if not _bowl_fits(lattice, point, opening):
        raise ValueError("the doubled bowl 2B must lie inside the domain")
    op = build_bowl_operator(lattice, bottom, opening, degree, order)
    vals = u.values.ravel()[op.read]
    out = u.values.copy().ravel()
    out[op.write] = op.R @ vals
    eps = SAFETY_FACTOR * float(np.max(np.abs(op.Q @ vals)))
    interp = float(np.max(np.abs(op.J @ vals)))
    return GridFunction(lattice, out.reshape(lattice.shape)), eps, interp


@dataclass
class SweepRecord:
    sweep: int
    max_update: float
    max_epsilon: float
    max_interpolation: float
    monotone_excess: float
    tail_estimate: float


@dataclass
class UpperResult:
    grid: GridFunction
    converged: bool
    sweeps: int
    final_update: float
    trace: list
    relaxed: np.ndarray = field(repr=False)
    opening: float = 0.0
    bowls: int = 0

    @property
    def tolerance(self):
        """Largest per-sweep solver plus interpolation error bound seen."""
        return max((r.max_epsilon + r.max_interpolation for r in self.trace), default=0.0)


def _node_values(lattice, phi):
    vals = np.asarray(as_field(phi)(lattice.points), dtype=float)
    if vals.shape != lattice.shape or not np.all(np.isfinite(vals)):
        raise ValueError("boundary data must be finite at every lattice node")
    return vals


def boundary_bounds(lattice, phi_values):
    b = phi_values[lattice.classes == BOUNDARY]
    return float(np.min(b)), float(np.max(b))


def perron_upper(lattice, phi, config=None, initial=None, operators=None):
    """Sweep from the constant ``M`` down towards the upper Perron solution.

    Nodes never touched by any ``B-hat`` (boundary nodes and interior nodes
    too close to the boundary for an admissible bowl) are pinned to ``phi``.
    ``initial`` replaces the constant start on relaxed nodes.
    """
    config = config or SweepConfig()
    phi_vals = _node_values(lattice, phi)
    if operators is None:
        operators, r = build_operators(lattice, config)
    else:
        r = config.resolved_opening(lattice)
    relaxed = np.zeros(lattice.size, dtype=bool)
    for op in operators:
        relaxed[op.write] = True
    _, M = boundary_bounds(lattice, phi_vals)
    u = phi_vals.ravel().copy()
    if initial is None:
        u[relaxed] = M
    else:
        u[relaxed] = np.asarray(initial, dtype=float).ravel()[relaxed]
    batches = _colour(operators) if config.mode == "parallel" else None
    trace = []
    converged = False
    update = np.inf
    for sweep in range(1, config.max_sweeps + 1):
        old = u.copy()
        eps = interp = 0.0
        if batches is None:
            for op in operators:
                vals = u[op.read]
                u[op.write] = op.R @ vals
                eps = max(eps, float(np.max(np.abs(op.Q @ vals))))
                interp = max(interp, float(np.max(np.abs(op.J @ vals))))
        else:
            for batch in batches:
                news = []
                for k in batch:
                    op = operators[k]
                    vals = u[op.read]
                    news.append(op.R @ vals)
                    eps = max(eps, float(np.max(np.abs(op.Q @ vals))))
                    interp = max(interp, float(np.max(np.abs(op.J @ vals))))
                for k, new in zip(batch, news):
                    u[operators[k].write] = new
        eps *= SAFETY_FACTOR
        diff = u - old
        update = float(np.max(np.abs(diff)))
        tail = _tail_estimate([r.max_update for r in trace] + [update])
        if update <= 64 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(u)))):
            tail = 0.0  # a fixed point up to roundoff has no tail
        trace.append(SweepRecord(sweep, update, eps, interp, float(max(np.max(diff), 0.0)), tail))
        # small update alone can hide a slow tail; also ask the geometric
        # estimate of the remaining distance to the limit to be small
        if update < config.tol and tail <= config.tol / 2:
            converged = True
            break
    if not converged:
        log.warning("Perron sweep did not converge in %d sweeps (last update %.3g)", config.max_sweeps, update)
    return UpperResult(
        grid=GridFunction(lattice, u.reshape(lattice.shape)),
        converged=converged,
        sweeps=len(trace),
        final_update=update,
        trace=trace,
        relaxed=relaxed.reshape(lattice.shape),
        opening=r,
        bowls=len(operators),
    )


def _tail_estimate(updates, window=3):
    """``update * rho / (1 - rho)`` with ``rho`` the worst recent update ratio."""
    if len(updates) < window + 1:
        return np.inf
    recent = updates[-window - 1 :]
    ratios = [b / a if a > 0 else 0.0 for a, b in zip(recent, recent[1:])]
    rho = max(ratios)
    if rho >= 1:
        return np.inf
    return updates[-1] * rho / (1 - rho)


def _negate(phi):
    f = as_field(phi)
    return lambda pts: -np.asarray(f(pts), dtype=float)


def perron_lower(lattice, phi, config=None, operators=None):
    """``-perron_upper(-phi)``: the lower solution by duality."""
    res = perron_upper(lattice, _negate(phi), config, operators=operators)
    res.grid = GridFunction(lattice, -res.grid.values)
    return res


@dataclass
class PerronReport:
    upper: GridFunction
    lower: GridFunction
    gap: np.ndarray
    upper_result: UpperResult
    lower_result: UpperResult
    m: float
    M: float
    tol: float
    config: SweepConfig
    comparator_error: float = None
    relaxed_comparator_error: float = None
    echo: dict = None

    @property
    def converged(self):
        return self.upper_result.converged and self.lower_result.converged

    @property
    def sweeps(self):
        return max(self.upper_result.sweeps, self.lower_result.sweeps)

    @property
    def final_update(self):
        return max(self.upper_result.final_update, self.lower_result.final_update)

    @property
    def max_gap(self):
        return float(np.max(np.abs(self.gap)))

    def bounds_check(self):
        """Nodewise ``m - tol <= lower <= upper + tol <= M + tol`` on the closure.

        Exterior nodes only carry pinned data and are left out.
        """
        keep = self.upper.lattice.classes != EXTERIOR
        lo, up, t = self.lower.values[keep], self.upper.values[keep], self.tol
        return {
            "lower_above_m": bool(np.all(lo >= self.m - t)),
            "lower_below_upper": bool(np.all(lo <= up + t)),
            "upper_below_M": bool(np.all(up <= self.M + t)),
        }

    @property
    def sandwich_ok(self):
        return all(self.bounds_check().values())

    def summary(self):
        up, lo = self.upper_result, self.lower_result
        out = {
            "converged": self.converged,
            "sweeps_upper": up.sweeps,
            "sweeps_lower": lo.sweeps,
            "final_update": self.final_update,
            "tail_estimate": max(self.upper_result.trace[-1].tail_estimate, self.lower_result.trace[-1].tail_estimate),
            "max_gap": self.max_gap,
            "min_gap": float(np.min(self.gap)),
            "m": self.m,
            "M": self.M,
            "tol": self.tol,
            "bounds": self.bounds_check(),
            "sandwich_ok": self.sandwich_ok,
            "bowl_opening": up.opening,
            "bowls_per_sweep": up.bowls,
            "relaxed_nodes": int(up.relaxed.sum()),
            "pinned_nodes": int(up.relaxed.size - up.relaxed.sum()),
            "solver_tolerance": max(up.tolerance, lo.tolerance),
            "config": asdict(self.config),
        }
        if self.comparator_error is not None:
            out["comparator_error_interior"] = self.comparator_error
            out["comparator_error_relaxed"] = self.relaxed_comparator_error
        if self.echo is not None:
            out["resolved_config"] = self.echo
        return out

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_trace(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["solution", "sweep", "max_update", "max_epsilon", "max_interpolation", "monotone_excess", "tail_estimate"])
            for name, res in (("upper", self.upper_result), ("lower", self.lower_result)):
                for r in res.trace:
                    vals = (r.max_update, r.max_epsilon, r.max_interpolation, r.monotone_excess, r.tail_estimate)
                    w.writerow([name, r.sweep] + [repr(float(v)) for v in vals])

    def write_outputs(self, out_dir, prefix="perron"):
        from pathlib import Path

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "upper": out / f"{prefix}_upper.csv",
            "lower": out / f"{prefix}_lower.csv",
            "report": out / f"{prefix}_report.json",
            "trace": out / f"{prefix}_trace.csv",
        }
        self.upper.to_csv(paths["upper"])
        self.lower.to_csv(paths["lower"])
        self.to_json(paths["report"])
        self.write_trace(paths["trace"])
        return paths


def perron_solve(lattice, phi, config=None, comparator=None, echo=None):
    """Upper and lower solutions, their gap and the bounds check.

    With a ``comparator`` (a known caloric solution) the sup error over
    interior nodes, and over relaxed nodes only, is recorded as well.
    """
    config = config or SweepConfig()
    ops, _ = build_operators(lattice, config)
    upper = perron_upper(lattice, phi, config, operators=ops)
    lower = perron_lower(lattice, phi, config, operators=ops)
    m, M = boundary_bounds(lattice, _node_values(lattice, phi))
    report = PerronReport(
        upper=upper.grid,
        lower=lower.grid,
        gap=upper.grid.values - lower.grid.values,
        upper_result=upper,
        lower_result=lower,
        m=m,
        M=M,
        tol=config.tol,
        config=config,
        echo=echo,
    )
    if comparator is not None:
        exact = as_field(comparator)(lattice.points)
        err = np.abs(upper.grid.values - exact)
        report.comparator_error = float(np.max(err[lattice.classes == INTERIOR]))
        report.relaxed_comparator_error = float(np.max(err[upper.relaxed]))
    return report


# -- classification ------------------------------------------------------------------


VERDICTS = ("super", "sub", "caloric", "neither", "skipped")


@dataclass
class Classification:
    verdicts: np.ndarray
    margins: np.ndarray
    bands: np.ndarray
    radii: tuple
    worst_margin: float

    def counts(self):
        return {v: int(np.sum(self.verdicts == v)) for v in VERDICTS}

    def tested(self):
        return self.verdicts != "skipped"


def classify_supercaloric(u, radii=(0.05, 0.1), resolution=4, order=2):
    """Sign of ``u(z) - M_r(u)(z)`` at lattice nodes over several radii.

    ``M_r`` uses heat-ball quadrature on the interpolated grid function.  The
    tolerance band at each node is the quadrature normalisation error times
    the local size of ``u`` plus the gap between interpolants of orders 1
    and 2.  Nodes whose heat balls leave the domain are ``"skipped"``.
    """
    lattice = u.lattice
    shape = lattice.shape
    verdicts = np.full(shape, "skipped", dtype=object)
    margins = np.full(shape + (len(radii),), np.nan)
    bands = np.full(shape + (len(radii),), np.nan)
    origin = tuple([0.0] * (lattice.dim + 1))
    quads = [build_heat_ball_quadrature(origin, r, resolution=resolution) for r in radii]
    alt = 1 if order == 2 else 2
    flat_pts = lattice.points.reshape(-1, lattice.dim + 1)
    vals = u.values.ravel()
    candidates = np.where(lattice.classes.ravel() == INTERIOR)[0]
    for j, q in enumerate(quads):
        for k in candidates:
            nodes = flat_pts[k] - q.offsets
            if not np.all(lattice.domain.contains(nodes)):
                continue
            f1 = u.interpolate(nodes, order)
            f2 = u.interpolate(nodes, alt)
            mean = float(q.kernel_weights @ f1)
            alt_mean = float(q.kernel_weights @ f2)
            idx = np.unravel_index(k, shape)
            margins[idx + (j,)] = vals[k] - mean
            scale = max(1.0, float(np.max(np.abs(f1))))
            bands[idx + (j,)] = q.normalization_error * scale + abs(mean - alt_mean) + 1e-12 * scale
    worst = np.inf
    tested = np.all(np.isfinite(margins), axis=-1)
    for idx in zip(*np.nonzero(tested)):
        m, b = margins[idx], bands[idx]
        slack_cal = np.min(b - np.abs(m))
        if slack_cal >= 0:
            verdicts[idx] = "caloric"
            worst = min(worst, slack_cal)
        elif np.all(m >= -b):
            verdicts[idx] = "super"
            worst = min(worst, float(np.min(m + b)))
        elif np.all(m <= b):
            verdicts[idx] = "sub"
            worst = min(worst, float(np.min(b - m)))
        else:
            verdicts[idx] = "neither"
    return Classification(verdicts, margins, bands, tuple(radii), float(worst))
