"""Dirichlet problem on caloric bowls.

A caloric bowl ``B(z0, r) = {|x - x0|^2 < t - t0 < r^2}`` has normal boundary
the paraboloid cap ``t - t0 = |x - x0|^2, |x - x0| <= r``, the graph of
``x -> t0 + |x - x0|^2`` over a closed ball.  Data posed there is fitted by a
polynomial in ``x``; its caloric extension (built from heat polynomials) is an
exact caloric polynomial, and by the maximum principle the solution error on
the closed bowl equals the fit error on the normal boundary.

All polynomials here are kept in coordinates centred at the bowl bottom, so
solving on ``B(z0, r)`` and on ``B(0, r)`` with translated data produce the
same coefficients.
"""

import csv
import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .kernels import as_field, caloric_norm
from .poly import Polynomial, format_polynomial, spatial_caloric_extension, translate

log = logging.getLogger(__name__)

SAFETY_FACTOR = 1.25
DENSITY_FACTOR = 4
DEFAULT_MAX_DEGREE = 14
CONDITION_LIMIT = 1e12


class ToleranceNotMet(RuntimeError):
    pass


@dataclass(frozen=True)
class CaloricBowl:
    bottom: tuple
    opening: float

    def __post_init__(self):
        if not self.opening > 0:
            raise ValueError("bowl opening must be positive")
        object.__setattr__(self, "bottom", tuple(float(v) for v in self.bottom))

    @property
    def dim(self):
        return len(self.bottom) - 1

    def doubled(self):
        return CaloricBowl(self.bottom, 2 * self.opening)

    def _rel(self, z):
        z = np.asarray(z, dtype=float) - np.asarray(self.bottom)
        return np.sum(z[..., :-1] ** 2, axis=-1), z[..., -1]

    def contains(self, z):
        """Membership in the open bowl."""
        r2, s = self._rel(z)
        return (r2 < s) & (s < self.opening**2)

    def in_hat(self, z):
        """Membership in ``B`` union its top, i.e. ``|x-x0|^2 < t-t0 <= r^2``."""
        r2, s = self._rel(z)
        return (r2 < s) & (s <= self.opening**2)

    def on_normal_boundary(self, z, atol=1e-12):
        r2, s = self._rel(z)
        return (np.abs(r2 - s) <= atol) & (s >= -atol) & (s <= self.opening**2 + atol)

    def closure_samples(self, n):
        """Deterministic points of the closed bowl, about ``n`` per axis."""
        xs = self.opening * ball_nodes(self.dim, n)
        lam = np.linspace(0.0, 1.0, n)
        r2 = np.sum(xs**2, axis=-1)
        s = r2[:, None] + lam[None, :] * (self.opening**2 - r2)[:, None]
        pts = np.concatenate(
            [np.repeat(xs, n, axis=0), s.reshape(-1, 1)],
            axis=-1,
        )
        return pts + np.asarray(self.bottom)


def normal_boundary_point(bowl, x):
    """``(x, t0 + |x - x0|^2)`` for ``|x - x0| <= r``."""
    x = np.asarray(x, dtype=float)
    d = x - np.asarray(bowl.bottom[:-1])
    r2 = np.sum(d * d, axis=-1)
    if np.any(r2 > bowl.opening**2 * (1 + 1e-14)):
        raise ValueError("x lies outside the closed ball |x - x0| <= r")
    t = bowl.bottom[-1] + r2
    return np.concatenate([x, np.asarray(t)[..., None]], axis=-1)


# -- node sets on the unit ball -----------------------------------------------


def _cheb_lobatto(n):
    if n == 1:
        return np.zeros(1)
    return np.cos(np.pi * np.arange(n) / (n - 1))[::-1]


def _square_to_ball(u):
    """Elliptical map of the cube ``[-1, 1]^N`` onto the closed unit ball."""
    n = u.shape[-1]
    if n == 1:
        return u.copy()
    sq = u * u
    if n == 2:
        return np.stack(
            [u[:, 0] * np.sqrt(1 - sq[:, 1] / 2), u[:, 1] * np.sqrt(1 - sq[:, 0] / 2)],
            axis=-1,
        )
    if n == 3:
        out = np.empty_like(u)
        for i in range(3):
            j, k = [m for m in range(3) if m != i]
            out[:, i] = u[:, i] * np.sqrt(1 - sq[:, j] / 2 - sq[:, k] / 2 + sq[:, j] * sq[:, k] / 3)
        return out
    raise NotImplementedError("ball node sets ship for N <= 3")


@lru_cache(maxsize=128)
def _ball_nodes_cached(dim, n):
    c = _cheb_lobatto(n)
    grids = np.meshgrid(*([c] * dim), indexing="ij")
    cube = np.stack([g.ravel() for g in grids], axis=-1)
    nodes = _square_to_ball(cube)
    nodes.setflags(write=False)
    return nodes


def ball_nodes(dim, n):
    """Tensor Chebyshev-Lobatto nodes (``n`` per axis) mapped to the unit ball."""
    return _ball_nodes_cached(int(dim), int(n))


def _fit_nodes_per_axis(dim, degree):
    return 2 * degree + 2 if dim == 1 else degree + 3


def _dense_per_axis(dim, n_fit):
    # at least DENSITY_FACTOR times as many points in total
    factor = int(np.ceil(DENSITY_FACTOR ** (1 / dim)))
    return factor * n_fit


def spatial_exponents(dim, degree):
    """Exponent tuples of total degree <= ``degree`` in ``x`` (graded, lex)."""
    out = []
    for d in range(degree + 1):
        out.extend(_exps_of_degree(dim, d))
    return out


def _exps_of_degree(dim, d):
    if dim == 1:
        return [(d,)]
    return [(i,) + rest for i in range(d, -1, -1) for rest in _exps_of_degree(dim - 1, d - i)]


def _design(points, exps):
    top = max((max(e) for e in exps), default=0)
    powers = np.ones((top + 1,) + points.shape)
    for k in range(1, top + 1):
        powers[k] = powers[k - 1] * points
    cols = np.ones((len(points), len(exps)))
    for j, e in enumerate(exps):
        for i, k in enumerate(e):
            if k:
                cols[:, j] *= powers[k, :, i]
    return cols


# -- boundary data --------------------------------------------------------------


class BoundaryData:
    """Data on the normal boundary, as a function or as samples.

    ``func`` maps space-time points ``(..., N+1)`` to values.  Sampled data
    holds spatial positions relative to the bowl's bottom ``x0`` (each point
    then sits at ``t - t0 = |x - x0|^2``) plus values.
    """

    def __init__(self, func=None, sample_x=None, sample_values=None):
        if (func is None) == (sample_x is None):
            raise ValueError("give either a function or samples")
        self.func = as_field(func) if func is not None else None
        if sample_x is not None:
            sample_x = np.asarray(sample_x, dtype=float)
            if sample_x.ndim == 1:
                sample_x = sample_x[:, None]
            sample_values = np.asarray(sample_values, dtype=float)
            if len(sample_values) != len(sample_x):
                raise ValueError("sample positions and values differ in length")
            if not np.all(np.isfinite(sample_values)):
                raise ValueError("boundary samples must be finite")
        self.sample_x = sample_x
        self.sample_values = sample_values

    @classmethod
    def from_function(cls, func):
        return cls(func=func)

    @classmethod
    def from_samples(cls, x_rel, values):
        return cls(sample_x=x_rel, sample_values=values)

    @property
    def sampled(self):
        return self.func is None

    def values_at(self, bowl, x_rel):
        """Data at centred spatial positions ``x_rel`` on the normal boundary."""
        if self.sampled:
            raise ValueError("sampled boundary data can only be read at its nodes")
        r2 = np.sum(x_rel * x_rel, axis=-1)
        pts = np.concatenate([x_rel + np.asarray(bowl.bottom[:-1]), (bowl.bottom[-1] + r2)[:, None]], axis=-1)
        vals = np.asarray(self.func(pts), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ValueError("boundary data produced non-finite values")
        return vals


def _as_boundary_data(phi):
    if isinstance(phi, BoundaryData):
        return phi
    return BoundaryData.from_function(phi)


# -- fitting ------------------------------------------------------------------


@dataclass(frozen=True)
class BoundaryFit:
    """Polynomial fit of boundary data, in coordinates centred at the bottom."""

    polynomial: Polynomial
    degree: int
    requested_degree: int
    residual: float
    condition: float
    check_x: np.ndarray = field(repr=False)
    check_data: np.ndarray = field(repr=False)
    check_fit: np.ndarray = field(repr=False)
    exact: bool = False


def _rationalize(coefs, tol=1e-12, max_den=10**6):
    snapped = []
    for c in coefs:
        f = Fraction(float(c)).limit_denominator(max_den)
        if abs(float(f) - c) <= tol * max(1.0, abs(c)):
            snapped.append(f)
        else:
            return None
    return snapped


def _lstsq_scaled(A, y):
    norms = np.linalg.norm(A, axis=0)
    norms[norms == 0] = 1.0
    As = A / norms
    sol, *_ = np.linalg.lstsq(As, y, rcond=None)
    sv = np.linalg.svd(As, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    return sol / norms, cond


def _poly_from_scaled(dim, exps, coefs, r):
    terms = {}
    for e, c in zip(exps, coefs):
        # coefficient of (x/r)^e -> coefficient of x^e
        terms[tuple(e) + (0,)] = c / Fraction(r) ** sum(e) if isinstance(c, Fraction) else Fraction(float(c)) / Fraction(float(r)) ** sum(e)
    return Polynomial(dim, terms)


def _fit_sequence(data, bowl, max_degree, n_per_axis=None):
    """Fits of degree 0, 1, ..., ``max_degree`` on one common node set.

    Yields ``(degree, BoundaryFit)`` where each fit is the best one so far,
    so residuals are non-increasing.  Stops early if a fit would be
    ill-conditioned or underdetermined.
    """
    dim, r = bowl.dim, bowl.opening
    if data.sampled:
        fit_x = data.sample_x / r
        fit_y = data.sample_values
        check_x, check_y = fit_x, fit_y
    else:
        n_fit = n_per_axis or _fit_nodes_per_axis(dim, max(max_degree, DEFAULT_MAX_DEGREE))
        fit_x = ball_nodes(dim, n_fit)
        fit_y = data.values_at(bowl, r * fit_x)
        check_x = ball_nodes(dim, _dense_per_axis(dim, n_fit))
        check_y = data.values_at(bowl, r * check_x)
    scale = max(1.0, float(np.max(np.abs(check_y))))
    best = None
    for d in range(max_degree + 1):
        exps = spatial_exponents(dim, d)
        if len(exps) > len(fit_x):
            log.warning("too few boundary nodes for degree %d", d)
            return
        coefs, cond = _lstsq_scaled(_design(fit_x, exps), fit_y)
        if cond > CONDITION_LIMIT:
            log.warning("fit of degree %d ill-conditioned (cond %.3g); stopping", d, cond)
            return
        check_design = _design(check_x, exps)
        check_fit = check_design @ coefs
        resid = float(np.max(np.abs(check_fit - check_y)))
        exact = False
        snapped = _rationalize(coefs)
        if snapped is not None:
            snapped_fit = check_design @ np.array([float(c) for c in snapped])
            snapped_resid = float(np.max(np.abs(snapped_fit - check_y)))
            if snapped_resid <= resid + 1e-14 * scale:
                coefs, check_fit, resid, exact = snapped, snapped_fit, snapped_resid, True
        if best is None or resid < best.residual:
            best = BoundaryFit(
                polynomial=_poly_from_scaled(dim, exps, coefs, r),
                degree=d,
                requested_degree=d,
                residual=resid,
                condition=cond,
                check_x=r * check_x,
                check_data=check_y,
                check_fit=check_fit,
                exact=exact,
            )
        else:
            best = replace(best, requested_degree=d)
        yield d, best


def fit_boundary_polynomial(phi, bowl, degree, n_per_axis=None):
    """Least-squares polynomial ``p(x)`` of degree ``<= degree`` matching ``phi``.

    Every degree up to ``degree`` is fitted on one common node set and the
    fit with the smallest measured residual is kept, so the residual is
    non-increasing in ``degree``.  The residual is the max of
    ``|p(x) - phi(x, t0 + |x-x0|^2)|`` over a check set at least
    ``DENSITY_FACTOR`` times larger than the fitting nodes (for sampled data,
    the samples themselves).  Coefficients that are rational with small
    denominators up to roundoff are snapped to those rationals.
    """
    if degree < 0:
        raise ValueError("degree must be >= 0")
    best = None
    for _, best in _fit_sequence(_as_boundary_data(phi), bowl, degree, n_per_axis):
        pass
    if best is None:
        raise ToleranceNotMet("no well-conditioned fit available")
    return best


# -- solving ------------------------------------------------------------------


@dataclass(frozen=True)
class BowlSolution:
    """Caloric polynomial solving the bowl problem up to ``epsilon``.

    ``centered`` is exact and caloric in coordinates relative to the bottom;
    ``epsilon`` bounds ``|u - u_phi|`` on the closed bowl (maximum principle
    applied to the measured boundary residual, times ``SAFETY_FACTOR``).
    """

    bowl: CaloricBowl
    centered: Polynomial
    epsilon: float
    degree: int
    fit: BoundaryFit = field(repr=False)
    tolerance: float = None
    tolerance_met: bool = True
    history: tuple = ()

    @property
    def u(self):
        """The solution in absolute coordinates (exact translation)."""
        return translate(self.centered, [Fraction(v) for v in self.bowl.bottom])

    def __call__(self, points):
        pts = np.asarray(points, dtype=float) - np.asarray(self.bowl.bottom)
        return self.centered.evaluate_many(pts)

    def residual_rows(self):
        """Rows ``(x_1..x_N, t, phi, fit, |fit - phi|)`` of the boundary check set."""
        x = self.fit.check_x + np.asarray(self.bowl.bottom[:-1])
        t = self.bowl.bottom[-1] + np.sum(self.fit.check_x**2, axis=-1)
        err = np.abs(self.fit.check_fit - self.fit.check_data)
        return np.column_stack([x, t, self.fit.check_data, self.fit.check_fit, err])

    def write_residual_csv(self, path):
        names = [f"x{i + 1}" for i in range(self.bowl.dim)] + ["t", "phi", "fit", "abs_error"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            for row in self.residual_rows():
                w.writerow([repr(float(v)) for v in row])

    def to_dict(self):
        return {
            "bottom": list(self.bowl.bottom),
            "opening": self.bowl.opening,
            "polynomial_centered": format_polynomial(self.centered),
            "polynomial": format_polynomial(self.u),
            "epsilon": self.epsilon,
            "degree": self.degree,
            "tolerance": self.tolerance,
            "tolerance_met": self.tolerance_met,
            "history": [list(h) for h in self.history],
        }


def _solution_from_fit(bowl, fit, tol=None, met=True, history=()):
    u = spatial_caloric_extension(fit.polynomial)
    return BowlSolution(
        bowl=bowl,
        centered=u,
        epsilon=SAFETY_FACTOR * fit.residual,
        degree=fit.degree,
        fit=fit,
        tolerance=tol,
        tolerance_met=met,
        history=tuple(history),
    )


def solve_bowl(bowl, phi, tol=1e-6, degree=None, max_degree=DEFAULT_MAX_DEGREE):
    """Solve ``Hu = 0`` in ``bowl`` with ``u = phi`` on its normal boundary.

    With ``degree`` given, a single fit of that degree is used.  Otherwise
    the degree is raised from 0 until the certified bound ``epsilon`` drops
    to ``tol`` or ``max_degree`` is reached; in the latter case the best
    solution found is returned with ``tolerance_met=False``.
    """
    data = _as_boundary_data(phi)
    if degree is not None:
        fit = fit_boundary_polynomial(data, bowl, degree)
        eps = SAFETY_FACTOR * fit.residual
        return _solution_from_fit(bowl, fit, tol, tol is None or eps <= tol, [(degree, eps)])
    history = []
    best = None
    for d, best in _fit_sequence(data, bowl, max_degree):
        eps = SAFETY_FACTOR * best.residual
        history.append((d, eps))
        if eps <= tol:
            return _solution_from_fit(bowl, best, tol, True, history)
    if best is None:
        raise ToleranceNotMet("no well-conditioned fit available")
    log.info("bowl solve missed tolerance %.3g; best epsilon %.3g", tol, SAFETY_FACTOR * best.residual)
    return _solution_from_fit(bowl, best, tol, False, history)


# -- extension to lower semicontinuous data -------------------------------------


def inf_convolution(f_values, f_points, k, points):
    """``min_w f(w) + k * ||w - y||`` over the sample points ``w``.

    Distances use the caloric norm.  The result is ``k``-Lipschitz, at most
    ``f`` on the sample set, and non-decreasing in ``k``.
    """
    f_values = np.asarray(f_values, dtype=float)
    out = np.empty(len(points))
    for s in range(0, len(points), 512):
        p = points[s : s + 512]
        d = caloric_norm(p[:, None, :] - f_points[None, :, :])
        out[s : s + 512] = np.min(f_values[None, :] + k * d, axis=1)
    return out


@dataclass(frozen=True)
class HfApproximation:
    """Iterates ``u_k`` with continuous data ``phi_k`` increasing to ``f``."""

    bowl: CaloricBowl
    ks: tuple
    solutions: tuple = field(repr=False)
    points: np.ndarray = field(repr=False)
    iterates: np.ndarray = field(repr=False)
    running_sup: np.ndarray = field(repr=False)
    sup_f: float


def approximate_h_f(bowl, f, points, ks=(1, 2, 4, 8, 16), n_sup=None, tol=1e-6, max_degree=DEFAULT_MAX_DEGREE):
    """Approximate ``h_f`` on ``bowl`` for bounded-above lsc data ``f``.

    ``phi_k`` is the inf-convolution of ``f`` (sampled on a fine boundary set)
    with ``k`` times the caloric distance; each ``phi_k`` is solved with
    :func:`solve_bowl`.  ``iterates[k, i]`` is ``u_k(points[i])`` and
    ``running_sup`` the pointwise max over the iterates so far.
    """
    f = as_field(f)
    dim = bowl.dim
    n_sup = n_sup or (401 if dim == 1 else 41)
    # include the fitting and check nodes so phi_k <= f holds exactly there
    n_fit = _fit_nodes_per_axis(dim, max(max_degree, DEFAULT_MAX_DEGREE))
    xs = bowl.opening * np.unique(
        np.concatenate([ball_nodes(dim, n_sup), ball_nodes(dim, n_fit), ball_nodes(dim, _dense_per_axis(dim, n_fit))]),
        axis=0,
    )
    w_pts = np.concatenate(
        [xs + np.asarray(bowl.bottom[:-1]), (bowl.bottom[-1] + np.sum(xs**2, axis=-1))[:, None]],
        axis=-1,
    )
    f_vals = np.asarray(f(w_pts), dtype=float)
    if not np.all(np.isfinite(f_vals)):
        raise ValueError("data must be finite (bounded above) on the normal boundary")
    sup_f = float(np.max(f_vals))
    if list(ks) != sorted(ks):
        raise ValueError("ks must be increasing")

    solutions = []
    for k in ks:
        def phi_k(pts, k=k):
            return inf_convolution(f_vals, w_pts, k, np.asarray(pts, dtype=float).reshape(-1, dim + 1))
        solutions.append(solve_bowl(bowl, phi_k, tol=tol, max_degree=max_degree))
    points = np.asarray(points, dtype=float)
    iterates = np.array([sol(points) for sol in solutions])
    running = np.maximum.accumulate(iterates, axis=0)
    return HfApproximation(
        bowl=bowl,
        ks=tuple(ks),
        solutions=tuple(solutions),
        points=points,
        iterates=iterates,
        running_sup=running,
        sup_f=sup_f,
    )
