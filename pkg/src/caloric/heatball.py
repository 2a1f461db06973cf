"""Heat balls (Pini-Watson balls) and the caloric mean-value operator.

The heat ball with pole ``z0 = (x0, t0)`` and radius ``r`` is the set where
``Gamma(z0 - z) > (4 pi r)^(-N/2)``.  At depth ``s = t0 - t`` its spatial
section is the ball ``|x - x0| < R(s)`` with ``R(s)^2 = 2 N s log(r / s)``.

The quadrature integrates in ``s`` over a geometrically graded partition of
``(0, r)`` (refined towards both ends, where the section radius is not
smooth) and, on each section, with a product rule in polar coordinates.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .kernels import QuadratureError, as_field, gw_kernel

DEFAULT_RESOLUTION = 4
GRADING_RATIO = 0.15


def heat_ball_section_radius(s, r, dim):
    """Radius of the spatial section of a heat ball at depth ``s``."""
    s = np.asarray(s, dtype=float)
    if np.any((s <= 0) | (s >= r)):
        raise ValueError("depth s must lie in (0, r)")
    out = np.sqrt(2 * dim * s * np.log(r / s))
    return float(out) if out.ndim == 0 else out


def watson_kernel(z):
    """``|x|^2 / (4 t^2)``."""
    z = np.asarray(z, dtype=float)
    x, t = z[..., :-1], z[..., -1]
    return np.sum(x * x, axis=-1) / (4 * t * t)


def _graded_breakpoints(r, levels_low, levels_high, ratio=GRADING_RATIO):
    low = [0.5 * r * ratio**k for k in range(levels_low, 0, -1)]
    high = [r - 0.5 * r * ratio**k for k in range(1, levels_high + 1)]
    return np.array([0.0] + low + [0.5 * r] + high + [r])


def _gauss_on(edges, order):
    x, w = leggauss(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


def _unit_ball_rule(dim, radial_order, angular):
    """Nodes/weights on the open unit ball for integrands smooth in x."""
    if dim == 1:
        return leggauss(radial_order)[0][:, None], leggauss(radial_order)[1]
    # radial Gauss-Legendre on (0, 1) with Jacobian rho^(dim-1)
    xr, wr = leggauss(radial_order)
    rho = 0.5 * (xr + 1)
    wrho = 0.5 * wr * rho ** (dim - 1)
    phi = 2 * np.pi * np.arange(angular) / angular
    wphi = np.full(angular, 2 * np.pi / angular)
    if dim == 2:
        dirs = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        dw = wphi
    elif dim == 3:
        ct, wct = leggauss(max(angular // 2, 2))
        st = np.sqrt(1 - ct**2)
        dirs = np.stack(
            [
                (st[:, None] * np.cos(phi)[None, :]).ravel(),
                (st[:, None] * np.sin(phi)[None, :]).ravel(),
                np.repeat(ct, angular),
            ],
            axis=-1,
        )
        dw = (wct[:, None] * wphi[None, :]).ravel()
    else:
        raise NotImplementedError("heat-ball quadrature ships for N <= 3 only")
    pts = (rho[:, None, None] * dirs[None, :, :]).reshape(-1, dim)
    wts = (wrho[:, None] * dw[None, :]).ravel()
    return pts, wts


def _unit_sphere_area(dim):
    return 2 * math.pi ** (dim / 2) / math.gamma(dim / 2)


@dataclass(frozen=True)
class HeatBallQuadrature:
    """Volume nodes and weights for the heat ball ``Omega_r(pole)``.

    ``kernel_weights`` already include the Watson kernel and the
    ``(4 pi r)^(-N/2)`` normalisation, so ``M_r(u) = kernel_weights @ u(nodes)``.
    """

    pole: tuple
    radius: float
    nodes: np.ndarray = field(repr=False)
    offsets: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    kernel_weights: np.ndarray = field(repr=False)
    resolution: int
    normalization_error: float

    @property
    def dim(self):
        return len(self.pole) - 1

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(f"# pole={list(self.pole)} radius={self.radius!r} resolution={self.resolution}\n")
            fh.write(f"# normalization_error={self.normalization_error!r}\n")
            writer = csv.writer(fh)
            names = [f"x{i + 1}" for i in range(self.dim)] + ["t", "weight", "kernel_weight"]
            writer.writerow(names)
            for node, w, kw in zip(self.nodes, self.weights, self.kernel_weights):
                writer.writerow([repr(float(v)) for v in node] + [repr(float(w)), repr(float(kw))])


def build_heat_ball_quadrature(pole, r, resolution=DEFAULT_RESOLUTION, tol=1e-8):
    """Quadrature for ``Omega_r(pole)``.

    ``offsets`` holds ``pole - node`` computed directly, so membership and the
    Watson weight stay exact even where ``t0 - s`` rounds to ``t0``.

    ``resolution`` scales the grading depth and every rule order together,
    so the node count grows with it.  Raises :class:`QuadratureError` when
    the normalisation ``M_r(1) = 1`` misses ``tol``.
    """
    pole = tuple(float(v) for v in pole)
    dim = len(pole) - 1
    if r <= 0:
        raise ValueError("heat-ball radius must be positive")
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    # top-end levels capped so r - s stays representable
    edges = _graded_breakpoints(r, 6 * resolution, min(3 * resolution, 14))
    s, ws = _gauss_on(edges, 2 * resolution + 4)
    R = heat_ball_section_radius(s, r, dim)
    unit, wunit = _unit_ball_rule(dim, 2 * resolution + 4, 4 * resolution)
    # node = (x0 - R(s) y, t0 - s)
    y = R[:, None, None] * unit[None, :, :]
    depth = np.broadcast_to(s[:, None, None], y.shape[:2] + (1,))
    offsets = np.concatenate([y, depth], axis=-1).reshape(-1, dim + 1)
    nodes = np.asarray(pole)[None, :] - offsets
    weights = (ws[:, None] * R[:, None] ** dim * wunit[None, :]).ravel()
    # Watson weight from the exact offsets; pole - node loses digits at tiny s
    wk = watson_kernel(offsets)
    kernel_weights = weights * wk * (4 * np.pi * r) ** (-dim / 2)
    # normalisation checked against the section integral done in closed form
    # per depth, so only the depth rule is being tested here
    closed = _unit_sphere_area(dim) * R ** (dim + 2) / ((dim + 2) * 4 * s**2)
    norm_exact_sections = float(np.dot(ws, closed)) * (4 * np.pi * r) ** (-dim / 2)
    norm = float(np.sum(kernel_weights))
    err = max(abs(norm - 1.0), abs(norm_exact_sections - 1.0))
    if err > tol:
        raise QuadratureError(
            f"heat-ball normalisation error {err:.3g} exceeds {tol:.3g} at resolution {resolution}",
            value=norm,
            error_estimate=err,
        )
    return HeatBallQuadrature(
        pole=pole,
        radius=float(r),
        nodes=nodes,
        offsets=offsets,
        weights=weights,
        kernel_weights=kernel_weights,
        resolution=resolution,
        normalization_error=err,
    )


def in_heat_ball(z, pole, r):
    """Membership test from the defining inequality."""
    n = len(pole) - 1
    return gw_kernel(np.asarray(pole, dtype=float) - np.asarray(z, dtype=float)) > (4 * np.pi * r) ** (-n / 2)


def mean_value(u, pole, r, quad=None):
    """``M_r(u)(pole)``, the Watson-weighted heat-ball average of ``u``."""
    if quad is None:
        quad = build_heat_ball_quadrature(pole, r)
    elif not (np.allclose(quad.pole, pole) and math.isclose(quad.radius, r)):
        raise ValueError("quadrature was built for a different heat ball")
    vals = as_field(u)(quad.nodes)
    return float(np.dot(quad.kernel_weights, vals))


def translated(quad, pole):
    """The same rule moved to a new pole (the heat ball is translation invariant)."""
    shift = np.asarray(pole, dtype=float) - np.asarray(quad.pole)
    return HeatBallQuadrature(
        pole=tuple(float(v) for v in pole),
        radius=quad.radius,
        nodes=quad.nodes + shift,
        offsets=quad.offsets,
        weights=quad.weights,
        kernel_weights=quad.kernel_weights,
        resolution=quad.resolution,
        normalization_error=quad.normalization_error,
    )
