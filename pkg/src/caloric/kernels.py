"""Gauss-Weierstrass kernel, caloric norm/disks and the representation kernel.

Points in space-time are arrays whose last axis holds ``(x_1, ..., x_N, t)``;
every function here is vectorised over the leading axes.
"""

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .poly import Polynomial


class PoleError(ValueError):
    """Raised when a kernel is evaluated at its pole."""


class QuadratureError(RuntimeError):
    def __init__(self, message, value=None, error_estimate=None):
        super().__init__(message)
        self.value = value
        self.error_estimate = error_estimate


def _split(z):
    z = np.asarray(z, dtype=float)
    if z.ndim == 0 or z.shape[-1] < 2:
        raise ValueError("space-time points need at least one spatial coordinate and t")
    return z[..., :-1], z[..., -1]


def as_field(u):
    """Turn a :class:`Polynomial` or callable into an array-valued field."""
    if isinstance(u, Polynomial):
        return u.evaluate_many
    if np.isscalar(u):
        c = float(u)
        return lambda pts: np.full(np.asarray(pts).shape[:-1], c)
    return u


def gw_kernel(z):
    """Heat kernel ``(4 pi t)^(-N/2) exp(-|x|^2 / 4t)`` for ``t > 0``, else 0."""
    x, t = _split(z)
    n = x.shape[-1]
    r2 = np.sum(x * x, axis=-1)
    if np.any((t == 0) & (r2 == 0)):
        raise PoleError("Gauss-Weierstrass kernel evaluated at its pole")
    pos = t > 0
    ts = np.where(pos, t, 1.0)
    val = (4 * np.pi * ts) ** (-n / 2) * np.exp(-r2 / (4 * ts))
    return np.where(pos, val, 0.0)


def gw_gradient(z):
    """Spatial gradient ``-(x / 2t) * Gamma`` (zero where ``t <= 0``)."""
    x, t = _split(z)
    g = gw_kernel(z)
    ts = np.where(t > 0, t, 1.0)
    return -(x / (2 * ts)[..., None]) * g[..., None]


def caloric_norm(z):
    """``(|x|^4 + t^2)^(1/4)``; homogeneous of degree one under ``(lx, l^2 t)``."""
    x, t = _split(z)
    r2 = np.sum(x * x, axis=-1)
    return (r2 * r2 + t * t) ** 0.25


@dataclass(frozen=True)
class CaloricDisk:
    center: tuple
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("disk radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def dim(self):
        return len(self.center) - 1

    def contains(self, z):
        return caloric_norm(np.asarray(z, dtype=float) - np.asarray(self.center)) < self.radius

    def scaled(self, factor):
        return CaloricDisk(self.center, self.radius * factor)


def _smooth_step(tau):
    """C-infinity step: 1 for tau <= 0, 0 for tau >= 1; with two derivatives."""
    tau = np.asarray(tau, dtype=float)
    inside = (tau > 0) & (tau < 1)
    s = np.where(inside, tau, 0.5)
    a_arg = 1 - s
    b_arg = s

    def h(v):
        return np.exp(-1 / v)

    def h1(v):
        return h(v) / v**2

    def h2(v):
        return h(v) * (1 / v**4 - 2 / v**3)

    A, B = h(a_arg), h(b_arg)
    A1, B1 = -h1(a_arg), h1(b_arg)
    A2, B2 = h2(a_arg), h2(b_arg)
    S = A + B
    S1 = A1 + B1
    g = A / S
    num = A1 * B - A * B1
    g1 = num / S**2
    num1 = A2 * B - A * B2
    g2 = num1 / S**2 - 2 * num * S1 / S**3
    g = np.where(inside, g, np.where(tau <= 0, 1.0, 0.0))
    g1 = np.where(inside, g1, 0.0)
    g2 = np.where(inside, g2, 0.0)
    return g, g1, g2


@dataclass(frozen=True)
class CutoffFunction:
    """Smooth radial cutoff in the caloric norm around the centre of ``2D``.

    Equal to 1 for ``||z - c|| <= inner * 2r`` and 0 for
    ``||z - c|| >= outer * 2r``.  With the defaults it is identically 1 on a
    neighbourhood of the closed disk ``D`` and compactly supported in ``2D``.
    """

    disk: CaloricDisk
    inner: float = 0.55
    outer: float = 0.95

    def __post_init__(self):
        if not 0 < self.inner < self.outer <= 1:
            raise ValueError("need 0 < inner < outer <= 1")

    @property
    def a(self):
        return self.inner * 2 * self.disk.radius

    @property
    def b(self):
        return self.outer * 2 * self.disk.radius

    def _parts(self, z):
        z = np.asarray(z, dtype=float)
        d = z - np.asarray(self.disk.center)
        x, t = d[..., :-1], d[..., -1]
        n = x.shape[-1]
        r2 = np.sum(x * x, axis=-1)
        q = r2 * r2 + t * t
        rho = q**0.25
        tau = (rho - self.a) / (self.b - self.a)
        g, g1, g2 = _smooth_step(tau)
        active = (tau > 0) & (tau < 1)
        qs = np.where(active, q, 1.0)
        q34 = qs ** (-0.75)
        # derivatives of rho = q^(1/4)
        grad_rho = (r2 * q34)[..., None] * x
        dt_rho = 0.5 * t * q34
        lap_rho = (2 + n) * r2 * q34 - 3 * r2**3 * qs ** (-1.75)
        scale = 1 / (self.b - self.a)
        return g, g1 * scale, g2 * scale**2, grad_rho, dt_rho, lap_rho, active

    def __call__(self, z):
        return self._parts(z)[0]

    def gradient(self, z):
        _, d1, _, grad_rho, _, _, active = self._parts(z)
        return np.where(active[..., None], d1[..., None] * grad_rho, 0.0)

    def time_derivative(self, z):
        _, d1, _, _, dt_rho, _, active = self._parts(z)
        return np.where(active, d1 * dt_rho, 0.0)

    def laplacian(self, z):
        _, d1, d2, grad_rho, _, lap_rho, active = self._parts(z)
        val = d2 * np.sum(grad_rho * grad_rho, axis=-1) + d1 * lap_rho
        return np.where(active, val, 0.0)

    def derivatives(self, z):
        """``(gradient, laplacian, time_derivative)`` in one pass."""
        _, d1, d2, grad_rho, dt_rho, lap_rho, active = self._parts(z)
        grad = np.where(active[..., None], d1[..., None] * grad_rho, 0.0)
        lap = np.where(active, d2 * np.sum(grad_rho * grad_rho, axis=-1) + d1 * lap_rho, 0.0)
        dt = np.where(active, d1 * dt_rho, 0.0)
        return grad, lap, dt


KERNEL_VARIANTS = ("derived", "printed")


def representation_kernel(z, zeta, psi, variant="derived"):
    """Kernel ``K_D(z, zeta)`` reproducing caloric functions on ``D``.

    ``variant="derived"`` evaluates ``Gamma (Lap psi + d_t psi) - 2 <grad Gamma, grad psi>``,
    the form obtained by integrating the gradient term by parts.
    ``variant="printed"`` evaluates ``-Gamma H psi - 2 <grad Gamma, grad psi> + Gamma Lap psi``
    (which reduces to ``Gamma d_t psi - 2 <grad Gamma, grad psi>``) for comparison.
    """
    if variant not in KERNEL_VARIANTS:
        raise ValueError(f"unknown kernel variant {variant!r}")
    zeta = np.asarray(zeta, dtype=float)
    diff = np.asarray(z, dtype=float) - zeta
    grad_psi, lap_psi, dt_psi = psi.derivatives(zeta)
    flat = (lap_psi == 0) & (dt_psi == 0) & np.all(grad_psi == 0, axis=-1)
    at_pole = np.all(diff == 0, axis=-1)
    if np.any(at_pole & ~flat):
        raise PoleError("representation kernel evaluated at the pole where the cutoff is not flat")
    # shift pole points somewhere harmless; their kernel value is masked to 0 below
    safe = np.where(at_pole[..., None], 1.0, diff)
    gam = gw_kernel(safe)
    grad_gam = gw_gradient(safe)
    cross = np.sum(grad_gam * grad_psi, axis=-1)
    if variant == "derived":
        k = gam * (lap_psi + dt_psi) - 2 * cross
    else:
        heat_psi = lap_psi - dt_psi
        k = -gam * heat_psi - 2 * cross + gam * lap_psi
    return np.where(flat, 0.0, k)


def _panel_rule(lo, hi, panels, order):
    nodes, weights = leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    pts = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    wts = (half[:, None] * weights[None, :]).ravel()
    return pts, wts


def _reproduce_once(field, z, psi, panels, order, variant):
    c = np.asarray(psi.disk.center)
    n = len(c) - 1
    b = psi.b
    t_hi = min(c[-1] + b * b, float(z[-1]))
    t_lo = c[-1] - b * b
    if t_hi <= t_lo:
        return 0.0
    axes = [_panel_rule(c[i] - b, c[i] + b, panels, order) for i in range(n)]
    axes.append(_panel_rule(t_lo, t_hi, panels, order))
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    wgrid = np.ones_like(grids[0])
    for i, (_, w) in enumerate(axes):
        shape = [1] * (n + 1)
        shape[i] = -1
        wgrid = wgrid * w.reshape(shape)
    pts = np.stack(grids, axis=-1).reshape(-1, n + 1)
    wflat = wgrid.ravel()
    total = 0.0
    # chunk to bound memory for N >= 2
    chunk = 200_000
    for s in range(0, len(pts), chunk):
        p = pts[s : s + chunk]
        k = representation_kernel(z, p, psi, variant)
        mask = k != 0
        if np.any(mask):
            total += float(np.sum(wflat[s : s + chunk][mask] * k[mask] * field(p[mask])))
    return total


def reproduce(u, z, disk, panels=96, order=8, variant="derived", psi=None, tol=None):
    """``int_{2D} K_D(z, zeta) u(zeta) d zeta`` by tensor Gauss-Legendre panels.

    The integral runs over the bounding box of the cutoff's support.  The
    error estimate compares against the same rule with half as many panels.
    Returns ``(value, error_estimate)``; when ``tol`` is given and the
    estimate exceeds it, :class:`QuadratureError` is raised instead.
    """
    z = np.asarray(z, dtype=float)
    if not disk.contains(z):
        raise ValueError("z must lie in the disk D")
    psi = psi or CutoffFunction(disk)
    field = as_field(u)
    fine = _reproduce_once(field, z, psi, panels, order, variant)
    coarse = _reproduce_once(field, z, psi, max(panels // 2, 1), order, variant)
    err = abs(fine - coarse)
    if tol is not None and err > tol:
        raise QuadratureError(
            f"reproduction quadrature did not converge (estimate {err:.3g} > {tol:.3g})",
            value=fine,
            error_estimate=err,
        )
    return fine, err
