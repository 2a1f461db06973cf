import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from caloric.heatball import (
    build_heat_ball_quadrature,
    heat_ball_section_radius,
    in_heat_ball,
    mean_value,
    translated,
)
from caloric.kernels import (
    CaloricDisk,
    CutoffFunction,
    PoleError,
    QuadratureError,
    as_field,
    caloric_norm,
    gw_gradient,
    gw_kernel,
    representation_kernel,
    reproduce,
)
from caloric.poly import caloric_extension, parse_polynomial, random_polynomial

SQ4PI = math.sqrt(4 * math.pi)


def cosh_field(p):
    return np.exp(p[..., -1]) * np.cosh(p[..., 0])


# -- Gauss-Weierstrass kernel -------------------------------------------------


def test_gw_kernel_values():
    assert gw_kernel([0.0, -1.0]) == 0
    assert gw_kernel([0.0, 1.0]) == pytest.approx(1 / SQ4PI, rel=1e-15)
    assert gw_kernel([2.0, 1.0]) == pytest.approx(math.exp(-1) / SQ4PI, rel=1e-15)
    assert gw_kernel([3.0, 0.0]) == 0
    assert gw_kernel([0.0, 0.0, 2.0]) == pytest.approx(1 / (8 * math.pi))


def test_gw_kernel_rejects_pole():
    with pytest.raises(PoleError):
        gw_kernel([0.0, 0.0])
    with pytest.raises(PoleError):
        gw_kernel(np.array([[1.0, 1.0], [0.0, 0.0]]))


def test_gw_gradient_values():
    np.testing.assert_allclose(gw_gradient([0.0, 1.0]), [0.0])
    np.testing.assert_allclose(gw_gradient([2.0, 1.0]), [-math.exp(-1) / SQ4PI], rtol=1e-15)
    np.testing.assert_allclose(gw_gradient([2.0, 0.5, -0.3]), [0.0, 0.0])


@pytest.mark.parametrize("z", [(0.3, 0.7), (-1.2, 0.4, 2.0), (0.1, -0.2, 0.3, 0.9)])
def test_gw_gradient_finite_differences(z):
    z = np.array(z)
    h = 1e-6
    fd = []
    for i in range(len(z) - 1):
        e = np.zeros_like(z)
        e[i] = h
        fd.append((gw_kernel(z + e) - gw_kernel(z - e)) / (2 * h))
    np.testing.assert_allclose(gw_gradient(z), fd, rtol=1e-6, atol=1e-10)


@pytest.mark.parametrize("z", [(0.3, 0.7), (-0.5, 0.2, 1.1)])
def test_gw_kernel_is_caloric_away_from_pole(z):
    z = np.array(z)
    h = 1e-4
    lap = 0.0
    for i in range(len(z) - 1):
        e = np.zeros_like(z)
        e[i] = h
        lap += (gw_kernel(z + e) - 2 * gw_kernel(z) + gw_kernel(z - e)) / h**2
    e = np.zeros_like(z)
    e[-1] = h
    dt = (gw_kernel(z + e) - gw_kernel(z - e)) / (2 * h)
    assert lap - dt == pytest.approx(0, abs=1e-5)


# -- caloric norm ---------------------------------------------------------------


def test_caloric_norm_values():
    assert caloric_norm([0.0, 4.0]) == pytest.approx(2.0)
    assert caloric_norm([0.0, -9.0]) == pytest.approx(3.0)
    assert caloric_norm([-3.0, 0.0]) == pytest.approx(3.0)
    assert caloric_norm([1.0, 1.0]) == pytest.approx(2**0.25)


@settings(max_examples=50)
@given(
    st.lists(st.floats(-10, 10), min_size=2, max_size=4),
    st.floats(0.01, 10),
)
def test_caloric_norm_homogeneity(z, lam):
    z = np.array(z)
    scaled = np.concatenate([lam * z[:-1], [lam**2 * z[-1]]])
    assert caloric_norm(scaled) == pytest.approx(lam * caloric_norm(z), rel=1e-12, abs=1e-300)


def test_caloric_disk():
    d = CaloricDisk((0.0, 0.0), 1.0)
    assert d.contains([0.5, 0.5])
    assert not d.contains([0.0, 1.5])
    with pytest.raises(ValueError):
        CaloricDisk((0.0, 0.0), 0.0)


# -- cutoff -------------------------------------------------------------------


def test_cutoff_profile():
    disk = CaloricDisk((0.2, -0.1), 1.0)
    psi = CutoffFunction(disk)
    rng = np.random.default_rng(0)
    pts = rng.uniform(-3, 3, size=(4000, 2)) + np.array(disk.center)
    rho = caloric_norm(pts - np.array(disk.center))
    vals = psi(pts)
    # identically one on a neighbourhood of closure(D), zero near/outside 2D
    assert np.all(vals[rho <= 1.05] == 1.0)
    assert np.all(vals[rho >= 1.9] == 0.0)
    assert np.all((vals >= 0) & (vals <= 1))


@pytest.mark.parametrize("z", [(1.3, 0.4), (0.2, 1.5), (-1.0, -1.1), (1.0, 0.3, -0.8)])
def test_cutoff_derivatives_finite_differences(z):
    n = len(z) - 1
    disk = CaloricDisk((0.0,) * (n + 1), 1.0)
    psi = CutoffFunction(disk)
    z = np.array(z)
    h = 1e-5
    grad_fd, lap_fd = [], 0.0
    for i in range(n):
        e = np.zeros_like(z)
        e[i] = h
        grad_fd.append((psi(z + e) - psi(z - e)) / (2 * h))
        lap_fd += (psi(z + e) - 2 * psi(z) + psi(z - e)) / h**2
    e = np.zeros_like(z)
    e[-1] = h
    dt_fd = (psi(z + e) - psi(z - e)) / (2 * h)
    grad, lap, dt = psi.derivatives(z)
    np.testing.assert_allclose(grad, grad_fd, rtol=1e-5, atol=1e-7)
    assert lap == pytest.approx(lap_fd, rel=1e-4, abs=1e-5)
    assert dt == pytest.approx(dt_fd, rel=1e-5, abs=1e-7)
    assert psi.gradient(z) == pytest.approx(grad)
    assert psi.laplacian(z) == pytest.approx(lap)
    assert psi.time_derivative(z) == pytest.approx(dt)


# -- representation kernel ----------------------------------------------------


def test_kernel_locality():
    disk = CaloricDisk((0.0, 0.0), 1.0)
    psi = CutoffFunction(disk)
    z = np.array([0.1, 0.2])
    flat_inside = np.array([[0.0, 0.0], [0.5, -0.5], [1.0, 0.3]])
    outside = np.array([[1.95, 0.0], [0.0, -3.7], [2.5, 2.5]])
    for variant in ("derived", "printed"):
        assert np.all(representation_kernel(z, flat_inside, psi, variant) == 0)
        assert np.all(representation_kernel(z, outside, psi, variant) == 0)


def test_kernel_pole_inside_flat_region_is_harmless():
    disk = CaloricDisk((0.0, 0.0), 1.0)
    psi = CutoffFunction(disk)
    z = np.array([0.1, 0.2])
    assert representation_kernel(z, z[None, :], psi)[0] == 0


def test_kernel_pole_in_transition_rejected():
    disk = CaloricDisk((0.0, 0.0), 1.0)
    psi = CutoffFunction(disk)
    zeta = np.array([1.4, 0.0])
    with pytest.raises(PoleError):
        representation_kernel(zeta, zeta[None, :], psi)


REPRO_POINTS = [(0.0, 0.0), (0.3, 0.2), (-0.4, -0.3), (0.2, -0.5), (0.5, 0.5)]


@pytest.mark.parametrize("z", REPRO_POINTS)
@pytest.mark.parametrize(
    "name, field",
    [
        ("one", 1.0),
        ("heat", parse_polynomial("x^2+2*t", 1)),
        ("cosh", cosh_field),
        ("gamma", lambda p: gw_kernel(p - np.array([0.0, -6.0]))),
    ],
)
def test_reproduction_identity(z, name, field):
    disk = CaloricDisk((0.0, 0.0), 1.0)
    value, err = reproduce(field, z, disk)
    exact = float(as_field(field)(np.array([z]))[0])
    assert abs(value - exact) <= 1e-6


def test_printed_kernel_does_not_reproduce():
    disk = CaloricDisk((0.0, 0.0), 1.0)
    value, _ = reproduce(1.0, (0.0, 0.0), disk, variant="printed")
    assert abs(value - 1.0) > 0.1


def test_reproduce_reports_nonconvergence():
    disk = CaloricDisk((0.0, 0.0), 1.0)
    with pytest.raises(QuadratureError) as info:
        reproduce(1.0, (0.0, 0.0), disk, panels=4, order=2, tol=1e-12)
    assert info.value.error_estimate > 1e-12


def test_reproduce_rejects_point_outside_disk():
    with pytest.raises(ValueError):
        reproduce(1.0, (0.0, 2.0), CaloricDisk((0.0, 0.0), 1.0))


def test_reproduction_two_space_dims():
    disk = CaloricDisk((0.0, 0.0, 0.0), 1.0)
    u = parse_polynomial("x1^2 + x2^2 + 4*t", 2)
    value, _ = reproduce(u, (0.1, -0.1, 0.2), disk, panels=24, order=6)
    assert value == pytest.approx(float(u.evaluate_many(np.array([0.1, -0.1, 0.2]))[0]), abs=1e-4)


# -- heat balls -----------------------------------------------------------------


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_section_radius(dim):
    r = 0.7
    assert heat_ball_section_radius(r / math.e, r, dim) == pytest.approx(math.sqrt(2 * dim * r / math.e))
    assert heat_ball_section_radius(r * (1 - 1e-12), r, dim) < 1e-5
    assert heat_ball_section_radius(1e-14, r, dim) < 1e-5
    with pytest.raises(ValueError):
        heat_ball_section_radius(r, r, dim)
    with pytest.raises(ValueError):
        heat_ball_section_radius(0.0, r, dim)


def test_section_radius_matches_defining_inequality():
    r, dim = 0.5, 2
    for s in (0.01, 0.1, 0.3, 0.45):
        R = heat_ball_section_radius(s, r, dim)
        inside = np.array([0.999 * R, 0.0, -s])
        outside = np.array([1.001 * R, 0.0, -s])
        assert in_heat_ball(inside, (0.0, 0.0, 0.0), r)
        assert not in_heat_ball(outside, (0.0, 0.0, 0.0), r)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_quadrature_normalization_and_nodes(dim):
    pole = (0.0,) * (dim + 1)
    q = build_heat_ball_quadrature(pole, 0.5)
    assert abs(mean_value(1.0, pole, 0.5, q) - 1) <= 1e-8
    assert np.all(q.weights > 0)
    assert np.all(in_heat_ball(-q.offsets, pole, 0.5))


def test_nodes_inside_for_moved_pole():
    q = build_heat_ball_quadrature((0.3, -0.2), 1.0)
    assert np.all(in_heat_ball(-q.offsets, (0.0, 0.0), 1.0))
    np.testing.assert_allclose(q.nodes, np.array([0.3, -0.2]) - q.offsets)


@pytest.mark.parametrize("dim", [1, 2])
def test_quadrature_refinement(dim):
    pole = (0.0,) * (dim + 1)
    counts, errors = [], []
    for res in (1, 2, 3, 4, 6):
        q = build_heat_ball_quadrature(pole, 1.0, resolution=res, tol=1.0)
        counts.append(len(q.nodes))
        errors.append(q.normalization_error)
    assert counts == sorted(counts) and len(set(counts)) == len(counts)
    assert all(b < a for a, b in zip(errors, errors[1:]))


def test_quadrature_tolerance_failure():
    with pytest.raises(QuadratureError):
        build_heat_ball_quadrature((0.0, 0.0), 1.0, resolution=1, tol=1e-8)


def test_translated_quadrature_matches_fresh_build():
    q = build_heat_ball_quadrature((0.0, 0.0), 0.5)
    moved = translated(q, (0.4, 0.3))
    fresh = build_heat_ball_quadrature((0.4, 0.3), 0.5)
    u = parse_polynomial("x^3 + 6*x*t", 1)
    assert mean_value(u, (0.4, 0.3), 0.5, moved) == pytest.approx(mean_value(u, (0.4, 0.3), 0.5, fresh), abs=1e-13)


def test_quadrature_csv(tmp_path):
    q = build_heat_ball_quadrature((0.0, 0.0), 0.5, resolution=1, tol=1.0)
    path = tmp_path / "q.csv"
    q.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[1].startswith("# normalization_error=")
    assert lines[2] == "x1,t,weight,kernel_weight"
    assert len(lines) == 3 + len(q.nodes)
    data = np.loadtxt(path, delimiter=",", comments="#", skiprows=3)
    np.testing.assert_array_equal(data[:, 3], q.kernel_weights)


def _supercaloric_oracle(dim, r, power):
    """int over the heat ball of s^power * W, by adaptive scipy quadrature.

    The section integral of |y|^2 W and of W over |y| < R are done in closed form;
    the depth integral is left to scipy.
    """
    area = 2 * math.pi ** (dim / 2) / math.gamma(dim / 2)

    def integrand(s):
        R2 = 2 * dim * s * math.log(r / s)
        R = math.sqrt(R2)
        if power == "x2":
            sec = area * R ** (dim + 4) / ((dim + 4) * 4 * s * s)
        else:
            sec = s * area * R ** (dim + 2) / ((dim + 2) * 4 * s * s)
        return sec

    val, _ = integrate.quad(integrand, 0, r, limit=200, epsabs=1e-13, epsrel=1e-12)
    return val * (4 * math.pi * r) ** (-dim / 2)


@pytest.mark.parametrize("dim", [1, 2, 3])
@pytest.mark.parametrize("r", [0.1, 0.5, 1.0])
def test_supercaloric_direction_against_oracle(dim, r):
    pole = (0.0,) * (dim + 1)
    q = build_heat_ball_quadrature(pole, r)
    t_field = parse_polynomial("t", dim)
    x2 = sum((parse_polynomial(f"x{i + 1}^2", dim) for i in range(dim)), parse_polynomial("0", dim))
    m_t = mean_value(t_field, pole, r, q)
    m_x2 = mean_value(x2, pole, r, q)
    assert m_t < 0 < m_x2
    assert m_t == pytest.approx(-_supercaloric_oracle(dim, r, "t"), rel=1e-7)
    assert m_x2 == pytest.approx(_supercaloric_oracle(dim, r, "x2"), rel=1e-7)


def test_mean_value_of_t_closed_form():
    # N = 1: M_r(t)(0, 0) = -r / 3^(5/2)
    assert mean_value(parse_polynomial("t", 1), (0.0, 0.0), 1.0) == pytest.approx(-(3**-2.5), rel=1e-8)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_mean_value_identity_random_caloric(dim):
    rng = np.random.default_rng(42 + dim)
    u = caloric_extension(random_polynomial(rng, dim, 6))
    for pole in [(0.0,) * (dim + 1), (0.3,) * dim + (-0.2,)]:
        for r in (0.1, 0.5, 1.0):
            q = build_heat_ball_quadrature(pole, r)
            exact = float(u.evaluate_many(np.array(pole))[0])
            assert abs(mean_value(u, pole, r, q) - exact) <= 1e-6


def test_mean_value_of_constant():
    assert mean_value(3.5, (1.0, 2.0), 0.3) == pytest.approx(3.5, abs=1e-8)


def test_mean_value_rejects_mismatched_quadrature():
    q = build_heat_ball_quadrature((0.0, 0.0), 0.5)
    with pytest.raises(ValueError):
        mean_value(1.0, (0.0, 0.0), 0.4, q)
