import math

import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from hypothesis import given, settings, strategies as st
from scipy.linalg import eigh_tridiagonal
from scipy.special import jn_zeros, jv

from fbplab.buckling import (
    SCAN_COLUMNS,
    Bump,
    PlateDomain,
    assemble_pencil,
    bessel_j,
    bessel_j1_zero,
    bump_library,
    disk_optimality_scan,
    disk_rayleigh_residual,
    ellipse_family,
    lambda1_disk,
    lambda1_numeric,
    quasiminimality_check,
)
from fbplab.errors import DomainError, PreconditionError


def radial_oracle(n=10_000):
    """-(q'/r)' = L q / r on (0, 1), q(0) = q(1) = 0, with q = r u'.

    Second-order finite differences, symmetrized by diag(r)^{1/2}.
    """
    h = 1.0 / n
    r = np.arange(1, n) * h
    rp, rm = r + h / 2, r - h / 2
    diag = (1 / rp + 1 / rm) / h**2
    off = -1 / (rp[:-1] * h**2)
    s = np.sqrt(r)
    vals = eigh_tridiagonal(diag * s * s, off * s[:-1] * s[1:], select="i", select_range=(0, 0))[0]
    return float(vals[0])


@pytest.fixture(scope="module")
def disk64():
    return lambda1_numeric(PlateDomain.disk(), 64)


@pytest.fixture(scope="module")
def disk128():
    return lambda1_numeric(PlateDomain.disk(), 128)


# --- disk, exact ----------------------------------------------------------------------------


@pytest.mark.parametrize("n", [0, 1, 2])
def test_bessel_series_matches_library(n):
    x = np.linspace(0, 9, 91)
    assert np.max(np.abs(bessel_j(n, x) - jv(n, x))) < 1e-13


def test_j11_zero():
    assert bessel_j1_zero() == pytest.approx(jn_zeros(1, 1)[0], abs=1e-14)


def test_lambda1_disk_against_radial_oracle():
    lam = lambda1_disk()
    assert lam == pytest.approx(14.6819, abs=1e-3)
    assert lam == pytest.approx(radial_oracle(), rel=1e-7)


def test_lambda1_disk_scaling_and_residual():
    assert lambda1_disk(radius=2.0) == pytest.approx(lambda1_disk() / 4, rel=1e-15)
    assert disk_rayleigh_residual(lambda1_disk()) <= 1e-12
    # Off the eigenvalue the radial profile is not clamped and the residual grows.
    assert disk_rayleigh_residual(14.0) > 1e-3
    with pytest.raises(PreconditionError):
        lambda1_disk(tol=0.0)


# --- domains --------------------------------------------------------------------------------


def shoelace_area(domain, n=4096):
    th = np.linspace(0, 2 * np.pi, n, endpoint=False)
    # Periodic trapezoid of r^2/2 is spectrally accurate for smooth boundaries.
    return 0.5 * np.mean(domain.radius(th) ** 2) * 2 * np.pi


@pytest.mark.parametrize(
    "domain",
    [PlateDomain.disk(1.3), PlateDomain.ellipse(1.2, 0.7), PlateDomain.star((0.1, 0.05), (0.0, 0.08), 0.9)],
)
def test_area_and_boundary_map(domain):
    assert domain.area == pytest.approx(shoelace_area(domain), rel=1e-10)
    th = np.linspace(0, 2 * np.pi, 200, endpoint=False)
    Phi, _, _ = domain.map_derivatives(np.cos(th), np.sin(th))
    assert np.allclose(np.hypot(Phi[:, 0], Phi[:, 1]), domain.radius(np.arctan2(Phi[:, 1], Phi[:, 0])), atol=1e-12)


def test_inverse_map_roundtrip():
    d = PlateDomain.star((0.0, 0.12, 0.04), (0.05,), 1.1)
    rng = np.random.default_rng(1)
    r, t = np.sqrt(rng.uniform(0, 0.98, 200)), rng.uniform(0, 2 * np.pi, 200)
    Phi, _, _ = d.map_derivatives(r * np.cos(t), r * np.sin(t))
    xi1, xi2 = d.inverse_map(Phi[:, 0], Phi[:, 1])
    assert np.allclose(xi1, r * np.cos(t), atol=1e-12) and np.allclose(xi2, r * np.sin(t), atol=1e-12)
    assert np.all(d.contains(Phi[:, 0], Phi[:, 1]))


def test_invalid_domains():
    with pytest.raises(DomainError):
        PlateDomain.star((1.2,))
    with pytest.raises(DomainError):
        PlateDomain.star((0.0, 0.0, 0.0, 0.0, 0.0, 0.3))
    with pytest.raises(DomainError):
        PlateDomain.ellipse(1.0, -1.0)
    with pytest.raises(DomainError):
        PlateDomain("square", {})


# --- mapped operators -------------------------------------------------------------------------


def _laplacian_fd(f, x, y, h=1e-3):
    c = np.array([-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12]) / h**2
    off = np.arange(-2, 3) * h
    return sum(ci * (f(x + o, y) + f(x, y + o)) for ci, o in zip(c, off))


def _clamped_test_function(domain):
    def f(x, y):
        xi1, xi2 = domain.inverse_map(x, y)
        return (1 - xi1**2 - xi2**2) ** 2

    return f


@pytest.mark.parametrize(
    "domain", [PlateDomain.disk(), PlateDomain.ellipse(1.3, 0.8), PlateDomain.star((0.05, 0.08), (0.0, 0.03))]
)
def test_mapped_laplacian_is_second_order(domain):
    f = _clamped_test_function(domain)
    errs = []
    for m in (64, 128):
        pen = assemble_pencil(domain, m)
        v = ((1 - np.sum(pen.xi**2, -1)) ** 2)[: pen.N * pen.M]
        interior = np.sum(pen.xi**2, -1) < 0.8**2
        x, y = pen.x[interior, 0], pen.x[interior, 1]
        exact = _laplacian_fd(f, x, y)
        errs.append(np.max(np.abs((pen.L @ v)[interior] - exact)))
    assert errs[1] < 1e-2
    assert errs[0] / errs[1] > 3.0


def test_disk_quadratures_of_clamped_polynomial():
    # u = (1 - r^2)^2: int |grad u|^2 = 4 pi / 3, int |Delta u|^2 = 64 pi / 3.
    errs = []
    for m in (64, 128):
        pen = assemble_pencil(PlateDomain.disk(), m)
        v = ((1 - np.sum(pen.xi**2, -1)) ** 2)[: pen.N * pen.M]
        errs.append((abs(pen.B_quad(v) - 4 * np.pi / 3), abs(pen.A_quad(v) - 64 * np.pi / 3)))
    assert errs[1][0] < 2e-3 and errs[1][1] < 2e-2
    assert errs[0][0] / errs[1][0] > 3 and errs[0][1] / errs[1][1] > 3


def test_mesh_preconditions():
    with pytest.raises(PreconditionError):
        lambda1_numeric(PlateDomain.disk(), 32)
    with pytest.raises(PreconditionError):
        lambda1_numeric(PlateDomain.disk(), (64, 65))


# --- eigenvalues ----------------------------------------------------------------------------------


def test_disk_matches_exact_value(disk64, disk128):
    exact = lambda1_disk()
    assert disk64.lambda1 > exact and disk128.lambda1 > exact
    assert abs(disk64.lambda1 - exact) / abs(disk128.lambda1 - exact) == pytest.approx(4.0, rel=0.05)
    assert disk128.lambda1 == pytest.approx(exact, abs=2e-3)


def test_mesh_convergence_factor(disk64, disk128):
    lam256 = lambda1_numeric(PlateDomain.disk(), 256).lambda1
    d1 = abs(disk64.lambda1 - disk128.lambda1) / disk64.lambda1
    d2 = abs(disk128.lambda1 - lam256) / disk128.lambda1
    assert d1 / d2 >= 3.0


def test_inverse_iteration_against_library_eigensolver():
    pen = assemble_pencil(PlateDomain.ellipse(1.1, 0.9), 64)
    A = (pen.L.T @ sp.diags(pen.w) @ pen.L).tocsc()
    lam_lib = spla.eigsh(A, k=1, M=pen.B_matrix(), sigma=0.0, which="LM")[0][0]
    lam = lambda1_numeric(PlateDomain.ellipse(1.1, 0.9), 64).lambda1
    # The explicit A loses a few digits at the pole; 1e-6 is ample at 64^2.
    assert lam == pytest.approx(lam_lib, rel=1e-6)


def test_eigenfield_normalization_and_residual(disk64):
    f = disk64.eigenfield
    assert np.all(f.values[-1] == 0)
    assert f.values.max() > 0
    assert disk64.rayleigh_residual <= 1e-12
    assert disk64.pencil_residual <= 1e-5
    # Normalized so that int |grad u|^2 = 1: compare with the exact disk profile.
    k = math.sqrt(lambda1_disk())
    alpha = 1 / (k * abs(bessel_j(0, k)) * math.sqrt(math.pi))
    assert f.values.max() == pytest.approx(alpha * (1 - bessel_j(0, k)), rel=1e-3)


def test_eigenfield_laplacian_interpolation(disk64, disk128):
    k = math.sqrt(lambda1_disk())
    alpha = 1 / (k * abs(bessel_j(0, k)) * math.sqrt(math.pi))
    xs = np.linspace(-0.95, 0.95, 41)
    X, Y = np.meshgrid(xs, xs)
    inside = X**2 + Y**2 < 0.9
    exact = -alpha * k * k * bessel_j(0, k * np.hypot(X, Y))
    errs = [np.max(np.abs(r.eigenfield.sample(X, Y) - exact)[inside]) / np.max(np.abs(exact)) for r in (disk64, disk128)]
    assert errs[0] < 5e-3 and errs[0] / errs[1] > 2.5
    assert np.all(disk64.eigenfield.sample(np.array([1.5]), np.array([0.0])) == 0)


def test_ellipse_with_equal_axes_is_the_disk(disk64):
    assert lambda1_numeric(PlateDomain.ellipse(1.0, 1.0), 64).lambda1 == pytest.approx(disk64.lambda1, rel=1e-12)


@settings(max_examples=5, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(-0.08, 0.08), st.floats(-0.08, 0.08))
def test_scale_invariance(t, c2, d3):
    d = PlateDomain.star((0.0, c2), (0.0, 0.0, d3))
    lam = lambda1_numeric(d, 64).lambda1
    lam_t = lambda1_numeric(d.scaled(t), 64).lambda1
    assert lam_t * t * t == pytest.approx(lam, rel=1e-10)


def test_monotone_under_inclusion():
    big = lambda1_numeric(PlateDomain.disk(1.2), 64).lambda1
    unit = lambda1_numeric(PlateDomain.disk(1.0), 64).lambda1
    inner = lambda1_numeric(PlateDomain.ellipse(1.0, 0.8), 64).lambda1
    assert big < unit < inner


# --- scan -------------------------------------------------------------------------------------------


def test_ellipse_scan_ranks_the_disk_first():
    fam = ellipse_family()
    t64 = disk_optimality_scan(fam, 64)
    t128 = disk_optimality_scan(fam, 128)
    assert t64.disk_minimal and t128.disk_minimal
    assert t64.ranking() == t128.ranking() == [1.0, 1.1, 1.25, 1.5]
    for row in t64.rows:
        assert row["area"] == pytest.approx(np.pi, rel=1e-12)
        assert row["area_lambda1"] == pytest.approx(np.pi * row["lambda1"])
    text = t64.to_csv().splitlines()
    assert text[0] == "#schema=fbplab/buckling_scan/v1"
    assert text[1].split(",") == list(SCAN_COLUMNS)
    assert len(text) == 2 + len(fam)


def test_scan_parallel_matches_serial():
    fam = ellipse_family((1.0, 1.2))
    assert disk_optimality_scan(fam, 64, jobs=2).rows == disk_optimality_scan(fam, 64).rows


# --- quasi-minimality -------------------------------------------------------------------------------


def test_zero_perturbation_has_zero_margin(disk64):
    b = Bump((0.0, 0.0), 0.02, 0.0)
    rep = quasiminimality_check(disk64, [b], ((0.0, 0.0), 0.1))
    assert rep.margins == [0.0] and rep.passes


def test_bump_library_margins(disk64):
    reps = quasiminimality_check(disk64)
    assert [r.radius for r in reps] == [0.05, 0.1, 0.2]
    for r in reps:
        assert len(r.margins) == 15 and r.passes and r.worst_margin <= 0


def test_margin_vanishes_linearly(disk64):
    b = bump_library((0.0, 0.0), 0.1, 1e-2)[0]
    slopes = [quasiminimality_check(disk64, [b.scaled(s)], ((0.0, 0.0), 0.1)).margins[0] / s for s in (1e-1, 1e-2, 1e-3)]
    assert all(np.isfinite(slopes)) and max(abs(x) for x in slopes) < 10.0


def test_bump_laplacian_matches_finite_differences():
    b = Bump((0.1, -0.2), 0.3, 0.7)
    x, y = np.array([0.15, 0.0, 0.3]), np.array([-0.1, -0.25, -0.3])
    assert np.allclose(b.evaluate(x, y)[1], _laplacian_fd(lambda a, c: b.evaluate(a, c)[0], x, y), rtol=1e-6)


def test_perturbation_outside_disk_rejected(disk64):
    with pytest.raises(DomainError):
        quasiminimality_check(disk64, [Bump((0.09, 0.0), 0.05, 1e-3)], ((0.0, 0.0), 0.1))


def test_support_gain_near_the_rim(disk64):
    inside = quasiminimality_check(disk64, [Bump((0.9, 0.0), 0.05, 1e-3)], ((0.9, 0.0), 0.1))
    crossing = quasiminimality_check(disk64, [Bump((0.98, 0.0), 0.05, 1e-3)], ((0.95, 0.0), 0.1))
    assert inside.passes and crossing.passes
    # Part of the crossing bump lives outside the plate and pays its area.
    assert crossing.margins[0] < -0.005
