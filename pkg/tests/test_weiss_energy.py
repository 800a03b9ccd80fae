import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from fbplab.angular_modes import T1, homogeneous_profile
from fbplab.errors import PreconditionError, ResolutionError, TruncationError
from fbplab.weiss_energy import (
    BoundaryTrace,
    DiskField,
    GoursatCoefficients,
    N_functional,
    N_prime,
    PolarGrid,
    R_functional,
    W0_goursat,
    biharmonic_extension_energy,
    cylinder_G,
    cylinder_W,
    cylinder_dissipation,
    energy_E,
    fornberg_weights,
    goursat_from_boundary,
    kappa_ratio,
    rescale,
    to_cylinder,
    weiss_W,
    weiss_W_dkv,
)

GRID = PolarGrid(192, 384)


def profile_field(kind, grid=GRID, **kw):
    return DiskField.from_profile(homogeneous_profile(kind, **kw), grid)


def test_fornberg_matches_textbook_stencil():
    w = fornberg_weights(0.0, np.array([-2.0, -1.0, 0.0, 1.0, 2.0]), 2)
    assert np.allclose(w[:, 1], [1 / 12, -2 / 3, 0, 2 / 3, -1 / 12])
    assert np.allclose(w[:, 2], [-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12])


def test_zero_field_energy():
    f = DiskField(GRID, np.zeros((GRID.n_r + 1, GRID.n_theta)))
    for lam in (0.0, 1.0, 5.0):
        assert energy_E(f, lam, 1.0) == 0.0
    assert R_functional(f, 0.5) == 0.0


def test_flat_energy_exact_arithmetic():
    # |Δu| = 1 on the upper half disk: E = pi/2 + pi/2.
    f = profile_field("flat", PolarGrid(256, 1024))
    assert energy_E(f, 1.0, 1.0) == pytest.approx(np.pi, rel=2e-3)


@pytest.mark.parametrize("a", [0.25, 1.0, -2.0])
def test_isolated_radial_energy(a):
    f = profile_field("isolated", abc=(a, 0.0, 0.0))
    assert energy_E(f, 1.0, 1.0) == pytest.approx(16 * a * a * np.pi + np.pi, rel=1e-8)
    assert energy_E(f, 0.0, 0.5) == pytest.approx(16 * a * a * np.pi * 0.25, rel=1e-4)


def test_energy_preconditions():
    f = profile_field("nodal")
    with pytest.raises(PreconditionError):
        energy_E(f, -1.0)
    with pytest.raises(PreconditionError):
        energy_E(f, 1.0, 1.5)


@pytest.mark.parametrize(
    "kind, kw, target",
    [("flat", {}, np.pi / 2), ("angular", {}, T1 / 2), ("nodal", {}, np.pi), ("isolated", {"abc": (1.0, 0.3, 0.0)}, np.pi)],
)
def test_W_constant_on_homogeneous_profiles(kind, kw, target):
    f = profile_field(kind, **kw)
    values = [weiss_W(f, r) for r in (0.2, 0.4, 0.6, 0.8)]
    assert np.ptp(values) < 1e-6
    assert values[0] == pytest.approx(target, rel=1e-2)
    assert weiss_W_dkv(f, 0.5) == pytest.approx(values[0], rel=1e-6)


def test_N_homogeneous_is_trace_integral():
    f = profile_field("nodal")
    # b = sin^2/2: ∫ b^2 + b'^2 = ∫ sin^4/4 + sin^2 cos^2 = 3pi/16 + pi/4 = 7pi/16.
    oracle = quad(lambda t: np.sin(t) ** 4 / 4 + np.sin(t) ** 2 * np.cos(t) ** 2, 0, 2 * np.pi)[0]
    assert oracle == pytest.approx(7 * np.pi / 16, rel=1e-12)
    for r in (0.3, 0.6, 0.9):
        assert N_functional(f, r) == pytest.approx(oracle, rel=1e-10)


def test_W_identity_with_N_and_R():
    rng = np.random.default_rng(3)
    c = GoursatCoefficients.random(rng, 6)
    f = DiskField(GRID, DiskField.from_goursat(c, GRID).values.copy())
    for i in (60, 100, 160):
        r = GRID.r[i]
        rhs = energy_E(f, 0.0, r) / r**2 + r * N_prime(f, r) + R_functional(f, r)
        assert weiss_W(f, r, lam=0.0) == pytest.approx(rhs, rel=1e-8)
        assert N_prime(f, r, "fd") == pytest.approx(N_prime(f, r), rel=2e-3)


def test_W_resolution_error():
    f = profile_field("flat")
    with pytest.raises(ResolutionError):
        weiss_W(f, 1e-4)


def test_W_requires_center_flat():
    c = GoursatCoefficients(np.zeros(3, complex), np.array([0, 1.0, 0], complex))
    f = DiskField.from_goursat(c, GRID)
    assert not f.center_flat
    with pytest.raises(PreconditionError):
        weiss_W(f, 0.5)


def test_W0_single_terms():
    b = np.zeros(5, complex)
    b[2] = 0.7
    c = GoursatCoefficients(np.zeros(5, complex), b)
    assert W0_goursat(c, 0.5) == pytest.approx(-32 * np.pi * 0.5**-4 * 0.49)
    a = np.zeros(5, complex)
    a[3] = 0.3 + 0.4j
    c = GoursatCoefficients(a, np.zeros(5, complex))
    assert W0_goursat(c, 0.8) == pytest.approx(8 * np.pi * 0.64 * 0.25)


@pytest.mark.parametrize("seed", range(4))
def test_W0_matches_sampled_weiss(seed):
    c = GoursatCoefficients.random(np.random.default_rng(seed), 8)
    f = DiskField(GRID, DiskField.from_goursat(c, GRID).values.copy())
    for r in (0.25, 0.6, 0.9):
        w0 = W0_goursat(c, r)
        assert abs(weiss_W(f, r, lam=0.0) - w0) <= 1e-3 * (1 + abs(w0))


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_W0_monotone_on_center_flat_fields(seed):
    rng = np.random.default_rng(seed)
    c = GoursatCoefficients.random(rng, 8, zero=(("a", 1), ("a", 2)))
    radii = np.linspace(0.1, 1.0, 40)
    values = np.array([W0_goursat(c, r) for r in radii])
    assert np.all(np.diff(values) >= -1e-9 * (1 + np.abs(values[1:])))


def test_W0_diverges_without_center_flatness():
    b = np.zeros(3, complex)
    b[1] = 1.0
    c = GoursatCoefficients(np.zeros(3, complex), b)
    assert W0_goursat(c, 1e-3) < -1e12


def test_goursat_from_boundary_simple_traces():
    theta = np.arange(64) * 2 * np.pi / 64
    c = goursat_from_boundary(BoundaryTrace.from_samples(np.ones(64), np.zeros(64), n_max=4))
    assert c.a[4] == pytest.approx(0) and c.b[4] == pytest.approx(1)
    c = goursat_from_boundary(BoundaryTrace.from_samples(np.zeros(64), np.ones(64), n_max=4))
    assert c.a[4] == pytest.approx(0.5) and c.b[4] == pytest.approx(-0.5)
    assert theta.size == 64


def test_goursat_of_nodal_trace_reconstructs_field():
    f = profile_field("nodal")
    trace = BoundaryTrace.from_field(f, 1.0, n_max=4)
    c = goursat_from_boundary(trace)
    n = c.n
    assert c.a[n == 0][0] == pytest.approx(0.25)
    assert c.b[n == 2][0] == pytest.approx(-0.125)
    assert c.b[n == -2][0] == pytest.approx(-0.125)
    assert np.allclose(np.delete(c.a, n == 0), 0, atol=1e-15)
    x, y = np.meshgrid(np.linspace(-0.7, 0.7, 9), np.linspace(-0.7, 0.7, 9))
    rec = c.evaluate(np.hypot(x, y), np.arctan2(y, x))["u"]
    assert np.allclose(rec, y**2 / 2, atol=1e-14)
    assert biharmonic_extension_energy(trace) == pytest.approx(2 * np.pi)


def test_trace_parseval_and_symmetry():
    rng = np.random.default_rng(7)
    u = rng.standard_normal(128)
    tr = BoundaryTrace.from_samples(u, u, n_max=63)
    assert np.allclose(tr.fourier_u[::-1], np.conj(tr.fourier_u))
    # n = +-64 is dropped; compare against the band-limited part.
    c = np.fft.fft(u) / 128
    assert tr.l2_norm_sq() == pytest.approx(2 * np.pi * (np.sum(np.abs(c) ** 2) - abs(c[64]) ** 2))


def test_extension_energy_zero_trace_and_scaling():
    z = np.zeros(32)
    assert biharmonic_extension_energy(BoundaryTrace.from_samples(z, z, n_max=8)) == pytest.approx(np.pi)
    rng = np.random.default_rng(2)
    u, ur = rng.standard_normal(32), rng.standard_normal(32)
    e1 = biharmonic_extension_energy(BoundaryTrace.from_samples(u, ur, n_max=8)) - np.pi
    e2 = biharmonic_extension_energy(BoundaryTrace.from_samples(2 * u, 2 * ur, n_max=8)) - np.pi
    assert e2 == pytest.approx(4 * e1)


def test_extension_energy_matches_field_quadrature():
    c = GoursatCoefficients.random(np.random.default_rng(11), 5, center_flat=False)
    f = DiskField.from_goursat(c, GRID)
    trace = BoundaryTrace.from_field(f, 1.0, n_max=8)
    assert biharmonic_extension_energy(trace, lam=0.0) == pytest.approx(energy_E(f, 0.0, 1.0), rel=1e-6)


def test_goursat_json_roundtrip():
    c = GoursatCoefficients.random(np.random.default_rng(0), 3)
    c2 = GoursatCoefficients.from_json(c.to_json())
    assert np.array_equal(c.a, c2.a) and np.array_equal(c.b, c2.b)
    assert c.is_real()
    assert len(json.loads(c.to_json())["a"]) == 7


@pytest.mark.parametrize("kind, target", [("flat", np.pi / 2), ("angular", T1 / 2), ("nodal", np.pi)])
def test_cylinder_W_constant_for_homogeneous(kind, target):
    f = profile_field(kind)
    cyl = to_cylinder(f, T_max=8.0)
    vals = [cylinder_W(cyl, tau) for tau in (0.0, 0.5, 1.5)]
    assert np.ptp(vals) < 1e-8
    assert vals[0] == pytest.approx(target, rel=1e-2)
    assert vals[0] == pytest.approx(weiss_W(f, np.exp(-0.5)), rel=1e-6)


def test_cylinder_matches_disk_on_biharmonic_field():
    c = GoursatCoefficients.random(np.random.default_rng(5), 6)
    f = DiskField.from_goursat(c, GRID)
    cyl = to_cylinder(f, T_max=12.0)
    for tau in (0.2, 0.7):
        assert cylinder_W(cyl, tau) == pytest.approx(weiss_W(f, np.exp(-tau)), rel=1e-4)
        h = 1e-3
        slope = (cylinder_W(cyl, tau + h) - cylinder_W(cyl, tau - h)) / (2 * h)
        assert slope == pytest.approx(cylinder_dissipation(cyl, tau), rel=1e-4)
    assert np.isfinite(cyl.growth_constant)


def test_cylinder_from_sampled_field():
    c = GoursatCoefficients.random(np.random.default_rng(8), 4)
    fs = DiskField(GRID, DiskField.from_goursat(c, GRID).values.copy())
    cyl = to_cylinder(fs, T_max=5.0)
    assert cylinder_W(cyl, 0.5, tail_tol=1e-3) == pytest.approx(weiss_W(fs, np.exp(-0.5)), rel=1e-3)


def test_cylinder_truncation_flagged():
    cyl = to_cylinder(profile_field("nodal"), T_max=2.0)
    with pytest.raises(TruncationError):
        cylinder_G(cyl, 0.0, tail_tol=1e-4)


def test_scale_covariance():
    c = GoursatCoefficients.random(np.random.default_rng(9), 6)
    f = DiskField.from_goursat(c, GRID)
    for s in (0.5, 0.8):
        g = rescale(f, s)
        for r in (0.4, 0.9):
            assert weiss_W(g, r) == pytest.approx(weiss_W(f, s * r), rel=1e-4)


def test_polar_laplacian_matches_cartesian_stencil():
    c = GoursatCoefficients.random(np.random.default_rng(4), 5)
    f = DiskField.from_goursat(c, GRID)
    i, j = 120, 37
    r, th = GRID.r[i], GRID.theta[j]
    x0, y0, h = r * np.cos(th), r * np.sin(th), 1e-3
    u = lambda x, y: c.evaluate(np.hypot(x, y), np.arctan2(y, x))["u"]
    cart = (u(x0 + h, y0) + u(x0 - h, y0) + u(x0, y0 + h) + u(x0, y0 - h) - 4 * u(x0, y0)) / h**2
    assert f.lap[i, j] == pytest.approx(cart, rel=1e-5)


def test_kappa_ratio_reported():
    f = profile_field("flat")
    assert 0 < kappa_ratio(f, [0.3, 0.6]) < 10


def test_diskfield_save_load(tmp_path):
    c = GoursatCoefficients.random(np.random.default_rng(1), 3)
    g = PolarGrid(32, 64)
    f = DiskField(g, DiskField.from_goursat(c, g).values.copy())
    path = f.save(tmp_path / "field.csv")
    assert path.read_text().splitlines()[0] == "#schema=fbplab/diskfield/v1"
    f2 = DiskField.load(path)
    assert np.array_equal(f.values, f2.values)
    assert weiss_W(f2, 0.5, 0.0) == pytest.approx(weiss_W(f, 0.5, 0.0))
