import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from fbplab.angular_modes import T1, TWO_PI, buckling_mode, homogeneous_profile, reference_l2_norm_sq
from fbplab.epiperimetric import (
    NEGATIVE_LAMBDA_GRID,
    SINGLE_MODE_EPS,
    F_eps,
    F_eps_second_derivative,
    Q_form,
    biharmonic_comparison,
    c2_norm,
    calibrate_single_mode_eps,
    chi_eps,
    chi_eps_derivative_bound,
    chi_omega,
    chi_omega_residuals,
    compute_C0,
    constant_profile,
    derivative_removal_gap,
    detect_support,
    double_sector_competitor,
    epiperimetric_report,
    f_delta,
    fourier_from_goursat,
    negative_profile_search,
    positive_profile_search,
    removal_profile,
    single_mode_energy_gap,
    single_mode_oracle,
    truncated,
    DecayProfile,
)
from fbplab.errors import ConstructionError, DomainError, PreconditionError
from fbplab.weiss_energy import DiskField, GoursatCoefficients, PolarGrid, cylinder_G, to_cylinder


def exp_profile():
    return DecayProfile(lambda t, m=0: (-1.0) ** m * np.exp(-t), 1.0, -1.0, name="exp")


def mode_fn(n, omega, scale=1.0):
    mode = buckling_mode(n, omega)
    return lambda theta, m=0: scale * mode(np.mod(theta, TWO_PI), m)


# --- Q form and C0 -------------------------------------------------------------------


@pytest.mark.parametrize("lam", [-8.0, -1.0, 0.0, 1.0, 4.0, 100.0])
def test_Q_of_constant_is_half_lambda(lam):
    assert Q_form(constant_profile(1.0), lam, 6.5) == pytest.approx(lam / 2, abs=1e-12)


def test_Q_of_zero_and_of_exponential():
    assert Q_form(constant_profile(0.0), 3.0, 6.5) == 0.0
    # ∫ e^{-2t}(e^{-2t} + 2 e^{-2t}) = 3/4.
    assert Q_form(exp_profile(), 0.0, 1.0) == pytest.approx(0.75, rel=1e-12)


def test_Q_of_truncated_profile_matches_adaptive_quadrature():
    f = truncated(exp_profile(), 3.0)
    C0, lam = 2.0, 1.5
    dens = lambda t: np.exp(-2 * t) * (C0 * f(np.array([t]), 2)[0] ** 2 + 2 * f(np.array([t]), 1)[0] ** 2 + lam * f(np.array([t]), 0)[0] ** 2)
    ref = quad(dens, 0, 3.0, points=[2.0], epsabs=1e-14, epsrel=1e-13)[0]
    assert Q_form(f, lam, C0) == pytest.approx(ref, rel=1e-11)


def test_truncated_profile_vanishes_beyond_T():
    f = truncated(exp_profile(), 5.0)
    t = np.linspace(5.0, 9.0, 50)
    assert np.all(f(t) == 0) and f.compact_support and f.support_end == 5.0
    assert np.allclose(f(np.linspace(0, 4, 30)), np.exp(-np.linspace(0, 4, 30)))


def test_profile_rejects_inconsistent_initial_data():
    with pytest.raises(ConstructionError):
        DecayProfile(lambda t, m=0: np.exp(-t), 2.0, 0.0)


def test_C0_partial_sum_matches_quadrature_of_modes():
    est = compute_C0([np.pi], 32)
    # Oracle: Simpson-free Gauss sum of ||b_n||^2 with sampled modes.
    total = 0.0
    for n in range(1, 33):
        mode = buckling_mode(n, np.pi)
        total += quad(lambda x: mode(x) ** 2, 0, np.pi, limit=400, epsabs=1e-14)[0]
    assert est.partial == pytest.approx(total, rel=1e-9)
    mu = [buckling_mode(n, np.pi).mu for n in range(33, 4000)]
    assert est.tail_estimate < 8 * np.sum(1 / np.array(mu))


def test_C0_partial_sums_increase_and_value_is_stable():
    a, b = compute_C0(n_max=32), compute_C0(n_max=64)
    assert b.partial > a.partial
    assert abs(a.value - b.value) < 1e-3
    # The sup over (0, 2pi] sits at 2pi because ||b_{n,w}||^2 scales like w^2.
    assert b.omega == pytest.approx(TWO_PI)
    # Independent oracle: Richardson on the O(1/N) tail of the plain partial sums.
    norms = np.array([reference_l2_norm_sq(n) for n in range(1, 4001)])
    s2, s4 = norms[:2000].sum(), norms.sum()
    assert b.value == pytest.approx(4 * (2 * s4 - s2), rel=1e-5)


def test_C0_requires_enough_modes():
    with pytest.raises(PreconditionError):
        compute_C0(n_max=16)


# --- chi_eps and the single-mode competitor ----------------------------------------------


@pytest.mark.parametrize("eps", [0.01, 0.05, 0.1])
def test_chi_eps_equilibrium(eps):
    chi = chi_eps(eps)
    val = quad(lambda t: np.exp(-2 * t) * (chi(np.array([t]))[0] - (1 - eps)), 0, np.inf, epsabs=1e-15)[0]
    assert abs(val) < 1e-12
    assert chi.f0 == 1.0 and chi.fp0 == 0.0
    assert chi(np.array([60.0]))[0] == pytest.approx(1 - 9 * eps)


def test_chi_eps_derivative_bound():
    eps = 0.05
    chi = chi_eps(eps)
    t = np.linspace(0, 30, 300001)
    observed = np.max(np.abs(chi(t, 1))) + np.max(np.abs(chi(t, 2)))
    assert observed <= chi_eps_derivative_bound(eps) + 1e-12
    assert observed == pytest.approx(chi_eps_derivative_bound(eps), rel=1e-6)


@pytest.mark.parametrize("eps", [0.0, 1 / 9, -0.1])
def test_chi_eps_range(eps):
    with pytest.raises(PreconditionError):
        chi_eps(eps)


def test_f_delta_value_and_curvature():
    h = 1e-4
    for Theta in (np.pi, T1):
        assert f_delta(0.0, Theta) == 0.0
        second = (f_delta(h, Theta) - 2 * f_delta(0.0, Theta) + f_delta(-h, Theta)) / h**2
        assert second == pytest.approx(40.0, rel=1e-6)


@pytest.mark.parametrize("eps", [0.02, 0.05])
def test_F_eps_second_derivative(eps):
    h = 1e-3
    Fp, F0, Fm = F_eps(h, eps, np.pi), F_eps(0.0, eps, np.pi), F_eps(-h, eps, np.pi)
    assert F0 == 0.0
    # F'(0) = 0; the central difference only sees the cubic term.
    assert abs((Fp - Fm) / (2 * h)) < 1e-5
    assert (Fp - 2 * F0 + Fm) / h**2 == pytest.approx(F_eps_second_derivative(eps), rel=1e-4)


@pytest.mark.parametrize("Theta", [np.pi, T1, TWO_PI])
@pytest.mark.parametrize("d0,a", [(-0.03, 1.0), (-0.02, 1.3), (0.01, 0.7)])
def test_single_mode_quadrature_matches_oracle(Theta, d0, a):
    if Theta * (1 + d0) > TWO_PI:
        pytest.skip("opening above 2pi")
    eps = 0.05
    res = single_mode_energy_gap(Theta, a, Theta * (1 + d0), eps, check=False)
    if res.construction == "dilation":
        assert res.G_U == pytest.approx(single_mode_oracle(Theta, a, Theta * (1 + d0), eps), rel=1e-11)
    else:
        assert res.G_U == res.G_u


def test_single_mode_equality_case():
    G_u, G_U, gap = single_mode_energy_gap(np.pi, 1.0, np.pi)
    assert G_u == pytest.approx(np.pi / 2) and G_U == G_u and gap == 0.0


@pytest.mark.parametrize("Theta", [np.pi, T1])
@pytest.mark.parametrize("d0", [-0.02, -0.01, 0.01, 0.02])
def test_single_mode_inequality(Theta, d0):
    a = 1 / np.sqrt(1 + d0)
    res = single_mode_energy_gap(Theta, a, Theta * (1 + d0))
    excess = max(res.G_u - Theta / 2, 0.0)
    assert res.G_U <= res.G_u - res.eps_hat * excess + 1e-13
    assert (res.construction == "dilation") == (d0 < 0)


def test_recorded_eps_is_the_calibrated_one():
    assert calibrate_single_mode_eps() == SINGLE_MODE_EPS


def test_single_mode_competitor_boundary_data_and_sampling():
    res = single_mode_energy_gap(np.pi, 1 / np.sqrt(0.98), 0.98 * np.pi)
    comp = res.competitor
    du, dv = comp.boundary_residual()
    assert du < 1e-12 and dv < 1e-12
    n_theta = 4096
    cyl = comp.cylinder(T_max=8, n_t=401, n_theta=n_theta)
    # Cellwise support counting adds at most one cell per endpoint.
    assert abs(cylinder_G(cyl, 0.0, 1e-4) - res.G_U) < 2 * TWO_PI / n_theta
    assert np.isfinite(cyl.growth_constant)


def test_single_mode_rejects_wide_openings():
    with pytest.raises(PreconditionError):
        single_mode_energy_gap(np.pi, 1.0, 1.3 * np.pi)
    with pytest.raises(PreconditionError):
        single_mode_energy_gap(3.0, 1.0, 3.0)


# --- two sectors -------------------------------------------------------------------------


def test_double_symmetric_case():
    comp = double_sector_competitor(1.0, 1.0, np.pi, np.pi, 0.0)
    assert comp.energy == pytest.approx(np.pi) and comp.params["gap"] == pytest.approx(0.0, abs=1e-14)
    assert comp.params["min_room"] >= -1e-14


def test_double_example_gap_and_additivity():
    comp = double_sector_competitor(1.0, 1.0, 0.98 * np.pi, 0.98 * np.pi, 0.02 * np.pi)
    assert comp.params["gap"] <= 0
    first, second = comp.pieces
    assert comp.energy == pytest.approx(first.energy + second.energy, rel=1e-15)
    n_theta = 4096
    whole = cylinder_G(comp.cylinder(8, 401, n_theta), 0.0, 1e-4)
    parts = sum(cylinder_G(p.cylinder(8, 401, n_theta), 0.0, 1e-4) for p in comp.pieces)
    assert whole == pytest.approx(parts, rel=1e-12)
    assert abs(whole - comp.energy) < 4 * TWO_PI / n_theta
    du, _ = comp.boundary_residual()
    assert du < 1e-12


def test_double_overlap_is_detected():
    with pytest.raises(ConstructionError):
        double_sector_competitor(1.0, 1.0, 0.9 * np.pi, 0.9 * np.pi, 0.1 * np.pi, eps=0.1)


def test_double_preconditions():
    with pytest.raises(PreconditionError):
        double_sector_competitor(1.0, 1.0, np.pi, np.pi, 0.1)
    with pytest.raises(PreconditionError):
        double_sector_competitor(1.0, 1.0, 0.7 * np.pi, np.pi, 0.1)


@settings(max_examples=20, deadline=None)
@given(
    st.floats(0.5, 2.0), st.floats(0.5, 2.0), st.floats(0.92, 1.0), st.floats(0.92, 1.0), st.floats(0.0, 1.0)
)
def test_double_gap_nonpositive(a1, a2, w1, w2, frac):
    w1, w2 = w1 * np.pi, w2 * np.pi
    beta = frac * (TWO_PI - w1 - w2)
    comp = double_sector_competitor(a1, a2, w1, w2, beta)
    assert comp.params["gap"] <= 1e-12


# --- profile searches -------------------------------------------------------------------


@pytest.fixture(scope="module")
def positive():
    return positive_profile_search()


@pytest.fixture(scope="module")
def negative():
    return negative_profile_search()


def test_positive_profile(positive):
    eps, T, eta, f = positive
    assert eta >= 1e-4
    assert f.f0 == 1.0 and f.fp0 == 0.0 and f.compact_support
    assert np.all(f(np.linspace(T, T + 5, 20)) == 0)
    for lam in np.logspace(0, 6, 61):
        assert Q_form(f, lam, positive.C0) <= (1 - eta) * lam / 2 + 1e-12
    assert positive.checks["ratio_i"] <= positive.checks["bound_i"]
    assert positive.checks["large_lambda_ratio"] < 1


def test_positive_candidate_estimate_i():
    from fbplab.epiperimetric import _positive_candidate, default_C0

    f = _positive_candidate(0.1)
    assert Q_form(f, 1.0, default_C0()) / 0.5 < 1 - 0.0025
    fT = truncated(f, 10.0)
    # (ii): the truncation costs at most C e^{-2T} relatively.
    C = (Q_form(fT, 1.0, default_C0()) / Q_form(f, 1.0, default_C0()) - 1) * np.exp(20.0)
    assert abs(C) < 1e3


def test_large_lambda_ratio(positive):
    f = positive.profile
    lam = 1e9
    assert Q_form(f, lam, positive.C0) / (lam / 2) == pytest.approx(positive.checks["large_lambda_ratio"], rel=1e-6)


def test_negative_profile(negative):
    f = negative
    assert f.f0 == 1.0 and f.fp0 == 0.0 and f.compact_support
    for lam in NEGATIVE_LAMBDA_GRID:
        assert Q_form(f, lam, f.params["C0"]) <= lam / 2
    assert Q_form(f, -1.0, f.params["C0"]) <= -0.5


def test_negative_candidate_second_moment():
    from fbplab.epiperimetric import _negative_candidate, q_parts

    eps = 0.01
    assert q_parts(_negative_candidate(eps))[2] == pytest.approx(0.5 + eps**2 / 4, abs=1e-6)


# --- derivative removal ----------------------------------------------------------------


@pytest.mark.parametrize("omega", [0.5 * np.pi, np.pi, T1, TWO_PI])
def test_chi_omega_orthogonality(omega):
    assert np.max(np.abs(chi_omega_residuals(omega))) <= 1e-10


def test_chi_omega_shape_and_uniform_bound():
    norms = []
    for omega in np.linspace(0.5 * np.pi, TWO_PI, 13):
        chi = chi_omega(omega)
        assert np.allclose(chi(np.linspace(0, 0.03, 20)), 1.0)
        assert np.all(chi(np.linspace(1.0, 3.0, 20)) == 0)
        norms.append(c2_norm(chi))
    assert max(norms) < 400
    # Continuity in omega: neighbouring cutoffs stay close.
    assert np.max(np.abs(np.diff(norms))) < 0.1 * max(norms)
    assert chi_omega(0.2).params["coefficients"] == chi_omega(0.5 * np.pi).params["coefficients"]


@pytest.mark.parametrize("n", [1, 2, 5])
def test_removal_profile_initial_data(n):
    f = removal_profile(n, np.pi)
    assert f.f0 == 0.0 and f.fp0 == 1.0
    h = 1e-6
    assert (f(np.array([h]))[0] - f(np.array([0.0]))[0]) / h == pytest.approx(1.0, rel=1e-4)


def test_removal_zero_velocity():
    assert tuple(derivative_removal_gap(mode_fn(1, np.pi), None, np.pi)) == (0.0, 0.0, 0.0)


def test_removal_improved_branch():
    res = derivative_removal_gap(mode_fn(1, np.pi), mode_fn(2, np.pi, 0.1), np.pi)
    bound_general, bound_improved, actual = res
    # u has no component above i(pi) = 1, so the improved bound is C ||v'||^2.
    assert bound_improved == pytest.approx(res.constants["C_improved"] * 0.01, rel=1e-9)
    assert actual <= bound_improved <= bound_general
    assert np.max(np.abs(res.constants["cross_terms_low"])) < 1e-12


def test_removal_competitor_matches_sampled_energy():
    res = derivative_removal_gap(mode_fn(1, np.pi), mode_fn(2, np.pi, 0.1), np.pi)
    comp = res.competitor
    du, dv = comp.boundary_residual()
    assert du < 1e-12 and dv < 1e-8
    n_theta = 2048
    sampled = cylinder_G(comp.cylinder(8, 801, n_theta), 0.0, 1e-4)
    assert abs(sampled - comp.energy) < 2 * TWO_PI / n_theta + 1e-3 * abs(res.actual)


def test_removal_rejects_unclamped_data():
    with pytest.raises(DomainError):
        derivative_removal_gap(lambda th, m=0: np.sin(th) if m == 0 else np.cos(th), None, np.pi)


# --- biharmonic comparison --------------------------------------------------------------


def test_biharmonic_ratio_at_three():
    x = np.zeros(7, complex)
    x[3 + 3] = 0.4
    rep = biharmonic_comparison(x, np.zeros(7))
    assert rep.ratio(3) == pytest.approx(0.8)
    assert rep.ratio(3) <= 0.9


def test_biharmonic_zero_and_constant_rows():
    rep = biharmonic_comparison(np.zeros(5), np.zeros(5))
    assert rep.lhs == 0 and rep.rhs_equal == 0
    x = np.zeros(5, complex)
    x[2] = 1.0
    rep = biharmonic_comparison(x, np.zeros(5))
    assert rep.left_terms[2] == 0 and rep.right_terms[2] == 0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_biharmonic_inequality_random(seed):
    rng = np.random.default_rng(seed)
    N = 6
    z = rng.normal(size=(2, 2 * N + 1)) + 1j * rng.normal(size=(2, 2 * N + 1))
    # Real data: c_{-n} = conj(c_n).
    z = 0.5 * (z + np.conj(z[:, ::-1]))
    rep = biharmonic_comparison(z[0], z[1])
    assert rep.per_term_holds and rep.holds


def test_biharmonic_lhs_is_the_extension_energy():
    rng = np.random.default_rng(0)
    coeffs = GoursatCoefficients.random(rng, n_max=4, center_flat=True, scale=0.3)
    rep = biharmonic_comparison(*fourier_from_goursat(coeffs))
    cyl = to_cylinder(DiskField.from_goursat(coeffs, PolarGrid(256, 512)), T_max=10)
    assert cylinder_G(cyl, 0.0, 1e-4) - np.pi == pytest.approx(rep.lhs, rel=1e-6)
    json.dumps(rep.to_json())


# --- full report -------------------------------------------------------------------------


def flat_plus(n, amp, Theta=np.pi):
    base = homogeneous_profile("Flat" if Theta == np.pi else "Angular")
    pert = mode_fn(n, Theta, amp)
    return lambda th, m=0: base.b(th, m) + pert(th, m)


def test_report_on_exact_profile():
    rep = epiperimetric_report((flat_plus(3, 0.0), None), np.pi, (np.pi / 2, np.pi / 2), support=[(0, np.pi)])
    assert rep.G_u == pytest.approx(np.pi / 2) and rep.G_U == pytest.approx(np.pi / 2)
    assert rep.decay_holds and rep.hypothesis_met
    json.dumps(rep.to_json())


@pytest.mark.parametrize("Theta,n", [(np.pi, 3), (T1, 4)])
def test_report_on_perturbed_profile(Theta, n):
    rep = epiperimetric_report((flat_plus(n, 0.02, Theta), None), Theta)
    assert rep.G_u > Theta / 2
    assert rep.eta_empirical > 0 and rep.decay_holds
    assert all(v for k, v in rep.checks.items() if isinstance(v, bool))
    assert rep.checks["modal_truncation"] < 1e-8
    du, dv = rep.competitor.boundary_residual()
    assert du < 1e-12 and dv < 1e-12


def test_report_with_velocity_matches_sampled_energy():
    u = flat_plus(3, 0.02)
    v = mode_fn(2, np.pi, 0.01)
    rep = epiperimetric_report((u, v), np.pi, support=[(0.0, np.pi)])
    assert rep.delta_removal > 0 and rep.checks["competitor_inequality"]
    du, dv = rep.competitor.boundary_residual()
    assert du < 1e-12 and dv < 1e-8
    n_theta = 2048
    sampled = cylinder_G(rep.competitor.cylinder(T_max=20, n_t=4001, n_theta=n_theta), 0.0, 1e-4)
    assert abs(sampled - rep.G_U) < 2 * TWO_PI / n_theta


def test_report_support_violation():
    u = mode_fn(1, 0.6 * np.pi)
    with pytest.raises(DomainError, match="support"):
        epiperimetric_report((u, None), np.pi)


def test_detect_support_endpoints():
    u = mode_fn(2, T1)
    (lo, hi), = detect_support(u)
    assert lo == pytest.approx(0.0, abs=1e-8) and hi == pytest.approx(T1, abs=1e-8)
