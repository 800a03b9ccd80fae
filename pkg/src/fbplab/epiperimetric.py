"""Competitors on the half-cylinder and the energy comparisons they satisfy.

Energies are written on the cylinder C_0 = (0, inf) x S^1 with the weight
e^{-2t}:

    G(U, 0) = ∫ e^{-2t} (|U_tt|^2 + 2|U_t0|^2 + |U_00|^2 - 4|U_0|^2 + |{U != 0}|) dt d0

A boundary function u(theta) stands for its t-independent extension, so
G(u, 0) = (|u''|^2 - 4|u'|^2 + |spt u|) / 2. Every competitor below is
built from the gradient-orthonormal buckling modes b_{n, w}, which turns
most energies into small quadratic forms in the mode coefficients. Where a
closed form is used, tests compare it with a direct quadrature of the
sampled competitor.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.special import polygamma

from .angular_modes import (
    AngularFunction,
    T1,
    TWO_PI,
    L2_BOUND_CONSTANT,
    buckling_mode,
    decompose_on_support,
    gram_matrix,
    mode_index,
    reference_eigenvalue,
    reference_l2_norm_sq,
)
from .errors import ConstructionError, DomainError, NumericalError, PreconditionError
from .quadrature import exp_weight_rule, gauss_legendre
from .weiss_energy import CylinderField

T_QUAD = 40.0
# 256 panels x 16 nodes on [0, 40].
T_PANELS = 256

# --- decay profiles -----------------------------------------------------------------


@dataclass(frozen=True)
class DecayProfile:
    """Function of t >= 0 given with its first two derivatives.

    ``support_end`` is a time beyond which f is constant (zero when
    ``compact_support``); ``inf`` when no such time is known.
    """

    fn: Callable
    f0: float
    fp0: float
    compact_support: bool = False
    support_end: float = np.inf
    breaks: tuple = ()
    name: str = ""
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v0, d0 = float(self.fn(np.array([0.0]), 0)[0]), float(self.fn(np.array([0.0]), 1)[0])
        if abs(v0 - self.f0) > 1e-12 * max(1.0, abs(v0)) or abs(d0 - self.fp0) > 1e-12 * max(1.0, abs(d0)):
            raise ConstructionError(f"profile {self.name!r}: stored f(0), f'(0) disagree with the evaluator")

    def __call__(self, t, m=0):
        if m not in (0, 1, 2):
            raise PreconditionError("derivative order must be 0..2")
        return self.fn(np.asarray(t, dtype=float), m)

    def __mul__(self, other):
        if not isinstance(other, DecayProfile):
            return NotImplemented
        f, g = self, other

        def fn(t, m=0):
            if m == 0:
                return f(t) * g(t)
            if m == 1:
                return f(t, 1) * g(t) + f(t) * g(t, 1)
            return f(t, 2) * g(t) + 2 * f(t, 1) * g(t, 1) + f(t) * g(t, 2)

        compact = f.compact_support or g.compact_support
        ends = [p.support_end for p in (f, g) if p.compact_support]
        end = min(ends) if ends else max(f.support_end, g.support_end)
        return DecayProfile(
            fn,
            f.f0 * g.f0,
            f.fp0 * g.f0 + f.f0 * g.fp0,
            compact,
            end,
            tuple(sorted(set(f.breaks) | set(g.breaks))),
            f"{f.name}*{g.name}",
        )


def constant_profile(value=1.0):
    def fn(t, m=0):
        return np.full_like(t, float(value)) if m == 0 else np.zeros_like(t)

    return DecayProfile(fn, float(value), 0.0, value == 0, 0.0, (), f"const({value:g})")


def smoothstep_cutoff(x, m=0):
    """C^2 cutoff: 1 on (-inf, -1], 0 on [0, inf), quintic in between."""
    y = np.clip(np.asarray(x, dtype=float) + 1.0, 0.0, 1.0)
    inside = (y > 0) & (y < 1)
    if m == 0:
        return 1.0 - (10 * y**3 - 15 * y**4 + 6 * y**5)
    if m == 1:
        return np.where(inside, -30 * y**2 * (1 - y) ** 2, 0.0)
    return np.where(inside, -60 * y * (1 - y) * (1 - 2 * y), 0.0)


def truncated(profile, T):
    """chi(t - T) f(t): agrees with f on [0, T-1] and vanishes from T on."""
    if T < 1:
        raise PreconditionError("truncation time must be >= 1")
    cut = DecayProfile(
        lambda t, m=0: smoothstep_cutoff(t - T, m), 1.0, 0.0, True, float(T), (T - 1.0, float(T)), f"cut({T:g})"
    )
    out = profile * cut
    return DecayProfile(out.fn, out.f0, out.fp0, True, float(T), out.breaks, f"{profile.name}|T={T:g}", dict(profile.params, T=T))


def _integration_rule(f):
    end = f.support_end if np.isfinite(f.support_end) else 0.0
    t_max = max(end, T_QUAD)
    return exp_weight_rule(t_max, T_PANELS, 16, breaks=f.breaks), t_max


def q_parts(f):
    """(∫e^{-2t} f''^2, ∫e^{-2t} f'^2, ∫e^{-2t} f^2) including the tail beyond the grid."""
    (t, w), t_max = _integration_rule(f)
    w = w * np.exp(-2 * t)
    parts = [float(np.sum(w * f(t, m) ** 2)) for m in (2, 1, 0)]
    if np.isfinite(f.support_end) and f.support_end <= t_max:
        # f is constant beyond support_end: only the f^2 term has a tail.
        parts[2] += float(f(np.array([t_max]))[0]) ** 2 * np.exp(-2 * t_max) / 2
    else:
        for i, m in enumerate((2, 1, 0)):
            parts[i] += quad(lambda s: np.exp(-2 * s) * float(f(np.array([s]), m)[0]) ** 2, t_max, np.inf)[0]
    return tuple(parts)


def Q_form(f, lam, C0):
    """Q_lambda(f) = ∫_0^inf e^{-2t} (C0 f''^2 + 2 f'^2 + lambda f^2) dt."""
    p2, p1, p0 = q_parts(f)
    return C0 * p2 + 2 * p1 + lam * p0


@dataclass(frozen=True)
class C0Estimate:
    """sup over the omega grid of sum_n ||b_{n, w}||^2."""

    value: float
    partial: float
    tail_estimate: float
    tail_bound: float
    omega: float
    n_max: int

    def __float__(self):
        return self.value


def _reference_norm_sum(n_max):
    return float(sum(reference_l2_norm_sq(n) for n in range(1, n_max + 1)))


def _reference_tail(n_max):
    """Asymptotic sum_{n > n_max} ||b_n||^2 on [0, pi].

    Odd n contribute 3/(n+1)^2 exactly; even n contribute (5/3)/mu_n with
    mu_n = (n+1)^2 - 8/pi^2 + O(n^-2), summed with the leading term.
    """
    n = n_max + 1
    # Odd n > n_max: n + 1 = 2k, k >= k0.
    k0 = (n + 1) // 2 if n % 2 == 1 else (n + 2) // 2
    odd = 0.75 * float(polygamma(1, k0))
    # Even n > n_max: n + 1 = 2k + 1 for k >= j0.
    j0 = n // 2 if n % 2 == 0 else (n + 1) // 2
    even = (5.0 / 3.0) * 0.25 * float(polygamma(1, j0 + 0.5))
    return odd + even


def compute_C0(omega_grid=None, n_max=64):
    """C0 = sup_w sum_n ||b_{n,w}||^2 from a partial sum plus a tail term.

    The partial sum is exact (closed-form L2 norms). ``value`` adds the
    asymptotic tail; ``tail_bound`` is the crude bound
    L2_BOUND_CONSTANT (w/pi)^2 sum_{n > n_max} 1/n^2.
    """
    if n_max < 32:
        raise PreconditionError("n_max must be at least 32")
    if omega_grid is None:
        omega_grid = np.linspace(0.25 * np.pi, TWO_PI, 8)
    omega_grid = np.asarray(omega_grid, dtype=float)
    if np.any(omega_grid <= 0) or np.any(omega_grid > TWO_PI + 1e-12):
        raise PreconditionError("omega grid must lie in (0, 2pi]")
    base = _reference_norm_sum(n_max)
    tail = _reference_tail(n_max)
    scale = (omega_grid / np.pi) ** 2
    best = int(np.argmax(scale))
    s = float(scale[best])
    return C0Estimate(
        value=s * (base + tail),
        partial=s * base,
        tail_estimate=s * tail,
        tail_bound=s * L2_BOUND_CONSTANT * float(polygamma(1, n_max + 1)),
        omega=float(omega_grid[best]),
        n_max=n_max,
    )


_C0_CACHE = {}


def default_C0():
    """C0 at w = 2pi (the sup, since ||b_{n,w}||^2 scales like w^2)."""
    if "v" not in _C0_CACHE:
        _C0_CACHE["v"] = compute_C0([TWO_PI], 64).value
    return _C0_CACHE["v"]


# --- the single-mode competitor --------------------------------------------------


def chi_eps(eps):
    """chi_eps(t) = 1 - 9 eps (1 - (1 + t) e^{-t})."""
    if not (0.0 < eps < 1.0 / 9.0):
        raise PreconditionError(f"eps={eps!r} must lie in (0, 1/9)")

    def fn(t, m=0):
        e = np.exp(-t)
        if m == 0:
            return 1.0 - 9 * eps * (1.0 - (1.0 + t) * e)
        if m == 1:
            return -9 * eps * t * e
        return -9 * eps * (1.0 - t) * e

    return DecayProfile(fn, 1.0, 0.0, False, np.inf, (), f"chi_eps({eps:g})", {"eps": eps})


def chi_eps_derivative_bound(eps):
    """sup |chi'| + sup |chi''| = 9 eps (1/e + 1): t e^{-t} peaks at t = 1, |1 - t| e^{-t} at t = 0."""
    return 9 * eps * (np.exp(-1.0) + 1.0)


def f_delta(delta, Theta):
    """f(d) = ||phi_d''||^2 - 4||phi_d'||^2 + Theta d for the dilated mode phi_d."""
    d = np.asarray(delta, dtype=float)
    return Theta * d + 4 * ((1 + d) ** -3 - (1 + d) ** -1)


def F_eps(delta, eps, Theta):
    """F_eps(d) = ∫ e^{-2t} (f(d chi_eps) - (1 - eps) f(d)) dt."""
    chi = chi_eps(eps)
    t, w = exp_weight_rule(T_QUAD, T_PANELS, 16)
    w = w * np.exp(-2 * t)
    c = chi(t)
    out = []
    for d in np.atleast_1d(delta):
        # The integrand vanishes like e^{-2t} beyond the grid: chi is constant to e^{-40}.
        val = np.sum(w * (f_delta(d * c, Theta) - (1 - eps) * f_delta(d, Theta)))
        val += (f_delta(d * (1 - 9 * eps), Theta) - (1 - eps) * f_delta(d, Theta)) * np.exp(-2 * T_QUAD) / 2
        out.append(float(val))
    return out[0] if np.ndim(delta) == 0 else np.array(out)


def F_eps_second_derivative(eps):
    """Closed form -20 (1 - 45 eps / 16) eps."""
    return -20 * (1 - 45 * eps / 16) * eps


@dataclass
class CompetitorField:
    """A competitor U on the cylinder with its energy and provenance.

    ``evaluator(t, theta)`` returns the dict of U and its derivatives
    (keys U, Ut, Utt, Uth, Utth, Uthth) on broadcast arrays.
    """

    construction: str
    params: dict
    evaluator: Callable
    energy: float
    energy_u: float
    boundary_u: Callable = None
    boundary_v: Callable = None
    pieces: tuple = ()

    def __call__(self, t, theta):
        return self.evaluator(np.asarray(t, dtype=float), np.asarray(theta, dtype=float))

    def cylinder(self, T_max=8.0, n_t=257, n_theta=2048):
        """Sample U on [0, T_max] x S^1 as a CylinderField."""
        t = np.linspace(0.0, T_max, n_t)
        theta = np.arange(n_theta) * TWO_PI / n_theta
        d = self(t[:, None], theta[None, :])
        cyl = CylinderField(t, theta, d["U"], d["Ut"], d["Utt"], d["Uth"], d["Utth"], d["Uthth"], exact_support=True)
        norms = cyl.slab_h2_norms()
        if norms.size:
            cyl.growth_constant = float(np.max(norms / (np.arange(norms.size) + 1.0)))
        return cyl

    def boundary_residual(self, n_theta=4096):
        """max |U(0,.) - u| and max |U_t(0,.) - v| on a uniform grid."""
        theta = np.arange(n_theta) * TWO_PI / n_theta
        d = self(np.zeros(1)[:, None], theta[None, :])
        u = self.boundary_u(theta, 0) if self.boundary_u is not None else 0.0
        v = self.boundary_v(theta, 0) if self.boundary_v is not None else 0.0
        return float(np.max(np.abs(d["U"][0] - u))), float(np.max(np.abs(d["Ut"][0] - v)))

    def to_json(self):
        return {
            "construction": self.construction,
            "params": _jsonable(self.params),
            "energy_U": self.energy,
            "energy_u": self.energy_u,
            "pieces": [p.to_json() for p in self.pieces],
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _mode_energy(a, omega, Theta):
    """G(a b_{i, w}, 0) = (w + a^2 (mu_{i,w} - 4)) / 2."""
    mode = buckling_mode(mode_index(Theta), omega, grid=64)
    return 0.5 * (omega + a * a * (mode.mu - 4.0))


def _dilated_mode_derivs(mode, A, w, w1, w2, theta, Theta):
    """Derivatives of A b(theta / w(t)) given w, w', w'' broadcast against theta."""
    s = theta / w
    inside = (s >= 0) & (s <= Theta)
    b0, b1, b2 = (np.where(inside, mode(s, m), 0.0) for m in (0, 1, 2))
    return {
        "U": A * b0,
        "Uth": A * b1 / w,
        "Uthth": A * b2 / w**2,
        "Ut": -A * b1 * s * w1 / w,
        "Utth": -A * w1 / w**2 * (s * b2 + b1),
        "Utt": A * (w1**2 * (2 * s * b1 + s**2 * b2) / w**2 - w2 * s * b1 / w),
    }


def _single_mode_quadrature(mode, A, delta0, chi, Theta, n_s_panels=8):
    """G(U, 0) for U = A b(theta / (1 + delta0 chi(t))) by 2-D Gauss-Legendre in (t, s)."""
    t, wt = exp_weight_rule(T_QUAD, T_PANELS, 16)
    s, ws = gauss_legendre(0.0, Theta, 16, breaks=np.linspace(0.0, Theta, n_s_panels + 1)[1:-1])
    c = chi(t)
    w = (1 + delta0 * c)[:, None]
    w1 = (delta0 * chi(t, 1))[:, None]
    w2 = (delta0 * chi(t, 2))[:, None]
    d = _dilated_mode_derivs(mode, A, w, w1, w2, s[None, :] * w, Theta)
    dens = d["Utt"] ** 2 + 2 * d["Utth"] ** 2 + d["Uthth"] ** 2 - 4 * d["Uth"] ** 2
    # theta = w s, so d theta = w ds; the support has measure Theta w.
    inner = np.sum(dens * w * ws[None, :], axis=1) + Theta * w[:, 0]
    total = np.sum(wt * np.exp(-2 * t) * inner)
    # Beyond T_QUAD the competitor is a fixed mode up to O(e^{-T}) terms.
    w_inf = 1 + delta0 * (1 - 9 * chi.params["eps"])
    tail = 0.5 * np.exp(-2 * T_QUAD) * (A * A * (mode.mu / w_inf**3 - 4 / w_inf) + Theta * w_inf)
    return float(total + tail)


# Largest eps on the grid of calibrate_single_mode_eps with gap <= 0 for
# Theta in {pi, t1, 2pi} and |delta0| <= SINGLE_MODE_DELTA_MAX. At 0.03
# the Theta = 2pi case already fails.
SINGLE_MODE_EPS = 0.02
SINGLE_MODE_DELTA_MAX = 0.1


@dataclass
class SingleModeGap:
    """Energies of u = a b_{i, w} and of its competitor U."""

    G_u: float
    G_U: float
    gap: float
    eps_hat: float
    Theta: float
    delta0: float
    construction: str
    competitor: CompetitorField = None

    def __iter__(self):
        return iter((self.G_u, self.G_U, self.gap))

    @property
    def realized_eps(self):
        excess = self.G_u - 0.5 * self.Theta
        return (self.G_u - self.G_U) / excess if excess > 0 else np.inf


def _single_mode_competitor(Theta, a, omega, eps, offset=0.0, reflect=False):
    """Single-mode competitor with its energies and evaluator."""
    i = mode_index(Theta)
    delta0 = omega / Theta - 1.0
    if abs(delta0) > 0.1:
        raise PreconditionError(f"|omega/Theta - 1| = {abs(delta0):.3g} exceeds 0.1")
    ref = buckling_mode(i, Theta, grid=64)
    G_u = _mode_energy(a, omega, Theta)
    excess = G_u - 0.5 * Theta
    A = a * np.sqrt(1 + delta0)
    if excess <= 0 or a == 0:
        # The t-independent extension already satisfies the inequality.
        construction, chi = "constant", None
        G_U = G_u
    else:
        construction, chi = "dilation", chi_eps(eps)
        G_U = _single_mode_quadrature(ref, A, delta0, chi, Theta)

    def evaluator(t, theta):
        t, theta = np.broadcast_arrays(t, theta)
        x = np.mod(theta - offset, TWO_PI)
        sign = 1.0
        if reflect:
            x = np.mod(offset - theta, TWO_PI)
            sign = -1.0
        if chi is None:
            w, w1, w2 = np.ones_like(t), np.zeros_like(t), np.zeros_like(t)
        else:
            w, w1, w2 = 1 + delta0 * chi(t), delta0 * chi(t, 1), delta0 * chi(t, 2)
        d = _dilated_mode_derivs(ref, A, w, w1, w2, x, Theta)
        for key in ("Uth", "Utth"):
            d[key] = sign * d[key]
        return d

    def support_length(t):
        if chi is None:
            return np.full_like(np.asarray(t, float), omega)
        return Theta * (1 + delta0 * chi(t))

    comp = CompetitorField(
        "single-mode",
        {"Theta": Theta, "a": a, "omega": omega, "eps": eps, "delta0": delta0, "branch": construction},
        evaluator,
        G_U,
        G_u,
    )
    comp.support_length = support_length
    return comp, delta0, construction


def single_mode_energy_gap(Theta, a, omega, eps=SINGLE_MODE_EPS, check=True):
    """Energy of u = a b_{i(Theta), w} and of the dilation competitor.

    U(t, theta) = a sqrt(1 + d0) b_{i, Theta}(theta / (1 + d0 chi_eps(t)))
    with w = (1 + d0) Theta. When G(u, 0) <= Theta/2 the t-independent
    extension is returned instead. ``gap`` is
    G(U) - G(u) + eps (G(u) - Theta/2)_+, which must be <= 0.
    """
    comp, delta0, construction = _single_mode_competitor(Theta, a, omega, eps)
    G_u, G_U = comp.energy_u, comp.energy
    gap = G_U - G_u + eps * max(G_u - 0.5 * Theta, 0.0)
    if not np.isfinite(G_U):
        raise NumericalError("competitor quadrature returned a non-finite value")
    tol = 1e-12 * max(1.0, abs(G_u))
    if check and abs(delta0) <= SINGLE_MODE_DELTA_MAX and G_u > 0.5 * Theta and gap > tol:
        raise ConstructionError(f"single-mode gap {gap:.3e} > 0 at delta0={delta0:.3g}, eps={eps}")
    comp.boundary_u = lambda theta, m=0: a * buckling_mode(mode_index(Theta), omega, grid=64)(np.mod(theta, TWO_PI), m)
    return SingleModeGap(G_u, G_U, gap, eps, Theta, delta0, construction, comp)


def single_mode_oracle(Theta, a, omega, eps):
    """Semi-analytic G(U, 0) used to cross-check the 2-D quadrature.

    Splits the energy into the t-derivative part, written with four moments
    of b_{i, Theta}, and the dilation part written with f(d) in closed form:
    G_n(U) = a^2(1+d0) [I_t + ∫e^{-2t} f(d0 chi)] + (1 - a^2(1+d0)) Theta d0 ∫e^{-2t} chi.
    """
    mode = buckling_mode(mode_index(Theta), Theta, grid=64)
    d0 = omega / Theta - 1.0
    b1 = lambda s: mode(s, 1)
    b2 = lambda s: mode(s, 2)
    opts = dict(limit=200, epsabs=1e-14, epsrel=1e-13)
    M1 = quad(lambda s: (s * b2(s) + b1(s)) ** 2, 0, Theta, **opts)[0]
    M2 = quad(lambda s: (2 * s * b1(s) + s * s * b2(s)) ** 2, 0, Theta, **opts)[0]
    M3 = quad(lambda s: (2 * s * b1(s) + s * s * b2(s)) * s * b1(s), 0, Theta, **opts)[0]
    M4 = quad(lambda s: (s * b1(s)) ** 2, 0, Theta, **opts)[0]
    chi = chi_eps(eps)

    def c(t, m=0):
        return float(chi(np.array([t]), m)[0])

    def it(t):
        w, w1, w2 = 1 + d0 * c(t), d0 * c(t, 1), d0 * c(t, 2)
        tt = w1**4 / w**3 * M2 - 2 * w1**2 * w2 / w**2 * M3 + w2**2 / w * M4
        return np.exp(-2 * t) * (tt + 2 * w1**2 / w**3 * M1)

    I_t = quad(it, 0, np.inf, **opts)[0]
    If = quad(lambda t: np.exp(-2 * t) * float(f_delta(d0 * c(t), Theta)), 0, np.inf, **opts)[0]
    Ichi = quad(lambda t: np.exp(-2 * t) * c(t), 0, np.inf, **opts)[0]
    k = a * a * (1 + d0)
    return 0.5 * Theta + k * (I_t + If) + (1 - k) * Theta * d0 * Ichi


def calibrate_single_mode_eps(eps_grid=(0.01, 0.02, 0.03, 0.04, 0.05), deltas=(-0.1, -0.05, -0.02, -0.01, -0.001)):
    """Largest eps on the grid with a non-positive gap for all openings and deltas.

    Only delta0 < 0 is scanned: for Theta < 8 and a^2 (1 + d0) = 1,
    G(u) - Theta/2 = f(d0)/2 has the sign of -d0 near 0, and the
    constant branch covers d0 > 0.
    """
    best = None
    for eps in sorted(eps_grid):
        ok = True
        for Theta in (np.pi, T1, TWO_PI):
            for d in deltas:
                r = single_mode_energy_gap(Theta, 1 / np.sqrt(1 + d), Theta * (1 + d), eps, check=False)
                ok &= r.gap <= 1e-12
        if ok:
            best = eps
    if best is None:
        raise ConstructionError("no eps on the grid satisfies the single-mode inequality")
    return best


# --- two sectors of opening close to pi -------------------------------------------------


def double_sector_competitor(a1, a2, omega1, omega2, beta, eps=SINGLE_MODE_EPS, origin=0.0, n_check=4001):
    """Stitch two single-mode competitors on sectors of opening close to pi.

    u = a1 b_{1,w1} on [0, w1] and a2 b_{1,w2} on [w1 + beta, w1 + beta + w2]
    (shifted by ``origin``). The first sector is anchored at its left end,
    the second, reflected, at its right end; when beta is the smaller of the
    two gaps the roles of the sectors are swapped.
    """
    gap_total = TWO_PI - omega1 - omega2
    if gap_total < -1e-12:
        raise PreconditionError("omega1 + omega2 exceeds 2pi")
    if not (-1e-12 <= beta <= gap_total + 1e-12):
        raise PreconditionError(f"beta={beta!r} outside [0, {gap_total:.6g}]")
    for om in (omega1, omega2):
        if abs(om - np.pi) > 0.1 * np.pi:
            raise PreconditionError(f"sector opening {om!r} is not within 0.1 pi of pi")
    sectors = [(a1, omega1, origin), (a2, omega2, origin + omega1 + beta)]
    beta_eff = beta
    if beta < 0.5 * gap_total:
        sectors.reverse()
        beta_eff = gap_total - beta
    (af, wf, of), (as_, ws, os_) = sectors
    anchor_right = of + wf + beta_eff + ws
    first, _, _ = _single_mode_competitor(np.pi, af, wf, eps, offset=of)
    second, _, _ = _single_mode_competitor(np.pi, as_, ws, eps, offset=anchor_right, reflect=True)

    t = np.concatenate([np.linspace(0.0, 20.0, n_check), [T_QUAD]])
    room = (wf + beta_eff + ws) - (first.support_length(t) + second.support_length(t))
    if np.min(room) < -1e-12:
        raise ConstructionError(f"sector supports overlap (margin {np.min(room):.3e}); eps too large")

    def evaluator(tt, theta):
        d1, d2 = first(tt, theta), second(tt, theta)
        return {k: d1[k] + d2[k] for k in d1}

    G_u = first.energy_u + second.energy_u
    G_U = first.energy + second.energy
    gap = G_U - G_u + eps * max(G_u - np.pi, 0.0)
    if gap > 1e-12 * max(1.0, abs(G_u)):
        raise ConstructionError(f"double-sector gap {gap:.3e} > 0")

    def boundary_u(theta, m=0):
        theta = np.asarray(theta, float)
        out = 0.0
        for a, w, o in ((a1, omega1, origin), (a2, omega2, origin + omega1 + beta)):
            out = out + a * buckling_mode(1, w, grid=64)(np.mod(theta - o, TWO_PI), m)
        return out

    return CompetitorField(
        "double",
        {"a1": a1, "a2": a2, "omega1": omega1, "omega2": omega2, "beta": beta, "eps": eps,
         "swapped": beta < 0.5 * gap_total, "min_room": float(np.min(room)), "gap": gap},
        evaluator,
        G_U,
        G_u,
        boundary_u,
        None,
        (first, second),
    )


# --- profiles for the removal of higher and lower modes -----------------------------------


def _positive_candidate(eps):
    def fn(t, m=0):
        e = np.exp(-eps * t)
        if m == 0:
            return (1 + eps * t) * e
        if m == 1:
            return -(eps**2) * t * e
        return -(eps**2) * (1 - eps * t) * e

    return DecayProfile(fn, 1.0, 0.0, False, np.inf, (), f"pos({eps:g})", {"eps": eps})


def _negative_candidate(eps):
    def fn(t, m=0):
        e = np.exp(-eps * t)
        if m == 0:
            return eps * t + e
        if m == 1:
            return eps * (1 - e)
        return eps**2 * e

    return DecayProfile(fn, 1.0, 0.0, False, np.inf, (), f"neg({eps:g})", {"eps": eps})


POSITIVE_LAMBDA_GRID = (1.0, 2.0, 5.0, 10.0, 1e2, 1e4)
NEGATIVE_LAMBDA_GRID = (-1.0, -2.0, -4.0, -8.0)


@dataclass
class ProfileSearch:
    eps: float
    T: float
    eta: float
    profile: DecayProfile
    C0: float
    checks: dict

    def __iter__(self):
        return iter((self.eps, self.T, self.eta, self.profile))


def _q_lambda(parts, lam, C0):
    p2, p1, p0 = parts
    return C0 * p2 + 2 * p1 + lam * p0


def positive_profile_search(eps_grid=(0.05, 0.1, 0.15, 0.2), T_grid=(4.0, 6.0, 8.0, 10.0, 12.0), C0=None):
    """f_{eps,T}(t) = chi(t - T)(1 + eps t) e^{-eps t} with Q_lambda(f) <= (1 - eta) lambda/2.

    eta is the worst margin over POSITIVE_LAMBDA_GRID; the best (eps, T) is
    kept, ties broken lexicographically. Sub-estimates: (i) on the
    untruncated profile and the constant C of (ii).
    """
    C0 = default_C0() if C0 is None else float(C0)
    best = None
    for eps in sorted(eps_grid):
        base = _positive_candidate(eps)
        base_parts = q_parts(base)
        q1_base = _q_lambda(base_parts, 1.0, C0)
        est_i = q1_base <= (1 - eps**2 / 4) * 0.5
        if not est_i:
            continue
        for T in sorted(T_grid):
            f = truncated(base, T)
            parts = q_parts(f)
            eta = min(1 - _q_lambda(parts, lam, C0) / (0.5 * lam) for lam in POSITIVE_LAMBDA_GRID)
            if best is None or eta > best[0] + 1e-15:
                C_ii = (_q_lambda(parts, 1.0, C0) / q1_base - 1) * np.exp(2 * T)
                best = (eta, eps, T, f, parts, q1_base, C_ii)
    if best is None or best[0] <= 0:
        raise ConstructionError("no positive decay profile found on the search grid")
    eta, eps, T, f, parts, q1_base, C_ii = best
    checks = {
        "ratio_i": q1_base / 0.5,
        "bound_i": 1 - eps**2 / 4,
        "C_ii": C_ii,
        "large_lambda_ratio": 2 * parts[2],
        "f0": f.f0,
        "fp0": f.fp0,
    }
    return ProfileSearch(eps, T, float(eta), f, C0, checks)


def negative_profile_search(eps_grid=(0.05, 0.1, 0.2, 0.3), T_grid=(4.0, 6.0, 8.0, 10.0, 12.0), C0=None):
    """f_{eps,T}(t) = chi(t - T)(eps t + e^{-eps t}) with Q_lambda(f) <= lambda/2 for lambda <= -1.

    Returns the profile with the largest worst-case margin over
    NEGATIVE_LAMBDA_GRID; parameters and margins are in ``profile.params``.
    """
    C0 = default_C0() if C0 is None else float(C0)
    best = None
    for eps in sorted(eps_grid):
        base = _negative_candidate(eps)
        l2 = q_parts(base)[2]
        if l2 < 0.5 * (1 + eps**2 / 3):
            continue
        for T in sorted(T_grid):
            f = truncated(base, T)
            parts = q_parts(f)
            margin = min(0.5 * lam - _q_lambda(parts, lam, C0) for lam in NEGATIVE_LAMBDA_GRID)
            if best is None or margin > best[0] + 1e-15:
                best = (margin, eps, T, f, l2)
    if best is None or best[0] < 0:
        raise ConstructionError("no negative decay profile found on the search grid")
    margin, eps, T, f, l2 = best
    params = {"eps": eps, "T": T, "margin": float(margin), "C0": C0, "l2_untruncated": l2}
    return DecayProfile(f.fn, f.f0, f.fp0, True, T, f.breaks, f.name, params)


def removal_profile(n, omega):
    """f_{n,w}(t) = t exp(-mu_{n,w}^{1/3} t): f(0) = 0, f'(0) = 1."""
    k = buckling_mode(n, omega, grid=64).mu ** (1.0 / 3.0)

    def fn(t, m=0):
        e = np.exp(-k * t)
        if m == 0:
            return t * e
        if m == 1:
            return (1 - k * t) * e
        return (k * k * t - 2 * k) * e

    return DecayProfile(fn, 0.0, 1.0, False, np.inf, (), f"removal({n},{omega:.4g})", {"n": n, "omega": omega, "k": k})


CHI_OMEGA_MIN = 0.5 * np.pi
BUMP_CENTERS = (0.25, 0.5, 0.75)
# Overlapping bumps on [0.03, 0.97]; wider bumps keep ||chi_w||_{C^2} near
# 250 (radius 0.12 gives about 1500). chi_w = 1 on [0, 0.03].
BUMP_RADIUS = 0.22
# h(t) = 1 on [0, 0.05], 0 on [0.95, inf).
_H_LO, _H_HI = 0.05, 0.95


def _bump(t, c, m):
    x = (t - c) / BUMP_RADIUS
    inside = np.abs(x) < 1
    q = 1 - x * x
    if m == 0:
        val = q**3
    elif m == 1:
        val = -6 * x * q**2 / BUMP_RADIUS
    else:
        val = (-6 * q**2 + 24 * x * x * q) / BUMP_RADIUS**2
    return np.where(inside, val, 0.0)


def _h_cut(t, m):
    L = _H_HI - _H_LO
    return smoothstep_cutoff((t - _H_HI) / L, m) / L**m


def _chi_breaks():
    edges = {_H_LO, _H_HI}
    for c in BUMP_CENTERS:
        edges |= {c - BUMP_RADIUS, c + BUMP_RADIUS}
    return tuple(sorted(edges))


def _unit_rule():
    return gauss_legendre(0.0, 1.0, 20, breaks=_chi_breaks())


def chi_omega(omega):
    """Cutoff chi_w = h - sum a_m sigma_m orthogonal to t e^{-(2 + mu_{n,w}^{1/3}) t}, n = 1, 2, 3.

    For w < pi/2 the cutoff at w = pi/2 is returned.
    """
    if not (0 < omega <= TWO_PI + 1e-12):
        raise PreconditionError(f"omega={omega!r} must lie in (0, 2pi]")
    w_eff = max(omega, CHI_OMEGA_MIN)
    t, wq = _unit_rule()
    ks = [buckling_mode(n, w_eff, grid=64).mu ** (1.0 / 3.0) for n in (1, 2, 3)]
    g = np.array([t * np.exp(-(2 + k) * t) for k in ks])
    M = np.array([[np.sum(wq * g[n] * _bump(t, c, 0)) for c in BUMP_CENTERS] for n in range(3)])
    rhs = np.array([np.sum(wq * g[n] * _h_cut(t, 0)) for n in range(3)])
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > 1e12:
        raise ConstructionError(f"bump system is singular (cond={cond:.3g})")
    coef = np.linalg.solve(M, rhs)

    def fn(tt, m=0):
        out = _h_cut(tt, m)
        for a, c in zip(coef, BUMP_CENTERS):
            out = out - a * _bump(tt, c, m)
        return out

    return DecayProfile(
        fn, 1.0, 0.0, True, 1.0, _chi_breaks(), f"chi_omega({w_eff:.4g})",
        {"omega": omega, "omega_eff": w_eff, "coefficients": coef.tolist(), "k": ks, "cond": cond},
    )


def chi_omega_residuals(omega):
    """∫ t e^{-(2 + mu_{n,w}^{1/3}) t} chi_w dt for n = 1, 2, 3 by adaptive quadrature."""
    chi = chi_omega(omega)
    ks = chi.params["k"]
    pts = list(_chi_breaks())
    return np.array([
        quad(lambda s: s * np.exp(-(2 + k) * s) * float(chi(np.array([s]))[0]), 0.0, 1.0, points=pts, limit=200, epsabs=1e-15, epsrel=1e-13)[0]
        for k in ks
    ])


def c2_norm(profile, t_max=1.0, n=4001):
    t = np.linspace(0.0, t_max, n)
    return float(max(np.max(np.abs(profile(t, m))) for m in (0, 1, 2)))


# --- removal of the time derivative ---------------------------------------------------------


def _gradient_coefficients(f, omega, n_max, offset=0.0):
    """<f', b'_{n,w}> on [offset, offset + w] for n <= n_max."""
    x, w = gauss_legendre(0.0, omega, 16, breaks=np.linspace(0.0, omega, 2 * n_max + 9)[1:-1])
    df = f(offset + x, 1)
    return np.array([np.sum(w * df * buckling_mode(n, omega, grid=64)(x, 1)) for n in range(1, n_max + 1)])


def _opening_for(omega):
    for Theta in (np.pi, T1, TWO_PI):
        if abs(omega - Theta) <= 0.1 * Theta:
            return Theta
    return None


def _removal_matrices(omega, n_max):
    """t-integrals over [0, 1] for chi_w f_{n,w}, n <= n_max."""
    chi = chi_omega(omega)
    t, wq = _unit_rule()
    wq = wq * np.exp(-2 * t)
    F = np.empty((3, n_max, t.size))
    for n in range(1, n_max + 1):
        prof = chi * removal_profile(n, omega)
        for m in range(3):
            F[m, n - 1] = prof(t, m)
    mu = np.array([buckling_mode(n, omega, grid=64).mu for n in range(1, n_max + 1)])
    cross = 2 * (mu - 4) * (F[0] @ wq)
    diag = (2 * F[1] ** 2 + (mu - 4)[:, None] * F[0] ** 2) @ wq
    second = (F[2] * wq) @ F[2].T
    return chi, mu, cross, diag, second


@dataclass
class RemovalGap:
    bound_general: float
    bound_improved: float
    actual: float
    constants: dict
    competitor: CompetitorField = None

    def __iter__(self):
        return iter((self.bound_general, self.bound_improved, self.actual))


_PAIRS = {"U": (0, 0), "Uth": (0, 1), "Uthth": (0, 2), "Ut": (1, 0), "Utt": (2, 0), "Utth": (1, 1)}


def _separable_sum(t, x, terms):
    """sum_k f_k(t) b_k(x) and its derivatives, for terms (time_fn, space_fn).

    Each fn maps distinct sample values to a (3, n) array of derivatives
    0..2. On a tensor grid the sum is a matrix product.
    """
    if not terms:
        return {key: np.zeros(t.shape) for key in _PAIRS}
    tu, ti = np.unique(t, return_inverse=True)
    xu, xi = np.unique(x, return_inverse=True)
    ti, xi = ti.reshape(t.shape), xi.reshape(t.shape)
    F = np.array([tf(tu) for tf, _ in terms])
    B = np.array([sf(xu) for _, sf in terms])
    grid = t.ndim == 2 and np.all(ti == ti[:, :1]) and np.all(xi == xi[:1, :])
    out = {}
    for key, (i, j) in _PAIRS.items():
        if grid:
            out[key] = F[:, i, ti[:, 0]].T @ B[:, j, xi[0, :]]
        else:
            out[key] = np.einsum("kn,kn->n", F[:, i, ti.ravel()], B[:, j, xi.ravel()]).reshape(t.shape)
    return out


def _removal_piece(u, v, omega, n_max, offset=0.0):
    """Energy change of the removal competitor on one support component."""
    u_n = _gradient_coefficients(u, omega, n_max, offset)
    v_n = _gradient_coefficients(v, omega, n_max, offset) if v is not None else np.zeros(n_max)
    chi, mu, cross, diag, second = _removal_matrices(omega, n_max)
    gram = gram_matrix(omega, n_max)
    quad_form = np.diag(diag) + second * gram
    actual = float(np.sum(cross * u_n * v_n) + v_n @ quad_form @ v_n)
    return u_n, v_n, chi, mu, cross, quad_form, actual


def derivative_removal_gap(u, v, omega, n_max=32):
    """G(U, 0) - G(u, 0) for U = u + chi_w(t) sum f_{n,w}(t) v_n b_{n,w}, with the two bounds.

    u and v are callables f(theta, m) supported in [0, w]. The constant in
    each bound is read off the truncated quadratic forms: the cross term is
    bounded by C_cross ||u''_rest|| ||v'|| (Cauchy-Schwarz on
    mu^{1/2}|u_n v_n|), the v-v term by its largest eigenvalue times
    ||v'||^2. Returns (bound_general, bound_improved, actual); the improved
    bound is nan when w is not within 10% of an admissible opening.
    """
    if not (0 < omega <= TWO_PI + 1e-12):
        raise PreconditionError(f"omega={omega!r} must lie in (0, 2pi]")
    theta = np.linspace(0.0, TWO_PI, 8193)[:-1]
    outside = theta > omega + 1e-12
    uu = u(theta, 0)
    scale = max(1.0, float(np.max(np.abs(uu))))
    if np.any(np.abs(uu[outside]) > 1e-10 * scale):
        raise DomainError("u is not supported in [0, omega]")
    if abs(float(u(np.array([0.0]), 1)[0])) > 1e-6 * scale or abs(float(u(np.array([omega]), 1)[0])) > 1e-6 * scale:
        raise DomainError("u is not clamped at the endpoints")
    if v is not None and np.any(np.abs(v(theta, 0)[outside]) > 1e-10 * scale):
        raise DomainError("{v != 0} is not inside the support of u")
    u_n, v_n, chi, mu, cross, quad_form, actual = _removal_piece(u, v, omega, n_max)
    C_sq = float(max(np.max(np.linalg.eigvalsh(0.5 * (quad_form + quad_form.T))), 0.0))
    v_norm = float(np.sqrt(np.sum(v_n**2)))
    ratio = np.abs(cross) / np.sqrt(mu)
    C_gen = max(float(np.max(ratio)), C_sq)
    bound_general = C_gen * (float(np.sqrt(np.sum(mu * u_n**2))) * v_norm + v_norm**2)
    Theta = _opening_for(omega)
    if Theta is not None:
        i = mode_index(Theta)
        rest = np.arange(1, n_max + 1) > i
        C_imp = max(float(np.max(ratio[rest])), C_sq)
        bound_improved = C_imp * (float(np.sqrt(np.sum(mu[rest] * u_n[rest] ** 2))) * v_norm + v_norm**2)
    else:
        C_imp, bound_improved = np.nan, np.nan
    tol = 1e-12 * max(1.0, abs(actual))
    if actual > bound_general + tol or (Theta is not None and actual > bound_improved + tol):
        raise NumericalError("removal competitor exceeds its bound")
    modes = [buckling_mode(n, omega, grid=64) for n in range(1, n_max + 1)]
    profs = [chi * removal_profile(n, omega) for n in range(1, n_max + 1)]

    keep = np.abs(v_n) > 1e-14 * max(1.0, float(np.max(np.abs(v_n))))
    terms = [
        (lambda z, f=profs[k], c=v_n[k]: c * np.array([f(z, m) for m in range(3)]),
         lambda z, b=modes[k]: np.array([b(z, m) for m in range(3)]))
        for k in np.flatnonzero(keep)
    ]

    def evaluator(t, th):
        t, th = np.broadcast_arrays(np.asarray(t, float), np.asarray(th, float))
        x = np.mod(th, TWO_PI)
        out = _separable_sum(t, x, terms)
        for key, m in (("U", 0), ("Uth", 1), ("Uthth", 2)):
            out[key] = out[key] + u(x, m)
        return out

    x, w = gauss_legendre(0.0, omega, 16, breaks=np.linspace(0.0, omega, 65)[1:-1])
    G_u = 0.5 * (omega + float(np.sum(w * (u(x, 2) ** 2 - 4 * u(x, 1) ** 2))))
    comp = CompetitorField(
        "derivative-removal", {"omega": omega, "n_max": n_max, "Theta": Theta}, evaluator, G_u + actual, G_u, u, v
    )
    consts = {"C_general": C_gen, "C_improved": C_imp, "C_cross": float(np.max(ratio)), "C_sq": C_sq,
              "cross_terms_low": cross[:3].tolist()}
    return RemovalGap(bound_general, bound_improved, actual, consts, comp)


# --- comparison with the biharmonic extension ---------------------------------------------


@dataclass
class BiharmonicComparison:
    n: np.ndarray
    left_terms: np.ndarray
    right_terms: np.ndarray
    bound_terms: np.ndarray
    lhs: float
    rhs_equal: float
    final_bound: float

    @property
    def per_term_holds(self):
        return bool(np.all(self.left_terms <= self.bound_terms + 1e-12 * (1 + np.abs(self.bound_terms))))

    @property
    def holds(self):
        return bool(self.lhs <= self.final_bound + 1e-12 * (1 + abs(self.final_bound)))

    def ratio(self, n):
        k = int(np.flatnonzero(self.n == n)[0])
        return self.left_terms[k] / self.right_terms[k]

    def to_json(self):
        return _jsonable({
            "n": self.n, "left_terms": self.left_terms, "right_terms": self.right_terms,
            "bound_terms": self.bound_terms, "lhs": self.lhs, "rhs_equal": self.rhs_equal,
            "final_bound": self.final_bound, "holds": self.holds, "per_term_holds": self.per_term_holds,
        })


def biharmonic_comparison(x, y):
    """Compare G(v, 0) - pi for the biharmonic extension with G(v(0, .), 0) - pi.

    x_n, y_n are the Fourier coefficients of v(0, .) and of d_t v(0, .),
    indexed by n in [-N, N]. ``lhs`` is pi sum of the left terms (an upper
    bound for G(v, 0) - pi), ``rhs_equal`` is G(v(0,.), 0) - pi, and
    ``final_bound`` is rhs - 0.1 rhs_+ + 6||v_t0||^2 - 2||v_t||^2.
    """
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if x.shape != y.shape or x.ndim != 1 or x.size % 2 != 1:
        raise PreconditionError("x and y must be arrays of equal odd length indexed by n in [-N, N]")
    N = x.size // 2
    n = np.arange(-N, N + 1)
    k = np.abs(n).astype(float)
    xx, yy, xy = np.abs(x) ** 2, np.abs(y) ** 2, np.real(np.conj(x) * y)
    left = 4 * n**2 * (k - 2) * xx + 4 * k * (k - 2) * xy + 4 * (k - 1) * yy
    right = n**2 * (n**2 - 4.0) * xx
    factor = np.where(k == 1, 1.0, 0.9)
    bound = factor * right + (12 * k - 4) * yy
    lhs = np.pi * float(np.sum(left))
    R = np.pi * float(np.sum(right))
    dtheta_t = 2 * np.pi * float(np.sum(n**2 * yy))
    d_t = 2 * np.pi * float(np.sum(yy))
    final = R - 0.1 * max(R, 0.0) + 6 * dtheta_t - 2 * d_t
    return BiharmonicComparison(n, left, right, bound, lhs, R, final)


def fourier_from_goursat(coeffs):
    """x_n = c_n[v(0,.)], y_n = c_n[d_t v(0,.)] for the field sum (a_n r^{|n|+2} + b_n r^{|n|}) e^{in0}."""
    k = np.abs(coeffs.n)
    x = coeffs.a + coeffs.b
    # d_t v = 2u - r u_r at r = 1.
    y = 2 * x - ((k + 2) * coeffs.a + k * coeffs.b)
    return x, y


# --- the full competitor and the epiperimetric report ---------------------------------------

SUPPORT_C_FACTOR = 0.05


def _is_on(u, x, tol):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return (np.abs(u(x, 0)) > tol) | (np.abs(u(x, 1)) > tol)


def detect_support(u, n=1 << 14, rel_tol=1e-10):
    """Support intervals (lo, hi) of u, with endpoints refined by bisection.

    A point is in the support when |u| or |u'| exceeds rel_tol times the
    sample maximum. Intervals are returned with 0 <= lo < 2pi and
    hi - lo <= 2pi.
    """
    theta = np.arange(n) * TWO_PI / n
    vals = np.maximum(np.abs(u(theta, 0)), np.abs(u(theta, 1)))
    tol = rel_tol * max(1.0, float(np.max(vals)))
    on = vals > tol
    if on.all():
        return [(0.0, TWO_PI)]
    if not on.any():
        return []
    h = TWO_PI / n
    # Rotate so that index 0 is off; runs then never wrap.
    start = int(np.flatnonzero(~on)[0])
    idx = (np.arange(n) + start) % n
    runs, cur = [], None
    for j, i in enumerate(idx):
        if on[i] and cur is None:
            cur = j
        elif not on[i] and cur is not None:
            runs.append((cur, j - 1))
            cur = None
    if cur is not None:
        runs.append((cur, n - 1))

    def refine(a, b):
        # a is off, b is on (or vice versa); returns the transition point.
        fa = bool(_is_on(u, a, tol)[0])
        for _ in range(60):
            mid = 0.5 * (a + b)
            if bool(_is_on(u, mid, tol)[0]) == fa:
                a = mid
            else:
                b = mid
        return 0.5 * (a + b)

    out = []
    for j0, j1 in runs:
        lo_on = (start + j0) * h
        hi_on = (start + j1) * h
        lo = refine(lo_on - h, lo_on)
        hi = refine(hi_on + h, hi_on)
        lo_mod = np.mod(lo, TWO_PI)
        out.append((float(lo_mod), float(lo_mod + (hi - lo))))
    return out


def check_support_condition(support, Theta, c):
    """Raise DomainError unless the support satisfies the window around Theta."""
    grid = np.linspace(0.0, TWO_PI, 20001)[:-1]

    def inside(x):
        res = np.zeros(x.shape, dtype=bool)
        for lo, hi in support:
            rel = np.mod(x - lo, TWO_PI)
            res |= (rel > 0) & (rel < hi - lo) if hi - lo < TWO_PI else True
        return res

    if Theta in (np.pi, T1):
        core = grid[(grid > c) & (grid < Theta - c)]
        if not inside(core).all():
            raise DomainError(f"support does not contain ({c:.4g}, {Theta - c:.4g})")
        for lo, hi in support:
            for x in (lo, hi):
                xm = np.mod(x, TWO_PI)
                if not (xm <= Theta + c + 1e-12 or xm >= TWO_PI - c - 1e-12):
                    raise DomainError(f"support interval ({lo:.4g}, {hi:.4g}) leaves (-{c:.4g}, {Theta + c:.4g})")
    else:
        core = grid[((grid > c) & (grid < np.pi - c)) | ((grid > np.pi + c) & (grid < TWO_PI - c))]
        if not inside(core).all():
            raise DomainError(f"support does not contain ({c:.4g}, pi-{c:.4g}) and (pi+{c:.4g}, 2pi-{c:.4g})")
        if inside(np.array([0.0]))[0] or sum(hi - lo for lo, hi in support) >= TWO_PI - 1e-12:
            bad = next(((lo, hi) for lo, hi in support if inside(np.array([0.0]))[0]), support[0])
            raise DomainError(f"support interval ({bad[0]:.4g}, {bad[1]:.4g}) meets theta = 0")


@dataclass
class EpiperimetricReport:
    Theta: float
    case: str
    c: float
    support: list
    G_u: float
    G_u_modal: float
    G_U: float
    delta_removal: float
    delta_modes: float
    final_energy_u: float
    final_energy_U: float
    constants: dict
    checks: dict
    W_at_1: float
    W_at_e_inv: float
    eta_empirical: float
    decay_holds: bool
    hypothesis_met: bool
    competitor: CompetitorField = None

    def to_json(self):
        data = {k: getattr(self, k) for k in (
            "Theta", "case", "c", "support", "G_u", "G_u_modal", "G_U", "delta_removal", "delta_modes",
            "final_energy_u", "final_energy_U", "constants", "checks", "W_at_1", "W_at_e_inv",
            "eta_empirical", "decay_holds", "hypothesis_met")}
        data["construction"] = "stitched"
        data["pieces"] = ["derivative-removal", "higher-mode", "double" if self.case == "double" else "single-mode"]
        return _jsonable(data)


_PROFILE_CACHE = {}


def _deletion_profiles():
    if "g" not in _PROFILE_CACHE:
        pos = positive_profile_search()
        neg = negative_profile_search()
        _PROFILE_CACHE["g"] = (pos, neg)
    return _PROFILE_CACHE["g"]


def _profile_time_integrals(profiles, T):
    """Matrices over [0, T] of ∫e^{-2t} p_i'' p_j'', and vectors ∫e^{-2t} p_i'^2, ∫e^{-2t} p_i^2."""
    breaks = sorted({b for p in profiles for b in p.breaks if 0 < b < T})
    t, w = gauss_legendre(0.0, T, 16, breaks=sorted(set(breaks) | set(np.linspace(0.0, T, 4 * int(np.ceil(T)) + 1)[1:-1])))
    w = w * np.exp(-2 * t)
    vals = [[p(t, m) for m in range(3)] for p in profiles]
    P = np.array([[np.sum(w * a[2] * b[2]) for b in vals] for a in vals])
    D = np.array([np.sum(w * a[1] ** 2) for a in vals])
    B = np.array([np.sum(w * a[0] ** 2) for a in vals])
    return P, D, B


def epiperimetric_report(boundary, Theta, W_values=None, n_max=32, c=None, support=None, eps=SINGLE_MODE_EPS):
    """Build the stitched competitor from boundary data (u, v) and report the energy decay.

    Pipeline: derivative removal on t in [0, 1] per support component, then
    (shifted by 1) higher modes damped by the positive profile g and lower
    modes by the negative profile h until time T, then the single-mode or
    double-sector competitor for the kept mode(s). With W values
    (W(u, 1), W(u, 1/e)) the decay W(e^{-1}) - Theta/2 <= (1 - eta)(W(1) - Theta/2)
    is evaluated with the empirical eta of the competitor; without them the
    competitor energies stand in for both sides.
    """
    u, v = boundary if isinstance(boundary, tuple) else (boundary, None)
    i = mode_index(Theta)
    c = SUPPORT_C_FACTOR * Theta if c is None else float(c)
    support = detect_support(u) if support is None else [tuple(map(float, iv)) for iv in support]
    if not support:
        raise DomainError("u vanishes identically")
    check_support_condition(support, Theta, c)
    comps = sorted(support, key=lambda iv: (-(iv[1] - iv[0]), iv[0]))
    if Theta == TWO_PI and len(comps) >= 2 and comps[1][1] - comps[1][0] > 2 * c:
        case, kept = "double", {(0, 1), (1, 1)}
    else:
        case, kept = "single", {(0, i)}
    for k, n in kept:
        om = comps[k][1] - comps[k][0]
        ref = np.pi if case == "double" else Theta
        if abs(om - ref) > 0.1 * ref:
            raise DomainError(f"component ({comps[k][0]:.4g}, {comps[k][1]:.4g}) is outside the single-mode window at c={c:.4g}")

    pos, neg = _deletion_profiles()
    T = max(pos.T, neg.params["T"])
    g, h = pos.profile, neg
    one = constant_profile(1.0)
    P, D, B = _profile_time_integrals([g, h, one], T)
    S_T = 0.5 * (1 - np.exp(-2 * T))

    G_u_modal = 0.0
    delta_A = 0.0
    delta_B = 0.0
    removal_bounds = 0.0
    pieces = []
    for k, (lo, hi) in enumerate(comps):
        om = hi - lo
        u_n, v_n, chi, mu, cross, qf, actual = _removal_piece(u, v, om, n_max, offset=lo)
        delta_A += actual
        v_norm = float(np.sqrt(np.sum(v_n**2)))
        C_sq = float(max(np.max(np.linalg.eigvalsh(0.5 * (qf + qf.T))), 0.0))
        C_cross = float(np.max(np.abs(cross) / np.sqrt(mu)))
        removal_bounds += max(C_sq, C_cross) * (float(np.sqrt(np.sum(mu * u_n**2))) * v_norm + v_norm**2)
        cls = np.empty(n_max, dtype=int)
        for n in range(1, n_max + 1):
            if (k, n) in kept:
                cls[n - 1] = 2
            elif mu[n - 1] >= 5:
                cls[n - 1] = 0
            elif mu[n - 1] <= 3:
                cls[n - 1] = 1
            else:
                raise ConstructionError(f"mode {n} on component {k} has mu = {mu[n - 1]:.4g} in (3, 5)")
        gram = gram_matrix(om, n_max)
        G_u_modal += 0.5 * om + 0.5 * float(np.sum((mu - 4) * u_n**2))
        e_tilde = (
            float(u_n @ (P[np.ix_(cls, cls)] * gram) @ u_n)
            + float(np.sum((2 * D[cls] + (mu - 4) * B[cls]) * u_n**2))
            + om * S_T
        )
        pieces.append({"interval": (lo, hi), "u_n": u_n, "v_n": v_n, "classes": cls, "mu": mu, "chi": chi, "e_tilde": e_tilde})

    if case == "single":
        a0 = pieces[0]["u_n"][i - 1]
        lo0, hi0 = comps[0]
        final = single_mode_energy_gap(Theta, a0, hi0 - lo0, eps)
        final_comp_u, final_comp_U = final.G_u, final.G_U
        # Same competitor, placed at the component offset.
        final_comp, _, _ = _single_mode_competitor(Theta, a0, hi0 - lo0, eps, offset=lo0)
    else:
        (lo0, hi0), (lo1, hi1) = comps[0], comps[1]
        beta = float(np.mod(lo1 - hi0, TWO_PI))
        final_comp = double_sector_competitor(pieces[0]["u_n"][0], pieces[1]["u_n"][0], hi0 - lo0, hi1 - lo1, beta, eps, origin=lo0)
        final_comp_u, final_comp_U = final_comp.energy_u, final_comp.energy
    G_hat = sum(p["e_tilde"] for p in pieces) + np.exp(-2 * T) * final_comp_U
    delta_B = G_hat - G_u_modal

    x, w = gauss_legendre(0.0, TWO_PI, 16, breaks=sorted({b for iv in comps for b in iv if 0 < b < TWO_PI} | set(np.linspace(0, TWO_PI, 129)[1:-1])))
    meas = sum(hi - lo for lo, hi in comps)
    G_u = 0.5 * (meas + float(np.sum(w * (u(x, 2) ** 2 - 4 * u(x, 1) ** 2))))
    G_U = G_u + delta_A + np.exp(-2) * delta_B

    excess = G_u - 0.5 * Theta
    eps_bar = min(np.exp(-2 * T) * eps, np.exp(-2 * T), 0.5 * pos.eta)
    eps_decay = np.exp(-2) * eps_bar
    tol = 1e-10 * max(1.0, abs(G_u))
    checks = {
        "higher_mode_inequality": bool(delta_B <= -eps_bar * max(excess, 0.0) + tol),
        "competitor_inequality": bool(G_U <= G_u - eps_decay * max(excess, 0.0) + removal_bounds + tol),
        "modal_truncation": abs(G_u - G_u_modal),
        "removal_bound": removal_bounds,
    }
    hypothesis_met = True
    if W_values is None:
        W1, We = G_u, G_U
    else:
        W1, We = (float(x) for x in W_values)
        hypothesis_met = bool(W1 >= 0.5 * Theta - tol)
    if excess > tol and delta_A == 0:
        eta_emp = float(1 - (G_U - 0.5 * Theta) / excess)
    else:
        eta_emp = 0.0
    decay = bool(We - 0.5 * Theta <= (1 - eta_emp) * (W1 - 0.5 * Theta) + tol)
    constants = {
        "eps_single_mode": eps, "eta_positive": pos.eta, "eps_positive": pos.eps, "T_positive": pos.T,
        "eps_negative": neg.params["eps"], "T_negative": neg.params["T"], "T": T,
        "eps_bar": eps_bar, "eps_decay": eps_decay, "C0": pos.C0, "c": c, "n_max": n_max,
    }

    profiles = (g, h, one)
    terms = []
    for p, (lo, hi) in zip(pieces, comps):
        om = hi - lo
        scale = max(1.0, float(np.max(np.abs(p["u_n"]))), float(np.max(np.abs(p["v_n"]))))
        for n in range(1, n_max + 1):
            vn, un = p["v_n"][n - 1], p["u_n"][n - 1]
            cls = p["classes"][n - 1]
            use_v = abs(vn) > 1e-14 * scale
            use_u = abs(un) > 1e-14 * scale and cls != 2
            if not (use_v or use_u):
                continue
            rem = p["chi"] * removal_profile(n, om)
            prof = profiles[cls]

            def time_fn(z, vn=vn if use_v else 0.0, un=un if use_u else 0.0, rem=rem, prof=prof):
                early = z < 1
                zz, s_ = np.where(early, z, 1.0), np.clip(z - 1, 0.0, T)
                rows = []
                for m in range(3):
                    r = np.where(early, vn * rem(zz, m), 0.0) if vn else np.zeros_like(z)
                    if un:
                        r = r + np.where(early, 0.0, un * (prof(s_, m) - (1.0 if m == 0 else 0.0)))
                    rows.append(r)
                return np.array(rows)

            mode = buckling_mode(n, om, grid=64)
            terms.append((time_fn, lambda z, b=mode, lo=lo: np.array([b(np.mod(z - lo, TWO_PI), m) for m in range(3)])))

    def evaluator(t, theta):
        t, theta = np.broadcast_arrays(np.asarray(t, float), np.asarray(theta, float))
        x = np.mod(theta, TWO_PI)
        out = _separable_sum(t, x, terms)
        for key, m in (("U", 0), ("Uth", 1), ("Uthth", 2)):
            out[key] = out[key] + u(x, m)
        late = t >= 1 + T
        if np.any(late):
            # Replace the kept part by the final competitor; the rest is u minus all modes.
            d = final_comp(np.where(late, t - 1 - T, 0.0), theta)
            kept_d = {}
            for key, m in (("U", 0), ("Uth", 1), ("Uthth", 2)):
                kept_d[key] = sum(
                    pieces[k]["u_n"][n - 1] * buckling_mode(n, comps[k][1] - comps[k][0], grid=64)(np.mod(x - comps[k][0], TWO_PI), m)
                    for k, n in kept
                )
            for key in out:
                out[key] = np.where(late, out[key] - kept_d.get(key, 0.0) + d[key], out[key])
        return out

    comp = CompetitorField(
        "stitched", {"Theta": Theta, "case": case, "T": T}, evaluator, G_U, G_u, u, v,
        (final_comp,),
    )
    return EpiperimetricReport(
        Theta, case, c, [tuple(iv) for iv in comps], G_u, G_u_modal, G_U, delta_A, delta_B,
        final_comp_u, final_comp_U, constants, checks, W1, We, eta_emp, decay, hypothesis_met, comp,
    )
