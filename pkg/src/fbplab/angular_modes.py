"""Buckling eigenbasis on segments, the critical angle and homogeneous profiles.

The buckling problem on a segment [0, w] is b'''' = -mu b'' with clamped
ends. Modes are normalized so that the gradient inner product is the
identity. Everything here is closed form: eigenvalues come from a
bracketed scalar root find, modes are evaluated analytically together with
their first four derivatives.
"""

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NumericalError, PreconditionError
from .quadrature import gauss_legendre, simpson_uniform

TWO_PI = 2.0 * np.pi
# Empirical constant for ||b_{n,w}||^2 <= C / mu_{n,w}; the sup over all
# modes is 3 (odd modes reach it exactly), so 8 leaves a wide margin.
L2_BOUND_CONSTANT = 8.0
DEFAULT_SAMPLES = 4096


def _h(x):
    # Zero set of h on (0, inf) is {x : tan x = x}.
    return x * np.cos(x) - np.sin(x)


@dataclass(frozen=True)
class CriticalAngle:
    t1: float

    @property
    def residual(self):
        return abs(np.tan(self.t1) - self.t1)


@lru_cache(maxsize=None)
def _t1_cached(xtol):
    return brentq(_h, np.pi, 1.5 * np.pi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200)


def solve_t1(tol=1e-12):
    """Root of tan t = t in (pi, 2 pi).

    h(t) = t cos t - sin t changes sign on [pi, 3pi/2], which brackets the
    root. Near t1 the map t -> tan t - t has slope t1^2, so an abscissa
    tolerance of tol / 30 meets the residual tolerance.
    """
    if not tol > 0:
        raise PreconditionError("tol must be positive")
    xtol = max(tol / 30.0, 1e-15)
    return CriticalAngle(float(_t1_cached(xtol)))


T1 = solve_t1(1e-14).t1


def _check_omega(omega):
    if not (0.0 < omega <= TWO_PI + 1e-12):
        raise PreconditionError(f"omega={omega!r} must lie in (0, 2pi]")


def _check_n(n):
    if int(n) != n or n < 1:
        raise PreconditionError(f"mode index n={n!r} must be a positive integer")
    return int(n)


@lru_cache(maxsize=None)
def _even_root(n):
    # x = pi sqrt(mu) / 2 solves tan x = x in (n pi/2, (n+1) pi/2).
    lo, hi = 0.5 * n * np.pi, 0.5 * (n + 1) * np.pi
    if np.sign(_h(lo)) == np.sign(_h(hi)):
        raise NumericalError(f"bracket failure for even mode n={n}")
    return brentq(_h, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def reference_eigenvalue(n):
    """mu_n on the segment [0, pi]."""
    n = _check_n(n)
    if n % 2 == 1:
        return float((n + 1) ** 2)
    x = _even_root(n)
    return (2.0 * x / np.pi) ** 2


def buckling_eigenvalue(n, omega):
    """mu_{n, omega} = (pi / omega)^2 mu_n."""
    _check_omega(omega)
    return (np.pi / omega) ** 2 * reference_eigenvalue(n)


@lru_cache(maxsize=None)
def _even_data(n):
    """Slope, gradient norm and L2 norm of f = sin(s x) - beta x on [-pi/2, pi/2]."""
    s = np.sqrt(reference_eigenvalue(n))
    half = 0.5 * s * np.pi
    beta = 2.0 * np.sin(half) / np.pi
    grad2 = s * s * (0.5 * np.pi + np.sin(s * np.pi) / (2 * s)) - 4.0 * beta * np.sin(half) + beta * beta * np.pi
    x_sin = 2.0 * (np.sin(half) / s**2 - 0.5 * np.pi * np.cos(half) / s)
    l2 = (0.5 * np.pi - np.sin(s * np.pi) / (2 * s)) - 2.0 * beta * x_sin + beta * beta * np.pi**3 / 12.0
    # Sign chosen so that b''(0) > 0, matching the odd modes.
    sign = 1.0 if np.sin(half) > 0 else -1.0
    return s, beta, grad2, l2, sign


def _reference_mode(n, theta, m):
    """m-th derivative of b_n on [0, pi], zero outside."""
    theta = np.asarray(theta, dtype=float)
    inside = (theta >= 0.0) & (theta <= np.pi)
    if n % 2 == 1:
        k = n + 1
        amp = np.sqrt(2.0 / np.pi)
        if m == 0:
            out = amp * (1.0 - np.cos(k * theta)) / k
        else:
            out = amp * k ** (m - 1) * np.sin(k * theta + 0.5 * (m - 1) * np.pi)
    else:
        s, beta, grad2, _, sign = _even_data(n)
        x = theta - 0.5 * np.pi
        out = s**m * np.sin(s * x + 0.5 * m * np.pi)
        if m == 0:
            out = out - beta * x
        elif m == 1:
            out = out - beta
        out = sign * out / np.sqrt(grad2)
    return np.where(inside, out, 0.0)


def reference_l2_norm_sq(n):
    """||b_n||^2 on [0, pi] in closed form."""
    n = _check_n(n)
    if n % 2 == 1:
        return 3.0 / (n + 1) ** 2
    _, _, grad2, l2, _ = _even_data(n)
    return l2 / grad2


@dataclass(frozen=True)
class BucklingMode:
    """Gradient-normalized eigenpair (b_{n,w}, mu_{n,w}) on [0, w]."""

    omega: float
    n: int
    mu: float
    parity: str
    beta: float
    norm_check: float

    def __call__(self, theta, m=0):
        """m-th derivative (m <= 4) of b_{n,w}; zero outside [0, w]."""
        if m not in (0, 1, 2, 3, 4):
            raise PreconditionError("derivative order must be 0..4")
        scale = np.pi / self.omega
        return np.sqrt(self.omega / np.pi) * scale**m * _reference_mode(self.n, scale * np.asarray(theta, float), m)

    @property
    def l2_norm_sq(self):
        return (self.omega / np.pi) ** 2 * reference_l2_norm_sq(self.n)

    def samples(self, m=0, grid=DEFAULT_SAMPLES):
        theta = np.linspace(0.0, self.omega, grid + 1)
        return theta, self(theta, m)


def buckling_mode(n, omega, grid=DEFAULT_SAMPLES):
    """Closed-form mode b_{n, omega} with a quadrature check of its normalization."""
    _check_omega(omega)
    n = _check_n(n)
    parity = "odd" if n % 2 == 1 else "even"
    beta = _even_data(n)[1] if parity == "even" else 0.0
    mode = BucklingMode(omega, n, buckling_eigenvalue(n, omega), parity, beta, 0.0)
    if grid % 2:
        grid += 1
    _, db = mode.samples(1, grid)
    residual = abs(simpson_uniform(db * db, 0.0, omega) - 1.0)
    return BucklingMode(omega, n, mode.mu, parity, beta, float(residual))


def mode_index(Theta, tol=1e-8):
    """i(Theta): index of the mode with eigenvalue 4 at Theta in {pi, t1, 2pi}."""
    for value, idx in ((np.pi, 1), (T1, 2), (TWO_PI, 3)):
        if abs(Theta - value) <= tol:
            return idx
    raise PreconditionError(f"Theta={Theta!r} is not an admissible opening")


def _opening_function(w):
    return np.sin(w) * (w * np.cos(w) - np.sin(w))


def admissible_openings(tol=1e-10):
    """Openings w in (0, 2pi] with sin(w)(w cos w - sin w) = 0.

    The sine factor vanishes at pi and 2pi. The second factor h has
    h' = -w sin w, so h decreases on (0, pi) from h(0) = 0 and increases
    on (pi, 2pi); its single root there is t1.
    """
    if not tol > 0:
        raise PreconditionError("tol must be positive")
    return [float(np.pi), solve_t1(tol).t1, float(TWO_PI)]


def gram_matrix(omega, n_max, derivative=0, n_nodes=None):
    """Matrix of <b^{(m)}_{n,w}, b^{(m)}_{k,w}> for n, k <= n_max."""
    modes = [buckling_mode(n, omega, grid=64) for n in range(1, n_max + 1)]
    if n_nodes is None:
        n_nodes = 16
    x, w = gauss_legendre(0.0, omega, n_nodes, breaks=np.linspace(0.0, omega, 2 * n_max + 9)[1:-1])
    vals = np.array([mode(x, derivative) for mode in modes])
    return (vals * w) @ vals.T


# --- angular functions -------------------------------------------------------


class AngularFunction:
    """Real function on the circle with two weak derivatives.

    Values and first two derivatives are sampled on a uniform periodic grid
    of ``len(values)`` points. When a closed-form evaluator ``fn(theta, m)``
    is available it is kept and used for exact evaluation.
    """

    def __init__(self, values, d1=None, d2=None, fn=None):
        values = np.asarray(values, dtype=float)
        self.n = values.size
        self.theta = np.arange(self.n) * TWO_PI / self.n
        k = np.fft.rfftfreq(self.n, d=1.0 / self.n)
        if d1 is None:
            d1 = np.fft.irfft(1j * k * np.fft.rfft(values), n=self.n)
        if d2 is None:
            d2 = np.fft.irfft(-(k**2) * np.fft.rfft(values), n=self.n)
        self.values = values
        self.d1 = np.asarray(d1, dtype=float)
        self.d2 = np.asarray(d2, dtype=float)
        self.fn = fn

    @classmethod
    def from_callable(cls, fn, n=DEFAULT_SAMPLES):
        theta = np.arange(n) * TWO_PI / n
        return cls(fn(theta, 0), fn(theta, 1), fn(theta, 2), fn=fn)

    @classmethod
    def from_mode(cls, mode, offset=0.0, n=DEFAULT_SAMPLES):
        def fn(theta, m=0):
            return mode(np.mod(np.asarray(theta, float) - offset, TWO_PI), m)

        return cls.from_callable(fn, n)

    def __call__(self, theta, m=0):
        theta = np.asarray(theta, dtype=float)
        if self.fn is not None:
            return self.fn(np.mod(theta, TWO_PI), m)
        data = (self.values, self.d1, self.d2)[m]
        # Trigonometric interpolation of the sampled derivative.
        c = np.fft.rfft(data) / self.n
        k = np.arange(c.size)
        weights = np.full(c.size, 2.0)
        weights[0] = 1.0
        if self.n % 2 == 0:
            weights[-1] = 1.0
        phase = np.exp(1j * np.multiply.outer(theta, k))
        return np.real(phase @ (weights * c))

    def _combine(self, other, op):
        if isinstance(other, AngularFunction):
            fn = None
            if self.fn is not None and other.fn is not None:
                f, g = self.fn, other.fn

                def fn(theta, m=0):
                    return op(f(theta, m), g(theta, m))

            if fn is not None and self.n == other.n:
                return AngularFunction(op(self.values, other.values), op(self.d1, other.d1), op(self.d2, other.d2), fn)
            if self.n != other.n:
                raise PreconditionError("sample counts differ")
            return AngularFunction(op(self.values, other.values), op(self.d1, other.d1), op(self.d2, other.d2))
        return NotImplemented

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, scalar):
        scalar = float(scalar)
        fn = None
        if self.fn is not None:
            f = self.fn

            def fn(theta, m=0):
                return scalar * f(theta, m)

        return AngularFunction(scalar * self.values, scalar * self.d1, scalar * self.d2, fn)

    __rmul__ = __mul__


def zero_function(n=DEFAULT_SAMPLES):
    return AngularFunction.from_callable(lambda theta, m=0: np.zeros_like(np.asarray(theta, float)), n)


# --- decomposition on the support ---------------------------------------------


@dataclass(frozen=True)
class ComponentCoefficients:
    """Mode coefficients u_n^k = <f', b'_{n, w_k}(. - theta_k)> on one component."""

    theta0: float
    omega: float
    coeffs: np.ndarray

    @property
    def interval(self):
        return (self.theta0, self.theta0 + self.omega)


def sort_intervals(support):
    """Sort by decreasing length, ties broken by left endpoint."""
    items = [(float(lo), float(hi)) for lo, hi in support]
    for lo, hi in items:
        if not hi > lo:
            raise DomainError(f"empty or reversed interval ({lo}, {hi})")
    return sorted(items, key=lambda iv: (-(iv[1] - iv[0]), iv[0]))


def _outside_mask(theta, intervals):
    inside = np.zeros(theta.shape, dtype=bool)
    for lo, hi in intervals:
        rel = np.mod(theta - lo, TWO_PI)
        width = hi - lo
        inside |= (rel > 0) & (rel < width) if width < TWO_PI else np.ones_like(inside)
    return ~inside


def decompose_on_support(f, support, n_max=64, tol=1e-12, check_samples=8192):
    """Coefficients of f in the buckling basis of each support interval.

    Intervals are (lo, hi) with hi - lo <= 2pi; angles wrap modulo 2pi.
    Coefficients are computed as <f', b'_n> with composite Gauss-Legendre.
    """
    intervals = sort_intervals(support)
    total = sum(hi - lo for lo, hi in intervals)
    if total > TWO_PI + 1e-9:
        raise DomainError("support intervals exceed the circle")
    theta = np.arange(check_samples) * TWO_PI / check_samples
    vals = f(theta, 0)
    scale = max(1.0, float(np.max(np.abs(vals))))
    outside = _outside_mask(theta, intervals)
    if np.any(np.abs(vals[outside]) > 1e-8 * scale):
        raise DomainError("support does not contain {f != 0}")
    for lo, hi in intervals:
        ends = np.array([lo, hi])
        if np.max(np.abs(f(ends, 0))) > 1e-7 * scale or np.max(np.abs(f(ends, 1))) > 1e-6 * scale:
            raise DomainError(f"f is not clamped at the endpoints of ({lo}, {hi})")
    out = []
    for lo, hi in intervals:
        omega = hi - lo
        breaks = np.linspace(0.0, omega, 2 * n_max + 9)[1:-1]
        x, w = gauss_legendre(0.0, omega, 16, breaks=breaks)
        df = f(lo + x, 1)
        coeffs = np.empty(n_max)
        for n in range(1, n_max + 1):
            mode = buckling_mode(n, omega, grid=64)
            coeffs[n - 1] = np.sum(w * df * mode(x, 1))
        coeffs[np.abs(coeffs) < tol] = 0.0
        out.append(ComponentCoefficients(lo, omega, coeffs))
    return out


def gradient_norm_sq(f, support, n_nodes=16, n_panels=256):
    """∫ (f')^2 over the support intervals (quadrature oracle for Parseval)."""
    total = 0.0
    for lo, hi in sort_intervals(support):
        x, w = gauss_legendre(lo, hi, n_nodes, breaks=np.linspace(lo, hi, n_panels + 1)[1:-1])
        total += np.sum(w * f(x, 1) ** 2)
    return float(total)


# --- homogeneous profiles ---------------------------------------------------------


class ProfileKind(str, Enum):
    FLAT = "Flat"
    ANGULAR = "Angular"
    NODAL = "Nodal"
    ISOLATED = "Isolated"


def _angular_base(phi, m):
    # b^II on [0, t1]; phi already reduced modulo 2pi.
    inside = (phi >= 0) & (phi <= T1)
    if m == 0:
        val = 0.25 * (1 - np.cos(2 * phi) - (2 / T1) * (phi - 0.5 * np.sin(2 * phi)))
    elif m == 1:
        val = 0.25 * (2 * np.sin(2 * phi) - (2 / T1) * (1 - np.cos(2 * phi)))
    else:
        val = np.cos(2 * phi) - np.sin(2 * phi) / T1
    return np.where(inside, val, 0.0)


def _flat_base(phi, m):
    inside = (phi > 0) & (phi < np.pi)
    val = (0.5 * np.sin(phi) ** 2, 0.5 * np.sin(2 * phi), np.cos(2 * phi))[m]
    return np.where(inside, val, 0.0)


@dataclass(frozen=True)
class HomogeneousProfile:
    """2-homogeneous profile u(r e^{i theta}) = r^2 b(theta)."""

    kind: ProfileKind
    sign: float = 1.0
    rotation: float = 0.0
    lambda_: float = 1.0
    abc: tuple = (0.0, 0.0, 0.0)
    angular_fn: AngularFunction = field(default=None, compare=False, repr=False)

    def b(self, theta, m=0):
        """m-th derivative (m <= 2) of the angular profile."""
        if m not in (0, 1, 2):
            raise PreconditionError("derivative order must be 0..2")
        phi = np.mod(np.asarray(theta, dtype=float) - self.rotation, TWO_PI)
        if self.kind is ProfileKind.FLAT:
            return self.sign * _flat_base(phi, m)
        if self.kind is ProfileKind.ANGULAR:
            return self.sign * _angular_base(phi, m)
        if self.kind is ProfileKind.NODAL:
            return self.lambda_ * _flat_base_full(phi, m)
        a, bb, c = self.abc
        if m == 0:
            return a + bb * np.cos(2 * phi) + c * np.sin(2 * phi)
        if m == 1:
            return -2 * bb * np.sin(2 * phi) + 2 * c * np.cos(2 * phi)
        return -4 * bb * np.cos(2 * phi) - 4 * c * np.sin(2 * phi)

    @property
    def support_intervals(self):
        if self.kind is ProfileKind.FLAT:
            return [(self.rotation, self.rotation + np.pi)]
        if self.kind is ProfileKind.ANGULAR:
            return [(self.rotation, self.rotation + T1)]
        return [(self.rotation, self.rotation + TWO_PI)]

    @property
    def support_measure(self):
        return float(sum(hi - lo for lo, hi in self.support_intervals))

    def polar(self, r, theta):
        """u and its polar derivatives up to order two."""
        r = np.asarray(r, dtype=float)
        b0, b1, b2 = (self.b(theta, m) for m in (0, 1, 2))
        return {
            "u": r**2 * b0,
            "ur": 2 * r * b0,
            "urr": 2 * b0 + 0 * r,
            "ut": r**2 * b1,
            "urt": 2 * r * b1,
            "utt": r**2 * b2,
        }

    def __call__(self, x, y):
        r = np.hypot(x, y)
        return r**2 * self.b(np.arctan2(y, x))


def _flat_base_full(phi, m):
    return (0.5 * np.sin(phi) ** 2, 0.5 * np.sin(2 * phi), np.cos(2 * phi))[m]


def homogeneous_profile(kind, sign=1.0, rotation=0.0, lambda_=1.0, abc=(1.0, 0.0, 0.0), samples=DEFAULT_SAMPLES):
    """Build one of the four homogeneous profiles."""
    try:
        kind = ProfileKind(kind if not isinstance(kind, str) else kind.capitalize())
    except ValueError as exc:
        raise PreconditionError(f"unknown profile kind {kind!r}") from exc
    if kind in (ProfileKind.FLAT, ProfileKind.ANGULAR) and sign not in (1, -1, 1.0, -1.0):
        raise PreconditionError("sign must be +1 or -1")
    if kind is ProfileKind.NODAL and abs(lambda_) < 1:
        raise PreconditionError("nodal multiplier needs |lambda| >= 1")
    if kind is ProfileKind.ISOLATED:
        a, b, c = (float(v) for v in abc)
        if np.isclose(a * a, b * b + c * c, rtol=1e-12, atol=1e-14):
            raise PreconditionError("isolated profile needs a^2 != b^2 + c^2")
        abc = (a, b, c)
    prof = HomogeneousProfile(kind, float(sign), float(rotation), float(lambda_), tuple(abc))
    fn = AngularFunction.from_callable(lambda theta, m=0: prof.b(theta, m), samples)
    return HomogeneousProfile(prof.kind, prof.sign, prof.rotation, prof.lambda_, prof.abc, fn)


def degenerate_isolated(a, phi):
    """b = a + b cos 2theta + c sin 2theta with a^2 = b^2 + c^2 (no validation).

    Equals the nodal profile with lambda = 4a rotated by phi.
    """
    return lambda theta: a - a * np.cos(2 * phi) * np.cos(2 * theta) - a * np.sin(2 * phi) * np.sin(2 * theta)


def homogeneous_W(profile, n_panels=64):
    """W of a 2-homogeneous profile: |support|/2 + (1/2)∫(b''^2 - 4 b'^2)."""
    total = 0.0
    for lo, hi in profile.support_intervals:
        x, w = gauss_legendre(lo, hi, 16, breaks=np.linspace(lo, hi, n_panels + 1)[1:-1])
        total += np.sum(w * (profile.b(x, 2) ** 2 - 4 * profile.b(x, 1) ** 2))
    return 0.5 * profile.support_measure + 0.5 * float(total)
