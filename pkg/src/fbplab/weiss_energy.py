"""Energies and monotone quantities on the unit disk and on the half cylinder.

Disk fields live on a polar lattice r_i = sinh(kappa s_i) / sinh(kappa),
s_i = i / n_r, which clusters shells near the origin while keeping the
lattice uniform in s. Radial derivatives use five-point finite differences
with ghost rows obtained by reflection through the origin,
u(-r, theta) = u(r, theta + pi); angular derivatives use periodic
fourth-order differences. Fields built from a closed form carry exact
derivatives instead.

Cylinder coordinates: v(t, theta) = e^{2t} u(e^{-t} e^{i theta}).
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline, PchipInterpolator

from .errors import PreconditionError, ResolutionError, TruncationError
from .quadrature import gauss_legendre

TWO_PI = 2.0 * np.pi
DEFAULT_KAPPA = 2.0
DEFAULT_TAU_SUPP = 10.0
DEFAULT_NMAX = 64
SCHEMA_DISKFIELD = "#schema=fbplab/diskfield/v1"
DERIV_KEYS = ("u", "ur", "urr", "ut", "urt", "utt")


def fornberg_weights(z, x, m):
    """Finite-difference weights at z for derivatives 0..m on nodes x."""
    x = np.asarray(x, dtype=float)
    n = x.size
    c = np.zeros((n, m + 1))
    c1, c4 = 1.0, x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


@dataclass(frozen=True)
class PolarGrid:
    n_r: int
    n_theta: int
    kappa: float = DEFAULT_KAPPA

    def __post_init__(self):
        if self.n_r < 8 or self.n_theta < 8 or self.n_theta % 2:
            raise PreconditionError("polar grid needs n_r >= 8 and even n_theta >= 8")

    @property
    def s(self):
        return np.arange(self.n_r + 1) / self.n_r

    @property
    def r(self):
        if self.kappa == 0:
            return self.s
        return np.sinh(self.kappa * self.s) / np.sinh(self.kappa)

    @property
    def theta(self):
        return np.arange(self.n_theta) * TWO_PI / self.n_theta

    @property
    def dtheta(self):
        return TWO_PI / self.n_theta

    def mesh(self):
        return np.meshgrid(self.r, self.theta, indexing="ij")


def _radial_derivatives(grid, values):
    """First and second r-derivatives of nodal values, five-point stencils."""
    r = grid.r
    half = grid.n_theta // 2
    ghosts = np.roll(values[1:3][::-1], -half, axis=1)  # rows for -r_2, -r_1
    ext = np.vstack([ghosts, values])
    rx = np.concatenate([-r[2:0:-1], r])
    n_ext = rx.size
    d1 = np.empty_like(values)
    d2 = np.empty_like(values)
    for i in range(values.shape[0]):
        k = i + 2
        lo = min(max(k - 2, 0), n_ext - 5)
        w = fornberg_weights(rx[k], rx[lo : lo + 5], 2)
        block = ext[lo : lo + 5]
        d1[i] = w[:, 1] @ block
        d2[i] = w[:, 2] @ block
    return d1, d2


def _angular_derivative(values, dtheta, order):
    """Periodic fourth-order differences along the last axis."""
    p1, m1 = np.roll(values, -1, -1), np.roll(values, 1, -1)
    p2, m2 = np.roll(values, -2, -1), np.roll(values, 2, -1)
    if order == 1:
        return (8 * (p1 - m1) - (p2 - m2)) / (12 * dtheta)
    return (16 * (p1 + m1) - (p2 + m2) - 30 * values) / (12 * dtheta**2)


class DiskField:
    """Sampled scalar field on the unit disk with derivative access.

    ``derivs`` maps each of u, ur, urr, ut, urt, utt to arrays of shape
    (n_r + 1, n_theta). When omitted they are computed from ``values``.
    ``evaluator(r, theta)`` returning the same dict enables exact
    resampling (rescaling, cylinder transforms).
    """

    def __init__(self, grid, values=None, derivs=None, evaluator=None, tau_supp=DEFAULT_TAU_SUPP, h=None, exact_support=None):
        self.grid = grid
        if derivs is None:
            values = np.asarray(values, dtype=float)
            if values.shape != (grid.n_r + 1, grid.n_theta):
                raise PreconditionError("values shape does not match the grid")
            ur, urr = _radial_derivatives(grid, values)
            ut = _angular_derivative(values, grid.dtheta, 1)
            utt = _angular_derivative(values, grid.dtheta, 2)
            urt = _angular_derivative(ur, grid.dtheta, 1)
            derivs = dict(u=values, ur=ur, urr=urr, ut=ut, urt=urt, utt=utt)
        self.d = {k: np.asarray(derivs[k], dtype=float) for k in DERIV_KEYS}
        self.values = self.d["u"]
        self.evaluator = evaluator
        self.tau_supp = tau_supp
        self.h = float(h) if h is not None else float(np.max(np.diff(grid.r)))
        self.exact_support = evaluator is not None if exact_support is None else exact_support
        self._cache = {}

    # -- constructors -----------------------------------------------------
    @classmethod
    def from_function(cls, fn, grid, **kw):
        rr, tt = grid.mesh()
        return cls(grid, derivs=fn(rr, tt), evaluator=fn, **kw)

    @classmethod
    def from_profile(cls, profile, grid, **kw):
        return cls.from_function(profile.polar, grid, **kw)

    @classmethod
    def from_goursat(cls, coeffs, grid, **kw):
        return cls.from_function(coeffs.evaluate, grid, **kw)

    # -- derivatives ------------------------------------------------------
    def __getattr__(self, name):
        if name in DERIV_KEYS and name != "u":
            return self.d[name]
        raise AttributeError(name)

    @property
    def r(self):
        return self.grid.r

    @property
    def lap(self):
        """Polar Laplacian u_rr + u_r / r + u_tt / r^2; origin row by the Cartesian limit."""
        if "lap" not in self._cache:
            r = self.r[:, None]
            with np.errstate(divide="ignore", invalid="ignore"):
                lap = self.d["urr"] + self.d["ur"] / r + self.d["utt"] / r**2
            lap[0] = 2.0 * np.mean(self.d["urr"][0])
            self._cache["lap"] = lap
        return self._cache["lap"]

    @property
    def grad_norm(self):
        r = self.r[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.sqrt(self.d["ur"] ** 2 + (self.d["ut"] / r) ** 2)
        g[0] = np.max(np.abs(self.d["ur"][0]))
        return g

    # -- support ----------------------------------------------------------
    @property
    def support_mask(self):
        """Cell mask: a cell is in the support when any corner node is.

        Node rule: |u| > tau h^2 or |grad u| > tau h. Closed-form fields use a
        near-exact threshold instead (1e-12 relative).
        """
        if "mask" not in self._cache:
            u, g = np.abs(self.values), self.grad_norm
            if self.exact_support:
                scale = max(1.0, float(np.max(u)), float(np.max(g)))
                node = (u > 1e-12 * scale) | (g > 1e-12 * scale)
            else:
                node = (u > self.tau_supp * self.h**2) | (g > self.tau_supp * self.h)
            cell = node[:-1] | node[1:]
            cell = cell | np.roll(cell, -1, axis=1)
            self._cache["mask"] = cell
        return self._cache["mask"]

    @property
    def cell_areas(self):
        r = self.r
        return 0.5 * (r[1:] ** 2 - r[:-1] ** 2)[:, None] * self.grid.dtheta * np.ones(self.grid.n_theta)

    @property
    def center_flat(self):
        scale = max(1.0, float(np.max(np.abs(self.values))))
        tol = 1e-10 * scale if self.exact_support else max(self.tau_supp * self.h**2, 1e-8 * scale)
        return bool(np.max(np.abs(self.values[0])) <= tol and np.max(np.abs(self.d["ur"][0])) <= (tol / self.h if not self.exact_support else tol))

    # -- radial profiles of integrals -----------------------------------------
    def _bulk_cumulative(self):
        if "bulk" not in self._cache:
            shell = np.sum(self.lap**2, axis=1) * self.grid.dtheta
            # Integrate in the uniform variable s with dr = r'(s) ds.
            g = self.grid
            if g.kappa == 0:
                dr = np.ones_like(g.s)
            else:
                dr = g.kappa * np.cosh(g.kappa * g.s) / np.sinh(g.kappa)
            self._cache["bulk"] = cumulative_simpson(shell * self.r * dr, x=g.s, initial=0.0)
        return self._cache["bulk"]

    def _area_cumulative(self):
        if "area" not in self._cache:
            per_shell = np.sum(self.cell_areas * self.support_mask, axis=1)
            self._cache["area"] = np.concatenate([[0.0], np.cumsum(per_shell)])
        return self._cache["area"]

    def cumulative_energy(self, lam=1.0):
        return self._bulk_cumulative() + lam * self._area_cumulative()

    def _boundary_terms(self):
        """Per-shell angular integrals of the explicit W corrector, N, R and N'."""
        if "bterms" in self._cache:
            return self._cache["bterms"]
        d, dth = self.d, self.grid.dtheta
        r = self.r[1:, None]
        u, ur, urr, ut, urt, utt = (d[k][1:] for k in DERIV_KEYS)
        corr = 2 * (ur * urr / r - 2 * u * urr / r**2 + ut * urt / r**3 - 4 * ur**2 / r**2 + 10 * u * ur / r**3 - ut**2 / r**4 - 8 * u**2 / r**4)
        # Rescaled function U = u(r .)/r^2 on the unit circle and its derivatives.
        U, dU, ddU, Ut, Urt = u / r**2, ur / r, urr, ut / r**2, urt / r
        N = (dU - 2 * U) ** 2 + Ut**2 + U**2
        R = 2 * (Ut**2 - dU**2 + 2 * U**2 - U * dU)
        Np = (2 / r) * (dU * ddU - 2 * U * ddU + Ut * Urt - 3 * dU**2 + 11 * U * dU - 2 * Ut**2 - 10 * U**2)
        lap = self.lap[1:]
        dkv = 2 * ur * lap / r - 10 * ur**2 / r**2 - 4 * u * lap / r**2 + 24 * u * ur / r**3 + 4 * ut * urt / r**3 - 16 * u**2 / r**4 - 6 * ut**2 / r**4
        out = {}
        for key, arr in (("corr", corr), ("N", N), ("R", R), ("Np", Np), ("dkv", dkv)):
            out[key] = np.concatenate([[np.nan], np.sum(arr, axis=1) * dth])
        self._cache["bterms"] = out
        return out

    def W_profile(self, lam=1.0):
        """W at every grid radius r_i > 0 (explicit corrector form)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.cumulative_energy(lam) / self.r**2 + self._boundary_terms()["corr"]

    # -- radius lookup ------------------------------------------------------
    def _shell_fit(self, profile, r):
        """Quadratic through the three shells nearest to r."""
        radii = self.r
        if not 0 < r < 1 + 1e-12:
            raise PreconditionError(f"radius {r!r} must lie in (0, 1)")
        if r < radii[3]:
            raise ResolutionError(f"radius {r!r} is below three grid cells ({radii[3]:.3g})")
        i = int(np.clip(np.searchsorted(radii, r), 2, radii.size - 2))
        idx = np.array([i - 1, i, i + 1]) if i + 1 < radii.size else np.array([i - 2, i - 1, i])
        coef = np.polyfit(radii[idx], profile[idx], 2)
        return float(np.polyval(coef, r))

    # -- serialization ------------------------------------------------------
    def save(self, path):
        """Write ``path`` as CSV (r, theta, value) plus a JSON sidecar."""
        path = Path(path)
        rr, tt = self.grid.mesh()
        data = np.column_stack([rr.ravel(), tt.ravel(), self.values.ravel()])
        with open(path, "w") as fh:
            fh.write(SCHEMA_DISKFIELD + "\n")
            fh.write("r,theta,value\n")
            np.savetxt(fh, data, delimiter=",", fmt="%.17g")
        meta = dict(n_r=self.grid.n_r, n_theta=self.grid.n_theta, kappa=self.grid.kappa, h=self.h, tau_supp=self.tau_supp, exact_support=self.exact_support)
        path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True))
        return path

    @classmethod
    def load(cls, path):
        path = Path(path)
        meta = json.loads(path.with_suffix(".json").read_text())
        with open(path) as fh:
            header = fh.readline().strip()
            if header != SCHEMA_DISKFIELD:
                raise PreconditionError(f"unexpected schema line {header!r}")
            data = np.loadtxt(fh, delimiter=",", skiprows=1)
        grid = PolarGrid(meta["n_r"], meta["n_theta"], meta["kappa"])
        values = data[:, 2].reshape(grid.n_r + 1, grid.n_theta)
        return cls(grid, values, tau_supp=meta["tau_supp"], h=meta["h"], exact_support=meta.get("exact_support", False))


# -- disk functionals ------------------------------------------------------------


def energy_E(field, lam=1.0, r=1.0):
    """∫_{D_r} |Δu|^2 + lam χ_{u != 0} by cellwise quadrature."""
    if r > 1 + 1e-12:
        raise PreconditionError("region radius must be <= 1")
    if lam < 0:
        raise PreconditionError("lambda must be >= 0")
    cum = field.cumulative_energy(lam)
    radii = field.r
    j = np.argmin(np.abs(radii - r))
    if abs(radii[j] - r) < 1e-12:
        return float(cum[j])
    return float(PchipInterpolator(radii, cum)(r))


def _check_center(field):
    if not field.center_flat:
        raise PreconditionError("field is not center-flat (u(0) = |grad u(0)| = 0 required)")


def weiss_W(field, r, lam=1.0):
    """W(u, r) = r^-2 E(u; D_r) + 2∫ corrector dθ, fitted over three shells."""
    _check_center(field)
    return field._shell_fit(field.W_profile(lam), r)


def weiss_W_dkv(field, r, lam=1.0):
    """Same quantity with the corrector written through Δu (cross-check)."""
    _check_center(field)
    with np.errstate(divide="ignore", invalid="ignore"):
        prof = field.cumulative_energy(lam) / field.r**2 + field._boundary_terms()["dkv"]
    return field._shell_fit(prof, r)


def N_functional(field, r):
    _check_center(field)
    return field._shell_fit(field._boundary_terms()["N"], r)


def R_functional(field, r):
    _check_center(field)
    return field._shell_fit(field._boundary_terms()["R"], r)


def N_prime(field, r, method="closed"):
    """dN/dr from the closed form or by centered differences across shells."""
    _check_center(field)
    terms = field._boundary_terms()
    if method == "closed":
        return field._shell_fit(terms["Np"], r)
    if method != "fd":
        raise PreconditionError("method must be 'closed' or 'fd'")
    N, radii = terms["N"], field.r
    fd = np.full_like(N, np.nan)
    fd[2:-1] = (N[3:] - N[1:-2]) / (radii[3:] - radii[1:-2])
    fd[-1] = (N[-1] - N[-2]) / (radii[-1] - radii[-2])
    return field._shell_fit(fd, min(r, radii[-2]))


def kappa_ratio(field, radii):
    """Empirical sup of |R| / N over the given radii."""
    return max(abs(R_functional(field, r)) / N_functional(field, r) for r in radii)


# -- Fourier traces and Goursat coefficients ---------------------------------------


def _fourier(samples, n_max):
    """c_n = (1/2pi)∫ e^{-in theta} f, for n = -n_max..n_max."""
    m = samples.shape[-1]
    if 2 * n_max + 1 > m:
        raise PreconditionError("too few samples for the requested n_max")
    c = np.fft.fft(samples) / m
    idx = np.arange(-n_max, n_max + 1) % m
    return c[idx]


@dataclass(frozen=True)
class BoundaryTrace:
    radius: float
    fourier_u: np.ndarray
    fourier_ur: np.ndarray
    fourier_urr: np.ndarray
    n_max: int

    @classmethod
    def from_samples(cls, u, ur, urr=None, radius=1.0, n_max=DEFAULT_NMAX):
        u = np.asarray(u, float)
        n_max = min(n_max, (u.size - 1) // 2)
        urr = np.zeros_like(u) if urr is None else np.asarray(urr, float)
        return cls(radius, _fourier(u, n_max), _fourier(np.asarray(ur, float), n_max), _fourier(urr, n_max), n_max)

    @classmethod
    def from_field(cls, field, radius=1.0, n_max=DEFAULT_NMAX, n_theta=None):
        theta = field.grid.theta if n_theta is None else np.arange(n_theta) * TWO_PI / n_theta
        if field.evaluator is not None:
            d = field.evaluator(np.full_like(theta, radius), theta)
            return cls.from_samples(d["u"], d["ur"], d["urr"], radius, n_max)
        i = int(np.argmin(np.abs(field.r - radius)))
        if abs(field.r[i] - radius) > 1e-12:
            raise PreconditionError("sampled fields only provide traces at grid radii")
        return cls.from_samples(field.values[i], field.d["ur"][i], field.d["urr"][i], radius, n_max)

    @property
    def n(self):
        return np.arange(-self.n_max, self.n_max + 1)

    def l2_norm_sq(self):
        """Parseval: ‖u‖^2 on the circle of this radius, per unit angle measure."""
        return TWO_PI * float(np.sum(np.abs(self.fourier_u) ** 2))


@dataclass(frozen=True)
class GoursatCoefficients:
    """u = Σ (a_n r^{|n|+2} + b_n r^{|n|}) e^{i n theta}, n = -N..N."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        if self.a.shape != self.b.shape or self.a.size % 2 == 0:
            raise PreconditionError("coefficient arrays must have equal odd length")

    @property
    def n_max(self):
        return (self.a.size - 1) // 2

    @property
    def n(self):
        return np.arange(-self.n_max, self.n_max + 1)

    def is_real(self, tol=1e-12):
        return np.allclose(self.a, np.conj(self.a[::-1]), atol=tol) and np.allclose(self.b, np.conj(self.b[::-1]), atol=tol)

    def is_center_flat(self, tol=1e-14):
        n = self.n
        low = np.abs(n) <= 1
        return bool(np.all(np.abs(self.b[low]) <= tol))

    def evaluate(self, r, theta):
        """u and polar derivatives up to order two (real part)."""
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        out = {k: np.zeros(np.broadcast(r, theta).shape) for k in DERIV_KEYS}
        for n, a, b in zip(self.n, self.a, self.b):
            if a == 0 and b == 0:
                continue
            k = abs(int(n))
            e = np.exp(1j * n * theta)
            # radial parts and their r-derivatives
            f0 = a * r ** (k + 2) + (b * r**k if k > 0 else b)
            f1 = a * (k + 2) * r ** (k + 1) + (b * k * r ** (k - 1) if k > 0 else 0)
            f2 = a * (k + 2) * (k + 1) * r**k + (b * k * (k - 1) * r ** (k - 2) if k > 1 else 0)
            out["u"] += np.real(f0 * e)
            out["ur"] += np.real(f1 * e)
            out["urr"] += np.real(f2 * e)
            out["ut"] += np.real(1j * n * f0 * e)
            out["urt"] += np.real(1j * n * f1 * e)
            out["utt"] += np.real(-(n**2) * f0 * e)
        return out

    @classmethod
    def random(cls, rng, n_max=8, center_flat=True, scale=1.0, zero=()):
        n = np.arange(-n_max, n_max + 1)
        a = np.zeros(2 * n_max + 1, complex)
        b = np.zeros(2 * n_max + 1, complex)
        for k in range(0, n_max + 1):
            za = (rng.standard_normal() + 1j * rng.standard_normal()) * scale / (1 + k)
            zb = (rng.standard_normal() + 1j * rng.standard_normal()) * scale / (1 + k)
            if k == 0:
                za, zb = za.real, zb.real
            a[n == k], a[n == -k] = za, np.conj(za)
            b[n == k], b[n == -k] = zb, np.conj(zb)
        if center_flat:
            b[np.abs(n) <= 1] = 0
        for which, k in zero:
            arr = a if which == "a" else b
            arr[np.abs(n) == k] = 0
        return cls(a, b)

    def to_json(self):
        return json.dumps({"a": [[z.real, z.imag] for z in self.a], "b": [[z.real, z.imag] for z in self.b]})

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(np.array([complex(*p) for p in d["a"]]), np.array([complex(*p) for p in d["b"]]))


def W0_goursat(coeffs, r):
    """Closed-form W_0 of a biharmonic field from its Goursat coefficients."""
    if not r > 0:
        raise PreconditionError("r must be positive")
    k = np.abs(coeffs.n).astype(float)
    a, b = coeffs.a, coeffs.b
    with np.errstate(divide="ignore", invalid="ignore"):
        ta = k**3 * r ** (2 * k) * np.abs(a) ** 2
        tab = np.where(k * (k - 2) != 0, 2 * k**2 * (k - 2) * r ** (2 * k - 2), 0.0) * np.real(np.conj(a) * b)
        tb = (k - 2) * (k**2 - 2 * k + 2) * r ** (2 * k - 4) * np.abs(b) ** 2
    return float(8 * np.pi * np.sum(ta + tab + tb))


def goursat_from_boundary(trace):
    """Coefficients of the biharmonic extension of (u, u_r) on the unit circle."""
    if abs(trace.radius - 1.0) > 1e-12:
        raise PreconditionError("trace must be taken at radius 1")
    k = np.abs(trace.n)
    a = 0.5 * (trace.fourier_ur - k * trace.fourier_u)
    b = trace.fourier_u - a
    return GoursatCoefficients(a, b)


def biharmonic_extension_energy(trace, lam=1.0):
    """E of the biharmonic extension with full support: lam pi + 2pi Σ 2(|n|+1)|c_n[u_r] - |n| c_n[u]|^2."""
    if abs(trace.radius - 1.0) > 1e-12:
        raise PreconditionError("trace must be taken at radius 1")
    k = np.abs(trace.n)
    return float(lam * np.pi + TWO_PI * np.sum(2 * (k + 1) * np.abs(trace.fourier_ur - k * trace.fourier_u) ** 2))


# -- cylinder ------------------------------------------------------------------------


@dataclass
class CylinderField:
    """v(t, theta) on [0, T_max] x S^1 with derivative arrays.

    Arrays have shape (n_t, n_theta) over ascending ``t``.
    """

    t: np.ndarray
    theta: np.ndarray
    v: np.ndarray
    vt: np.ndarray
    vtt: np.ndarray
    vth: np.ndarray
    vtth: np.ndarray
    vthth: np.ndarray
    exact_support: bool = True
    tau_supp: float = DEFAULT_TAU_SUPP
    h: float = 1e-2
    growth_constant: float = field(default=np.nan)

    @property
    def T_max(self):
        return float(self.t[-1])

    @property
    def dtheta(self):
        return TWO_PI / self.theta.size

    def support_fraction(self):
        """Per-t angular measure of the support (cellwise in theta)."""
        if self.exact_support:
            scale = max(1.0, float(np.max(np.abs(self.v))))
            node = (np.abs(self.v) > 1e-12 * scale) | (np.hypot(self.vt, self.vth) > 1e-12 * scale)
        else:
            # Thresholds on the disk scale: |u| = e^{-2t}|v|.
            w = np.exp(-2 * self.t)[:, None]
            node = (w * np.abs(self.v) > self.tau_supp * self.h**2) | (np.exp(-self.t)[:, None] * np.hypot(2 * self.v - self.vt, self.vth) > self.tau_supp * self.h)
        cell = node | np.roll(node, -1, axis=1)
        return np.sum(cell, axis=1) * self.dtheta

    def _integrands(self):
        d = self.dtheta
        A = np.sum(self.vtt**2 + 2 * self.vtth**2 + self.vthth**2 - 4 * self.vth**2, axis=1) * d + self.support_fraction()
        B = np.sum(self.vt * (self.vt - self.vtt), axis=1) * d
        D = np.sum(self.vtt**2 + self.vtth**2, axis=1) * d
        return A, B, D

    def slab_h2_norms(self):
        """‖v‖_{H^2} on unit t-slabs [k, k+1] inside the represented range."""
        sq = sum(np.sum(x**2, axis=1) for x in (self.v, self.vt, self.vtt, self.vth, self.vtth, self.vthth)) * self.dtheta
        spline = CubicSpline(self.t, sq)
        out = []
        for k in range(int(np.floor(self.T_max))):
            out.append(np.sqrt(max(spline.integrate(k, k + 1), 0.0)))
        return np.array(out)


def _cylinder_from_derivs(t, theta, d, **kw):
    r = np.exp(-t)[:, None]
    e2 = np.exp(2 * t)[:, None]
    v = e2 * d["u"]
    vt = e2 * (2 * d["u"] - r * d["ur"])
    vtt = 2 * vt + e2 * (r**2 * d["urr"] - r * d["ur"])
    vth = e2 * d["ut"]
    vtth = e2 * (2 * d["ut"] - r * d["urt"])
    vthth = e2 * d["utt"]
    cyl = CylinderField(t, theta, v, vt, vtt, vth, vtth, vthth, **kw)
    norms = cyl.slab_h2_norms()
    if norms.size:
        cyl.growth_constant = float(np.max(norms / (np.arange(norms.size) + 1.0)))
    return cyl


def to_cylinder(field, T_max=8.0, n_t=None):
    """v(t, theta) = e^{2t} u(e^{-t + i theta}) on [0, T_max]."""
    if not field.center_flat:
        raise PreconditionError("field is not center-flat")
    theta = field.grid.theta
    if field.evaluator is not None:
        n_panels = n_t or int(16 * T_max)
        t, _ = gauss_legendre(0.0, T_max, 8, breaks=np.linspace(0, T_max, n_panels + 1)[1:-1])
        t = np.concatenate([[0.0], t, [T_max]])
        tt, th = np.meshgrid(t, theta, indexing="ij")
        d = field.evaluator(np.exp(-tt), th)
        return _cylinder_from_derivs(t, theta, d, exact_support=True)
    radii = field.r
    keep = (radii > 0) & (radii >= np.exp(-T_max) * (1 - 1e-12))
    idx = np.nonzero(keep)[0][::-1]
    t = -np.log(radii[idx])
    t[0] = abs(t[0])
    d = {k: field.d[k][idx] for k in DERIV_KEYS}
    return _cylinder_from_derivs(t, theta, d, exact_support=False, tau_supp=field.tau_supp, h=field.h)


def _weighted_tail_integral(cyl, values, tau, tail_tol):
    if tau < cyl.t[0] - 1e-12 or tau >= cyl.T_max:
        raise PreconditionError("tau outside the represented range")
    weight_tail = np.exp(-2 * (cyl.T_max - tau))
    if weight_tail > tail_tol:
        raise TruncationError(f"e^(-2(T_max - tau)) = {weight_tail:.2e} exceeds tail tolerance {tail_tol:.1e}")
    spline = CubicSpline(cyl.t, values)
    n_panels = max(8, int(8 * (cyl.T_max - tau)))
    x, w = gauss_legendre(tau, cyl.T_max, 12, breaks=np.linspace(tau, cyl.T_max, n_panels + 1)[1:-1])
    main = float(np.sum(w * np.exp(-2 * (x - tau)) * spline(x)))
    # Constant continuation of the integrand beyond T_max.
    return main + 0.5 * weight_tail * float(values[-1])


def cylinder_G(cyl, tau=0.0, tail_tol=1e-4):
    """𝒢(v, tau) = ∫_{t > tau} e^{-2(t - tau)} ∫ (v_tt^2 + 2 v_tθ^2 + v_θθ^2 - 4 v_θ^2 + χ)."""
    A, _, _ = cyl._integrands()
    return _weighted_tail_integral(cyl, A, tau, tail_tol)


def cylinder_W(cyl, tau=0.0, tail_tol=1e-4):
    """𝒲(v, tau) = 𝒢(v, tau) + 2∫ v_t (v_t - v_tt) at t = tau."""
    _, B, _ = cyl._integrands()
    return cylinder_G(cyl, tau, tail_tol) + 2 * float(CubicSpline(cyl.t, B)(tau))


def cylinder_dissipation(cyl, tau):
    """-4∫(v_tt^2 + v_tθ^2) at t = tau: the derivative of 𝒲 for critical fields."""
    _, _, D = cyl._integrands()
    return -4 * float(CubicSpline(cyl.t, D)(tau))


def rescale(field, s, grid=None):
    """u_{0,s}(x) = u(s x) / s^2 for closed-form fields."""
    if field.evaluator is None:
        raise PreconditionError("rescaling needs a closed-form evaluator")
    fn = field.evaluator

    def scaled(r, theta):
        d = fn(s * np.asarray(r), theta)
        return dict(u=d["u"] / s**2, ur=d["ur"] / s, urr=d["urr"], ut=d["ut"] / s**2, urt=d["urt"] / s, utt=d["utt"] / s**2)

    return DiskField.from_function(scaled, grid or field.grid)
