"""First buckling eigenvalue of clamped plates.

Lambda_1(Omega) = inf over H^2_0(Omega) of int |Delta u|^2 / int |grad u|^2.

The disk is handled exactly through the first zero of J_1. Other
star-shaped plates are pulled back to the unit disk by a smooth map Phi and
discretized on a polar grid of that disk: radial nodes rho_j = (j - 1/2) h
with the boundary on a node, so the origin is never a node and the clamped
rows are eliminated through ghost values (v = 0 on the rim, v_rho = 0 by
reflection). The pencil A y = Lambda B y is

    A = L^T W L,    B = G^T W G,

with L the mapped Laplacian, G the mapped gradient and W the quadrature
weights. A is never formed: near the pole its entries are of size
(rho dtheta)^-4 and cancel on smooth vectors, which costs all accuracy in
double precision. Solves go through the quasi-definite block matrix
[[W^-1, L], [L^T, -tau B]] instead.
"""

import concurrent.futures
import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import RegularGridInterpolator

from .errors import DomainError, NumericalError, PreconditionError
from .quadrature import gauss_legendre

SCAN_COLUMNS = ("family_param", "area", "lambda1", "area_lambda1", "mesh", "residual")
SHIFT_FACTOR = 0.9
QUASIMIN_RADII = (0.05, 0.1, 0.2)


# --- Bessel functions and the disk ------------------------------------------------------


def bessel_j(n, x, terms=40):
    """J_n(x) for n in {0, 1, 2} from the power series.

    Accurate to rounding for |x| <= 10, which covers the first few zeros.
    """
    if n not in (0, 1, 2):
        raise PreconditionError("only J_0, J_1, J_2 are provided")
    x = np.asarray(x, dtype=float)
    half = 0.5 * x
    term = half**n / math.factorial(n)
    total = term.copy() if isinstance(term, np.ndarray) else term
    q = -half * half
    for k in range(1, terms):
        term = term * q / (k * (k + n))
        total = total + term
    return total


def bessel_j1_zero(tol=1e-15):
    """First positive zero of J_1 by safeguarded Newton on [3, 4.5]."""
    lo, hi = 3.0, 4.5
    x = 3.8
    for _ in range(100):
        f = float(bessel_j(1, x))
        df = float(bessel_j(0, x)) - f / x
        if f > 0:
            lo = x
        else:
            hi = x
        step = f / df
        nxt = x - step
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        if abs(nxt - x) <= tol * x:
            return nxt
        x = nxt
    raise NumericalError("J_1 root search did not converge")


def lambda1_disk(tol=1e-12, radius=1.0):
    """Lambda_1 of the disk of the given radius: j_{1,1}^2 / radius^2.

    The radial eigenfunction is J_0(sqrt(L) r) - J_0(sqrt(L)); the clamped
    condition u'(1) = 0 forces J_1(sqrt(L)) = 0.
    """
    if tol <= 0:
        raise PreconditionError("tol must be positive")
    if radius <= 0:
        raise PreconditionError("radius must be positive")
    j = bessel_j1_zero(min(tol, 1e-15) if tol < 1e-15 else tol / 40.0)
    return j * j / radius**2


def disk_rayleigh_residual(lam, n_quad=64):
    """|int |Delta u|^2 - lam int |grad u|^2| / int |grad u|^2 for the radial profile at lam."""
    k = math.sqrt(lam)
    r, w = gauss_legendre(0.0, 1.0, n_quad)
    lap = -lam * bessel_j(0, k * r)
    grad = -k * bessel_j(1, k * r)
    num = np.sum(w * r * lap**2)
    den = np.sum(w * r * grad**2)
    return abs(num - lam * den) / den


# --- domains ----------------------------------------------------------------------------


@dataclass(frozen=True)
class PlateDomain:
    """A star-shaped plate, the image of the unit disk under a smooth map Phi.

    kinds: ``disk`` (radius), ``ellipse`` (semi-axes a, b) and ``star``
    (boundary r = scale * (1 + sum c_k cos k th + d_k sin k th)). The star
    map is Phi(xi) = scale * xi * (1 + Re q(zeta)) with
    q(zeta) = sum (c_k - i d_k) zeta^k, a polynomial, so it is smooth at
    the origin.
    """

    kind: str
    params: dict
    area: float = field(init=False)

    def __post_init__(self):
        if self.kind == "disk":
            r = float(self.params.get("radius", 1.0))
            if r <= 0:
                raise DomainError("radius must be positive")
            area = math.pi * r * r
        elif self.kind == "ellipse":
            a, b = float(self.params["a"]), float(self.params["b"])
            if a <= 0 or b <= 0:
                raise DomainError("semi-axes must be positive")
            area = math.pi * a * b
        elif self.kind == "star":
            c = np.asarray(self.params.get("cos", ()), float)
            d = np.asarray(self.params.get("sin", ()), float)
            s = float(self.params.get("scale", 1.0))
            if s <= 0:
                raise DomainError("scale must be positive")
            th = np.linspace(0, 2 * np.pi, 4097)[:-1]
            if np.min(self.radius(th)) <= 0:
                raise DomainError("boundary radius must stay positive")
            area = s * s * (math.pi + 0.5 * math.pi * float(np.sum(c**2) + np.sum(d**2)))
        else:
            raise DomainError(f"unknown domain kind {self.kind!r}")
        object.__setattr__(self, "area", area)
        if self.kind == "star":
            xi1, xi2 = _check_points()
            _, J, _ = self.map_derivatives(xi1, xi2)
            if np.min(np.linalg.det(J)) <= 0:
                raise DomainError("the disk map folds over; the star is too far from a disk")

    @classmethod
    def disk(cls, radius=1.0):
        return cls("disk", {"radius": float(radius)})

    @classmethod
    def ellipse(cls, a, b):
        return cls("ellipse", {"a": float(a), "b": float(b)})

    @classmethod
    def star(cls, cos=(), sin=(), scale=1.0):
        return cls("star", {"cos": tuple(float(x) for x in cos), "sin": tuple(float(x) for x in sin), "scale": float(scale)})

    def scaled(self, t):
        if t <= 0:
            raise DomainError("scale factor must be positive")
        if self.kind == "disk":
            return PlateDomain.disk(t * self.params.get("radius", 1.0))
        if self.kind == "ellipse":
            return PlateDomain.ellipse(t * self.params["a"], t * self.params["b"])
        return PlateDomain.star(self.params["cos"], self.params["sin"], t * self.params["scale"])

    def radius(self, theta):
        """Boundary radius in polar coordinates."""
        theta = np.asarray(theta, float)
        if self.kind == "disk":
            return np.full_like(theta, self.params.get("radius", 1.0))
        if self.kind == "ellipse":
            a, b = self.params["a"], self.params["b"]
            return a * b / np.sqrt((b * np.cos(theta)) ** 2 + (a * np.sin(theta)) ** 2)
        R = np.ones_like(theta)
        for k, c in enumerate(self.params.get("cos", ()), start=1):
            R = R + c * np.cos(k * theta)
        for k, d in enumerate(self.params.get("sin", ()), start=1):
            R = R + d * np.sin(k * theta)
        return self.params.get("scale", 1.0) * R

    def _poly(self):
        c = list(self.params.get("cos", ()))
        d = list(self.params.get("sin", ()))
        n = max(len(c), len(d))
        c += [0.0] * (n - len(c))
        d += [0.0] * (n - len(d))
        # q(z) = sum (c_k - i d_k) z^k, lowest degree first with a zero constant.
        return np.array([0.0] + [ck - 1j * dk for ck, dk in zip(c, d)])

    def map_derivatives(self, xi1, xi2):
        """Phi, its Jacobian J[..., m, i] = d Phi_m / d xi_i and Hessians H[..., m, i, j]."""
        xi1, xi2 = np.broadcast_arrays(np.asarray(xi1, float), np.asarray(xi2, float))
        shape = xi1.shape
        J = np.zeros(shape + (2, 2))
        H = np.zeros(shape + (2, 2, 2))
        if self.kind in ("disk", "ellipse"):
            a = self.params.get("radius", self.params.get("a"))
            b = self.params.get("radius", self.params.get("b"))
            J[..., 0, 0], J[..., 1, 1] = a, b
            return np.stack([a * xi1, b * xi2], -1), J, H
        s = self.params.get("scale", 1.0)
        q = self._poly()
        z = xi1 + 1j * xi2
        P = np.polynomial.polynomial
        q0 = P.polyval(z, q)
        q1 = P.polyval(z, P.polyder(q)) if len(q) > 1 else np.zeros_like(z)
        q2 = P.polyval(z, P.polyder(q, 2)) if len(q) > 2 else np.zeros_like(z)
        f = 1.0 + q0.real
        df = np.stack([q1.real, -q1.imag], -1)
        ddf = np.empty(shape + (2, 2))
        ddf[..., 0, 0] = q2.real
        ddf[..., 0, 1] = ddf[..., 1, 0] = -q2.imag
        ddf[..., 1, 1] = -q2.real
        xi = np.stack([xi1, xi2], -1)
        eye = np.eye(2)
        # Phi_m = xi_m f: J_mi = delta_mi f + xi_m f_i.
        J = eye * f[..., None, None] + xi[..., :, None] * df[..., None, :]
        # H_mij = delta_mi f_j + delta_mj f_i + xi_m f_ij.
        H = (
            eye[:, :, None] * df[..., None, None, :]
            + eye[:, None, :] * df[..., None, :, None]
            + xi[..., :, None, None] * ddf[..., None, :, :]
        )
        return s * xi * f[..., None], s * J, s * H

    def inverse_map(self, x, y, iters=30):
        """xi with Phi(xi) = (x, y), by Newton from the polar guess."""
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        if self.kind == "disk":
            r = self.params.get("radius", 1.0)
            return x / r, y / r
        if self.kind == "ellipse":
            return x / self.params["a"], y / self.params["b"]
        th = np.arctan2(y, x)
        g = 1.0 / self.radius(th)
        xi = np.stack([x * g, y * g], -1)
        target = np.stack([x, y], -1)
        for _ in range(iters):
            Phi, J, _ = self.map_derivatives(xi[..., 0], xi[..., 1])
            step = np.linalg.solve(J, (Phi - target)[..., None])[..., 0]
            xi = xi - step
            if np.max(np.abs(step), initial=0.0) < 1e-14:
                break
        return xi[..., 0], xi[..., 1]

    def contains(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        r = np.hypot(x, y)
        return r < self.radius(np.arctan2(y, x))

    def label(self):
        if self.kind == "disk":
            return f"disk(r={self.params.get('radius', 1.0):g})"
        if self.kind == "ellipse":
            return f"ellipse({self.params['a']:g},{self.params['b']:g})"
        return f"star(cos={self.params['cos']},sin={self.params['sin']},scale={self.params['scale']:g})"


def _check_points(n_r=64, n_t=256):
    r = np.linspace(0.0, 1.0, n_r)
    t = np.linspace(0.0, 2 * np.pi, n_t, endpoint=False)
    R, T = np.meshgrid(r, t, indexing="ij")
    return R * np.cos(T), R * np.sin(T)


# --- the mapped polar pencil ---------------------------------------------------------------


def _mesh_sizes(mesh):
    if np.isscalar(mesh):
        n_rho = n_theta = int(mesh)
    else:
        n_rho, n_theta = (int(m) for m in mesh)
    if n_rho < 64 or n_theta < 64:
        raise PreconditionError("mesh resolution must be at least 64 x 64")
    if n_theta % 2:
        raise PreconditionError("n_theta must be even (the pole couples theta and theta + pi)")
    return n_rho, n_theta


def _stencil_matrix(N, M, stencil):
    """Rows: nodes (j, i), j = 1..N+1; columns: unknowns on rings 1..N."""
    j = np.repeat(np.arange(1, N + 2), M)
    i = np.tile(np.arange(M), N + 1)
    rows, cols, vals = [], [], []
    for dj, di, coef in stencil:
        jj, ii = j + dj, (i + di) % M
        col = np.full(j.shape, -1)
        pole = jj == 0
        col[pole] = (ii[pole] + M // 2) % M
        inner = (jj >= 1) & (jj <= N)
        col[inner] = (jj[inner] - 1) * M + ii[inner]
        ghost = jj == N + 2
        col[ghost] = (N - 1) * M + ii[ghost]
        keep = col >= 0
        rows.append(((j - 1) * M + i)[keep])
        cols.append(col[keep])
        vals.append(np.full(keep.sum(), coef))
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=((N + 1) * M, N * M)
    )


@dataclass
class PolarPencil:
    """Mapped Laplacian L, gradient G (stacked), weights w and the grid."""

    N: int
    M: int
    rho: np.ndarray
    theta: np.ndarray
    L: sp.csr_matrix
    G: sp.csr_matrix
    w: np.ndarray
    xi: np.ndarray
    x: np.ndarray

    def A_quad(self, y):
        Ly = self.L @ y
        return float(np.sum(self.w * Ly * Ly))

    def B_matrix(self):
        wg = np.concatenate([self.w, self.w])
        return (self.G.T @ sp.diags(wg) @ self.G).tocsc()

    def B_quad(self, y):
        Gy = self.G @ y
        return float(np.sum(np.concatenate([self.w, self.w]) * Gy * Gy))


def assemble_pencil(domain, mesh):
    """Build L, G and the weights for ``domain`` on an (n_rho, n_theta) polar grid of the unit disk."""
    N, M = _mesh_sizes(mesh)
    h = 1.0 / (N + 0.5)
    dth = 2 * np.pi / M
    rho = (np.arange(1, N + 2) - 0.5) * h
    theta = np.arange(M) * dth
    Dr = _stencil_matrix(N, M, [(1, 0, 1 / (2 * h)), (-1, 0, -1 / (2 * h))])
    Drr = _stencil_matrix(N, M, [(1, 0, 1 / h**2), (0, 0, -2 / h**2), (-1, 0, 1 / h**2)])
    Dt = _stencil_matrix(N, M, [(0, 1, 1 / (2 * dth)), (0, -1, -1 / (2 * dth))])
    Dtt = _stencil_matrix(N, M, [(0, 1, 1 / dth**2), (0, 0, -2 / dth**2), (0, -1, 1 / dth**2)])
    q = 1 / (4 * h * dth)
    Drt = _stencil_matrix(N, M, [(1, 1, q), (1, -1, -q), (-1, 1, -q), (-1, -1, q)])

    P = np.repeat(rho, M)
    T = np.tile(theta, N + 1)
    c, s = np.cos(T), np.sin(T)
    D = sp.diags
    # Cartesian derivatives in the reference disk from polar ones.
    X1 = D(c) @ Dr - D(s / P) @ Dt
    X2 = D(s) @ Dr + D(c / P) @ Dt
    mixed = D(1 / P) @ Drt - D(1 / P**2) @ Dt
    iso = D(1 / P) @ Dr + D(1 / P**2) @ Dtt
    H11 = D(c * c) @ Drr + D(s * s) @ iso - D(2 * c * s) @ mixed
    H22 = D(s * s) @ Drr + D(c * c) @ iso + D(2 * c * s) @ mixed
    H12 = D(c * s) @ (Drr - iso) + D(c * c - s * s) @ mixed

    xi1, xi2 = P * c, P * s
    Phi, J, HPhi = domain.map_derivatives(xi1, xi2)
    Jinv = np.linalg.inv(J)
    Q = Jinv @ np.swapaxes(Jinv, -1, -2)  # (J^T J)^{-1}
    detJ = np.linalg.det(J)
    if np.min(detJ) <= 0:
        raise DomainError("degenerate map on the grid")
    # Delta_x u = sum_ij Q_ij (H_ij - sum_m g_m HPhi_mij), with g = J^{-T} grad_xi v.
    Tm = np.einsum("nij,nmij->nm", Q, HPhi)
    corr = np.einsum("nm,nim->ni", Tm, Jinv)
    L = D(Q[:, 0, 0]) @ H11 + D(2 * Q[:, 0, 1]) @ H12 + D(Q[:, 1, 1]) @ H22 - D(corr[:, 0]) @ X1 - D(corr[:, 1]) @ X2
    # |grad_x u|^2 = g_xi^T Q g_xi; factor Q = C^T C for a stacked gradient.
    C = np.linalg.cholesky(Q)  # Q = C C^T
    G1 = D(C[:, 0, 0]) @ X1 + D(C[:, 1, 0]) @ X2
    G2 = D(C[:, 0, 1]) @ X1 + D(C[:, 1, 1]) @ X2
    radial_w = h * rho.copy()
    radial_w[-1] = 0.5 * (1.0 - (N * h) ** 2)
    w = np.repeat(radial_w, M) * dth * detJ
    return PolarPencil(
        N, M, rho, theta, L.tocsr(), sp.vstack([G1, G2]).tocsr(), w, np.stack([xi1, xi2], -1), Phi,
    )


# --- eigenfield and eigensolve ---------------------------------------------------------------


@dataclass
class MappedField:
    """Nodal eigenfunction and its Laplacian on the mapped polar grid.

    ``values`` and ``laplacian`` have shape (n_rho + 1, n_theta); the last
    ring is the clamped boundary.
    """

    domain: PlateDomain
    rho: np.ndarray
    theta: np.ndarray
    values: np.ndarray
    laplacian: np.ndarray
    x: np.ndarray
    y: np.ndarray
    weights: np.ndarray

    def _interpolator(self, data):
        M = self.theta.size
        dth = self.theta[1] - self.theta[0]
        # Mirror ring across the pole and pad theta periodically.
        mirror = np.roll(data[0], -M // 2)
        ext = np.vstack([mirror, data])
        ext = np.hstack([ext[:, -2:], ext, ext[:, :2]])
        r = np.concatenate([[-self.rho[0]], self.rho])
        t = np.concatenate([self.theta[:1] - 2 * dth, self.theta[:1] - dth, self.theta, self.theta[-1:] + dth, self.theta[-1:] + 2 * dth])
        return RegularGridInterpolator((r, t), ext, method="cubic")

    def sample(self, x, y, which="laplacian"):
        """Interpolated values at physical points; zero outside the plate."""
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        inside = self.domain.contains(x, y)
        out = np.zeros(x.shape)
        if np.any(inside):
            xi1, xi2 = self.domain.inverse_map(x[inside], y[inside])
            r = np.minimum(np.hypot(xi1, xi2), self.rho[-1])
            t = np.mod(np.arctan2(xi2, xi1), 2 * np.pi)
            interp = self._interpolator(self.laplacian if which == "laplacian" else self.values)
            out[inside] = interp(np.stack([r, t], -1))
        return out


@dataclass
class EigResult:
    lambda1: float
    eigenfield: MappedField
    rayleigh_residual: float
    pencil_residual: float
    iterations: int
    mesh: tuple
    shift: float


def lambda1_numeric(domain, mesh=64, tol=1e-12, max_iter=500, shift=None):
    """Smallest eigenvalue of the mapped pencil by shifted inverse iteration.

    The shift enters as A + tau B with tau = SHIFT_FACTOR times the disk
    value for the same area, which keeps the block system quasi-definite
    and the iteration attracted to the smallest eigenvalue. Iteration stops
    when the relative change of the Rayleigh quotient drops below ``tol``.
    ``rayleigh_residual`` is |int |Delta u|^2 - L int |grad u|^2| / int |grad u|^2
    from the discrete quadratures. ``pencil_residual`` is
    ||A y - L B y|| / (L ||B y||); it is a rounding floor (about 1e-5 at
    128^2) because applying L^T amplifies rounding at the pole.
    """
    pen = assemble_pencil(domain, mesh)
    B = pen.B_matrix()
    if shift is None:
        shift = SHIFT_FACTOR * lambda1_disk() * math.pi / domain.area
    nz = pen.L.shape[0]
    K = sp.bmat([[sp.diags(1.0 / pen.w), pen.L], [pen.L.T, -shift * B]], format="csc")
    try:
        lu = spla.splu(K, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0, options={"SymmetricMode": True})
    except RuntimeError as exc:
        raise NumericalError(f"factorization failed: {exc}") from exc
    P = np.repeat(pen.rho[:-1], pen.M)
    y = (1.0 - P**2) ** 2
    y /= math.sqrt(pen.B_quad(y))
    lam = pen.A_quad(y)
    for it in range(1, max_iter + 1):
        sol = lu.solve(np.concatenate([np.zeros(nz), B @ y]))
        y = -sol[nz:]
        y /= math.sqrt(pen.B_quad(y))
        new = pen.A_quad(y)
        if not np.isfinite(new):
            raise NumericalError("eigensolve produced non-finite values")
        done = abs(new - lam) <= tol * new
        lam = new
        if done:
            break
    else:
        raise NumericalError("inverse iteration did not converge")
    By = B @ y
    Ay = pen.L.T @ (pen.w * (pen.L @ y))
    res = float(np.linalg.norm(Ay - lam * By) / (lam * np.linalg.norm(By)))
    full = np.zeros((pen.N + 1, pen.M))
    full[:-1] = y.reshape(pen.N, pen.M)
    if full[np.unravel_index(np.argmax(np.abs(full)), full.shape)] < 0:
        full, y = -full, -y
    lap = (pen.L @ y).reshape(pen.N + 1, pen.M)
    gap = abs(pen.A_quad(y) - lam * pen.B_quad(y)) / pen.B_quad(y)
    xy = pen.x.reshape(pen.N + 1, pen.M, 2)
    eig = MappedField(domain, pen.rho, pen.theta, full, lap, xy[..., 0], xy[..., 1], pen.w.reshape(pen.N + 1, pen.M))
    return EigResult(lam, eig, gap, res, it, (pen.N, pen.M), shift)


# --- shape scan --------------------------------------------------------------------------


def ellipse_family(ratios=(1.0, 1.1, 1.25, 1.5), area=math.pi):
    """Ellipses of fixed area with the given axis ratios, as (ratio, domain)."""
    out = []
    for q in ratios:
        if q < 1:
            raise DomainError("axis ratios must be >= 1")
        a = math.sqrt(area / math.pi * q)
        b = area / (math.pi * a)
        out.append((float(q), PlateDomain.disk(a) if q == 1 else PlateDomain.ellipse(a, b)))
    return out


@dataclass
class ScanTable:
    rows: list
    disk_minimal: bool
    argmin: object
    mesh: tuple

    def ranking(self):
        return [r["family_param"] for r in sorted(self.rows, key=lambda r: r["area_lambda1"])]

    def to_csv(self):
        buf = io.StringIO()
        buf.write("#schema=fbplab/buckling_scan/v1\n")
        writer = csv.DictWriter(buf, fieldnames=SCAN_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in self.rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
        return buf.getvalue()


def _scan_row(args):
    param, domain, mesh = args
    res = lambda1_numeric(domain, mesh)
    return {
        "family_param": param,
        "area": domain.area,
        "lambda1": res.lambda1,
        "area_lambda1": domain.area * res.lambda1,
        "mesh": "x".join(str(m) for m in res.mesh),
        "residual": res.rayleigh_residual,
    }


def disk_optimality_scan(family, mesh=64, jobs=1, rel_tol=1e-9):
    """|Omega| Lambda_1 over a family of (param, domain) pairs.

    ``disk_minimal`` says whether a disk member attains the smallest value
    (up to ``rel_tol``). Evidence only: a finite family at one resolution.
    """
    family = list(family)
    if not family:
        raise PreconditionError("empty family")
    args = [(p, d, mesh) for p, d in family]
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(jobs) as pool:
            rows = list(pool.map(_scan_row, args))
    else:
        rows = [_scan_row(a) for a in args]
    best = min(r["area_lambda1"] for r in rows)
    disk_vals = [r["area_lambda1"] for r, (_, d) in zip(rows, family) if d.kind == "disk"]
    disk_minimal = bool(disk_vals) and min(disk_vals) <= best * (1 + rel_tol)
    argmin = min(rows, key=lambda r: r["area_lambda1"])["family_param"]
    return ScanTable(rows, disk_minimal, argmin, _mesh_sizes(mesh))


# --- quasi-minimality ----------------------------------------------------------------------


@dataclass(frozen=True)
class Bump:
    """amplitude * beta((x - cx)/s) beta((y - cy)/s), beta(t) = (1 - t^2)^4 on |t| < 1."""

    center: tuple
    scale: float
    amplitude: float

    def evaluate(self, x, y):
        X = (np.asarray(x) - self.center[0]) / self.scale
        Y = (np.asarray(y) - self.center[1]) / self.scale
        inX, inY = np.abs(X) < 1, np.abs(Y) < 1
        bx = np.where(inX, (1 - X * X) ** 4, 0.0)
        by = np.where(inY, (1 - Y * Y) ** 4, 0.0)
        bxx = np.where(inX, (1 - X * X) ** 2 * (56 * X * X - 8), 0.0)
        byy = np.where(inY, (1 - Y * Y) ** 2 * (56 * Y * Y - 8), 0.0)
        phi = self.amplitude * bx * by
        lap = self.amplitude * (bxx * by + bx * byy) / self.scale**2
        return phi, lap

    def support_radius(self, p):
        """Farthest support point from p (the square's far corner)."""
        dx = abs(self.center[0] - p[0]) + self.scale
        dy = abs(self.center[1] - p[1]) + self.scale
        return math.hypot(dx, dy)

    def scaled(self, s):
        return Bump(self.center, self.scale, self.amplitude * s)


def bump_library(p, r, amplitude=1e-2):
    """Tensor-product bumps at 3 scales x 5 locations inside D_{p,r}."""
    out = []
    for frac in (0.15, 0.25, 0.35):
        s = frac * r
        for dx, dy in ((0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)):
            c = (p[0] + 0.4 * r * dx, p[1] + 0.4 * r * dy)
            out.append(Bump(c, s, amplitude))
    return out


@dataclass
class QuasiminReport:
    center: tuple
    radius: float
    mu: float
    margins: list
    worst_margin: float
    passes: bool

    def to_json(self):
        return {
            "center": list(self.center), "radius": self.radius, "mu": self.mu,
            "margins": self.margins, "worst_margin": self.worst_margin, "passes": self.passes,
        }


def _disk_rule(p, r, n_r=48, n_t=96):
    s, ws = gauss_legendre(0.0, r, n_r)
    t = np.arange(n_t) * 2 * np.pi / n_t
    S, Tt = np.meshgrid(s, t, indexing="ij")
    w = (ws * s)[:, None] * np.full(n_t, 2 * np.pi / n_t)[None, :]
    return p[0] + S * np.cos(Tt), p[1] + S * np.sin(Tt), w


def quasiminimality_check(eig, perturbations=None, disk=None, mu=None, amplitude=1e-2):
    """Worst margin E(u; D) - E(v; D) - mu ||v - u|| over perturbations v = u + phi.

    E(u; D) = int_D |Delta u|^2 + |{u != 0} cap D|, with u the eigenfield
    scaled to int |grad u|^2 = 1. Default mu = 2 Lambda ||Delta u||_{L^2(D)},
    the first-order constant for perturbations inside the plate. Without
    ``disk`` the check sweeps D_{0,r} for r in QUASIMIN_RADII and returns a
    list of reports.
    """
    if disk is None:
        return [quasiminimality_check(eig, perturbations, ((0.0, 0.0), r), mu, amplitude) for r in QUASIMIN_RADII]
    p, r = disk
    p = (float(p[0]), float(p[1]))
    if r <= 0:
        raise DomainError("disk radius must be positive")
    field_ = eig.eigenfield
    umax = float(np.max(np.abs(field_.values)))
    if perturbations is None:
        perturbations = bump_library(p, r, amplitude * umax)
    for phi in perturbations:
        if phi.support_radius(p) >= r:
            raise DomainError("perturbation is not compactly supported in the disk")
    X, Y, w = _disk_rule(p, r)
    lap_u = field_.sample(X, Y, "laplacian")
    inside = field_.domain.contains(X, Y)
    lap_norm = math.sqrt(float(np.sum(w * lap_u**2)))
    if mu is None:
        mu = 2.0 * eig.lambda1 * lap_norm
    margins = []
    for phi in perturbations:
        val, lap = phi.evaluate(X, Y)
        dE = float(np.sum(w * (2 * lap_u * lap + lap * lap)))
        gained = float(np.sum(w * ((val != 0) & ~inside)))
        l2 = math.sqrt(float(np.sum(w * val * val)))
        margins.append(-(dE + gained) - mu * l2)
    worst = max(margins) if margins else 0.0
    return QuasiminReport(p, float(r), float(mu), margins, worst, bool(worst <= 0.0))
