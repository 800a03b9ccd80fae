"""Discrete minimization of E_λ(u) = ∫_D |Δu|^2 + λ|{u != 0}| on the unit disk.

The unknowns live on a uniform Cartesian lattice covering the disk plus a
two-cell collar. Collar nodes (r >= 1) are fixed to the first-order
extension g + (r - 1) h of the clamped data; nodes inside the disk are
either free or pinned to zero. Zero-pinned nodes form the complement of the
discrete support, and the energy is the cell-weighted sum of (Δ_h u)^2 with
the five-point Laplacian, so zero extension enforces u = |∇u| = 0 on the
free boundary without penalties. Minimizing over the free nodes gives the
13-point biharmonic system L^T W L.

The support is updated by an alternating, energy-decreasing heuristic; its
output is a candidate minimizer, not a certified one.
"""

import json
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import RectBivariateSpline
from scipy.optimize import minimize_scalar

from .errors import NumericalError, PreconditionError, ResolutionError
from .weiss_energy import TWO_PI, BoundaryTrace, DiskField, GoursatCoefficients, PolarGrid, W0_goursat, weiss_W

SUPPORT_RULES = ("cellwise-threshold", "radial-exact")
DEFAULT_INIT_RADII = (0.0, 0.2, 0.4, 0.55, 0.7, 0.8, 0.87, 0.92, 0.95, 0.97, 0.985, 1.0)
LABEL = "candidate minimizer (alternating support heuristic)"


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings.

    ``mesh`` is the number of Cartesian nodes per side; ``n_r`` and
    ``n_theta`` size the polar grid used for W quadrature of the output.
    """

    lam: float = 1.0
    n_r: int = 128
    n_theta: int = 256
    mesh: int = 128
    max_outer_iters: int = 80
    support_update_rule: str = "cellwise-threshold"
    tol_energy: float = 1e-10
    seed: int = 0
    init_radii: tuple = DEFAULT_INIT_RADII

    def __post_init__(self):
        if not self.lam >= 0:
            raise PreconditionError("lambda must be >= 0")
        if min(self.n_r, self.n_theta, self.mesh) < 16:
            raise PreconditionError("grid sizes must be >= 16")
        if self.n_theta % 2:
            raise PreconditionError("n_theta must be even")
        if not self.tol_energy > 0:
            raise PreconditionError("tol_energy must be positive")
        if self.support_update_rule not in SUPPORT_RULES:
            raise PreconditionError(f"support_update_rule must be one of {SUPPORT_RULES}")
        if self.max_outer_iters < 1:
            raise PreconditionError("max_outer_iters must be >= 1")


# -- boundary data ----------------------------------------------------------------------


def radial_boundary(g0, h0, n_max=0):
    """Trace of the constant data (u, u_r) = (g0, h0) on the unit circle."""
    n = 2 * n_max + 1
    return BoundaryTrace.from_samples(np.full(max(n, 1), float(g0)), np.full(max(n, 1), float(h0)), n_max=n_max)


def _as_trace(boundary, n_check=1024):
    if isinstance(boundary, BoundaryTrace):
        if abs(boundary.radius - 1.0) > 1e-12:
            raise PreconditionError("boundary trace must be taken at radius 1")
        return boundary
    try:
        g, h = boundary
    except (TypeError, ValueError) as exc:
        raise PreconditionError("boundary must be a BoundaryTrace or a pair (g, h)") from exc
    g, h = np.atleast_1d(np.asarray(g, float)), np.atleast_1d(np.asarray(h, float))
    if g.size == 1 and h.size == 1:
        return radial_boundary(g[0], h[0])
    if g.shape != h.shape:
        raise PreconditionError("g and h must have the same number of samples")
    trace = BoundaryTrace.from_samples(g, h)
    theta = np.arange(g.size) * TWO_PI / g.size
    gg, hh = _trace_values(trace, theta)
    scale = max(1.0, float(np.max(np.abs(g))), float(np.max(np.abs(h))))
    if max(np.max(np.abs(gg - g)), np.max(np.abs(hh - h))) > 1e-8 * scale:
        raise PreconditionError(f"boundary samples are not band-limited to n_max={trace.n_max}")
    return trace


def _trace_values(trace, theta):
    e = np.exp(1j * np.outer(theta, trace.n))
    return np.real(e @ trace.fourier_u), np.real(e @ trace.fourier_ur)


# -- lattice -------------------------------------------------------------------------------


@dataclass
class Lattice:
    n: int
    h: float
    x: np.ndarray
    y: np.ndarray
    r: np.ndarray
    area: np.ndarray
    inside: np.ndarray
    collar: np.ndarray
    energy_rows: np.ndarray
    L: sp.csr_matrix

    @property
    def coords(self):
        return np.linspace(self.x.min(), self.x.max(), self.n)


def _cell_disk_area(x, y, h, sub=16):
    """|([x ± h/2] x [y ± h/2]) ∩ D_1| by midpoint subsampling of boundary cells."""
    r = np.hypot(x, y)
    area = np.where(r < 1 - h / np.sqrt(2), h * h, 0.0)
    edge = np.abs(r - 1) <= h / np.sqrt(2)
    s = (np.arange(sub) + 0.5) / sub - 0.5
    ox, oy = np.meshgrid(s * h, s * h, indexing="ij")
    xe, ye = x[edge][:, None], y[edge][:, None]
    hits = np.hypot(xe + ox.ravel(), ye + oy.ravel()) < 1
    area[edge] = np.mean(hits, axis=1) * h * h
    return area


def build_lattice(n):
    """Uniform lattice on [-a, a]^2 with a two-cell collar around the unit disk."""
    a = 1.0 / (1.0 - 4.0 / (n - 1))
    c = np.linspace(-a, a, n)
    h = c[1] - c[0]
    X, Y = np.meshgrid(c, c, indexing="ij")
    x, y = X.ravel(), Y.ravel()
    r = np.hypot(x, y)
    area = _cell_disk_area(x, y, h)
    inside = r < 1
    # Every outside node carries extension data so interpolation near r = 1 sees no spurious zeros;
    # only those with area > 0 enter the energy.
    collar = ~inside
    d2 = sp.diags([np.ones(n - 1), -2 * np.ones(n), np.ones(n - 1)], [-1, 0, 1]) / h**2
    eye = sp.identity(n)
    L = (sp.kron(d2, eye) + sp.kron(eye, d2)).tocsr()
    return Lattice(n, h, x, y, r, area, inside, collar, np.nonzero(area > 0)[0], L)


# -- state and energies --------------------------------------------------------------------


@dataclass
class CartesianState:
    lattice: Lattice
    u: np.ndarray
    support: np.ndarray  # boolean over lattice nodes, True on free nodes inside the disk
    lam: float

    def laplacian(self):
        return self.lattice.L @ self.u

    def bulk(self):
        lat = self.lattice
        return float(np.sum(lat.area * (lat.L @ self.u) ** 2))

    def support_area(self):
        lat = self.lattice
        occupied = self.support | (lat.collar & (self.u != 0))
        return float(min(np.sum(lat.area[occupied]), np.pi))

    def energy(self):
        return self.bulk() + self.lam * self.support_area()


def _solve_on_support(lat, fixed, support, lam):
    """Minimize the bulk energy over free nodes; collar nodes take ``fixed``."""
    u = fixed.copy()
    free = np.nonzero(support)[0]
    if free.size:
        rows = lat.energy_rows
        Lr = lat.L[rows]
        w = sp.diags(lat.area[rows])
        Lf = Lr[:, free]
        A = (Lf.T @ w @ Lf).tocsc()
        rhs = -(Lf.T @ (w @ (Lr @ fixed)))
        try:
            lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0, options={"SymmetricMode": True})
            sol = lu.solve(rhs)
        except RuntimeError as exc:
            raise NumericalError(f"biharmonic solve failed: {exc}") from exc
        if not np.all(np.isfinite(sol)):
            raise NumericalError("biharmonic solve returned non-finite values")
        u[free] = sol
    return CartesianState(lat, u, support.copy(), lam)


def _fixed_values(lat, trace):
    fixed = np.zeros(lat.x.size)
    idx = np.nonzero(lat.collar)[0]
    g, h = _trace_values(trace, np.arctan2(lat.y[idx], lat.x[idx]))
    fixed[idx] = g + (lat.r[idx] - 1.0) * h
    return fixed


def _neighbors(lat, idx):
    n = lat.n
    i, j = np.divmod(idx, n)
    out = []
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        ii, jj = i + di, j + dj
        ok = (ii >= 0) & (ii < n) & (jj >= 0) & (jj < n)
        out.append(np.where(ok, ii * n + jj, idx))
    return np.stack(out, axis=1)


def _front_moves(state, hysteresis=2.0):
    """Proposed removals and additions with scores (negative = predicted gain).

    Removal: support nodes whose single-node deletion lowers the energy, or
    front nodes with (Δu)^2 < λ. Addition: zero nodes next to the support
    whose best single-node value gains more than ``hysteresis`` λ a_i, or
    whose neighbouring (Δu)^2 exceeds ``hysteresis`` λ.
    """
    lat, u, S, lam = state.lattice, state.u, state.support, state.lam
    a = lat.area
    lap = lat.L @ u
    p = lat.L.T @ (a * lap)
    q = (lat.L.multiply(lat.L)).T @ a
    nb = _neighbors(lat, np.arange(u.size))
    zero_inside = lat.inside & ~S
    touches_zero = np.any(zero_inside[nb], axis=1)
    touches_supp = np.any((S | (lat.collar & (u != 0)))[nb], axis=1)

    cand = np.nonzero(S)[0]
    single = u[cand] ** 2 * q[cand] - 2 * u[cand] * p[cand] - lam * a[cand]
    shape = np.where(touches_zero[cand], (lap[cand] ** 2 - lam) * a[cand], np.inf)
    score_rm = np.minimum(single, shape)
    keep = score_rm < 0
    removals = (cand[keep], score_rm[keep])

    cand = np.nonzero(zero_inside & touches_supp)[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = np.where(q[cand] > 0, p[cand] ** 2 / q[cand], 0.0)
    lap_nb = np.max(np.where((S | lat.collar)[nb[cand]], lap[nb[cand]] ** 2, 0.0), axis=1)
    score_add = np.minimum(hysteresis * lam * a[cand] - gain, (hysteresis * lam - lap_nb) * a[cand])
    keep = score_add < 0
    additions = (cand[keep], score_add[keep])
    return removals, additions


def _annulus_support(lat, rho):
    return lat.inside & (lat.r > rho)


def _best_annulus(lat, fixed, lam, radii):
    best = None
    for rho in radii:
        st = _solve_on_support(lat, fixed, _annulus_support(lat, rho), lam)
        e = st.energy()
        if best is None or e < best[1] - 1e-15:
            best = (rho, e, st)
    return best


def _radial_exact(lat, fixed, lam, bracket):
    """Annular supports {r > rho} only; ternary search for rho on a h/2 ladder inside ``bracket``."""
    levels = np.arange(bracket[0], bracket[1] + lat.h / 4, lat.h / 2)
    cache = {}

    def energy_at(k):
        if k not in cache:
            cache[k] = _solve_on_support(lat, fixed, _annulus_support(lat, levels[k]), lam)
        return cache[k].energy()

    lo, hi = 0, levels.size - 1
    # Assumes the energy is unimodal in rho across the bracket.
    while hi - lo > 2:
        m1, m2 = lo + (hi - lo) // 3, hi - (hi - lo) // 3
        if energy_at(m1) <= energy_at(m2):
            hi = m2
        else:
            lo = m1
    k = min(range(lo, hi + 1), key=energy_at)
    return cache[k], float(levels[k])


def _cellwise(state, fixed, config, rng):
    """Accept support flips strongest-first, halving the batch until the energy drops."""
    lat, lam = state.lattice, state.lam
    history, converged = [state.energy()], False
    for _ in range(config.max_outer_iters):
        (rm, rm_s), (ad, ad_s) = _front_moves(state)
        moves = np.concatenate([rm, ad])
        scores = np.concatenate([rm_s, ad_s])
        if moves.size == 0:
            converged = True
            break
        # Seeded tie-breaking, then strongest predicted gains first.
        order = np.lexsort((rng.permutation(moves.size), scores))
        moves, accepted = moves[order], None
        take = moves.size
        while take >= 1:
            S = state.support.copy()
            S[moves[:take]] = ~S[moves[:take]]
            trial = _solve_on_support(lat, fixed, S, lam)
            if trial.energy() < history[-1] - 1e-14 * max(1.0, abs(history[-1])):
                accepted = trial
                break
            take //= 2
        if accepted is None:
            converged = True
            break
        state = accepted
        history.append(state.energy())
        if history[-2] - history[-1] < config.tol_energy:
            converged = True
            break
    return state, history, converged


def _prolong_support(coarse, lat):
    """Fine support: nodes whose bilinear coarse indicator is positive, i.e. a one-layer dilation."""
    clat = coarse.lattice
    c = clat.coords
    ind = RectBivariateSpline(c, c, coarse.support.reshape(clat.n, clat.n).astype(float), kx=1, ky=1)
    return lat.inside & (ind.ev(lat.x, lat.y) > 1e-12)


def _mesh_ladder(mesh, coarsest=64):
    ladder = [mesh]
    while ladder[-1] // 2 >= coarsest:
        ladder.append(ladder[-1] // 2)
    return ladder[::-1]


# -- results --------------------------------------------------------------------------------


@dataclass
class SolveResult:
    field: DiskField
    energy_history: np.ndarray
    support_area: float
    converged: bool
    W_profile: np.ndarray
    state: CartesianState = field(repr=False, default=None)
    config: SolverConfig = None
    label: str = LABEL

    @property
    def energy(self):
        return float(self.energy_history[-1])

    def support_in_disk(self, radius):
        """True when some support node lies in the open disk of this radius."""
        lat = self.state.lattice
        return bool(np.any(self.state.support & (lat.r < radius)))

    def sampler(self):
        return lattice_sampler(self.state)

    def manifest(self):
        return {
            "label": self.label,
            "config": asdict(self.config) if self.config else None,
            "energy_history": [float(e) for e in self.energy_history],
            "support_area": self.support_area,
            "converged": self.converged,
            "W_profile": [[float(r), float(w)] for r, w in self.W_profile],
        }

    def to_json(self):
        return json.dumps(self.manifest(), indent=2, sort_keys=True)


def lattice_sampler(state):
    """Bicubic spline of the lattice values, exactly zero inside lattice cells with no support node.

    The spline is global, so without the mask it leaks round-off into the zero set.
    """
    lat = state.lattice
    c = lat.coords
    spline = RectBivariateSpline(c, c, state.u.reshape(lat.n, lat.n), kx=3, ky=3)
    zero = ~(state.support | lat.collar).reshape(lat.n, lat.n)
    indicator = RectBivariateSpline(c, c, zero.astype(float), kx=1, ky=1)

    def sample(x, y):
        vals = spline.ev(x, y)
        vals[indicator.ev(x, y) >= 1 - 1e-12] = 0.0
        return vals

    return sample


def to_disk_field(state, grid):
    """Cubic spline interpolation of the lattice values onto a polar grid."""
    lat = state.lattice
    rr, tt = grid.mesh()
    vals = lattice_sampler(state)(rr * np.cos(tt), rr * np.sin(tt))
    # Zeros are exact off the support, so the near-exact support rule applies.
    return DiskField(grid, vals, h=max(float(np.max(np.diff(grid.r))), lat.h), exact_support=True)


def minimize_energy(boundary, config=SolverConfig()):
    """Alternating minimization: biharmonic solve on the support, then support update."""
    trace = _as_trace(boundary)
    lam = config.lam
    radii = tuple(sorted(set(config.init_radii)))

    rng = np.random.default_rng(config.seed)
    state = rho = None
    # Coarse-to-fine continuation: the coarsest level scans annuli, finer levels start from
    # the prolonged support (or a narrow rho bracket) so the front only moves a few cells.
    for m in _mesh_ladder(config.mesh):
        lat = build_lattice(m)
        fixed = _fixed_values(lat, trace)
        if config.support_update_rule == "radial-exact":
            if rho is None:
                rho0, _, _ = _best_annulus(lat, fixed, lam, radii)
                k = radii.index(rho0)
                bracket = (radii[max(k - 1, 0)], radii[min(k + 1, len(radii) - 1)])
            else:
                bracket = (max(rho - 2 * h_prev, 0.0), min(rho + 2 * h_prev, 1.0))
            state, rho = _radial_exact(lat, fixed, lam, bracket)
            h_prev = lat.h
            history, converged = [state.energy()], True
            continue
        if state is None:
            rho0, _, _ = _best_annulus(lat, fixed, lam, radii)
            # Start one scan level outside the best annulus so the front mostly retreats.
            k = radii.index(rho0)
            init = _annulus_support(lat, radii[max(k - 1, 0)])
        else:
            init = _prolong_support(state, lat)
        state = _solve_on_support(lat, fixed, init, lam)
        state, history, converged = _cellwise(state, fixed, config, rng)
    hist = np.array(history)
    if np.any(np.diff(hist) > 1e-12 * max(1.0, float(np.max(np.abs(hist))))):
        raise NumericalError("energy increased during the support iteration")
    grid = PolarGrid(config.n_r, config.n_theta)
    fld = to_disk_field(state, grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        W = fld.W_profile(lam)
    prof = np.column_stack([grid.r[1:], W[1:]])
    return SolveResult(fld, hist, state.support_area(), converged, prof, state, config)


# -- blow-ups and monotonicity -------------------------------------------------------------------


def _sampler(obj):
    if isinstance(obj, SolveResult):
        return obj.sampler(), obj.state.lattice.h
    if isinstance(obj, DiskField) and obj.evaluator is not None:
        fn = obj.evaluator
        return (lambda x, y: fn(np.hypot(x, y), np.arctan2(y, x))["u"]), 0.0
    raise PreconditionError("blow-ups need a solver result or a closed-form DiskField")


def blow_up_sequence(result, p, radii, grid=None, lam=1.0):
    """u_{p,r}(z) = u(p + r z) / r^2 on a polar grid, each tagged with W(u_{p,r}, 1)."""
    sample, h = _sampler(result)
    p = np.asarray(p, float)
    grid = grid or PolarGrid(64, 128)
    rr, tt = grid.mesh()
    out = []
    for r in np.atleast_1d(np.asarray(radii, float)):
        if not r > 0:
            raise PreconditionError("radii must be positive")
        if np.hypot(*p) + r > 1 + 1e-12:
            raise PreconditionError(f"p + {r:g} D_1 leaves the unit disk")
        if h and r < 4 * h:
            raise ResolutionError(f"radius {r:g} is below four lattice cells ({4 * h:.3g})")
        vals = sample(p[0] + r * rr * np.cos(tt), p[1] + r * rr * np.sin(tt)) / r**2
        fld = DiskField(grid, vals, h=max(float(np.max(np.diff(grid.r))), h / r), exact_support=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            fld.W_at_one = float(fld.W_profile(lam)[-1])
        fld.blow_up = (tuple(p), float(r))
        out.append(fld)
    return out


@dataclass
class MonotonicityReport:
    r: np.ndarray
    W: np.ndarray
    slack: float
    violations: list
    source: str

    @property
    def passes(self):
        return not self.violations

    def to_csv(self):
        lines = ["#schema=fbplab/monotonicity/v1", "r,W"]
        lines += [f"{r:.17g},{w:.17g}" for r, w in zip(self.r, self.W)]
        return "\n".join(lines) + "\n"


def grid_slack(fld, factor=5.0):
    """Allowed decrease of W between neighbouring radii: factor * h * (1 + max|Δu|^2)."""
    return float(factor * fld.h * (1.0 + np.max(fld.lap**2)))


def monotonicity_experiment(result, r_grid, lam=1.0, slack=None):
    """Check W(u, r_i) <= W(u, r_{i+1}) + slack along ``r_grid``.

    Goursat coefficients use the closed-form W_0 with slack 1e-9; closed-form
    fields carry quadrature error and get 1e-6 (1 + max|W|); sampled fields and
    solver outputs get the grid slack above.
    """
    r_grid = np.sort(np.asarray(r_grid, float))
    if isinstance(result, GoursatCoefficients):
        if not result.is_center_flat():
            raise PreconditionError("Goursat field is not center-flat")
        W = np.array([W0_goursat(result, r) for r in r_grid])
        tol, source = 1e-9 if slack is None else slack, "goursat"
    else:
        fld = result.field if isinstance(result, SolveResult) else result
        if not fld.center_flat:
            raise PreconditionError("field is not center-flat")
        W = np.array([weiss_W(fld, r, lam) for r in r_grid])
        if slack is not None:
            tol = slack
        else:
            tol = 1e-6 * (1 + float(np.max(np.abs(W)))) if fld.evaluator is not None else grid_slack(fld)
        source = "closed-form" if fld.evaluator is not None else "sampled"
    drops = W[:-1] - W[1:]
    viol = [(int(i), float(d)) for i, d in enumerate(drops) if d > tol]
    return MonotonicityReport(r_grid, W, float(tol), viol, source)


# -- radial oracle -------------------------------------------------------------------------------


@dataclass(frozen=True)
class RadialSolution:
    """Exact minimizer among radial fields: u = A + B r^2 + C log r + D r^2 log r on {rho < r < 1}."""

    g0: float
    h0: float
    lam: float
    kind: str  # "empty", "full" or "annulus"
    rho: float
    coeffs: tuple
    energy: float

    def evaluate(self, r, theta=None):
        r = np.asarray(r, float)
        A, B, C, D = self.coeffs
        out = {k: np.zeros_like(r) for k in ("u", "ur", "urr")}
        if self.kind == "empty":
            pass
        elif self.kind == "full":
            out["u"], out["ur"], out["urr"] = A + B * r**2, 2 * B * r, 2 * B + 0 * r
        else:
            on = r > self.rho
            rs = np.where(on, r, 1.0)
            lg = np.log(rs)
            u = A + B * rs**2 + C * lg + D * rs**2 * lg
            ur = 2 * B * rs + C / rs + D * (2 * rs * lg + rs)
            urr = 2 * B - C / rs**2 + D * (2 * lg + 3)
            out = {k: np.where(on, v, 0.0) for k, v in (("u", u), ("ur", ur), ("urr", urr))}
        z = np.zeros_like(r)
        out.update(ut=z, urt=z, utt=z)
        return out

    def laplacian(self, r):
        d = self.evaluate(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            return d["urr"] + np.where(r > 0, d["ur"] / np.where(r > 0, r, 1), d["urr"])

    def as_disk_field(self, grid):
        return DiskField.from_function(lambda r, t: self.evaluate(np.broadcast_to(r, np.broadcast(r, t).shape)), grid)


def _annulus_solution(g0, h0, rho):
    """Coefficients with u(rho) = u'(rho) = 0, u(1) = g0, u'(1) = h0."""
    lr = np.log(rho)
    M = np.array(
        [
            [1.0, rho**2, lr, rho**2 * lr],
            [0.0, 2 * rho, 1 / rho, 2 * rho * lr + rho],
            [1.0, 1.0, 0.0, 0.0],
            [0.0, 2.0, 1.0, 1.0],
        ]
    )
    return np.linalg.solve(M, np.array([0.0, 0.0, g0, h0]))


def _annulus_energy(g0, h0, lam, rho):
    A, B, C, D = _annulus_solution(g0, h0, rho)
    # Δu = a + b log r with a = 4B + 4D, b = 4D.
    a, b = 4 * B + 4 * D, 4 * D
    lr, r2 = np.log(rho), rho * rho
    i0 = 0.5 * (1 - r2)
    i1 = -0.25 - (0.5 * r2 * lr - 0.25 * r2)
    i2 = 0.25 - (0.5 * r2 * lr**2 - 0.5 * r2 * lr + 0.25 * r2)
    return TWO_PI * (a * a * i0 + 2 * a * b * i1 + b * b * i2) + lam * np.pi * (1 - r2)


def radial_oracle(g0, h0, lam=1.0, n_scan=4000, min_gap=1e-5):
    """Minimize the energy over radial fields with (u, u_r) = (g0, h0) on the unit circle."""
    g0, h0, lam = float(g0), float(h0), float(lam)
    if lam < 0:
        raise PreconditionError("lambda must be >= 0")
    if g0 == 0 and h0 == 0:
        return RadialSolution(g0, h0, lam, "empty", 1.0, (0.0, 0.0, 0.0, 0.0), 0.0)
    B = h0 / 2
    full = RadialSolution(g0, h0, lam, "full", 0.0, (g0 - B, B, 0.0, 0.0), float(16 * np.pi * B * B + lam * np.pi))
    if lam == 0:
        return full
    gaps = np.geomspace(min_gap, 1.0 - 1e-9, n_scan)
    E = np.array([_annulus_energy(g0, h0, lam, 1 - g) for g in gaps])
    k = int(np.argmin(E))
    lo, hi = gaps[max(k - 1, 0)], gaps[min(k + 1, gaps.size - 1)]
    res = minimize_scalar(lambda g: _annulus_energy(g0, h0, lam, 1 - g), bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
    g_best = res.x if res.fun <= E[k] else gaps[k]
    rho = 1 - g_best
    e_ann = float(_annulus_energy(g0, h0, lam, rho))
    if full.energy <= e_ann:
        return full
    return RadialSolution(g0, h0, lam, "annulus", float(rho), tuple(float(c) for c in _annulus_solution(g0, h0, rho)), e_ann)
