"""Batch runner: ``fbplab <subcommand> [--config PATH] [--out DIR] [key=value ...]``.

Configs are flat ``key=value`` text (``#`` starts a comment); keys on the
command line override the file. Every run writes its outputs plus
``manifest.json`` into ``--out``. Exit codes: 0 success, 2 precondition
error, 3 numerical failure.
"""

import argparse
import hashlib
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .angular_modes import buckling_mode, homogeneous_W, homogeneous_profile, solve_t1
from .buckling import disk_optimality_scan, ellipse_family
from .epiperimetric import epiperimetric_report
from .errors import NumericalError, PreconditionError
from .fbp_solver import SolverConfig, blow_up_sequence, minimize_energy, radial_boundary
from .quadrature import simpson_uniform
from .weiss_energy import (
    BoundaryTrace,
    DiskField,
    GoursatCoefficients,
    PolarGrid,
    N_functional,
    N_prime,
    R_functional,
    W0_goursat,
    energy_E,
    weiss_W,
)

# One table for every numeric default, keyed by subcommand.
DEFAULTS = {
    "modes": {"omega": "pi", "n_max": 4},
    "homog": {"kinds": "flat,angular,nodal,isolated", "lambda": 1.0, "a": 1.0, "b": 0.3, "c": 0.0},
    "weiss": {"profile": "flat", "field": "", "r_grid": "0.2,0.4,0.6,0.8", "n_r": 256, "n_theta": 512, "lambda": 1.0, "a": 1.0, "b": 0.3, "c": 0.0},
    "goursat": {"count": 10, "n_max": 8, "r": 0.7, "n_r": 256, "n_theta": 512},
    "epi": {"profile": "flat", "Theta": "pi", "amplitude": 1.0, "n_max": 32},
    "solve": {
        "g0": 1e-3, "h0": 0.0, "profile": "", "scale": 1.0, "lambda": 1.0, "mesh": 128, "n_r": 128, "n_theta": 256,
        "rule": "cellwise-threshold", "tol_energy": 1e-10, "max_outer_iters": 80, "blowup_radii": "0.8,0.6,0.4,0.2",
    },
    "buckling": {"family": "ellipse", "ratios": "1,1.1,1.25,1.5", "mesh": 64},
}


@dataclass
class RunManifest:
    subcommand: str
    config: dict
    version: str = __version__
    input_hashes: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def parse_config_text(text):
    out = {}
    for k, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise PreconditionError(f"config line {k}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def _coerce(default, value):
    if isinstance(default, bool):
        return str(value).lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return str(value)


def resolve_config(name, file_values, overrides):
    cfg = dict(DEFAULTS[name])
    for source in (file_values, overrides):
        for key, value in source.items():
            if key not in cfg:
                raise PreconditionError(f"unknown key {key!r} for {name}; known: {sorted(cfg)}")
            try:
                cfg[key] = _coerce(DEFAULTS[name][key], value)
            except ValueError as exc:
                raise PreconditionError(f"bad value for {key!r}: {value!r}") from exc
    return cfg


def _angle(text):
    named = {"pi": np.pi, "2pi": 2 * np.pi, "t1": solve_t1().t1}
    key = str(text).strip().lower()
    return named[key] if key in named else float(key)


def _floats(text):
    return [float(s) for s in str(text).split(",") if s.strip()]


def _profile(cfg, kind=None):
    kind = kind or cfg["profile"]
    if kind == "isolated":
        return homogeneous_profile(kind, abc=(cfg["a"], cfg["b"], cfg["c"]))
    if kind == "nodal":
        return homogeneous_profile(kind, lambda_=cfg.get("lambda", 1.0))
    return homogeneous_profile(kind)


def _csv(path, schema, header, rows):
    lines = [f"#schema=fbplab/{schema}/v1", ",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else f"{v:.17g}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


# -- subcommands: each returns {output name: writer(path)} -------------------------------------


def cmd_modes(cfg, jobs):
    omega, n_max = _angle(cfg["omega"]), cfg["n_max"]
    rows = []
    for n in range(1, n_max + 1):
        mode = buckling_mode(n, omega)
        _, db = mode.samples(1, 8192)
        norm = simpson_uniform(db * db, 0.0, omega)
        rows.append((str(n), mode.mu, norm, mode.l2_norm_sq * mode.mu))
    return {"modes.csv": lambda p: _csv(p, "modes", ("n", "mu", "norm", "L2norm_mu"), rows)}


def cmd_homog(cfg, jobs):
    rows = []
    for kind in (k.strip() for k in cfg["kinds"].split(",") if k.strip()):
        prof = _profile(cfg, kind)
        rows.append((kind, homogeneous_W(prof), prof.support_measure))
    return {"homog.csv": lambda p: _csv(p, "homog", ("kind", "W", "support_measure"), rows)}


def cmd_weiss(cfg, jobs, inputs):
    lam = cfg["lambda"]
    if cfg["field"]:
        fld = DiskField.load(cfg["field"])
        inputs[cfg["field"]] = _sha256(cfg["field"])
    else:
        fld = DiskField.from_profile(_profile(cfg), PolarGrid(cfg["n_r"], cfg["n_theta"]))
    rows = []
    for r in _floats(cfg["r_grid"]):
        rows.append((r, weiss_W(fld, r, lam), N_functional(fld, r), R_functional(fld, r), energy_E(fld, lam, r) / r**2, r * N_prime(fld, r)))
    # W = E/r^2 + r N' + R row by row, up to quadrature slack.
    return {"weiss.csv": lambda p: _csv(p, "weiss", ("r", "W", "N", "R", "E_over_r2", "r_dN"), rows)}


def cmd_goursat(cfg, jobs, seed):
    rng = np.random.default_rng(seed)
    grid = PolarGrid(cfg["n_r"], cfg["n_theta"])
    rows = []
    for k in range(cfg["count"]):
        g = GoursatCoefficients.random(rng, n_max=cfg["n_max"])
        exact = W0_goursat(g, cfg["r"])
        numeric = weiss_W(DiskField.from_goursat(g, grid), cfg["r"], 0.0)
        rows.append((str(k), exact, numeric, abs(exact - numeric) / (1 + abs(exact))))
    return {"goursat.csv": lambda p: _csv(p, "goursat", ("index", "W0_closed", "W0_quadrature", "rel_diff"), rows)}


def cmd_epi(cfg, jobs):
    prof = _profile(cfg)
    amp = cfg["amplitude"]
    fn = prof.angular_fn
    u = lambda x, m=0: amp * fn(x, m)
    rep = epiperimetric_report((u, None), _angle(cfg["Theta"]), n_max=cfg["n_max"])
    return {"epi.json": lambda p: Path(p).write_text(json.dumps(rep.to_json(), indent=2, sort_keys=True) + "\n")}


def cmd_solve(cfg, jobs, seed):
    if cfg["profile"]:
        prof_field = DiskField.from_profile(_profile({**cfg, "lambda": 1.0}), PolarGrid(32, 256))
        trace = BoundaryTrace.from_field(prof_field, n_max=16)
        trace = BoundaryTrace(1.0, cfg["scale"] * trace.fourier_u, cfg["scale"] * trace.fourier_ur, cfg["scale"] * trace.fourier_urr, trace.n_max)
    else:
        trace = radial_boundary(cfg["g0"], cfg["h0"])
    config = SolverConfig(
        lam=cfg["lambda"], n_r=cfg["n_r"], n_theta=cfg["n_theta"], mesh=cfg["mesh"], max_outer_iters=cfg["max_outer_iters"],
        support_update_rule=cfg["rule"], tol_energy=cfg["tol_energy"], seed=seed,
    )
    res = minimize_energy(trace, config)
    blow = []
    for b in blow_up_sequence(res, (0.0, 0.0), [r for r in _floats(cfg["blowup_radii"]) if r >= 4 * res.state.lattice.h]):
        blow.append((b.blow_up[1], b.W_at_one))
    summary = {**res.manifest(), "support_in_half_disk": res.support_in_disk(0.5), "energy": res.energy}

    def write_field(p):
        res.field.save(p)

    return {
        "field.csv": write_field,
        "solve.json": lambda p: Path(p).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n"),
        "W_profile.csv": lambda p: _csv(p, "w_profile", ("r", "W"), [tuple(x) for x in res.W_profile]),
        "blowup.csv": lambda p: _csv(p, "blowup", ("r", "W_at_one"), blow),
    }


def cmd_buckling(cfg, jobs):
    if cfg["family"] != "ellipse":
        raise PreconditionError("only the ellipse family is available")
    table = disk_optimality_scan(ellipse_family(tuple(_floats(cfg["ratios"]))), cfg["mesh"], jobs=jobs)
    return {"buckling.csv": lambda p: Path(p).write_text(table.to_csv())}


COMMANDS = {
    "modes": lambda cfg, a, inputs: cmd_modes(cfg, a.jobs),
    "homog": lambda cfg, a, inputs: cmd_homog(cfg, a.jobs),
    "weiss": lambda cfg, a, inputs: cmd_weiss(cfg, a.jobs, inputs),
    "goursat": lambda cfg, a, inputs: cmd_goursat(cfg, a.jobs, a.seed),
    "epi": lambda cfg, a, inputs: cmd_epi(cfg, a.jobs),
    "solve": lambda cfg, a, inputs: cmd_solve(cfg, a.jobs, a.seed),
    "buckling": lambda cfg, a, inputs: cmd_buckling(cfg, a.jobs),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="fbplab", description="Experiments for the fourth-order Alt-Caffarelli problem.")
    parser.add_argument("--version", action="version", version=f"fbplab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("overrides", nargs="*", metavar="key=value", help="config overrides")
        p.add_argument("--config", type=Path, help="flat key=value config file")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory (created if missing)")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")
        p.add_argument("--seed", type=int, default=0, help="seed for randomized parts")
    return parser


def run(argv=None):
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    inputs = {}
    file_values = {}
    if args.config is not None:
        if not args.config.is_file():
            raise PreconditionError(f"config file {args.config} not found")
        file_values = parse_config_text(args.config.read_text())
        inputs[str(args.config)] = _sha256(args.config)
    overrides = parse_config_text("\n".join(args.overrides))
    cfg = resolve_config(args.command, file_values, overrides)
    if args.jobs < 1:
        raise PreconditionError("--jobs must be >= 1")
    args.out.mkdir(parents=True, exist_ok=True)
    if (args.out / "manifest.json").exists() and not args.force:
        raise PreconditionError(f"{args.out} already holds a run; pass --force")
    writers = COMMANDS[args.command](cfg, args, inputs)
    targets = [args.out / name for name in writers] + [args.out / "manifest.json"]
    existing = [str(t) for t in targets if t.exists()]
    if existing and not args.force:
        raise PreconditionError(f"refusing to overwrite {existing}; pass --force")
    outputs = {}
    for name, write in writers.items():
        path = args.out / name
        write(path)
        outputs[name] = _sha256(path)
        sidecar = path.with_suffix(".json")
        if name.endswith(".csv") and sidecar.exists() and sidecar.name not in writers:
            outputs[sidecar.name] = _sha256(sidecar)
    manifest = RunManifest(args.command, {**cfg, "seed": args.seed, "jobs": args.jobs}, __version__, inputs, outputs, time.perf_counter() - start)
    (args.out / "manifest.json").write_text(manifest.to_json() + "\n")
    return manifest


def main(argv=None):
    try:
        manifest = run(argv)
    except PreconditionError as exc:
        print(f"fbplab: precondition error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"fbplab: numerical failure: {exc}", file=sys.stderr)
        return 3
    for name in manifest.outputs:
        print(name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
