"""Experiment configuration, drivers, CSV/JSON output and checkpoints."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .bumps import Bump, make_bump, support_ball
from .energy import COLUMNS, accumulate_ghost, compute_report
from .grid import UniformGrid
from .integrator import (
    IntegratorSettings,
    StateHistory,
    StateSnapshot,
    accelerations,
    active_bounds,
    cfl_dt,
    step_rk4,
)
from .waves import THRESHOLDS, BackgroundField, BackgroundSpec, bounds_audit, lambda_norms

log = logging.getLogger("faddeevlab")

KINDS = ("geodesic_exactness", "convergence_order", "stability_scaling", "bounds_audit",
         "decay_profile", "ghost_integral", "identity_suite")

CHECKPOINT_VERSION = 1

# families whose W^{k,p} norms are finite for every k used by the regularity norm
_REG_ORDER = {2: 10, 3: 8}


class ConfigError(ValueError):
    pass


class ThresholdError(ConfigError):
    pass


class CheckpointError(RuntimeError):
    pass


def _default_perturbation(dim: int, radial: bool) -> dict:
    if radial or dim == 3:
        return {"epsilon": 1e-2,
                "u0": {"family": "poly12", "width": 0.6},
                "u1": {"family": "poly12", "width": 0.8},
                "v0": {"family": "poly12", "width": 0.7},
                "v1": {"family": "poly12", "width": 0.5, "amplitude": 0.5}}
    return {"epsilon": 1e-2,
            "u0": {"family": "poly12", "center": [0.3, 0.2], "width": 0.6},
            "u1": {"family": "poly12", "center": [-0.2, 0.1], "width": 0.7},
            "v0": {"family": "poly12", "center": [0.1, -0.3], "width": 0.6},
            "v1": {"family": "poly12", "center": [-0.3, -0.2], "width": 0.5, "amplitude": 0.5}}


@dataclass
class ExperimentConfig:
    kind: str
    dim: int = 2
    radial: bool = False  # 3D radial reduction on a 1D grid
    half_width: float = 24.0
    spacing: float = 0.03125
    spacings: list = field(default_factory=list)
    t_max: float = 20.0
    cfl: float = 0.4
    margin: float = 0.05
    pad: float = 1.5
    cadence: float = 0.5
    kmax: int = 1
    background: dict = field(default_factory=lambda: {"family": "poly12", "lambda_fraction": 0.9})
    perturbation: dict = field(default_factory=dict)
    epsilons: list = field(default_factory=lambda: [1e-2, 5e-3, 2.5e-3])
    audit_times: int = 20
    checkpoint_every: int = 0
    seed: int = 0
    out: str = "runs"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; choose from {KINDS}")
        if self.dim not in (2, 3):
            raise ConfigError("dim must be 2 or 3")
        if self.radial and self.dim != 3:
            raise ConfigError("the radial reduction is three-dimensional")
        if not self.perturbation:
            self.perturbation = _default_perturbation(self.dim, self.radial)
        bad = set(self.perturbation) - {"epsilon", "u0", "u1", "v0", "v1"}
        if bad:
            raise ConfigError(f"unknown perturbation key(s) {sorted(bad)}")
        bad = set(self.background) - {"family", "lambda_fraction", "amplitude", "theta0", "theta1"}
        if bad:
            raise ConfigError(f"unknown background key(s) {sorted(bad)}")
        if not self.spacings:
            self.spacings = [self.spacing]

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        """Hash of everything that influences the trajectory."""
        d = self.as_dict()
        d.pop("out")
        d.pop("checkpoint_every")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def parse_config(source) -> ExperimentConfig:
    """Strict YAML parse: unknown keys are errors, defaults are filled in."""
    if isinstance(source, dict):
        data = dict(source)
    else:
        path = Path(source)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        data = yaml.safe_load(path.read_text()) or {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    if "kind" not in data:
        raise ConfigError("missing required key 'kind'")
    cfg = ExperimentConfig(**data)
    if cfg.kind != "identity_suite":
        check_thresholds(cfg)
    return cfg


# ---------------------------------------------------------------------------
# background and data

def background_spec(cfg: ExperimentConfig) -> BackgroundSpec:
    b = cfg.background
    fam = b.get("family", "bump")
    t0 = b.get("theta0", {"family": fam})
    t1 = b.get("theta1", {"family": fam})
    unit_spec = BackgroundSpec(cfg.dim, t0, t1, 1.0)
    if "amplitude" in b:
        return unit_spec.scaled(float(b["amplitude"]))
    frac = float(b.get("lambda_fraction", 0.9))
    if frac == 0.0:
        return unit_spec.scaled(0.0)
    ln = lambda_norms(unit_spec, regularity=False)
    lim0, lim1 = THRESHOLDS[cfg.dim]
    amp = frac * min(lim0 / ln.lambda0 if ln.lambda0 else math.inf,
                     lim1 / ln.lambda1 if ln.lambda1 else math.inf)
    return unit_spec.scaled(amp)


def regularity_finite(spec: BackgroundSpec) -> bool:
    """The regularity norm is finite for the smooth bump and for (1-|x|^2)^N, N >= order."""
    need = _REG_ORDER[spec.dim]
    for f in (spec.theta0, spec.theta1):
        fam = getattr(f, "family", "bump")
        if fam.startswith("poly") and int(fam[4:] or 8) < need:
            return False
    return True


def check_thresholds(cfg: ExperimentConfig):
    spec = background_spec(cfg)
    ln = lambda_norms(spec, regularity=False)
    lim0, lim1 = THRESHOLDS[cfg.dim]
    bad = [f"{name} = {val:.6g} violates the bound {name} < {lim:.6g}"
           for name, val, lim in (("lambda0", ln.lambda0, lim0), ("lambda1", ln.lambda1, lim1))
           if not val < lim]
    if bad:
        raise ThresholdError("; ".join(bad))
    if not regularity_finite(spec):
        raise ThresholdError("background data are not regular enough for a finite regularity norm")
    return ln


def make_grid(cfg: ExperimentConfig, spacing: float) -> UniformGrid:
    if spacing * 10 + 1 + cfg.t_max > cfg.half_width:
        raise ConfigError(f"half_width {cfg.half_width} < 1 + T + 10h = {1 + cfg.t_max + 10 * spacing}")
    if cfg.radial:
        return UniformGrid(1, cfg.half_width, spacing, "radial3d")
    return UniformGrid(cfg.dim, cfg.half_width, spacing)


def sample(f, grid: UniformGrid) -> np.ndarray:
    """Samples of a data function on the grid (radial grids: along the x_1 axis)."""
    if support_ball(f) is None:
        return grid.zeros()
    if grid.radial:
        r = grid.axis_coords
        pts = np.stack([r, np.zeros_like(r), np.zeros_like(r)], -1)
        return f(pts)
    return f(grid.points())


def perturbation_data(cfg: ExperimentConfig, epsilon: float):
    n = cfg.dim
    out = []
    for key in ("u0", "u1", "v0", "v1"):
        spec = cfg.perturbation.get(key)
        f = make_bump(n, spec)
        if isinstance(f, Bump):
            f = f.scaled(epsilon)
            if cfg.radial and not f.radial:
                raise ConfigError(f"perturbation {key} must be centred at the origin for the radial grid")
        out.append(f)
    return out


def initial_state(cfg, grid, bf, epsilon) -> StateSnapshot:
    th = bf.time_derivatives(grid, 0.0, 1)
    u0, u1, v0, v1 = perturbation_data(cfg, epsilon)
    return StateSnapshot(grid, 0.0, th[0] + sample(u0, grid), th[1] + sample(u1, grid),
                         sample(v0, grid), sample(v1, grid))


# ---------------------------------------------------------------------------
# checkpoints

def _array_digest(arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()


def save_checkpoint(path, hist: StateHistory, meta: dict):
    """Write history levels plus metadata; ``meta`` must be JSON-serialisable."""
    snaps = hist.snapshots()
    arrays = {}
    for i, s in enumerate(snaps):
        for name in ("theta", "theta_t", "phi", "phi_t"):
            arrays[f"{i}_{name}"] = getattr(s, name)
    g = snaps[0].grid
    header = dict(meta, version=CHECKPOINT_VERSION, times=[s.t for s in snaps],
                  grid=[g.dim, g.half_width, g.spacing, g.mode], depth=hist.depth,
                  digest=_array_digest([arrays[k] for k in sorted(arrays)]))
    buf = io.BytesIO()
    np.savez(buf, header=np.frombuffer(json.dumps(header).encode(), dtype=np.uint8), **arrays)
    tmp = Path(str(path) + ".tmp")
    tmp.write_bytes(buf.getvalue())
    tmp.replace(path)


def load_checkpoint(path, config_hash: str | None = None):
    """Return (history, meta); refuses version, config or content mismatches."""
    try:
        with np.load(path) as z:
            header = json.loads(bytes(z["header"]).decode())
            arrays = {k: z[k].copy() for k in z.files if k != "header"}
    except Exception as exc:  # corrupt zip, truncated file, bad JSON
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from exc
    if header.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"checkpoint version {header.get('version')} != {CHECKPOINT_VERSION}")
    if config_hash is not None and header.get("config_hash") != config_hash:
        raise CheckpointError(f"config hash mismatch: file {header.get('config_hash')} run {config_hash}")
    digest = _array_digest([arrays[k] for k in sorted(arrays)])
    if digest != header["digest"]:
        raise CheckpointError(f"content hash mismatch: stored {header['digest']} computed {digest}")
    dim, L, h, mode = header["grid"]
    grid = UniformGrid(dim, L, h, mode)
    hist = StateHistory(header["depth"])
    for i, t in enumerate(header["times"]):
        hist.push(StateSnapshot(grid, t, *(arrays[f"{i}_{n}"] for n in ("theta", "theta_t", "phi", "phi_t"))))
    return hist, header


def checkpoint_roundtrip(state: StateSnapshot, path) -> StateSnapshot:
    hist = StateHistory(1)
    hist.push(state)
    save_checkpoint(path, hist, {"config_hash": "roundtrip"})
    back, _ = load_checkpoint(path)
    return back[0]


# ---------------------------------------------------------------------------
# the time loop

@dataclass
class RunResult:
    rows: list
    final: StateSnapshot
    steps: int
    dt: float
    wall: float
    max_leak: float
    extra: dict = field(default_factory=dict)


def _step_plan(cfg, grid):
    dt0 = cfl_dt(grid, cfg.cfl, 1.0)
    nsub = max(1, int(math.ceil(cfg.cadence / dt0 - 1e-9)))
    dt = cfg.cadence / nsub
    n_total = int(round(cfg.t_max / dt))
    return dt, nsub, n_total


def simulate(cfg: ExperimentConfig, epsilon: float, spacing: float, bf: BackgroundField,
             diagnostics: bool = True, observer=None, checkpoint_path=None, resume_path=None,
             stop_after: int | None = None) -> RunResult:
    """Integrate one configuration; rows are computed at multiples of the cadence.

    ``observer(snapshot, theta_exact)`` is called at each row time with the
    exact background sampled on the report patch.
    """
    grid = make_grid(cfg, spacing)
    settings = IntegratorSettings(cfl=cfg.cfl, margin=cfg.margin, pad=cfg.pad)
    dt, nsub, n_total = _step_plan(cfg, grid)
    chash = cfg.digest() + f"/{epsilon!r}/{spacing!r}"
    rows: list = []
    extra: dict = {}
    leak_since = 0.0
    max_leak = 0.0
    hist = StateHistory(5)
    if resume_path is not None:
        hist, meta = load_checkpoint(resume_path, chash)
        step = meta["step"]
        rows = [_row_from_json(r) for r in meta["rows"]]
        extra = meta["extra"]
        leak_since = meta["leak_since"]
        max_leak = meta["max_leak"]
        s = hist[-1]
    else:
        s = initial_state(cfg, grid, bf, epsilon)
        hist.push(s)
        step = 0
    t_start = time.perf_counter()
    row_steps = list(range(0, n_total + 1, nsub))

    def eval_step(k):
        return min(max(k + 2, 4), n_total)

    def emit(row_step):
        nonlocal leak_since
        level = row_step - (step - len(hist) + 1)
        snap = hist[level]
        half = snap.t + settings.support + settings.pad
        bounds = active_bounds(grid, snap.t, settings)
        _, _, mnorm = accelerations(grid, snap.theta, snap.theta_t, snap.phi, snap.phi_t, bounds,
                                    settings.margin, snap.t)
        if diagnostics:
            rep = compute_report(hist, level, bf, cfg.kmax, mnorm, leak_since, half)
            rows.append(rep)
            accumulate_ghost(rows)
        if observer is not None:
            observer(snap, extra)
        leak_since = 0.0

    def pending_at(k):
        return [r for r in row_steps if eval_step(r) == k]

    if resume_path is None:
        for r in pending_at(0):
            emit(r)
    last = n_total if stop_after is None else min(n_total, stop_after)
    while step < last:
        step += 1
        s, info = step_rk4(s, dt, settings, t_new=step * dt)
        hist.push(s)
        leak_since = max(leak_since, info.leak)
        max_leak = max(max_leak, info.leak)
        for r in pending_at(step):
            emit(r)
        if checkpoint_path is not None and cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
            save_checkpoint(checkpoint_path, hist, {
                "config_hash": chash, "step": step, "rows": [_row_to_json(r) for r in rows],
                "extra": extra, "leak_since": leak_since, "max_leak": max_leak})
    return RunResult(rows, s, step, dt, time.perf_counter() - t_start, max_leak, extra)


def _row_to_json(r):
    d = dataclasses.asdict(r)
    return d


def _row_from_json(d):
    from .energy import EnergyReport, EquivalenceResult

    d = dict(d)
    d["equiv"] = EquivalenceResult(**d["equiv"])
    return EnergyReport(**d)


def write_csv(path, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for r in rows:
            vals = r.values()
            w.writerow([repr(float(vals[c])) for c in COLUMNS])


def read_csv(path) -> dict:
    with Path(path).open() as fh:
        rd = csv.reader(fh)
        head = next(rd)
        cols = {h: [] for h in head}
        for line in rd:
            for h, v in zip(head, line):
                cols[h].append(float(v))
    return {h: np.array(v) for h, v in cols.items()}


# ---------------------------------------------------------------------------
# summaries: pure reductions of the logged series

def stability_summary(series: dict) -> dict:
    """Verdict quantities of one run from its CSV columns."""
    t = series["t"]
    e2 = np.sqrt(series["E2_u"]) + np.sqrt(series["E2_v"])
    T = t[-1]
    q1 = t <= 0.25 * T
    q4 = t >= 0.75 * T
    x0u, x0v = series["X0_u"], series["X0_v"]
    g = series["ghost_cum"]
    t_ref = min(1.0, T)
    i1 = int(np.argmin(np.abs(t - t_ref)))
    tail_start = max(0.0, T - 5.0)
    j = int(np.argmin(np.abs(t - tail_start)))
    return {
        "sup_E2_sqrt": float(e2.max()),
        "min_hyp_margin": float(series["hyp_margin"].min()),
        "X0_u_ratio": float(x0u[q4].max() / x0u[q1].max()) if x0u[q1].max() > 0 else 0.0,
        "X0_v_ratio": float(x0v[q4].max() / x0v[q1].max()) if x0v[q1].max() > 0 else 0.0,
        "equiv_min": float(series["equiv_min"].min()),
        "equiv_max": float(series["equiv_max"].max()),
        "equiv_at_t1": float(series["equiv_min"][i1]),
        "equiv_violations": int(series["equiv_violations"].sum()),
        "ghost_total": float(g[-1]),
        "ghost_tail_fraction": float((g[-1] - g[j]) / g[-1]) if g[-1] > 0 else 0.0,
        "max_boundary_leak": float(series["boundary_leak"].max()),
    }


def _series(rows) -> dict:
    cols = {c: [] for c in COLUMNS}
    for r in rows:
        v = r.values()
        for c in COLUMNS:
            cols[c].append(v[c])
    return {c: np.array(v, dtype=float) for c, v in cols.items()}


# ---------------------------------------------------------------------------
# drivers

def _out_dir(cfg, out):
    d = Path(out or cfg.out) / cfg.kind
    d.mkdir(parents=True, exist_ok=True)
    return d


def run_geodesic(cfg, out_dir, bf, **kw) -> dict:
    """epsilon = 0: the numerical solution should reproduce (Theta, 0)."""
    errs = {}
    walls = {}
    for h in cfg.spacings:
        grid = make_grid(cfg, h)

        def observer(snap, extra, grid=grid):
            th = bf.time_derivatives(grid, snap.t, 0)[0]
            e = float(np.max(np.abs(snap.theta - th)) + np.max(np.abs(snap.phi)))
            extra["err"] = max(extra.get("err", 0.0), e)
            extra.setdefault("series", []).append([snap.t, e])

        res = simulate(cfg, 0.0, h, bf, diagnostics=False, observer=observer)
        errs[h] = res.extra["err"]
        walls[h] = res.wall
        with (out_dir / f"error_h{h:g}.csv").open("w") as fh:
            fh.write("t,err\n")
            for t, e in res.extra["series"]:
                fh.write(f"{t!r},{e!r}\n")
    hs = sorted(errs, reverse=True)
    ratios = [errs[a] / errs[b] for a, b in zip(hs, hs[1:])]
    orders = [math.log2(r) if r > 0 else math.nan for r in ratios]
    passed = bool(ratios) and all(r >= 12.0 for r in ratios)
    return {"errors": {str(h): errs[h] for h in hs}, "ratios": ratios, "orders": orders,
            "wall_seconds": {str(h): walls[h] for h in hs}, "passed": passed}


def run_convergence(cfg, out_dir, bf, **kw) -> dict:
    """Self-convergence of the perturbed run at the final time (h, h/2, h/4)."""
    eps = float(cfg.perturbation.get("epsilon", 1e-2))
    finals = {}
    for h in cfg.spacings:
        finals[h] = simulate(cfg, eps, h, bf, diagnostics=False).final
    hs = sorted(finals, reverse=True)
    if len(hs) < 3:
        raise ConfigError("convergence_order needs three spacings")

    def restrict(s, coarse):
        f = int(round(coarse / s.grid.spacing))
        idx = (slice(None, None, f),) * s.grid.dim
        return [a[idx] for a in (s.theta, s.phi)]

    diffs = []
    for a, b in zip(hs, hs[1:]):
        ca = restrict(finals[a], hs[0])
        cb = restrict(finals[b], hs[0])
        diffs.append(max(float(np.max(np.abs(x - y))) for x, y in zip(ca, cb)))
    order = math.log2(diffs[0] / diffs[1]) if diffs[1] > 0 else math.inf
    return {"differences": diffs, "order": order, "passed": order >= 3.5}


def run_stability(cfg, out_dir, bf, epsilons=None, checkpoint=None, resume=None, **kw) -> dict:
    epsilons = list(cfg.epsilons if epsilons is None else epsilons)
    h = cfg.spacings[0]
    per = {}
    for eps in epsilons:
        ck = out_dir / f"checkpoint_eps{eps:g}.npz" if cfg.checkpoint_every else None
        res = simulate(cfg, eps, h, bf, checkpoint_path=ck,
                       resume_path=resume if resume and f"eps{eps:g}" in str(resume) else None)
        write_csv(out_dir / f"timeseries_eps{eps:g}.csv", res.rows)
        summ = stability_summary(read_csv(out_dir / f"timeseries_eps{eps:g}.csv"))
        summ["wall_seconds"] = res.wall
        summ["steps"] = res.steps
        per[f"{eps:g}"] = summ
    keys = list(per)
    ratios = [per[a]["sup_E2_sqrt"] / per[b]["sup_E2_sqrt"] for a, b in zip(keys, keys[1:])]
    ok = (all(1.8 <= r <= 2.2 for r in ratios)
          and all(p["min_hyp_margin"] > 0.1 for p in per.values())
          and all(p["X0_u_ratio"] <= 1.2 and p["X0_v_ratio"] <= 1.2 for p in per.values())
          and all(p["equiv_violations"] == 0 for p in per.values())
          and all(p["equiv_min"] >= 0.5 * p["equiv_at_t1"] for p in per.values()))
    return {"runs": per, "energy_ratios": ratios, "passed": bool(ok)}


def run_ghost(cfg, out_dir, bf, **kw) -> dict:
    eps = float(cfg.perturbation.get("epsilon", 1e-2))
    res = simulate(cfg, eps, cfg.spacings[0], bf)
    write_csv(out_dir / "timeseries.csv", res.rows)
    summ = stability_summary(read_csv(out_dir / "timeseries.csv"))
    summ["passed"] = summ["ghost_tail_fraction"] <= 0.05
    return summ


def run_bounds_audit(cfg, out_dir, bf, **kw) -> dict:
    times = np.linspace(0.0, cfg.t_max, cfg.audit_times)
    rep = bounds_audit(bf, times, raise_on_failure=False)
    with (out_dir / "audit.csv").open("w") as fh:
        fh.write("t,sup_theta,bound_theta,sup_theta_t,bound_theta_t\n")
        for r in rep.rows:
            fh.write(f"{r.t!r},{r.sup_theta!r},{r.bound_theta!r},{r.sup_theta_t!r},{r.bound_theta_t!r}\n")
    m0, m1 = rep.min_margins
    return {"lambda0": rep.norms.lambda0, "lambda1": rep.norms.lambda1,
            "min_margin_theta": m0, "min_margin_theta_t": m1,
            "max_sup_theta": max(r.sup_theta for r in rep.rows),
            "max_sup_theta_t": max(r.sup_theta_t for r in rep.rows), "passed": rep.passed}


def decay_series(bf: BackgroundField, times, dr: float = 2e-3):
    """X_0 of the exact background: max <t+r>^{(n-1)/2} <t-r>^{(n-1)/2} |Theta|."""
    n = bf.spec.dim
    out = []
    for t in times:
        r = np.arange(0.0, t + bf.radial.R + dr, dr)
        v = bf.radial.profile(0, float(t), r)[0]
        w = (np.sqrt(1 + (t + r) ** 2) * np.sqrt(1 + (t - r) ** 2)) ** ((n - 1) / 2)
        out.append(float(np.max(w * np.abs(v))))
    return np.array(out)


def run_decay(cfg, out_dir, bf, **kw) -> dict:
    times = np.arange(0.0, cfg.t_max + 1e-9, cfg.cadence)
    x0 = decay_series(bf, times)
    with (out_dir / "decay.csv").open("w") as fh:
        fh.write("t,X0\n")
        for t, x in zip(times, x0):
            fh.write(f"{t!r},{x!r}\n")
    T = times[-1]
    first = x0[times <= 0.25 * T].max()
    last = x0[times >= 0.75 * T].max()
    return {"X0_first_quarter": float(first), "X0_last_quarter": float(last),
            "ratio": float(last / first), "passed": bool(last <= 1.2 * first)}


def run_identity(cfg, out_dir, bf=None, **kw) -> dict:
    from .identities import identity_suite

    return identity_suite(seed=cfg.seed)


DRIVERS = {
    "geodesic_exactness": run_geodesic,
    "convergence_order": run_convergence,
    "stability_scaling": run_stability,
    "bounds_audit": run_bounds_audit,
    "decay_profile": run_decay,
    "ghost_integral": run_ghost,
    "identity_suite": run_identity,
}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def run_experiment(cfg: ExperimentConfig, out=None, resume=None, bf=None) -> tuple:
    """Run one experiment; returns (exit status, summary) and writes summary.json."""
    out_dir = _out_dir(cfg, out)
    log.info("config %s", json.dumps(cfg.as_dict(), sort_keys=True))
    summary = {"kind": cfg.kind, "config": cfg.as_dict(), "config_hash": cfg.digest()}
    try:
        if cfg.kind != "identity_suite" and bf is None:
            bf = BackgroundField(background_spec(cfg))
        if bf is not None:
            ln = lambda_norms(bf.spec, regularity=False)
            summary["lambda"] = {"lambda0": ln.lambda0, "lambda1": ln.lambda1,
                                 "amplitude": bf.spec.amplitude}
        res = DRIVERS[cfg.kind](cfg, out_dir, bf, resume=resume)
        summary.update(res)
        status = 0 if res.get("passed", False) else 1
    except Exception as exc:
        log.exception("experiment aborted")
        summary["abort"] = {"type": type(exc).__name__, "message": str(exc)}
        status = 2
    summary["status"] = status
    (out_dir / "summary.json").write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    return status, summary
