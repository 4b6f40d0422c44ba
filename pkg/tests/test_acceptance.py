"""Acceptance suite: one verdict line per criterion (see the terminal summary)."""
import math
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import record_criterion
from faddeevlab.experiments import parse_config, run_experiment
from faddeevlab.grid import UniformGrid, diff_array
from faddeevlab.identities import (
    check_annihilation,
    check_commutators,
    check_harnesses,
    check_null_identities,
    check_reconstruction,
    check_rhs_oracle,
)
from faddeevlab.integrator import IntegratorSettings, StateSnapshot, integrate, time_reversed
from faddeevlab.waves import BackgroundField, BackgroundSpec, kirchhoff_eval, poisson2d_eval, wave_energy
from oracles import dalembert_radial, descent_oracle, generic2, generic3, random_spacetime, wave_residual
from test_vectorfields import HARDY_FROZEN, KS_FROZEN

CONFIGS = Path(__file__).resolve().parents[1] / "scripts" / "configs"


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def _run(name, out):
    cfg = parse_config(CONFIGS / name)
    status, summary = run_experiment(cfg, out=out)
    assert "abort" not in summary, summary.get("abort")
    return status, summary


# ---------------------------------------------------------------------------
# 1-3: exact identities

def test_criterion_01_null_identities():
    r, sec = _timed(check_null_identities)
    ok = r["passed"] and sec < 1.0
    assert record_criterion(1, "null identities", ok,
                            f"max residual {r['max_residual']:.2e} (<= 1e-12), antisymmetry exact "
                            f"{r['antisymmetric']}, {sec:.2f} s")


def test_criterion_02_rhs_oracle():
    (r, a), sec = _timed(lambda: (check_rhs_oracle(), check_annihilation()))
    ok = r["passed"] and a["passed"] and r["cases"] == 100 and sec < 1.0
    assert record_criterion(2, "RHS oracle equivalence", ok,
                            f"{r['cases']} cases, F/G rel error {r['max_rel_error']:.2e}, "
                            f"m rel error {r['max_rel_error_m']:.2e}, annihilation exact {a['exact_zero']}, "
                            f"{sec:.2f} s")


def test_criterion_03_reconstruction():
    r = check_reconstruction()
    assert record_criterion(3, "decomposition reconstruction", r["passed"],
                            f"max rel error {r['max_rel_error']:.2e} (<= 1e-12)")


# ---------------------------------------------------------------------------
# 4-5: exact evaluators and sharp bounds

def test_criterion_04_exact_evaluators():
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    spec = BackgroundSpec(3, {"family": "bump", "width": 0.8}, {"family": "bump", "width": 0.6, "amplitude": 0.7}, 0.5)
    err3 = 0.0
    for _ in range(20):
        t, r = rng.uniform(0.05, 2.0), rng.uniform(0.05, 2.0)
        d = rng.normal(size=3)
        ref = dalembert_radial(spec.theta0, spec.theta1, 0.5, t, r)
        err3 = max(err3, abs(kirchhoff_eval(spec, t, r * d / np.linalg.norm(d)) - ref))
    s2 = generic2("bump")
    err2 = 0.0
    for _ in range(10):
        t, x = rng.uniform(0.1, 2.0), rng.uniform(-1.2, 1.2, 2)
        err2 = max(err2, abs(poisson2d_eval(s2, t, x) - descent_oracle(s2.theta0, s2.theta1, 0.3, t, x)))
    res = {}
    for dim, sp, ev in ((2, generic2(), poisson2d_eval), (3, generic3(), kirchhoff_eval)):
        res[dim] = max(abs(wave_residual(ev, sp, t, x)) for t, x in random_spacetime(rng, dim, 100))
    sec = time.perf_counter() - t0
    ok = err3 <= 1e-7 and err2 <= 1e-5 and max(res.values()) <= 1e-4 and sec < 60
    assert record_criterion(4, "exact evaluators", ok,
                            f"Kirchhoff vs radial d'Alembert {err3:.2e} (<= 1e-7), Poisson vs descent "
                            f"{err2:.2e} (<= 1e-5), wave residual 2D {res[2]:.2e} / 3D {res[3]:.2e} "
                            f"(<= 1e-4, 100 points), {sec:.1f} s")


@pytest.mark.slow
def test_criterion_05_bounds_audit(tmp_path):
    parts = []
    ok = True
    for name, c in (("bounds_audit_3d.yaml", 8 * math.pi), ("bounds_audit_2d.yaml", 4.0)):
        status, s = _run(name, tmp_path / name)
        ok &= (status == 0 and s["min_margin_theta"] > 0 and s["min_margin_theta_t"] > 0
               and s["max_sup_theta"] < math.pi / 2 and s["max_sup_theta_t"] < 1.0)
        dim = s["config"]["dim"]
        parts.append(f"{dim}D: sup|Theta| {s['max_sup_theta']:.4f} <= {s['lambda0']:.4f}/{c:.4g}, "
                     f"sup|Theta_t| {s['max_sup_theta_t']:.4f} <= {s['lambda1']:.4f}/{c:.4g}")
    assert record_criterion(5, "sharp-bound audit (0.9x thresholds, 20 times)", ok, "; ".join(parts))


# ---------------------------------------------------------------------------
# 6-9: nonlinear runs

@pytest.mark.slow
def test_criterion_06_geodesic_equilibrium(tmp_path):
    parts = []
    ok = True
    for name in ("geodesic_2d.yaml", "geodesic_radial.yaml"):
        status, s = _run(name, tmp_path / name)
        ok &= status == 0 and all(r >= 12.0 for r in s["ratios"])
        hs = list(s["errors"])
        parts.append(f"{'2D' if '2d' in name else '3D radial'} errors {s['errors'][hs[0]]:.2e} -> "
                     f"{s['errors'][hs[1]]:.2e} (ratio {s['ratios'][0]:.1f}, order {s['orders'][0]:.2f})")
        if "2d" in name:
            flagship = s["wall_seconds"][hs[-1]]
            ok &= flagship <= 600
            parts.append(f"2D flagship {flagship:.0f} s")
    assert record_criterion(6, "geodesic equilibrium", ok, "; ".join(parts))


@pytest.fixture(scope="module")
def stability_runs(tmp_path_factory):
    out = tmp_path_factory.mktemp("stability")
    return {key: _run(name, out / key) for key, name in (("2D", "stability_2d.yaml"),
                                                         ("3D radial", "stability_radial.yaml"))}


@pytest.mark.slow
def test_criterion_07_stability_scaling(stability_runs):
    parts = []
    ok = True
    for key, (status, s) in stability_runs.items():
        runs = s["runs"].values()
        margin = min(r["min_hyp_margin"] for r in runs)
        x0 = max(max(r["X0_u_ratio"], r["X0_v_ratio"]) for r in runs)
        ok &= (all(1.8 <= r <= 2.2 for r in s["energy_ratios"]) and margin > 0.1 and x0 <= 1.2)
        parts.append(f"{key}: E2 ratios {', '.join(f'{r:.3f}' for r in s['energy_ratios'])} in [1.8, 2.2], "
                     f"min hyperbolicity margin {margin:.3f} (> 0.1), X0 late/early {x0:.3f} (<= 1.2)")
    assert record_criterion(7, "stability scaling", ok, "; ".join(parts))


@pytest.mark.slow
def test_criterion_08_energy_equivalence(stability_runs):
    parts = []
    ok = True
    for key, (_, s) in stability_runs.items():
        runs = s["runs"].values()
        viol = sum(r["equiv_violations"] for r in runs)
        worst = min(r["equiv_min"] / r["equiv_at_t1"] for r in runs)
        band = (min(r["equiv_min"] for r in runs), max(r["equiv_max"] for r in runs))
        ok &= viol == 0 and worst >= 0.5
        parts.append(f"{key}: {viol} violations, band [{band[0]:.4f}, {band[1]:.4f}], "
                     f"min / value at t=1 {worst:.3f} (>= 0.5)")
    assert record_criterion(8, "energy equivalence", ok, "; ".join(parts))


@pytest.mark.slow
def test_criterion_09_ghost_ledger(stability_runs):
    parts = []
    ok = True
    for key, (_, s) in stability_runs.items():
        r = s["runs"]["0.01"]
        ok &= r["ghost_tail_fraction"] <= 0.05
        parts.append(f"{key}: total {r['ghost_total']:.3e}, increment over [15, 20] "
                     f"{100 * r['ghost_tail_fraction']:.2f}% (<= 5%)")
    assert record_criterion(9, "ghost dissipation ledger", ok, "; ".join(parts))


# ---------------------------------------------------------------------------
# 10-11

@pytest.mark.slow
def test_criterion_10_commutators_and_harnesses():
    c = check_commutators()
    orders = {f"{d}D {k}": v for d, o in c["orders"].items() for k, v in o.items()}
    fine = {f"{d}D {k}": v for d, r in c["residuals"].items() for k, v in r["fine"].items()}
    coarse = check_harnesses(0.05)
    ref = check_harnesses(0.025)
    frozen = (coarse["klainerman_sobolev"] == pytest.approx(KS_FROZEN, rel=1e-9)
              and coarse["hardy"] == pytest.approx(HARDY_FROZEN, rel=1e-9))
    drift = max(abs(ref[k] / coarse[k] - 1) for k in ("klainerman_sobolev", "hardy"))
    ok = c["passed"] and frozen and drift <= 0.05
    conv = ", ".join(f"{k} order {orders[k]:.2f}" for k in orders if fine[k] >= 1e-10)
    floor = ", ".join(k for k in orders if fine[k] < 1e-10)
    assert record_criterion(10, "commutators and harnesses", ok,
                            f"{conv}; at round-off (< 1e-10): {floor}; KS max ratio "
                            f"{coarse['klainerman_sobolev']:.6f}, Hardy {coarse['hardy']:.6f} "
                            f"(frozen), refinement change {100 * drift:.2f}% (<= 5%)")


def _linear_wave_energy(s):
    g = s.grid
    grad = [diff_array(s.theta, g, 1, 1, 1)] if g.radial else [diff_array(s.theta, g, a, 1) for a in range(1, g.dim + 1)]
    return wave_energy(s.theta_t, grad, g)


@pytest.mark.slow
def test_criterion_11_linear_wave_conservation():
    # phi = 0 reduces the system to the free wave equation for theta
    T, h = 10.0, 0.00625
    g = UniformGrid(1, T + 4, h, "radial3d")
    bf = BackgroundField(BackgroundSpec(3, {"family": "poly12"}, {"family": "poly12", "amplitude": 0.5}, 0.01))
    th = bf.time_derivatives(g, 0.0, 1)
    s0 = StateSnapshot(g, 0.0, th[0], th[1], g.zeros(), g.zeros())
    dt = 0.4 * h
    n = int(round(T / dt))
    e0 = _linear_wave_energy(s0)
    es = [e0]
    s1 = integrate(s0, dt, n, callback=lambda k, s, _: es.append(_linear_wave_energy(s)) if k % 10 == 0 else None)
    drift = max(abs(e - e0) for e in es) / e0
    back = integrate(time_reversed(s1), dt, n, IntegratorSettings(full_grid=True))
    rev = max(float(np.max(np.abs(back.theta - s0.theta))), float(np.max(np.abs(back.theta_t + s0.theta_t))))
    ok = drift <= 1e-6 and rev <= 1e-6
    assert record_criterion(11, "linear-wave conservation and reversibility", ok,
                            f"3D radial, h = {h}, T = {T}: E1 drift {drift:.2e} (<= 1e-6), "
                            f"reversal error {rev:.2e} (<= 1e-6)")
