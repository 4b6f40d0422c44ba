import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from faddeevlab.grid import UniformGrid
from faddeevlab.waves import (
    AuditFailure,
    BackgroundField,
    BackgroundSpec,
    amplitude_for_lambda0,
    background_jet,
    bounds_audit,
    kirchhoff_eval,
    lambda_norms,
    poisson2d_eval,
    tail_identity,
    wave_energy,
)

from oracles import generic2, generic3, dalembert_radial, descent_oracle, random_spacetime, wave_residual


# ---------------------------------------------------------------------------
# evaluators

def test_zero_data_and_initial_values():
    assert kirchhoff_eval(BackgroundSpec(3), 1.0, [0.1, 0.2, 0.3]) == 0.0
    assert poisson2d_eval(BackgroundSpec(2), 1.0, [0.1, 0.2]) == 0.0
    s3, s2 = generic3(), generic2()
    x3, x2 = np.array([0.3, 0.1, -0.2]), np.array([0.3, 0.1])
    assert kirchhoff_eval(s3, 0.0, x3) == pytest.approx(0.3 * s3.theta0(x3[None])[0], abs=1e-15)
    assert poisson2d_eval(s2, 0.0, x2) == pytest.approx(0.3 * s2.theta0(x2[None])[0], abs=1e-15)


@pytest.mark.parametrize("fam", ["bump", "poly12"])
def test_kirchhoff_matches_radial_dalembert(fam):
    spec = BackgroundSpec(3, {"family": fam, "width": 0.8}, {"family": fam, "width": 0.6, "amplitude": 0.7}, 0.5)
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(20):
        t, r = rng.uniform(0.05, 2.0), rng.uniform(0.05, 2.0)
        d = rng.normal(size=3)
        x = r * d / np.linalg.norm(d)
        ref = dalembert_radial(spec.theta0, spec.theta1, 0.5, t, r)
        worst = max(worst, abs(kirchhoff_eval(spec, t, x) - ref))
    assert worst <= 1e-7


@pytest.mark.parametrize("fam", ["bump", "poly12"])
def test_poisson2d_matches_descent(fam):
    spec = generic2(fam)
    rng = np.random.default_rng(4)
    for _ in range(6):
        t = rng.uniform(0.1, 2.0)
        x = rng.uniform(-1.2, 1.2, 2)
        ref = descent_oracle(spec.theta0, spec.theta1, 0.3, t, x)
        assert abs(poisson2d_eval(spec, t, x) - ref) <= 1e-5


@pytest.mark.parametrize("dim", [2, 3])
def test_discrete_wave_residual(dim):
    spec, ev = (generic2(), poisson2d_eval) if dim == 2 else (generic3(), kirchhoff_eval)
    rng = np.random.default_rng(5)
    res = [abs(wave_residual(ev, spec, t, x)) for t, x in random_spacetime(rng, dim, 25)]
    assert max(res) < 1e-4


def test_linearity():
    s = generic2()
    x = np.array([0.25, -0.1])
    base = poisson2d_eval(s, 0.9, x)
    assert poisson2d_eval(s.scaled(-2.5), 0.9, x) == pytest.approx(-2.5 * base, rel=1e-14)
    s3 = generic3()
    x3 = np.array([0.25, -0.1, 0.2])
    assert kirchhoff_eval(s3.scaled(3.0), 0.4, x3) == pytest.approx(3.0 * kirchhoff_eval(s3, 0.4, x3), rel=1e-14)


def test_negative_time_rejected():
    with pytest.raises(ValueError):
        kirchhoff_eval(generic3(), -0.1, [0, 0, 0])
    with pytest.raises(ValueError):
        poisson2d_eval(generic3(), 0.1, [0, 0, 0])


# ---------------------------------------------------------------------------
# jets and the radial fast path

def test_zero_jet_and_cauchy_data():
    j = background_jet(BackgroundSpec(3), 0.7, [0.1, 0.2, 0.3])
    assert j.value == 0.0 and not np.any(j.d1) and not np.any(j.d2)
    s = generic2()
    x = np.array([0.1, 0.3])
    j = background_jet(s, 0.0, x)
    assert j.value == pytest.approx(0.3 * s.theta0(x[None])[0], abs=1e-14)
    assert j.d1[0] == pytest.approx(0.3 * s.theta1(x[None])[0], abs=1e-14)


@pytest.mark.parametrize("dim", [2, 3])
def test_jet_matches_finite_differences(dim):
    spec, ev = (generic2(), poisson2d_eval) if dim == 2 else (generic3(), kirchhoff_eval)
    rng = np.random.default_rng(6)
    h = 1e-3
    for t, x in random_spacetime(rng, dim, 4):
        j = background_jet(spec, t, x, tol=1e-12)

        def u(dt=0.0, dx=None):
            return ev(spec, t + dt, x if dx is None else x + dx, 1e-12)

        def second(f):
            # centered differences at steps h and 2h, Richardson-combined
            d = lambda k: f(k * h) / (k * h) ** 2
            return (4 * d(1) - d(2)) / 3

        e = np.eye(dim)
        u0 = u()
        assert second(lambda s: u(s) - 2 * u0 + u(-s)) == pytest.approx(j.d2[0, 0], abs=1e-5)
        for i in range(dim):
            d2 = second(lambda s: u(0, s * e[i]) - 2 * u0 + u(0, -s * e[i]))
            assert d2 == pytest.approx(j.d2[i + 1, i + 1], abs=1e-5)
            mixed = second(lambda s: (u(s, s * e[i]) - u(s, -s * e[i]) - u(-s, s * e[i]) + u(-s, -s * e[i])) / 4)
            assert mixed == pytest.approx(j.d2[0, i + 1], abs=1e-5)
        a, b = e[0], e[1]
        mixed = second(lambda s: (u(0, s * (a + b)) - u(0, s * (a - b)) - u(0, s * (b - a)) + u(0, -s * (a + b))) / 4)
        assert mixed == pytest.approx(j.d2[1, 2], abs=1e-5)


@pytest.mark.parametrize("dim,ev", [(2, poisson2d_eval), (3, kirchhoff_eval)])
def test_radial_background_matches_evaluator(dim, ev):
    spec = BackgroundSpec(dim, {"family": "poly12", "width": 0.9}, {"family": "poly12", "width": 0.7, "amplitude": 0.5}, 0.2)
    bf = BackgroundField(spec)
    g = UniformGrid(dim, 3.0, 0.25)
    for t in (0.0, 0.6, 2.3):
        jet = bf.grid_jet(g, t)
        rng = np.random.default_rng(int(10 * t))
        for _ in range(5):
            idx = tuple(rng.integers(0, g.points_per_axis, dim))
            x = np.array([c[idx] for c in g.coords()])
            ref = background_jet(spec, t, x, tol=1e-11)
            assert jet.value[idx] == pytest.approx(ref.value, abs=1e-8)
            assert jet.d1[(slice(None),) + idx] == pytest.approx(ref.d1, abs=1e-8)
            assert jet.d2[(slice(None), slice(None)) + idx] == pytest.approx(ref.d2, abs=1e-7)


def test_background_energy_conserved():
    spec = BackgroundSpec(3, {"family": "poly12", "width": 0.9}, {"family": "poly12", "width": 0.7}, 0.1)
    bf = BackgroundField(spec)
    g = UniformGrid(1, 8.0, 0.01, "radial3d")
    energies = []
    for t in (0.0, 0.5, 1.5, 3.0, 6.0):
        j = bf.grid_jet(g, t)
        energies.append(wave_energy(j.d1[0], [j.d1[1]], g))
    e = np.array(energies)
    assert np.max(np.abs(e - e[0])) / e[0] < 1e-6


# ---------------------------------------------------------------------------
# norms and audits

def test_lambda_norms_zero_spec():
    n = lambda_norms(BackgroundSpec(3))
    assert (n.lambda0, n.lambda1, n.lambda_reg) == (0.0, 0.0, 0.0) and n.all_met


@given(st.floats(-50, 50).filter(lambda c: abs(c) > 1e-3))
@settings(max_examples=20)
def test_lambda_norms_homogeneous(c):
    s = generic3(amp=1.0)
    a, b = lambda_norms(s, regularity=False), lambda_norms(s.scaled(c), regularity=False)
    assert b.lambda0 == pytest.approx(abs(c) * a.lambda0, rel=1e-13)
    assert b.lambda1 == pytest.approx(abs(c) * a.lambda1, rel=1e-13)


def test_lambda0_at_nine_tenths_threshold():
    s = BackgroundSpec(3, {"family": "bump"}, None, 1.0)
    a = amplitude_for_lambda0(s, 0.9 * 4 * math.pi**2)
    n = lambda_norms(s.scaled(a))
    assert n.lambda0 == pytest.approx(0.9 * 4 * math.pi**2, rel=1e-12)
    assert n.thresholds_met[0] and n.thresholds_met[2]
    assert n.thresholds_met[1] == (n.lambda1 < 8 * math.pi)


def test_support_outside_unit_ball_rejected():
    with pytest.raises(ValueError):
        BackgroundSpec(2, {"family": "poly12", "center": (0.5, 0.0), "width": 0.6})


def test_audit_zero_spec_full_margin():
    rep = bounds_audit(BackgroundField(BackgroundSpec(3)), [0.0, 1.0])
    assert rep.passed and rep.min_margins == (0.0, 0.0)


def test_audit_3d_theta_bound():
    s = BackgroundSpec(3, {"family": "bump"}, None, 1.0)
    s = s.scaled(amplitude_for_lambda0(s, 3.9 * math.pi**2))
    rep = bounds_audit(BackgroundField(s), np.linspace(0, 5, 20), raise_on_failure=False)
    bound = rep.norms.lambda0 / (8 * math.pi)
    assert bound < math.pi / 2
    for r in rep.rows:
        assert r.sup_theta <= bound and r.margin_theta > 0


def test_audit_2d_theta_t_bound():
    s = BackgroundSpec(2, {"family": "poly12"}, None, 1.0)
    s = s.scaled(3.9 / lambda_norms(s, regularity=False).lambda1)
    rep = bounds_audit(BackgroundField(s), np.linspace(0, 5, 20))
    assert rep.passed
    assert rep.norms.lambda1 / 4 < 1.0
    assert all(r.sup_theta_t <= rep.norms.lambda1 / 4 for r in rep.rows)


def test_audit_failure_reports_location():
    s = BackgroundSpec(3, {"family": "bump"}, None, 40.0)
    with pytest.raises(AuditFailure, match="t=0.0"):
        bounds_audit(BackgroundField(s), [0.0])


@pytest.mark.parametrize("m", [1, 2])
def test_tail_identity(m):
    f = np.polynomial.Polynomial([1, 0, -1]) ** 8
    fm = f.deriv(m)
    for t in np.linspace(0, 2, 21):
        ref = f(t) if t < 1 else 0.0
        assert tail_identity(fm, m, float(t)) == pytest.approx(ref, abs=1e-8)
