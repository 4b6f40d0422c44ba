import numpy as np
import pytest

from faddeevlab.faddeev import FieldJets, HyperbolicityLossError, principal_probe, solve_accelerations
from faddeevlab.grid import Jet2, UniformGrid, diff_array
from faddeevlab.integrator import (
    IntegratorSettings,
    NonFiniteStateError,
    StateHistory,
    StateSnapshot,
    SupportLeakError,
    accelerations,
    active_bounds,
    cfl_dt,
    integrate,
    step_rk4,
    time_reversed,
)


def _literal_accelerations(grid, th, tht, ph, pht):
    """Accelerations through the generic jet path (probe + 2x2 solve)."""
    n = grid.dim

    def jet(f, ft):
        d1 = np.zeros((n + 1,) + grid.shape)
        d2 = np.zeros((n + 1, n + 1) + grid.shape)
        d1[0] = ft
        for a in range(1, n + 1):
            d1[a] = diff_array(f, grid, a, 1)
            d2[0, a] = diff_array(ft, grid, a, 1)
            d2[a, a] = diff_array(f, grid, a, 2)
            for b in range(a + 1, n + 1):
                d2[a, b] = diff_array(diff_array(f, grid, b, 1), grid, a, 1)
        return Jet2(f, d1, d2)

    jt, jp = jet(th, tht), jet(ph, pht)
    lap = np.stack([sum(j.d2[a, a] for a in range(1, n + 1)) for j in (jt, jp)])
    return solve_accelerations(principal_probe(FieldJets(jt, jp)), lap)


def _smooth_state(grid, scale=1.0):
    X = grid.coords()
    r2 = sum(x * x for x in X)
    b = lambda a, c: scale * a * np.exp(-r2 * c)
    return b(0.3, 2) + 0.1 * scale * X[0], b(0.2, 3), b(0.25, 1.5) * X[-1], b(0.1, 2)


@pytest.mark.parametrize("dim", [2, 3])
def test_kernel_matches_literal_path(dim):
    g = UniformGrid(dim, 2.0, 0.1)
    fields = _smooth_state(g)
    ref = _literal_accelerations(g, *fields)
    a_t, a_p, mm = accelerations(g, *fields)
    s = (slice(2, -2),) * dim
    assert np.max(np.abs(a_t[s] - ref[0][s])) < 1e-12
    assert np.max(np.abs(a_p[s] - ref[1][s])) < 1e-12
    assert 0.0 < mm < 1.0


def _radial_vs_axis(h):
    g3 = UniformGrid(3, 2.0, h)
    gr = UniformGrid(1, 2.0, h, "radial3d")
    r2 = sum(x * x for x in g3.coords())
    rr = gr.axis_coords**2
    prof = [lambda q: 0.3 * np.exp(-2 * q), lambda q: 0.2 * np.exp(-3 * q),
            lambda q: 0.25 * np.exp(-1.5 * q), lambda q: 0.1 * np.exp(-2 * q)]
    c3 = accelerations(g3, *(p(r2) for p in prof))
    cr = accelerations(gr, *(p(rr) for p in prof))
    m = g3.cells_per_half
    keep = gr.axis_coords[: m + 1] <= 1.5
    return max(float(np.max(np.abs(a3[m:, m, m][keep] - ar[: m + 1][keep]))) for a3, ar in zip(c3[:2], cr[:2]))


def test_radial_kernel_converges_to_cartesian_axis():
    coarse, fine = _radial_vs_axis(0.1), _radial_vs_axis(0.05)
    assert fine < 1e-4
    assert coarse / fine > 8.0


def test_active_box_matches_full_grid():
    g = UniformGrid(2, 4.0, 0.125)
    X = g.coords()
    r2 = X[0] ** 2 + X[1] ** 2
    bump = np.where(r2 < 1, (1 - np.minimum(r2, 1)) ** 12, 0.0)
    s = StateSnapshot(g, 0.0, 0.01 * bump, 0.0 * bump, 0.005 * bump * X[0], 0.002 * bump)
    a = integrate(s, 0.05, 10, IntegratorSettings())
    b = integrate(s, 0.05, 10, IntegratorSettings(full_grid=True))
    # the full grid only adds stencil tails below 1e-18 outside the box
    for x, y in zip(a.arrays(), b.arrays()):
        assert np.max(np.abs(x - y)) < 1e-18


def test_active_bounds_grow_and_clip():
    g = UniformGrid(2, 4.0, 0.5)
    lo0, hi0 = active_bounds(g, 0.0, IntegratorSettings())
    lo1, hi1 = active_bounds(g, 10.0, IntegratorSettings())
    assert lo1 <= lo0 and hi1 >= hi0
    assert (lo1, hi1) == (2, g.points_per_axis - 2)
    assert active_bounds(g, 0.0, IntegratorSettings(full_grid=True)) == (2, g.points_per_axis - 2)


def test_leak_monitor_raises():
    g = UniformGrid(2, 4.0, 0.125)
    X = g.coords()
    r2 = X[0] ** 2 + X[1] ** 2
    bump = np.where(r2 < 1, (1 - np.minimum(r2, 1)) ** 12, 0.0)
    s = StateSnapshot(g, 0.0, 0.01 * bump, g.zeros(), g.zeros(), g.zeros())
    with pytest.raises(SupportLeakError):
        step_rk4(s, 0.05, IntegratorSettings(support=0.3, pad=0.0))


def test_non_finite_state_raises():
    g = UniformGrid(2, 2.0, 0.125)
    s = StateSnapshot.zeros(g)
    s.theta[10, 10] = np.nan
    with pytest.raises(NonFiniteStateError):
        step_rk4(s, 0.05)


def test_hyperbolicity_loss_raises():
    g = UniformGrid(2, 2.0, 0.1)
    X = g.coords()
    s = StateSnapshot(g, 0.0, g.zeros(), g.zeros(), 3.0 * np.exp(-X[0] ** 2 - X[1] ** 2) * X[0], g.zeros())
    with pytest.raises(HyperbolicityLossError):
        step_rk4(s, 0.04)


def test_cfl_dt():
    g = UniformGrid(2, 1.0, 0.1)
    assert cfl_dt(g, 0.4) == pytest.approx(0.04)
    assert cfl_dt(g, 0.4, 0.25) == pytest.approx(0.02)
    with pytest.raises(HyperbolicityLossError):
        cfl_dt(g, 0.4, 0.0)


def test_history_requires_uniform_spacing():
    g = UniformGrid(2, 1.0, 0.25)
    h = StateHistory(3)
    for t in (0.0, 0.1, 0.2, 0.3):
        h.push(StateSnapshot.zeros(g, t))
    assert len(h) == 3 and h.times == pytest.approx([0.1, 0.2, 0.3]) and h.full
    with pytest.raises(ValueError):
        h.push(StateSnapshot.zeros(g, 0.45))


def test_zero_state_stays_zero():
    g = UniformGrid(2, 2.0, 0.125)
    s = integrate(StateSnapshot.zeros(g), 0.05, 5)
    assert all(not a.any() for a in s.arrays())


def test_radial_reversibility_small():
    g = UniformGrid(1, 6.0, 0.025, "radial3d")
    r2 = g.axis_coords**2
    bump = np.where(r2 < 1, (1 - np.minimum(r2, 1)) ** 12, 0.0)
    s = StateSnapshot(g, 0.0, 0.01 * bump, 0.005 * bump, g.zeros(), g.zeros())
    dt = 0.01
    fwd = integrate(s, dt, 200)
    back = integrate(time_reversed(fwd), dt, 200, IntegratorSettings(full_grid=True))
    assert np.max(np.abs(back.theta - s.theta)) < 1e-6
    assert np.max(np.abs(back.theta_t + s.theta_t)) < 1e-6
