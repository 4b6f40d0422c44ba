"""Method-of-lines RK4 integration of the (theta, phi) system.

The full system is evolved directly; perturbations are recovered afterwards as
theta - Theta.  Data are compactly supported, so every stage only touches an
*active box* |x_i| <= t + support + pad: outside it all four fields are exactly
zero and stay so.  The two outermost layers of the box act as the support
monitor (``leak``).
"""
from __future__ import annotations

import math
import warnings
from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .faddeev import HyperbolicityLossError
from .grid import GridConfigurationError, ScalarField, UniformGrid

warnings.filterwarnings("ignore", message=".*TBB.*")
from . import kernels  # noqa: E402

FIELDS = ("theta", "theta_t", "phi", "phi_t")


class SupportLeakError(RuntimeError):
    """Fields reached the edge of the region where they must vanish."""


class NonFiniteStateError(RuntimeError):
    pass


@dataclass
class StateSnapshot:
    grid: UniformGrid
    t: float
    theta: np.ndarray
    theta_t: np.ndarray
    phi: np.ndarray
    phi_t: np.ndarray

    def arrays(self):
        return tuple(getattr(self, f) for f in FIELDS)

    def field(self, name: str) -> ScalarField:
        return ScalarField(self.grid, getattr(self, name), self.t)

    def copy(self) -> "StateSnapshot":
        return replace(self, **{f: getattr(self, f).copy() for f in FIELDS})

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    @classmethod
    def zeros(cls, grid: UniformGrid, t: float = 0.0) -> "StateSnapshot":
        return cls(grid, t, *(grid.zeros() for _ in FIELDS))


class StateHistory:
    """Ring buffer of the last ``depth`` snapshots at uniform spacing."""

    def __init__(self, depth: int = 5):
        self.depth = depth
        self._buf: deque = deque(maxlen=depth)

    def push(self, s: StateSnapshot):
        if len(self._buf) >= 2:
            dt = self._buf[-1].t - self._buf[-2].t
            step = s.t - self._buf[-1].t
            if step <= 0 or abs(step - dt) > 1e-9 * max(1.0, abs(dt)):
                raise ValueError("history spacing must be constant and increasing")
        elif self._buf and s.t <= self._buf[-1].t:
            raise ValueError("history times must increase")
        self._buf.append(s)

    def __len__(self):
        return len(self._buf)

    def __getitem__(self, i) -> StateSnapshot:
        return self._buf[i]

    @property
    def full(self) -> bool:
        return len(self._buf) == self.depth

    @property
    def times(self):
        return [s.t for s in self._buf]

    @property
    def dt(self) -> float:
        if len(self._buf) < 2:
            raise ValueError("history needs two levels for a spacing")
        return self._buf[1].t - self._buf[0].t

    def snapshots(self):
        return list(self._buf)


@dataclass
class IntegratorSettings:
    cfl: float = 0.4
    margin: float = 0.05  # required head-room 1 - |m|_2
    support: float = 1.0  # data radius
    pad: float = 1.5  # extra width of the active box beyond t + support
    leak_tol: float = 1e-8
    full_grid: bool = False  # disable the active box (reference runs)


def cfl_dt(grid: UniformGrid, margin: float = 0.4, hyp: float = 1.0) -> float:
    """dt = margin * h * min(1, sqrt(hyp))."""
    if not hyp > 0:
        raise HyperbolicityLossError(f"hyperbolicity margin {hyp} is not positive")
    return margin * grid.spacing * min(1.0, math.sqrt(hyp))


def active_bounds(grid: UniformGrid, t: float, settings: IntegratorSettings):
    """Index range [lo, hi) per axis where stage updates happen at time t."""
    n = grid.points_per_axis
    m = grid.cells_per_half
    if settings.full_grid:
        k = m
    else:
        half = t + settings.support + settings.pad
        k = min(m, int(math.ceil(half / grid.spacing)))
    if grid.radial:
        return 0, min(k + 1, n - 2)
    return max(m - k, 2), min(m + k + 1, n - 2)


def _window(grid, lo, hi):
    """Slices of the update region padded by the stencil reach."""
    if grid.radial:
        return (slice(0, hi + 2),)
    return (slice(lo - 2, hi + 2),) * grid.dim


def accelerations(grid: UniformGrid, th, tht, ph, pht, bounds=None, margin: float = 0.05,
                  t: float = 0.0):
    """(theta_tt, phi_tt, max |m|_2) on full-size arrays; zero outside ``bounds``."""
    if bounds is None:
        bounds = active_bounds(grid, 0.0, IntegratorSettings(full_grid=True))
    lo, hi = bounds
    h = grid.spacing
    out_t = np.zeros(grid.shape)
    out_p = np.zeros(grid.shape)
    n = grid.points_per_axis
    row = np.zeros(n)
    if grid.radial:
        kernels.accel_radial(th, tht, ph, pht, h, hi, out_t, out_p, row)
    elif grid.dim == 2:
        kernels.accel_2d(th, tht, ph, pht, h, lo, hi, lo, hi, out_t, out_p, row)
    elif grid.dim == 3:
        b = np.array([lo] * 3)
        e = np.array([hi] * 3)
        kernels.accel_3d(th, tht, ph, pht, h, b, e, out_t, out_p, row)
    else:
        raise GridConfigurationError("evolution needs a 2D/3D cartesian or radial grid")
    mmax = float(row.max())
    if not mmax < 1.0 - margin:
        i = int(row.argmax())
        raise HyperbolicityLossError(
            f"|m|_2 = {mmax:.6g} exceeds 1 - {margin} at t = {t:.6g} (first index {i})",
            location=(t, i), spectrum=mmax)
    return out_t, out_p, mmax


def rhs_stage(s: StateSnapshot, bounds=None, margin: float = 0.05):
    """Time derivative (theta_t, theta_tt, phi_t, phi_tt) of a state."""
    a_t, a_p, _ = accelerations(s.grid, s.theta, s.theta_t, s.phi, s.phi_t, bounds, margin, s.t)
    return s.theta_t, a_t, s.phi_t, a_p


def _edge_magnitude(grid, arrays, lo, hi):
    """Max |value| over the two outermost layers of the update region."""
    if grid.radial:
        return max(float(np.max(np.abs(a[hi - 2:hi]))) for a in arrays)
    sub = tuple(slice(lo, hi) for _ in range(grid.dim))
    inner = tuple(slice(2, -2) for _ in range(grid.dim))
    out = 0.0
    for a in arrays:
        box = np.abs(a[sub])
        ring = box.copy()
        ring[inner] = 0.0
        out = max(out, float(ring.max()))
    return out


@dataclass
class StepInfo:
    t: float
    leak: float
    m_norm: float


def step_rk4(s: StateSnapshot, dt: float, settings: IntegratorSettings | None = None,
             t_new: float | None = None):
    """Classical RK4 step; returns (new snapshot, StepInfo)."""
    settings = settings or IntegratorSettings()
    grid = s.grid
    t_new = s.t + dt if t_new is None else t_new
    lo, hi = active_bounds(grid, t_new, settings)
    win = _window(grid, lo, hi)
    if grid.radial:
        loc = (0, hi)
    else:
        loc = (2, hi - lo + 2)
    y0 = [a[win].copy() for a in s.arrays()]
    shape = y0[0].shape

    def f(y, t):
        a_t, a_p, mm = _local_accel(grid, y, loc, settings.margin, t, shape)
        return (y[1], a_t, y[3], a_p), mm

    k1, m1 = f(y0, s.t)
    y1 = [y0[i] + 0.5 * dt * k1[i] for i in range(4)]
    k2, m2 = f(y1, s.t + 0.5 * dt)
    y2 = [y0[i] + 0.5 * dt * k2[i] for i in range(4)]
    k3, m3 = f(y2, s.t + 0.5 * dt)
    y3 = [y0[i] + dt * k3[i] for i in range(4)]
    k4, m4 = f(y3, t_new)
    yn = [y0[i] + dt / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]) for i in range(4)]
    # only the update region may change; its stencil halo stays as it was (zero)
    mask = np.zeros(shape, dtype=bool)
    mask[tuple(slice(loc[0], loc[1]) for _ in range(len(shape)))] = True
    out = []
    for old, new in zip(s.arrays(), yn):
        arr = old.copy()
        arr[win] = np.where(mask, new, old[win])
        out.append(arr)
    snap = StateSnapshot(grid, t_new, *out)
    if not all(np.all(np.isfinite(a[win])) for a in out):
        raise NonFiniteStateError(f"non-finite values after step to t = {t_new:.6g}")
    leak = _edge_magnitude(grid, out, lo, hi)
    ring = _ring(grid)
    for a in out:
        a[ring] = 0.0
    if leak > settings.leak_tol:
        raise SupportLeakError(f"support monitor {leak:.3g} > {settings.leak_tol} at t = {t_new:.6g}")
    return snap, StepInfo(t_new, leak, max(m1, m2, m3, m4))


_RINGS: dict = {}


def _ring(grid):
    if grid not in _RINGS:
        _RINGS.clear()
        _RINGS[grid] = grid.boundary_mask(2)
    return _RINGS[grid]


def _local_accel(grid, y, loc, margin, t, shape):
    lo, hi = loc
    h = grid.spacing
    out_t = np.zeros(shape)
    out_p = np.zeros(shape)
    row = np.zeros(shape[0])
    th, tht, ph, pht = (np.ascontiguousarray(a) for a in y)
    if grid.radial:
        kernels.accel_radial(th, tht, ph, pht, h, hi, out_t, out_p, row)
    elif grid.dim == 2:
        kernels.accel_2d(th, tht, ph, pht, h, lo, hi, lo, hi, out_t, out_p, row)
    else:
        kernels.accel_3d(th, tht, ph, pht, h, np.array([lo] * 3), np.array([hi] * 3),
                         out_t, out_p, row)
    mmax = float(row.max())
    if not mmax < 1.0 - margin:
        raise HyperbolicityLossError(
            f"|m|_2 = {mmax:.6g} exceeds 1 - {margin} at t = {t:.6g}",
            location=(t, int(row.argmax())), spectrum=mmax)
    return out_t, out_p, mmax


def integrate(s: StateSnapshot, dt: float, n_steps: int, settings: IntegratorSettings | None = None,
              t0: float | None = None, step0: int = 0, callback=None):
    """Take ``n_steps`` steps; times are t0 + k*dt (no accumulated rounding).

    ``callback(step_index, snapshot, info)`` runs after every step.
    """
    settings = settings or IntegratorSettings()
    t0 = s.t - step0 * dt if t0 is None else t0
    for k in range(step0 + 1, step0 + n_steps + 1):
        s, info = step_rk4(s, dt, settings, t_new=t0 + k * dt)
        if callback is not None:
            callback(k, s, info)
    return s


def time_reversed(s: StateSnapshot) -> StateSnapshot:
    """Same configuration with velocities negated."""
    return StateSnapshot(s.grid, 0.0, s.theta.copy(), -s.theta_t, s.phi.copy(), -s.phi_t)
