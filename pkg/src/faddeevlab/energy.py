"""Modified energy densities, their equivalence band, and per-time reports.

Densities take first-derivative vectors ``d1`` (index 0 = time, trailing node
axes allowed) of

    u, Theta, v            the perturbation, background and second field,
    gu = Gamma^a u, gv = Gamma^a v,

plus the values of u and Theta (through cos^2(u + Theta)).  ``form`` selects
the three-dimensional printed form (Q^{mu 0}(u + Theta, Gamma^a v) in the
second line of e_1) or the two-dimensional one (Q^{mu 0}(u, Gamma^a v)).
The ghost flag multiplies every density by e^{-q(sigma)}, q = arctan,
sigma = t - r.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .nullforms import eta, q0
from .vectorfields import (
    Patch,
    TaylorStack,
    field_diagnostics,
    first_jet,
    gamma_family,
    ghost_e1,
    stack_from_history,
)

E0_FLOOR = 1e-14


def ghost_factor(sigma):
    return np.exp(-np.arctan(sigma))


def _vec(d1):
    return np.asarray(d1, dtype=float)


def _sq(d1):
    return np.sum(_vec(d1) ** 2, axis=0)


def _dq_mu0(a, f, g):
    """d_mu a Q^{mu 0}(f, g) with Q^{mu 0} = eta^{mu mu} Q_{mu 0}."""
    a, f, g = _vec(a), _vec(f), _vec(g)
    s = eta(a.shape[0] - 1).reshape((-1,) + (1,) * (a.ndim - 1))
    q = f * g[0] - f[0] * g
    return np.sum(s * a * q, axis=0)


def _qq(a, b, c, d):
    """Q_{mu nu}(a, b) Q^{mu nu}(c, d) = 2 (Q(a, c) Q(b, d) - Q(a, d) Q(b, c))."""
    a, b, c, d = _vec(a), _vec(b), _vec(c), _vec(d)
    return 2.0 * (q0(a, c) * q0(b, d) - q0(a, d) * q0(b, c))


def _weight(ghost, sigma):
    if not ghost:
        return 1.0
    return ghost_factor(0.0 if sigma is None else sigma)


def density_e0(du, dv, ghost: bool = False, sigma=None):
    """(1/2)(|D Gamma^a u|^2 + |D Gamma^a v|^2), optionally ghost weighted."""
    return 0.5 * _weight(ghost, sigma) * (_sq(du) + _sq(dv))


def density_e_tilde(u, theta, du, dtheta, dv, dgv, dgu, ghost: bool = False, sigma=None,
                    form: int = 3):
    """(e~_0, e_1) at common points.

    u, theta: values; du, dtheta, dv, dgv, dgu: first-derivative vectors of
    u, Theta, v, Gamma^a v, Gamma^a u.
    """
    w = _weight(ghost, sigma)
    ut = np.asarray(u, dtype=float) + np.asarray(theta, dtype=float)
    c2 = np.cos(ut) ** 2
    s2 = np.sin(ut) ** 2
    du, dth, dv, dgv, dgu = map(_vec, (du, dtheta, dv, dgv, dgu))
    dut = du + dth
    e0t = (0.5 * s2 * _sq(dgv) + c2 * dgv[0] * _dq_mu0(dth, dth, dgv)
           - 0.25 * c2 * _qq(dth, dgv, dth, dgv))
    x2 = dut if form == 3 else du
    e1 = (-c2 * dgu[0] * (_dq_mu0(dv, dgu, dv) + _dq_mu0(dv, dut, dgv))
          + c2 * dgv[0] * (_dq_mu0(dut, dgu, dv) + _dq_mu0(dut, x2, dgv))
          + c2 * dgv[0] * _dq_mu0(du, dth, dgv)
          + 0.25 * c2 * (_qq(dv, dgu, dgu, dv) + 2.0 * _qq(dv, dgu, dut, dgv))
          - 0.25 * c2 * _qq(du + 2.0 * dth, dgv, du, dgv))
    return w * e0t, w * e1


def lower_bound(u, theta, dtheta, dgu, dgv, ghost: bool = False, sigma=None):
    """Right side of the pointwise bound e_0 - e~_0 >= (...)."""
    w = _weight(ghost, sigma)
    c2 = np.cos(np.asarray(u, dtype=float) + np.asarray(theta, dtype=float)) ** 2
    dgu, dgv, dth = map(_vec, (dgu, dgv, dtheta))
    return 0.5 * w * (_sq(dgu) + c2 * dgv[0] ** 2 + c2 * (1.0 - dth[0] ** 2) * _sq(dgv[1:]))


@dataclass
class EquivalenceResult:
    min_ratio: float
    max_ratio: float
    lower_ok: bool
    violations: int
    below_floor: int


def _jet_vec(st: TaylorStack):
    v, vt, grad = first_jet(st)
    return v, np.stack([vt] + grad)


def equivalence_check(u: TaylorStack, v: TaylorStack, theta: TaylorStack, max_len: int = 1,
                      ghost: bool = False, form: int = 3) -> EquivalenceResult:
    """Band of (e_0 - e~)/e_0 and the node-wise lower bound over words <= max_len."""
    uval, du = _jet_vec(u)
    _, dv = _jet_vec(v)
    thval, dth = _jet_vec(theta)
    sigma = u.t - u.patch.radius() if ghost else None
    lo, hi = math.inf, -math.inf
    bad = 0
    below = 0
    for (wu, gu), (_, gv) in zip(gamma_family(u, max_len), gamma_family(v, max_len)):
        if u.patch.radial and gu.vector:
            continue  # x_i/r families are not radial scalars
        if gu.depth < 2:
            continue
        _, dgu = _jet_vec(gu) if not gu.zero else (None, np.zeros_like(du))
        _, dgv = _jet_vec(gv) if not gv.zero else (None, np.zeros_like(dv))
        e0 = density_e0(dgu, dgv, ghost, sigma)
        et0, e1 = density_e_tilde(uval, thval, du, dth, dv, dgv, dgu, ghost, sigma, form)
        bound = lower_bound(uval, thval, dth, dgu, dgv, ghost, sigma)
        gap = e0 - et0
        bad += int(np.count_nonzero(gap < bound - 1e-12 * np.maximum(e0, 1e-300)))
        mask = e0 > E0_FLOOR
        below += int(np.count_nonzero(~mask))
        if np.any(mask):
            ratio = (gap - e1)[mask] / e0[mask]
            lo = min(lo, float(ratio.min()))
            hi = max(hi, float(ratio.max()))
    if lo == math.inf:
        lo = hi = 1.0
    return EquivalenceResult(lo, hi, bad == 0, bad, below)


def ghost_dissipation(gu: TaylorStack, gv: TaylorStack) -> float:
    """int p_0 dx = (1/2) int e^{-q} q' (|T Gamma^a u|^2 + |T Gamma^a v|^2) dx."""
    return ghost_e1(gu).value + ghost_e1(gv).value


# ---------------------------------------------------------------------------
# report rows

BASE_COLUMNS = (["t"] + [f"E{k}" for k in range(1, 5)] + [f"ghost{k}" for k in range(1, 5)]
                + [f"X{k}" for k in range(4)]
                + ["hyp_margin", "equiv_min", "equiv_max", "ghost_cum", "boundary_leak"])
EXTRA_COLUMNS = ([f"E{k}_u" for k in range(1, 5)] + [f"E{k}_v" for k in range(1, 5)]
                 + [f"X{k}_u" for k in range(4)] + [f"X{k}_v" for k in range(4)]
                 + ["m_norm", "equiv_violations"])
COLUMNS = tuple(BASE_COLUMNS + EXTRA_COLUMNS)


@dataclass
class EnergyReport:
    """One diagnostic row; E and X entries past the computed order are NaN."""

    t: float
    E_u: list
    E_v: list
    ghost_u: list
    ghost_v: list
    X_u: list
    X_v: list
    hyp_margin: float
    m_norm: float
    equiv: EquivalenceResult
    boundary_leak: float
    ghost_cum: float = 0.0
    extra: dict = field(default_factory=dict)

    def values(self) -> dict:
        pad = lambda xs, n: list(xs) + [math.nan] * (n - len(xs))
        E_u, E_v = pad(self.E_u, 4)[:4], pad(self.E_v, 4)[:4]
        g_u, g_v = pad(self.ghost_u, 4)[:4], pad(self.ghost_v, 4)[:4]
        X_u, X_v = pad(self.X_u, 4)[:4], pad(self.X_v, 4)[:4]
        row = {"t": self.t}
        for k in range(4):
            row[f"E{k + 1}"] = E_u[k] + E_v[k]
        for k in range(4):
            row[f"ghost{k + 1}"] = g_u[k] + g_v[k]
        for k in range(4):
            row[f"X{k}"] = max(X_u[k], X_v[k]) if not (math.isnan(X_u[k]) or math.isnan(X_v[k])) else math.nan
        row.update(hyp_margin=self.hyp_margin, equiv_min=self.equiv.min_ratio,
                   equiv_max=self.equiv.max_ratio, ghost_cum=self.ghost_cum,
                   boundary_leak=self.boundary_leak)
        for k in range(4):
            row[f"E{k + 1}_u"] = E_u[k]
        for k in range(4):
            row[f"E{k + 1}_v"] = E_v[k]
        for k in range(4):
            row[f"X{k}_u"] = X_u[k]
        for k in range(4):
            row[f"X{k}_v"] = X_v[k]
        row["m_norm"] = self.m_norm
        row["equiv_violations"] = float(self.equiv.violations)
        return row


def background_stack(bf, patch: Patch, t: float, depth: int) -> TaylorStack:
    """Exact d_t^k Theta, k < depth, sampled on a patch."""
    if bf is None or bf.spec.is_zero:
        return TaylorStack(patch, t, np.zeros((depth,) + patch.shape))
    r = patch.radius()
    if bf.radial is not None:
        data = np.stack([bf._profiles(k, t, r)[0] for k in range(depth)])
        return TaylorStack(patch, t, data)
    sub = bf._generic_time_derivatives(_PatchGrid(patch), t, depth - 1)
    return TaylorStack(patch, t, sub)


class _PatchGrid:
    """Minimal grid facade so the generic evaluator can sample a patch."""

    def __init__(self, patch: Patch):
        self.patch = patch
        self.shape = patch.shape
        self.radial = patch.radial
        self.physical_dim = patch.physical_dim

    def points(self):
        if self.radial:
            return self.patch.axis()[:, None]
        return np.stack(self.patch.coords(), axis=-1)


def compute_report(hist, level: int, bf, kmax: int, m_norm: float, leak: float,
                   half_width: float, form: int | None = None, ghost_equiv: bool | None = None,
                   equiv_len: int = 1) -> EnergyReport:
    """Diagnostics of the snapshot ``hist[level]``.

    ``half_width`` bounds the support of everything at that time; ``m_norm`` is
    max |m|_2 of the principal matrix over the snapshot.
    """
    snap = hist[level]
    grid = snap.grid
    t = snap.t
    patch = Patch.around(grid, half_width)
    depth = min(len(hist), kmax + 2)
    th = background_stack(bf, patch, t, depth)
    U = stack_from_history(hist, patch, "theta", "theta_t", level, subtract=th.coeffs, depth=depth)
    V = stack_from_history(hist, patch, "phi", "phi_t", level, depth=depth)
    du = field_diagnostics(U, kmax)
    dv = field_diagnostics(V, kmax)
    n = grid.physical_dim
    form = (3 if n == 3 else 2) if form is None else form
    ghost_equiv = (n == 2) if ghost_equiv is None else ghost_equiv
    eq = equivalence_check(U, V, th, max_len=min(equiv_len, depth - 2), ghost=ghost_equiv, form=form)
    theta = patch.take(snap.theta)
    c2 = np.cos(theta) ** 2 * (1.0 - th.coeffs[1] ** 2)
    hyp = min(1.0 - m_norm, float(c2.min()), float((np.pi / 2 - np.abs(theta)).min()))
    return EnergyReport(t, du.E, dv.E, du.ghost, dv.ghost, du.X, dv.X, hyp, m_norm, eq, leak)


def accumulate_ghost(rows):
    """Fill ghost_cum by the trapezoid rule on ghost1 over the row times."""
    total = 0.0
    prev = None
    for r in rows:
        g = r.ghost_u[0] + r.ghost_v[0]
        if prev is not None:
            total += 0.5 * (r.t - prev[0]) * (g + prev[1])
        r.ghost_cum = total
        prev = (r.t, g)
    return rows


def report_dict(r: EnergyReport) -> dict:
    d = asdict(r)
    d["equiv"] = asdict(r.equiv)
    return d
