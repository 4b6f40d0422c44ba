"""Right-hand sides of the Faddeev system in spherical coordinates.

For n = (cos th cos ph, cos th sin ph, sin th) the Euler-Lagrange equations read

    box th = F,   box ph = G,

with F, G built from null forms.  F and G are affine in the second
derivatives, so principal parts are recovered by probing unit slots instead of
writing the coefficient families out.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Jet2
from .nullforms import eta, q0, qq


class HyperbolicityLossError(RuntimeError):
    """The acceleration system (I - m) a = rhs is no longer safely solvable."""

    def __init__(self, message, location=None, spectrum=None):
        super().__init__(message)
        self.location = location
        self.spectrum = spectrum


def embed_sphere(theta, phi) -> np.ndarray:
    """Point of S^2 with latitude theta and longitude phi."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    return np.stack([np.cos(theta) * np.cos(phi), np.cos(theta) * np.sin(phi), np.sin(theta)])


@dataclass
class FieldJets:
    """Jets of theta and phi at common points."""

    theta: Jet2
    phi: Jet2

    @property
    def dim(self) -> int:
        return self.theta.dim


def _box(f: Jet2):
    return f.d2[0, 0] - sum(f.d2[i, i] for i in range(1, f.dim + 1))


def _dQ_upper(b: Jet2, c: Jet2):
    """d_lambda Q^{mu nu}(b, c) as an array indexed (lambda, mu, nu, ...)."""
    db, dc, hb, hc = b.d1, c.d1, b.d2, c.d2
    low = (np.einsum("lm...,n...->lmn...", hb, dc) + np.einsum("m...,ln...->lmn...", db, hc))
    low = low - np.swapaxes(low, 1, 2)
    s = eta(b.dim)
    w = np.outer(s, s).reshape((1,) + (b.dim + 1,) * 2 + (1,) * (db.ndim - 1))
    return low * w


def nested_qmn(a: Jet2, b: Jet2, c: Jet2):
    """Q_{mu nu}(a, Q^{mu nu}(b, c)) with the inner form differentiated from the jets."""
    dX = _dQ_upper(b, c)  # (lambda, mu, nu)
    da = a.d1
    # d_mu a d_nu X^{mu nu} - d_nu a d_mu X^{mu nu}
    t1 = np.einsum("m...,nmn...->...", da, dX)
    t2 = np.einsum("n...,mmn...->...", da, dX)
    return t1 - t2


def eval_F(j: FieldJets):
    th, ph = j.theta, j.phi
    s2 = np.sin(2 * th.value)
    c2 = np.cos(th.value) ** 2
    return (-0.5 * s2 * q0(ph, ph) - 0.25 * s2 * qq(th, ph)
            - 0.5 * c2 * nested_qmn(ph, th, ph))


def eval_G(j: FieldJets):
    th, ph = j.theta, j.phi
    return (np.sin(th.value) ** 2 * _box(ph) + np.sin(2 * th.value) * q0(th, ph)
            + 0.5 * np.cos(th.value) ** 2 * nested_qmn(th, th, ph))


def semilinear_parts(j: FieldJets):
    """(F1, G1): the parts of (F, G) free of second derivatives."""
    th, ph = j.theta, j.phi
    s2 = np.sin(2 * th.value)
    return -0.5 * s2 * q0(ph, ph) - 0.25 * s2 * qq(th, ph), s2 * q0(th, ph)


def _zero_d2(f: Jet2) -> Jet2:
    return Jet2(f.value, f.d1, np.zeros_like(f.d2))


def _slot(f: Jet2, a: int, b: int) -> Jet2:
    d2 = np.zeros_like(f.d2)
    d2[a, b] = 1.0
    d2[b, a] = 1.0
    return Jet2(f.value, f.d1, d2)


def second_derivative_coefficients(j: FieldJets):
    """Probe every second-derivative slot of both fields.

    Returns {(field, a, b): (C_F, C_G)} for a <= b with
    F = sum C_F * d_a d_b field + F1, and likewise for G.
    """
    th0, ph0 = _zero_d2(j.theta), _zero_d2(j.phi)
    base = FieldJets(th0, ph0)
    bF, bG = eval_F(base), eval_G(base)
    out = {}
    n1 = j.dim + 1
    for field in (0, 1):
        for a in range(n1):
            for b in range(a, n1):
                probe = FieldJets(_slot(j.theta, a, b), ph0) if field == 0 else FieldJets(th0, _slot(j.phi, a, b))
                out[(field, a, b)] = (eval_F(probe) - bF, eval_G(probe) - bG)
    return out


def reconstruct(j: FieldJets):
    """F and G rebuilt from probed coefficients plus the semilinear parts."""
    coeff = second_derivative_coefficients(j)
    F1, G1 = semilinear_parts(j)
    F, G = F1, G1
    for (field, a, b), (cF, cG) in coeff.items():
        val = (j.theta if field == 0 else j.phi).d2[a, b]
        F = F + cF * val
        G = G + cG * val
    return F, G


@dataclass
class PrincipalMatrix:
    """m[i][k]: coefficient of d_t^2 of field k in component i of (F, G); b: rest."""

    m: np.ndarray
    b: np.ndarray

    def norm2(self):
        return spectral_norm_2x2(self.m)


def principal_probe(j: FieldJets) -> PrincipalMatrix:
    th, ph = j.theta, j.phi

    def with_tt(f, val):
        d2 = f.d2.copy()
        d2[0, 0] = val
        return Jet2(f.value, f.d1, d2)

    zero = np.zeros_like(th.value)
    one = np.ones_like(th.value)
    base = FieldJets(with_tt(th, zero), with_tt(ph, zero))
    b = np.stack([eval_F(base), eval_G(base)])
    m = np.empty((2, 2) + np.shape(th.value))
    for k, probe in enumerate((FieldJets(with_tt(th, one), with_tt(ph, zero)),
                               FieldJets(with_tt(th, zero), with_tt(ph, one)))):
        m[0, k] = eval_F(probe) - b[0]
        m[1, k] = eval_G(probe) - b[1]
    return PrincipalMatrix(m, b)


def principal_closed_form(j: FieldJets) -> np.ndarray:
    """The same matrix from its closed form (used by the grid kernel)."""
    th, ph = j.theta, j.phi
    c2 = np.cos(th.value) ** 2
    gth, gph = th.d1[1:], ph.d1[1:]
    cross = np.sum(gth * gph, axis=0)
    return np.array([[-c2 * np.sum(gph * gph, axis=0), c2 * cross],
                     [c2 * cross, np.sin(th.value) ** 2 - c2 * np.sum(gth * gth, axis=0)]])


def spectral_norm_2x2(m):
    a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    s = a * a + b * b + c * c + d * d
    det = a * d - b * c
    return np.sqrt(0.5 * (s + np.sqrt(np.maximum(s * s - 4 * det * det, 0.0))))


def solve_accelerations(pm: PrincipalMatrix, lap, margin: float = 0.05):
    """Solve (I - m) (th_tt, ph_tt) = lap + b by the explicit 2x2 inverse."""
    m = np.asarray(pm.m, dtype=float)
    norm = spectral_norm_2x2(m)
    if np.any(norm >= 1.0 - margin):
        idx = np.unravel_index(int(np.argmax(norm)), np.shape(norm)) if np.ndim(norm) else ()
        raise HyperbolicityLossError(
            f"|m|_2 = {float(np.max(norm)):.6g} exceeds 1 - {margin}", location=idx,
            spectrum=np.linalg.eigvals(m[(slice(None), slice(None)) + tuple(idx)]))
    lap = np.asarray(lap, dtype=float)
    r0 = lap[0] + pm.b[0]
    r1 = lap[1] + pm.b[1]
    a, b, c, d = 1 - m[0, 0], -m[0, 1], -m[1, 0], 1 - m[1, 1]
    det = a * d - b * c
    return np.stack([(d * r0 - b * r1) / det, (a * r1 - c * r0) / det])


def hyperbolicity_margin(theta, m_norm, bg_theta_t=0.0) -> float:
    """min over nodes of min(1 - |m|_2, cos^2 th (1 - Theta_t^2), pi/2 - |th|)."""
    theta = np.asarray(theta, dtype=float)
    a = 1.0 - np.asarray(m_norm, dtype=float)
    b = np.cos(theta) ** 2 * (1.0 - np.asarray(bg_theta_t, dtype=float) ** 2)
    c = np.pi / 2 - np.abs(theta)
    return float(np.min(np.minimum(np.minimum(a, b), c)))
