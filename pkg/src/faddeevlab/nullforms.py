"""Null forms Q, Q_{mu nu}, good derivatives T_mu, and their identities.

Everything works on first-derivative vectors ``d1`` (index 0 = time) which may
carry trailing node axes, so the same code serves pointwise tests and whole
grids.  The metric is diag(1, -1, ..., -1).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Jet2


class FrameDegenerateError(ValueError):
    """Raised when a null frame is requested too close to r = 0."""


def _d1(f):
    return f.d1 if isinstance(f, Jet2) else np.asarray(f, dtype=float)


def eta(dim: int) -> np.ndarray:
    s = -np.ones(dim + 1)
    s[0] = 1.0
    return s


def _raise(v):
    """Raise the index of a covector with leading axis of length dim+1."""
    s = eta(v.shape[0] - 1).reshape((-1,) + (1,) * (v.ndim - 1))
    return v * s


def q0(f, g):
    """Q(f, g) = d_t f d_t g - grad f . grad g."""
    a, b = _d1(f), _d1(g)
    return a[0] * b[0] - np.sum(a[1:] * b[1:], axis=0)


def qmn(f, g, mu: int, nu: int):
    """Q_{mu nu}(f, g) = d_mu f d_nu g - d_nu f d_mu g (lower indices)."""
    a, b = _d1(f), _d1(g)
    if mu == nu:
        return np.zeros_like(a[0])
    return a[mu] * b[nu] - a[nu] * b[mu]


def qmn_all(f, g) -> np.ndarray:
    """All Q_{mu nu}(f, g) as an antisymmetric (dim+1, dim+1, ...) array."""
    a, b = _d1(f), _d1(g)
    out = a[:, None] * b[None, :]
    return out - np.swapaxes(out, 0, 1)


def qq(f, g):
    """Q_{mu nu}(f, g) Q^{mu nu}(f, g) = 2 (Q(f,f) Q(g,g) - Q(f,g)^2)."""
    return 2.0 * (q0(f, f) * q0(g, g) - q0(f, g) ** 2)


def qmn_contract(A, B):
    """A_{mu nu} B^{mu nu} for two antisymmetric arrays."""
    n1 = A.shape[0]
    s = eta(n1 - 1)
    w = np.outer(s, s).reshape((n1, n1) + (1,) * (A.ndim - 2))
    return np.sum(A * B * w, axis=(0, 1))


@dataclass
class NullFrame:
    """Point x with r = |x| and omega = (-1, x/r)."""

    x: np.ndarray
    r: np.ndarray
    omega: np.ndarray

    @classmethod
    def at(cls, x, r_min: float = 0.0) -> "NullFrame":
        """Frame at points x of shape (dim,) or (dim, ...)."""
        x = np.asarray(x, dtype=float)
        r = np.sqrt(np.sum(x * x, axis=0))
        if np.any(r <= r_min):
            raise FrameDegenerateError(f"null frame needs r > {r_min}")
        omega = np.concatenate([-np.ones((1,) + r.shape), x / r], axis=0)
        return cls(x, r, omega)

    @property
    def dim(self) -> int:
        return self.x.shape[0]


def good_derivatives(f, frame: NullFrame) -> np.ndarray:
    """T_mu f = omega_mu d_t f + d_mu f; T_0 f is stored as an exact zero."""
    a = _d1(f)
    out = frame.omega * a[0] + a
    out[0] = 0.0
    return out


def null_identity_residual(f, g, frame: NullFrame):
    """Relative residuals of the two T-decompositions of Q and Q_{mu nu}."""
    du, dv = _d1(f), _d1(g)
    w = frame.omega
    tu = good_derivatives(du, frame)
    tv = good_derivatives(dv, frame)
    q = q0(du, dv)
    rhs = np.sum(tu * _raise(dv), axis=0) - np.sum(w * du[0] * _raise(tv), axis=0)
    scale = np.sum(np.abs(du), axis=0) * np.sum(np.abs(dv), axis=0) * 4.0
    scale = np.where(scale > 0, scale, 1.0)
    res_q = np.abs(q - rhs) / scale
    Q = qmn_all(du, dv)
    R = (tu[:, None] * dv[None, :] - dv[:, None] * tu[None, :]
         - w[:, None] * du[0] * tv[None, :] + w[None, :] * du[0] * tv[:, None])
    res_m = np.max(np.abs(Q - R), axis=(0, 1)) / scale
    return res_q, res_m


def null_estimate_ratio(f, g, frame: NullFrame):
    """(|Q| + max|Q_{mu nu}|) / (|Df||Tg| + |Tf||Dg|); bounded by 2(dim+1)."""
    du, dv = _d1(f), _d1(g)
    tu = good_derivatives(du, frame)
    tv = good_derivatives(dv, frame)
    nrm = lambda v: np.sqrt(np.sum(v * v, axis=0))
    lhs = np.abs(q0(du, dv)) + np.max(np.abs(qmn_all(du, dv)), axis=(0, 1))
    rhs = nrm(du) * nrm(tv) + nrm(tu) * nrm(dv)
    return np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), 0.0)
