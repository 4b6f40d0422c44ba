"""Compactly supported test functions with exact partial derivatives of any order.

Every profile is a function G of rho = |z|^2 with z = (x - center) / width and
support rho <= 1.  Partial derivatives follow from the recursion

    d_i [G^(j)(rho) P(z)] = G^(j+1)(rho) 2 z_i P(z) + G^(j)(rho) d_i P(z),

so d^alpha f = sum_j G^(j)(rho) P_{alpha,j}(z) with polynomial P_{alpha,j}.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from numpy.polynomial import polynomial as npoly

from .grid import _converged_ball_integral, multi_indices


@lru_cache(maxsize=None)
def _bump_poly(k: int) -> np.ndarray:
    """Coefficients (in s = 1/(1-rho)) of p_k with G^(k) = exp(-s) p_k(s)."""
    p = np.array([1.0])
    for _ in range(k):
        dp = npoly.polyder(p) if len(p) > 1 else np.array([0.0])
        diff = npoly.polysub(dp, p)
        p = npoly.polymulx(npoly.polymulx(diff))
    return p


class RadialProfile:
    """G(rho) on [0, 1) vanishing (with all kept derivatives) at rho = 1."""

    name = "profile"

    def deriv(self, k: int, rho: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class SmoothBumpProfile(RadialProfile):
    """exp(-1/(1 - rho)): C-infinity, support exactly the closed unit ball."""

    name = "bump"

    def deriv(self, k, rho):
        rho = np.asarray(rho, dtype=float)
        inside = rho < 1.0
        s = 1.0 / (1.0 - np.where(inside, rho, 0.0))
        # beyond s = 745 exp(-s) is zero in double precision; clamp so s**deg stays finite
        live = inside & (s < 745.0)
        s = np.where(live, s, 0.0)
        val = np.exp(-s) * npoly.polyval(s, _bump_poly(k))
        return np.where(live, val, 0.0)


@dataclass(frozen=True)
class PolyBumpProfile(RadialProfile):
    """(1 - rho)^power, of class C^(power-1)."""

    power: int = 8

    @property
    def name(self):
        return f"poly{self.power}"

    def deriv(self, k, rho):
        rho = np.asarray(rho, dtype=float)
        if k > self.power:
            return np.zeros_like(rho)
        c = (-1) ** k * math.factorial(self.power) / math.factorial(self.power - k)
        return np.where(rho < 1.0, c * (1.0 - np.minimum(rho, 1.0)) ** (self.power - k), 0.0)


def make_profile(family: str) -> RadialProfile:
    if family == "bump":
        return SmoothBumpProfile()
    if family.startswith("poly"):
        return PolyBumpProfile(int(family[4:] or 8))
    raise ValueError(f"unknown bump family {family!r}")


@lru_cache(maxsize=None)
def _partial_terms(alpha: tuple) -> tuple:
    """Return ((j, {exponent: coeff}), ...) with d^alpha G(|z|^2) = sum_j G^(j) P_j."""
    dim = len(alpha)
    terms = {0: {(0,) * dim: 1.0}}
    for axis, count in enumerate(alpha):
        for _ in range(count):
            new: dict = {}
            for j, poly in terms.items():
                for expo, c in poly.items():
                    # G^(j+1) * 2 z_i * P
                    e2 = list(expo)
                    e2[axis] += 1
                    tgt = new.setdefault(j + 1, {})
                    tgt[tuple(e2)] = tgt.get(tuple(e2), 0.0) + 2.0 * c
                    # G^(j) * d_i P
                    if expo[axis] > 0:
                        e3 = list(expo)
                        e3[axis] -= 1
                        tgt = new.setdefault(j, {})
                        tgt[tuple(e3)] = tgt.get(tuple(e3), 0.0) + c * expo[axis]
            terms = {j: {e: c for e, c in p.items() if c != 0.0} for j, p in new.items()}
    return tuple((j, tuple(p.items())) for j, p in sorted(terms.items()) if p)


def radial_partial(profile: RadialProfile, alpha: tuple, z: np.ndarray) -> np.ndarray:
    """d^alpha of G(|z|^2) at points z of shape (..., dim)."""
    rho = np.sum(z * z, axis=-1)
    out = np.zeros(z.shape[:-1])
    powers: dict = {}
    for j, poly in _partial_terms(tuple(alpha)):
        pv = np.zeros_like(out)
        for expo, c in poly:
            mono = np.ones_like(out)
            for ax, e in enumerate(expo):
                if e:
                    key = (ax, e)
                    if key not in powers:
                        powers[key] = z[..., ax] ** e
                    mono = mono * powers[key]
            pv += c * mono
        out += profile.deriv(j, rho) * pv
    return out


SEMINORM_TABLE = Path(__file__).with_name("data") / "unit_seminorms.json"


@lru_cache(maxsize=1)
def _frozen_seminorms() -> dict:
    if SEMINORM_TABLE.exists():
        return json.loads(SEMINORM_TABLE.read_text())
    return {}


def seminorm_key(family: str, dim: int, k: int, p: float) -> str:
    return f"{family}/{dim}/{k}/{float(p):g}"


@lru_cache(maxsize=None)
def _unit_seminorm(family: str, dim: int, k: int, p: float, frozen: bool = True) -> float:
    key = seminorm_key(family, dim, k, p)
    if frozen and key in _frozen_seminorms():
        return _frozen_seminorms()[key]
    return compute_unit_seminorm(family, dim, k, p)


def compute_unit_seminorm(family: str, dim: int, k: int, p: float) -> float:
    """Sum over |alpha| = k of ||d^alpha G(|x|^2)||_{L^p}, by quadrature."""
    # radial profiles: permuting the components of alpha is an isometry, so
    # each sorted multi-index is integrated once and weighted by its orbit size
    prof = make_profile(family)
    orbits: dict = {}
    for alpha in multi_indices(dim, k):
        key = tuple(sorted(alpha, reverse=True))
        orbits[key] = orbits.get(key, 0) + 1
    total = 0.0
    for alpha, count in orbits.items():
        val = _converged_ball_integral(lambda x, a=alpha: radial_partial(prof, a, x), dim, p)
        total += count * val ** (1.0 / p)
    return total


@dataclass(frozen=True)
class Bump:
    """amplitude * G(|x - center|^2 / width^2), supported in the unit ball."""

    dim: int
    amplitude: float = 1.0
    family: str = "bump"
    center: tuple = ()
    width: float = 1.0

    def __post_init__(self):
        c = tuple(float(v) for v in self.center) if self.center else (0.0,) * self.dim
        object.__setattr__(self, "center", c)
        if len(c) != self.dim:
            raise ValueError("center has wrong dimension")
        if math.hypot(*c) + self.width > 1.0 + 1e-12:
            raise ValueError("bump support must lie inside |x| <= 1")
        if self.width <= 0:
            raise ValueError("width must be positive")

    @property
    def profile(self) -> RadialProfile:
        return make_profile(self.family)

    @property
    def radial(self) -> bool:
        return all(v == 0.0 for v in self.center)

    def scaled(self, c: float) -> "Bump":
        return Bump(self.dim, self.amplitude * c, self.family, self.center, self.width)

    def partial(self, alpha, pts):
        pts = np.asarray(pts, dtype=float)
        if self.amplitude == 0.0:
            return np.zeros(pts.shape[:-1])
        z = (pts - np.asarray(self.center)) / self.width
        order = sum(alpha)
        return self.amplitude * self.width ** (-order) * radial_partial(self.profile, tuple(alpha), z)

    def __call__(self, pts):
        return self.partial((0,) * self.dim, pts)

    def homogeneous_norm(self, k: int, p: float = 1.0) -> float:
        """Translation- and scale-covariant shortcut for the Sobolev seminorms."""
        unit = _unit_seminorm(self.family, self.dim, k, p)
        return abs(self.amplitude) * self.width ** (self.dim / p - k) * unit


@dataclass(frozen=True)
class ZeroFunction:
    dim: int
    radial = True
    amplitude = 0.0

    def partial(self, alpha, pts):
        return np.zeros(np.asarray(pts).shape[:-1])

    def __call__(self, pts):
        return self.partial((0,) * self.dim, pts)

    def scaled(self, c):
        return self

    def homogeneous_norm(self, k, p=1.0):
        return 0.0


@dataclass(frozen=True)
class DerivedFunction:
    """sum_i coef_i * d^{alpha_i} base: a constant-coefficient operator applied to data."""

    base: object
    terms: tuple

    @property
    def dim(self):
        return self.base.dim

    @property
    def radial(self):
        return False

    def partial(self, alpha, pts):
        out = 0.0
        for c, a in self.terms:
            tot = tuple(x + y for x, y in zip(a, alpha))
            out = out + c * self.base.partial(tot, pts)
        if np.isscalar(out):
            return np.zeros(np.asarray(pts).shape[:-1])
        return out

    def __call__(self, pts):
        return self.partial((0,) * self.dim, pts)


def unit(dim: int, *axes) -> tuple:
    a = [0] * dim
    for ax in axes:
        a[ax] += 1
    return tuple(a)


def derivative(f, alpha: tuple, coef: float = 1.0):
    if isinstance(f, ZeroFunction):
        return f
    if isinstance(f, DerivedFunction):
        return DerivedFunction(f.base, tuple((c * coef, tuple(x + y for x, y in zip(a, alpha))) for c, a in f.terms))
    return DerivedFunction(f, ((coef, tuple(alpha)),))


def laplacian(f):
    if isinstance(f, ZeroFunction):
        return f
    dim = f.dim
    base, terms = (f.base, f.terms) if isinstance(f, DerivedFunction) else (f, ((1.0, (0,) * dim),))
    new = []
    for c, a in terms:
        for ax in range(dim):
            new.append((c, tuple(x + 2 * (i == ax) for i, x in enumerate(a))))
    return DerivedFunction(base, tuple(new))


@dataclass(frozen=True)
class SumFunction:
    """Sum of smooth functions (e.g. several bumps)."""

    parts: tuple

    @property
    def dim(self):
        return self.parts[0].dim

    @property
    def radial(self):
        return False

    def partial(self, alpha, pts):
        return sum(p.partial(alpha, pts) for p in self.parts)

    def __call__(self, pts):
        return self.partial((0,) * self.dim, pts)


def support_ball(f):
    """(center, radius) of a ball containing the support of ``f``, or None if f = 0."""
    if isinstance(f, ZeroFunction):
        return None
    if isinstance(f, Bump):
        return (np.asarray(f.center), f.width) if f.amplitude != 0.0 else None
    if isinstance(f, DerivedFunction):
        return support_ball(f.base)
    return (np.zeros(f.dim), 1.0)


def make_bump(dim: int, spec) -> object:
    """Build a data function from a config-style mapping (or pass a handle through)."""
    if spec is None:
        return ZeroFunction(dim)
    if not isinstance(spec, dict):
        return spec
    return Bump(dim, float(spec.get("amplitude", 1.0)), spec.get("family", "bump"),
                tuple(spec.get("center", ())) or (), float(spec.get("width", 1.0)))
