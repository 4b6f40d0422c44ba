"""Uniform grids, sampled fields, fourth-order stencils and discrete norms."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Protocol

import numpy as np


class GridConfigurationError(ValueError):
    """Grid too small or otherwise unusable for the requested operation."""


class QuadratureError(RuntimeError):
    """A quadrature did not converge; carries the last two estimates."""

    def __init__(self, message, coarse, fine):
        super().__init__(f"{message}: coarse={coarse!r} fine={fine!r}")
        self.coarse = coarse
        self.fine = fine


@lru_cache(maxsize=None)
def fd_weights(offsets: tuple, order: int) -> np.ndarray:
    """Finite-difference weights (unit spacing) for the ``order``-th derivative at 0."""
    offs = np.asarray(offsets, dtype=float)
    m = len(offs)
    vander = np.array([offs**k / math.factorial(k) for k in range(m)])
    rhs = np.zeros(m)
    rhs[order] = 1.0
    w = np.linalg.solve(vander, rhs)
    w.setflags(write=False)
    return w


CENTERED = {
    1: np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0,
    2: np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0,
}


@dataclass(frozen=True)
class UniformGrid:
    """Node-centred grid on [-L, L]^dim, or on [0, L] for the 3D radial reduction.

    ``points_per_axis`` is odd in cartesian mode so the origin is a node.
    """

    dim: int
    half_width: float
    spacing: float
    mode: str = "cartesian"

    def __post_init__(self):
        if self.mode not in ("cartesian", "radial3d"):
            raise GridConfigurationError(f"unknown grid mode {self.mode!r}")
        if self.mode == "radial3d" and self.dim != 1:
            raise GridConfigurationError("radial3d grids are one-dimensional (dim=1)")
        if self.dim not in (1, 2, 3):
            raise GridConfigurationError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.spacing <= 0 or self.half_width <= 0:
            raise GridConfigurationError("spacing and half_width must be positive")

    @property
    def radial(self) -> bool:
        return self.mode == "radial3d"

    @property
    def physical_dim(self) -> int:
        """Dimension of the physical space (3 for the radial reduction)."""
        return 3 if self.radial else self.dim

    @property
    def cells_per_half(self) -> int:
        return int(round(self.half_width / self.spacing))

    @property
    def points_per_axis(self) -> int:
        if self.radial:
            return self.cells_per_half + 1
        return 2 * self.cells_per_half + 1

    @property
    def shape(self) -> tuple:
        return (self.points_per_axis,) * self.dim

    @property
    def axis_coords(self) -> np.ndarray:
        m = self.cells_per_half
        if self.radial:
            return np.arange(0, m + 1) * self.spacing
        return np.arange(-m, m + 1) * self.spacing

    def coords(self) -> list:
        """Coordinate arrays (ij indexing), one per spatial axis."""
        ax = self.axis_coords
        return list(np.meshgrid(*([ax] * self.dim), indexing="ij"))

    def radius(self) -> np.ndarray:
        if self.radial:
            return self.axis_coords.copy()
        return np.sqrt(sum(c * c for c in self.coords()))

    def points(self) -> np.ndarray:
        """Node coordinates with shape ``shape + (dim,)``."""
        return np.stack(self.coords(), axis=-1)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def trapezoid_weights(self) -> np.ndarray:
        """Quadrature weights; the radial mode includes the 4 pi r^2 measure."""
        n = self.points_per_axis
        w1 = np.full(n, self.spacing)
        if self.radial:
            w1[-1] *= 0.5
            w1[0] *= 0.5
            r = self.axis_coords
            return w1 * 4.0 * np.pi * r * r
        w1[0] *= 0.5
        w1[-1] *= 0.5
        w = w1
        for _ in range(self.dim - 1):
            w = np.multiply.outer(w, w1)
        return w

    def boundary_mask(self, width: int = 1) -> np.ndarray:
        """True on the outermost ``width`` node layers (outer shell only in radial mode)."""
        mask = np.zeros(self.shape, dtype=bool)
        n = self.points_per_axis
        for ax in range(self.dim):
            idx = [slice(None)] * self.dim
            if not self.radial:
                idx[ax] = slice(0, width)
                mask[tuple(idx)] = True
            idx[ax] = slice(n - width, n)
            mask[tuple(idx)] = True
        return mask


@dataclass
class ScalarField:
    """Samples of a real function on a grid at time ``time_tag``.

    ``parity`` only matters in radial mode, where it fixes the reflection used
    for ghost nodes across r = 0 (+1 even, -1 odd).
    """

    grid: UniformGrid
    values: np.ndarray
    time_tag: float = 0.0
    parity: int = 1

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise GridConfigurationError(
                f"values shape {self.values.shape} does not match grid {self.grid.shape}"
            )

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def __mul__(self, c):
        return ScalarField(self.grid, self.values * c, self.time_tag, self.parity)

    __rmul__ = __mul__


class Jet2:
    """Value, first and second space-time derivatives of one function.

    ``d1[0]`` is the time derivative; ``d2`` is symmetric.  Entries may be
    scalars or equally shaped arrays (one jet per grid node).  Only the upper
    triangle of ``d2`` is read from the input; the lower one is mirrored.
    """

    __slots__ = ("value", "d1", "d2")

    def __init__(self, value, d1, d2=None):
        self.value = np.asarray(value, dtype=float)
        d1 = np.asarray(d1, dtype=float)
        n1 = d1.shape[0]
        if d2 is None:
            d2 = np.zeros((n1, n1) + d1.shape[1:])
        d2 = np.array(d2, dtype=float)
        if d2.shape[:2] != (n1, n1):
            raise ValueError("d2 must be (dim+1) x (dim+1)")
        for a in range(n1):
            for b in range(a + 1, n1):
                d2[b, a] = d2[a, b]
        self.d1 = d1
        self.d2 = d2

    @property
    def dim(self) -> int:
        return self.d1.shape[0] - 1

    @classmethod
    def zero(cls, dim: int, shape=()) -> "Jet2":
        return cls(np.zeros(shape), np.zeros((dim + 1,) + shape), np.zeros((dim + 1, dim + 1) + shape))

    def scaled(self, c) -> "Jet2":
        return Jet2(self.value * c, self.d1 * c, self.d2 * c)

    def __add__(self, other: "Jet2") -> "Jet2":
        return Jet2(self.value + other.value, self.d1 + other.d1, self.d2 + other.d2)

    def __sub__(self, other: "Jet2") -> "Jet2":
        return Jet2(self.value - other.value, self.d1 - other.d1, self.d2 - other.d2)

    def with_d2(self, a: int, b: int, val) -> "Jet2":
        d2 = self.d2.copy()
        d2[a, b] = val
        d2[b, a] = val
        return Jet2(self.value, self.d1, d2)

    def reflected(self) -> "Jet2":
        """Jet of x -> f(t, -x): odd spatial derivative orders flip sign."""
        s = np.ones(self.dim + 1)
        s[1:] = -1.0
        d1 = self.d1 * s.reshape((-1,) + (1,) * (self.d1.ndim - 1))
        ss = np.outer(s, s).reshape((self.dim + 1, self.dim + 1) + (1,) * (self.d2.ndim - 2))
        return Jet2(self.value, d1, self.d2 * ss)


def _apply_axis(values: np.ndarray, axis: int, order: int, h: float, parity: int | None) -> np.ndarray:
    """Fourth-order derivative along one array axis.

    ``parity`` None means both ends are physical boundaries (one-sided closures);
    otherwise the low end is r = 0 and ghost nodes are reflected with that parity.
    """
    v = np.moveaxis(values, axis, 0)
    n = v.shape[0]
    if n < 5:
        raise GridConfigurationError(f"need at least 5 nodes along an axis, got {n}")
    out = np.empty_like(v)
    c = CENTERED[order]
    scale = h**-order
    if parity is None:
        inner = slice(2, n - 2)
        out[inner] = sum(c[k] * v[k:n - 4 + k] for k in range(5))
        low = 0
    else:
        ghost = parity * v[2:0:-1]
        ext = np.concatenate([ghost, v], axis=0)
        m = ext.shape[0]
        out[: n - 2] = sum(c[k] * ext[k:m - 4 + k] for k in range(5))
        low = None
    npts = 6 if (order == 2 and n >= 6) else 5
    if low is not None:
        for i in (0, 1):
            offs = tuple(range(-i, npts - i))
            w = fd_weights(offs, order)
            out[i] = sum(w[k] * v[i + offs[k]] for k in range(npts))
    for i in (n - 2, n - 1):
        j = n - 1 - i
        offs = tuple(range(j - npts + 1, j + 1))
        w = fd_weights(offs, order)
        out[i] = sum(w[k] * v[i + offs[k]] for k in range(npts))
    return np.moveaxis(out * scale, 0, axis)


def diff_array(values: np.ndarray, grid: UniformGrid, axis: int, order: int = 1, parity: int = 1) -> np.ndarray:
    """Derivative of raw samples along spatial ``axis`` (1-based).

    Leading array dimensions beyond the grid shape are carried along, so a
    stack of Taylor coefficients can be differentiated at once.
    """
    if not 1 <= axis <= grid.dim:
        raise GridConfigurationError(f"axis must be in [1, {grid.dim}], got {axis}")
    arr_axis = values.ndim - grid.dim + axis - 1
    return _apply_axis(values, arr_axis, order, grid.spacing, parity if grid.radial else None)


def fd_derivative(f: ScalarField, axis: int, order: int = 1) -> ScalarField:
    """Fourth-order centred derivative with one-sided closures near the boundary."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    vals = diff_array(f.values, f.grid, axis, order, f.parity)
    parity = f.parity * (-1) ** order
    return ScalarField(f.grid, vals, f.time_tag, parity)


def laplacian_array(values: np.ndarray, grid: UniformGrid, parity: int = 1) -> np.ndarray:
    """Spatial Laplacian; radial mode uses d_rr + (2/r) d_r with 3 d_rr at r = 0."""
    if grid.radial:
        frr = diff_array(values, grid, 1, 2, parity)
        fr = diff_array(values, grid, 1, 1, parity)
        r = grid.axis_coords
        out = frr.copy()
        out[..., 1:] += 2.0 * fr[..., 1:] / r[1:]
        out[..., 0] = 3.0 * frr[..., 0]
        return out
    return sum(diff_array(values, grid, ax, 2) for ax in range(1, grid.dim + 1))


def lp_norm(f: ScalarField, p: float) -> float:
    """Trapezoid-rule L^p norm over the grid (p = inf gives max |f|)."""
    a = np.abs(f.values)
    if math.isinf(p):
        return float(a.max()) if a.size else 0.0
    if p < 1:
        raise ValueError("p must be >= 1")
    w = f.grid.trapezoid_weights()
    return float(np.sum(w * a**p) ** (1.0 / p))


class SmoothFunction(Protocol):
    """A function handle that can report its partial derivatives.

    ``partial(alpha, pts)`` evaluates d^alpha f at points of shape (..., dim).
    Supports are assumed inside the unit ball.
    """

    dim: int

    def partial(self, alpha: tuple, pts: np.ndarray) -> np.ndarray: ...


def multi_indices(dim: int, k: int) -> list:
    """All multi-indices of total order ``k`` (each distinct index once)."""
    return [a for a in itertools.product(range(k + 1), repeat=dim) if sum(a) == k]


def _ray_directions(dim: int, level: int):
    """Directions and weights for integrating over the unit sphere."""
    if dim == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if dim == 2:
        n = 64 * 2**level
        ang = (np.arange(n) + 0.5) * 2 * np.pi / n
        return np.stack([np.cos(ang), np.sin(ang)], -1), np.full(n, 2 * np.pi / n)
    nt = 16 * 2**level
    nphi = 2 * nt
    mu, wmu = np.polynomial.legendre.leggauss(nt)
    phi = (np.arange(nphi) + 0.5) * 2 * np.pi / nphi
    s = np.sqrt(1 - mu * mu)
    d = np.stack(
        [np.outer(s, np.cos(phi)), np.outer(s, np.sin(phi)), np.outer(mu, np.ones(nphi))], -1
    ).reshape(-1, 3)
    w = np.outer(wmu, np.full(nphi, 2 * np.pi / nphi)).ravel()
    return d, w


def ball_integral_abs(func, dim: int, p: float = 1.0, level: int = 0, radius: float = 1.0) -> float:
    """Integral of |func|^p over the ball |x| <= radius along rays from the origin.

    Along each ray the sign changes of ``func`` are bracketed on a sample grid,
    refined by bisection, and every sign-definite piece is integrated with
    Gauss-Legendre, so kinks of |func| do not spoil convergence.
    ``func`` maps points of shape (N, dim) to values of shape (N,).
    Directions are processed in fixed-size chunks to bound memory.
    """
    dirs, wdir = _ray_directions(dim, level)
    total = 0.0
    chunk = 1024
    for s in range(0, len(dirs), chunk):
        total += float(np.sum(_ray_integrals(func, dirs[s:s + chunk], dim, p, level, radius) * wdir[s:s + chunk]))
    return total


def _ray_integrals(func, dirs, dim, p, level, radius):
    nsamp = 64 * (level + 1)
    rs = np.linspace(0.0, radius, nsamp + 1)
    nd = len(dirs)
    vals = func((dirs[:, None, :] * rs[None, :, None]).reshape(-1, dim)).reshape(nd, nsamp + 1)
    sign = np.sign(vals)
    change = (sign[:, :-1] * sign[:, 1:]) < 0
    max_roots = int(change.sum(axis=1).max()) if nd else 0
    # bracket -> bisection on all rays at once
    di, si = np.nonzero(change)
    lo = rs[si].copy()
    hi = rs[si + 1].copy()
    flo = vals[di, si]
    for _ in range(48):
        if len(di) == 0:
            break
        mid = 0.5 * (lo + hi)
        fm = func(dirs[di] * mid[:, None])
        left = np.sign(fm) == np.sign(flo)
        lo = np.where(left, mid, lo)
        flo = np.where(left, fm, flo)
        hi = np.where(left, hi, mid)
    roots = 0.5 * (lo + hi)
    knots = np.full((nd, max_roots + 2), radius)
    knots[:, 0] = 0.0
    counts = np.zeros(nd, dtype=int)
    for d, r in zip(di, roots):
        counts[d] += 1
        knots[d, counts[d]] = r
    knots.sort(axis=1)
    # split each sign-definite piece into sub-panels so smooth but steep profiles resolve
    panels = 4 * 2**level
    a0 = knots[:, :-1]
    b0 = knots[:, 1:]
    frac = np.arange(panels + 1) / panels
    edges = a0[..., None] + (b0 - a0)[..., None] * frac
    a = edges[..., :-1].reshape(nd, -1)
    b = edges[..., 1:].reshape(nd, -1)
    xg, wg = np.polynomial.legendre.leggauss(16)
    half = 0.5 * (b - a)
    rq = (a + b)[..., None] * 0.5 + half[..., None] * xg
    wq = half[..., None] * wg
    pts = dirs[:, None, None, :] * rq[..., None]
    fv = np.abs(func(pts.reshape(-1, dim)).reshape(rq.shape)) ** p
    return np.sum(fv * wq * rq ** (dim - 1), axis=(1, 2))


def _converged_ball_integral(func, dim, p=1.0, rtol=1e-4, fail=1e-3, max_level=3):
    prev = ball_integral_abs(func, dim, p, 0)
    for level in range(1, max_level + 1):
        cur = ball_integral_abs(func, dim, p, level)
        scale = max(abs(cur), 1e-300)
        if abs(cur - prev) <= rtol * scale or cur == prev:
            return cur
        if level == max_level and abs(cur - prev) > fail * scale:
            raise QuadratureError("ball quadrature did not converge", prev, cur)
        prev = cur
    return cur


def w_k1_homogeneous_norm(f: SmoothFunction, k: int, dim: int, p: float = 1.0) -> float:
    """Sum over |a| = k of the L^p norm of d^a f (homogeneous Sobolev seminorm).

    Each distinct multi-index counts once.  ``f`` must be supported in the
    unit ball and expose ``partial``.
    """
    cached = getattr(f, "homogeneous_norm", None)
    if cached is not None:
        return cached(k, p)
    total = 0.0
    for alpha in multi_indices(dim, k):
        val = _converged_ball_integral(lambda x, a=alpha: f.partial(a, x), dim, p)
        total += val ** (1.0 / p)
    return total
