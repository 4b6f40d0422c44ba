"""Klainerman vector fields on sampled space-time data.

A field near a time t is stored as a *Taylor stack* D[k] = d_t^k u(t, .),
k = 0..K.  Every generator maps a stack of K+1 coefficients to one of K:

    d_t:   D[k] -> D[k+1]
    d_i:   D[k] -> d_i D[k]
    O_ij:  D[k] -> x_i d_j D[k] - x_j d_i D[k]
    S:     D[k] -> t D[k+1] + k D[k] + x . grad D[k]
    L_i:   D[k] -> t d_i D[k] + k d_i D[k-1] + x_i D[k+1]

(the k-terms come from Leibniz on the explicit t).  Stacks are built from a
five-level history, so words up to length three are available.

On the radial 3D grid a radial u is represented exactly for words of length
<= 1: d_t and S keep u radial, O_ij annihilates it, and the three fields
d_i u (likewise L_i u) are x_i/r * g(r), stored once as a ``vector`` stack.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .grid import UniformGrid, diff_array, fd_weights


class InsufficientHistoryError(ValueError):
    pass


# ---------------------------------------------------------------------------
# windows of a grid

@dataclass(frozen=True)
class Patch:
    """Sub-box of a grid (index range [lo, hi) on every axis)."""

    grid: UniformGrid
    lo: int
    hi: int

    @classmethod
    def whole(cls, grid: UniformGrid) -> "Patch":
        return cls(grid, 0, grid.points_per_axis)

    @classmethod
    def around(cls, grid: UniformGrid, half_width: float, margin: int = 4) -> "Patch":
        """Smallest patch containing |x_i| <= half_width plus ``margin`` nodes."""
        m = grid.cells_per_half
        k = min(m, int(math.ceil(half_width / grid.spacing)) + margin)
        if grid.radial:
            return cls(grid, 0, k + 1)
        return cls(grid, m - k, m + k + 1)

    @property
    def index(self):
        return (slice(self.lo, self.hi),) * self.grid.dim

    @property
    def shape(self):
        return (self.hi - self.lo,) * self.grid.dim

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def radial(self) -> bool:
        return self.grid.radial

    @property
    def physical_dim(self) -> int:
        return self.grid.physical_dim

    def axis(self):
        return self.grid.axis_coords[self.lo:self.hi]

    def coords(self):
        return list(np.meshgrid(*([self.axis()] * self.dim), indexing="ij"))

    def radius(self):
        if self.radial:
            return self.axis().copy()
        return np.sqrt(sum(c * c for c in self.coords()))

    def weights(self):
        n = self.grid.points_per_axis
        w1 = np.full(n, self.grid.spacing)
        w1[0] *= 0.5
        w1[-1] *= 0.5
        w1 = w1[self.lo:self.hi]
        if self.radial:
            r = self.axis()
            return w1 * 4.0 * math.pi * r * r
        w = w1
        for _ in range(self.dim - 1):
            w = np.multiply.outer(w, w1)
        return w

    def take(self, arr):
        """Restrict full-grid arrays (leading axes allowed) to the patch."""
        return arr[(Ellipsis,) + self.index]

    def diff(self, values, axis, order=1, parity=1):
        """Derivative on the patch; one-sided closures at the patch edges."""
        return diff_array(values, self.grid, axis, order, parity)


# ---------------------------------------------------------------------------
# generators and words

def generators(dim: int) -> tuple:
    """Alphabet (d_t, d_1..d_n, O_ij, S, L_1..L_n); size 2 + 2n + n(n-1)/2."""
    names = ["dt"] + [f"d{i}" for i in range(1, dim + 1)]
    names += [f"O{i}{j}" for i in range(1, dim + 1) for j in range(i + 1, dim + 1)]
    names += ["S"] + [f"L{i}" for i in range(1, dim + 1)]
    return tuple(names)


@dataclass(frozen=True)
class GammaIndex:
    """Ordered word over the generator alphabet, applied left to right."""

    dim: int
    letters: tuple = ()

    def __post_init__(self):
        alpha = generators(self.dim)
        for x in self.letters:
            if x not in alpha:
                raise ValueError(f"unknown generator {x!r} for dim {self.dim}")

    def __len__(self):
        return len(self.letters)

    def __str__(self):
        return "".join(f"[{x}]" for x in self.letters) or "[]"


def words(dim: int, max_len: int):
    """All words of length <= max_len, without algebraic reduction."""
    alpha = generators(dim)
    for n in range(max_len + 1):
        for w in itertools.product(alpha, repeat=n):
            yield GammaIndex(dim, w)


# ---------------------------------------------------------------------------
# Taylor stacks

@dataclass
class TaylorStack:
    """D[k] = d_t^k u at time t on a patch; ``vector`` marks x_i/r g(r) families."""

    patch: Patch
    t: float
    coeffs: np.ndarray
    vector: bool = False
    zero: bool = False

    @property
    def depth(self) -> int:
        return self.coeffs.shape[0]

    def _new(self, coeffs, vector=None, zero=False):
        return TaylorStack(self.patch, self.t, coeffs, self.vector if vector is None else vector, zero)

    def value(self):
        return self.coeffs[0]

    def time_derivative(self):
        if self.depth < 2:
            raise InsufficientHistoryError("need two Taylor coefficients for d_t")
        return self.coeffs[1]


def stack_from_history(hist, patch: Patch, name: str, rate: str, level: int,
                       subtract=None, depth: int | None = None) -> TaylorStack:
    """Taylor stack of a state field at history level ``level``.

    D[0] and D[1] are read from the state (``name`` and its velocity ``rate``);
    D[k], k >= 2, are time differences of the velocity over all stored levels.
    ``subtract`` (array of shape (K+1, *patch.shape)) removes a known part such
    as the exact background.
    """
    snaps = hist.snapshots()
    n = len(snaps)
    depth = n if depth is None else depth
    if depth > n:
        raise InsufficientHistoryError(f"{depth} coefficients need {depth} history levels, have {n}")
    dt = hist.dt if n > 1 else 1.0
    offs = tuple(range(-level, n - level))
    vel = np.stack([patch.take(getattr(s, rate)) for s in snaps])
    out = np.empty((depth,) + patch.shape)
    out[0] = patch.take(getattr(snaps[level], name))
    if depth > 1:
        out[1] = vel[level]
    for k in range(2, depth):
        w = fd_weights(offs, k - 1) / dt ** (k - 1)
        out[k] = np.tensordot(w, vel, axes=(0, 0))
    if subtract is not None:
        out = out - subtract[:depth]
    return TaylorStack(patch, snaps[level].t, out)


def stack_from_function(patch: Patch, t: float, fn, depth: int) -> TaylorStack:
    """Stack from a callable fn(k, t, coords) giving d_t^k u exactly."""
    xs = [patch.axis()] if patch.radial else patch.coords()
    return TaylorStack(patch, t, np.stack([fn(k, t, xs) for k in range(depth)]))


def _grad(st: TaylorStack, arr):
    p = st.patch
    if p.radial:
        par = -1 if st.vector else 1
        return [p.diff(arr, 1, 1, par)]
    return [p.diff(arr, ax, 1) for ax in range(1, p.dim + 1)]


def apply_generator(st: TaylorStack, g: str) -> TaylorStack:
    if st.depth < 2:
        raise InsufficientHistoryError(f"generator {g} needs one more Taylor coefficient")
    p = st.patch
    D = st.coeffs
    K = st.depth - 1
    ks = np.arange(K).reshape((-1,) + (1,) * p.dim)
    if st.zero:
        return st._new(D[:K] * 0.0, zero=True)
    if p.radial:
        return _apply_radial(st, g)
    xs = p.coords()
    if g == "dt":
        return st._new(D[1:].copy())
    if g.startswith("d"):
        i = int(g[1:])
        return st._new(p.diff(D[:K], i, 1))
    if g.startswith("O"):
        i, j = int(g[1]), int(g[2])
        return st._new(xs[i - 1] * p.diff(D[:K], j, 1) - xs[j - 1] * p.diff(D[:K], i, 1))
    if g == "S":
        xg = sum(xs[i] * p.diff(D[:K], i + 1, 1) for i in range(p.dim))
        return st._new(st.t * D[1:] + ks * D[:K] + xg)
    if g.startswith("L"):
        i = int(g[1:])
        dD = p.diff(D, i, 1)
        low = np.concatenate([np.zeros((1,) + D.shape[1:]), dD[:K - 1]]) if K > 0 else dD[:0]
        return st._new(st.t * dD[:K] + ks * low + xs[i - 1] * D[1:])
    raise ValueError(f"unknown generator {g!r}")


def _apply_radial(st: TaylorStack, g: str) -> TaylorStack:
    p = st.patch
    D = st.coeffs
    K = st.depth - 1
    r = p.axis()
    ks = np.arange(K).reshape(-1, 1)
    if st.vector:
        raise NotImplementedError("radial stacks support words of length <= 1 only")
    if g == "dt":
        return st._new(D[1:].copy())
    if g == "S":
        return st._new(st.t * D[1:] + ks * D[:K] + r * p.diff(D[:K], 1, 1))
    if g.startswith("O"):
        return st._new(D[:K] * 0.0, zero=True)
    Dr = p.diff(D, 1, 1)
    if g.startswith("d"):
        return st._new(Dr[:K], vector=True)
    if g.startswith("L"):
        low = np.concatenate([np.zeros((1, D.shape[1])), Dr[:K - 1]])
        return st._new(st.t * Dr[:K] + ks * low + r * D[1:], vector=True)
    raise ValueError(f"unknown generator {g!r}")


def apply_gamma(st: TaylorStack, word: GammaIndex) -> TaylorStack:
    """Apply the letters of ``word`` left to right."""
    if len(word) > st.depth - 1:
        raise InsufficientHistoryError(
            f"word of length {len(word)} needs {len(word) + 1} Taylor coefficients, have {st.depth}")
    for g in word.letters:
        st = apply_generator(st, g)
    return st


def radial_word_classes(word: GammaIndex) -> bool:
    """True when the radial representation covers this word."""
    return len(word) <= 1


# ---------------------------------------------------------------------------
# energies and norms

def _bracket(x):
    return np.sqrt(1.0 + x * x)


def first_jet(st: TaylorStack):
    """(value, d_t, list of spatial gradient components) of the stack's field."""
    return st.value(), st.time_derivative(), _grad(st, st.value())


def energy_density(st: TaylorStack):
    """(1/2)(|d_t w|^2 + |grad w|^2), summed over the family for vector stacks."""
    w, wt, grad = first_jet(st)
    dens = wt * wt + sum(g * g for g in grad)
    if st.patch.radial and st.vector:
        r = st.patch.axis()
        g_over_r = np.where(r > 0, w / np.where(r > 0, r, 1.0), grad[0])
        dens = dens + 2.0 * g_over_r**2
    return 0.5 * dens


def e1(st: TaylorStack) -> float:
    if st.zero:
        return 0.0
    return float(np.sum(energy_density(st) * st.patch.weights()))


def good_derivative_sq(st: TaylorStack, r_min: float | None = None):
    """(|T w|^2, mask of nodes inside r < r_min where an upper bound is used)."""
    p = st.patch
    w, wt, grad = first_jet(st)
    r = p.radius()
    r_min = 0.5 * p.grid.spacing if r_min is None else r_min
    near = r < r_min
    safe = np.where(near, 1.0, r)
    if p.radial:
        tsq = (wt + grad[0]) ** 2
        if st.vector:
            g_over_r = np.where(near, grad[0], w / safe)
            tsq = tsq + 2.0 * g_over_r**2
            bound = 2.0 * (wt * wt + grad[0] ** 2) + 2.0 * g_over_r**2
        else:
            bound = 2.0 * (wt * wt + grad[0] ** 2)
    else:
        xs = p.coords()
        tsq = sum((x / safe * wt + g) ** 2 for x, g in zip(xs, grad))
        bound = 2.0 * (wt * wt + sum(g * g for g in grad))
    return np.where(near, bound, tsq), near


def ghost_weight(t: float, r):
    """e^{-q(t-r)} <t-r>^{-2} with q = arctan."""
    s = t - r
    return np.exp(-np.arctan(s)) / (1.0 + s * s)


@dataclass
class GhostTerm:
    value: float
    near_origin: float  # part of ``value`` contributed by the r < r_min bound


def ghost_e1(st: TaylorStack) -> GhostTerm:
    """(1/2) int e^{-q(t-r)} <t-r>^{-2} |T w|^2 dx."""
    if st.zero:
        return GhostTerm(0.0, 0.0)
    tsq, near = good_derivative_sq(st)
    dens = 0.5 * ghost_weight(st.t, st.patch.radius()) * tsq * st.patch.weights()
    return GhostTerm(float(np.sum(dens)), float(np.sum(dens[near])))


def weighted_sup(st: TaylorStack) -> float:
    """max <t+r>^{(n-1)/2} <t-r>^{(n-1)/2} |w| over the patch."""
    if st.zero:
        return 0.0
    n = st.patch.physical_dim
    r = st.patch.radius()
    wgt = (_bracket(st.t + r) * _bracket(st.t - r)) ** ((n - 1) / 2)
    return float(np.max(wgt * np.abs(st.value())))


def _word_list(st: TaylorStack, max_len: int):
    dim = st.patch.physical_dim if st.patch.radial else st.patch.dim
    if st.patch.radial and max_len > 1:
        raise NotImplementedError("radial diagnostics cover words of length <= 1")
    return list(words(dim, max_len))


def _radial_word(word):
    # one representative per radially equivalent family: d_1 stands for d_1..d_3
    g = word.letters[0] if word.letters else None
    return g is None or g in ("dt", "S", "d1", "L1", "O12")


def gamma_family(st: TaylorStack, max_len: int):
    """Yield (word, Gamma^word stack) for every word of length <= max_len.

    Prefix sharing keeps the cost linear in the number of words.  Radial
    stacks yield one vector stack per family of three coordinate words.
    """
    if st.patch.radial:
        for w in _word_list(st, max_len):
            if _radial_word(w):
                yield w, apply_gamma(st, w)
        return
    dim = st.patch.dim
    alpha = generators(dim)

    def rec(prefix, cur):
        yield GammaIndex(dim, prefix), cur
        if len(prefix) < max_len:
            for g in alpha:
                yield from rec(prefix + (g,), apply_generator(cur, g))

    yield from rec((), st)


def energy_Ek(st: TaylorStack, k: int) -> float:
    """E_k = sum over words of length <= k-1 of E_1(Gamma^a u)."""
    return sum(e1(s) for _, s in gamma_family(st, k - 1))


def ghost_energy(st: TaylorStack, k: int) -> float:
    return sum(ghost_e1(s).value for _, s in gamma_family(st, k - 1))


def weighted_sup_Xk(st: TaylorStack, k: int) -> float:
    return max(weighted_sup(s) for _, s in gamma_family(st, k))


@dataclass
class FieldDiagnostics:
    """All orders at once from one pass over the word tree."""

    E: list  # E[k-1] = E_k, k = 1..kmax+1
    ghost: list
    X: list  # X[k], k = 0..kmax
    ghost_near_origin: float


def field_diagnostics(st: TaylorStack, kmax: int) -> FieldDiagnostics:
    """E_1..E_{kmax+1}, ghost_1..ghost_{kmax+1}, X_0..X_kmax of one field."""
    e = [0.0] * (kmax + 1)
    gh = [0.0] * (kmax + 1)
    x = [0.0] * (kmax + 1)
    near = 0.0
    for w, s in gamma_family(st, min(kmax, st.depth - 1)):
        n = len(w)
        if s.depth >= 2 and not s.zero:
            val = e1(s)
            g = ghost_e1(s)
            near += g.near_origin
            for k in range(n, kmax + 1):
                e[k] += val
                gh[k] += g.value
        sup = weighted_sup(s)
        for k in range(n, kmax + 1):
            x[k] = max(x[k], sup)
    # E_k needs k + 1 coefficients, X_k needs k + 1 as well
    for k in range(kmax + 1):
        if k + 2 > st.depth:
            e[k] = gh[k] = math.nan
        if k + 1 > st.depth:
            x[k] = math.nan
    return FieldDiagnostics(e, gh, x, near)


# ---------------------------------------------------------------------------
# inequality harnesses

@dataclass
class HarnessResult:
    kind: str
    max_ratio: float
    ratios: list


def _ratio(lhs, rhs):
    if rhs == 0.0:
        return 0.0 if lhs == 0.0 else math.inf
    return lhs / rhs


def klainerman_sobolev_ratio(st: TaylorStack, k: int = 2) -> float:
    """sup <t+r>^{(n-1)/2} <t-r>^{1/2} |u| / sum_{|a|<=k} ||Gamma^a u||_{L2}."""
    p = st.patch
    n = p.physical_dim
    r = p.radius()
    wgt = _bracket(st.t + r) ** ((n - 1) / 2) * _bracket(st.t - r) ** 0.5
    lhs = float(np.max(wgt * np.abs(st.value())))
    rhs = 0.0
    w = p.weights()
    for _, s in gamma_family(st, k):
        if not s.zero:
            rhs += math.sqrt(float(np.sum(s.value() ** 2 * w)))
    return _ratio(lhs, rhs)


def hardy_ratio(st: TaylorStack) -> float:
    """||u / <t-r>||_{L2} / ||grad u||_{L2} for u supported in |x| <= t + 1."""
    p = st.patch
    w = p.weights()
    r = p.radius()
    lhs = math.sqrt(float(np.sum((st.value() / _bracket(st.t - r)) ** 2 * w)))
    grad = _grad(st, st.value())
    rhs = math.sqrt(float(np.sum(sum(g * g for g in grad) * w)))
    return _ratio(lhs, rhs)


def decay_ratio_du(st: TaylorStack) -> float:
    """max <t-r> |D u| / max over |a| = 1 of |Gamma^a u| (pointwise form)."""
    p = st.patch
    r = p.radius()
    u, ut, grad = first_jet(st)
    du = np.sqrt(ut * ut + sum(g * g for g in grad))
    gam = np.zeros_like(du)
    for wd, s in gamma_family(st, 1):
        if len(wd) == 1 and not s.zero:
            gam = np.maximum(gam, np.abs(s.value()))
    lhs = _bracket(st.t - r) * du
    mask = gam > 1e-12 * max(float(gam.max()), 1e-300)
    if not np.any(mask):
        return 0.0
    return float(np.max(lhs[mask] / gam[mask]))


def decay_ratio_tu(st: TaylorStack) -> float:
    """max <t+r> |T u| / max over |a| = 1 of |Gamma^a u| (good-derivative decay)."""
    p = st.patch
    r = p.radius()
    tsq, _ = good_derivative_sq(st)
    gam = np.zeros_like(tsq)
    for wd, s in gamma_family(st, 1):
        if len(wd) == 1 and not s.zero:
            gam = np.maximum(gam, np.abs(s.value()))
    lhs = _bracket(st.t + r) * np.sqrt(tsq)
    mask = gam > 1e-12 * max(float(gam.max()), 1e-300)
    if not np.any(mask):
        return 0.0
    return float(np.max(lhs[mask] / gam[mask]))


_HARNESSES = {
    "klainerman_sobolev": klainerman_sobolev_ratio,
    "hardy": hardy_ratio,
    "decay_1_11": decay_ratio_du,
    "decay_1_13": decay_ratio_tu,
}


def inequality_harness(kind: str, family) -> HarnessResult:
    """Max LHS/RHS ratio of one inequality over a family of Taylor stacks."""
    if kind not in _HARNESSES:
        raise ValueError(f"unknown harness {kind!r}")
    family = list(family)
    if not family:
        raise ValueError("empty test family")
    ratios = [_HARNESSES[kind](st) for st in family]
    return HarnessResult(kind, max(ratios), ratios)


# ---------------------------------------------------------------------------
# commutator checks on exactly known space-time functions

def box_of_stack(st: TaylorStack):
    """d_t^2 w - Laplacian w from the stack (needs three coefficients)."""
    if st.depth < 3:
        raise InsufficientHistoryError("box needs three Taylor coefficients")
    p = st.patch
    lap = sum(p.diff(st.coeffs[0], ax, 2) for ax in range(1, p.dim + 1))
    return st.coeffs[2] - lap


def box_stack(st: TaylorStack) -> TaylorStack:
    """Taylor stack of box w (loses two coefficients)."""
    p = st.patch
    D = st.coeffs
    lap = sum(p.diff(D[:-2], ax, 2) for ax in range(1, p.dim + 1))
    return TaylorStack(p, st.t, D[2:] - lap)
