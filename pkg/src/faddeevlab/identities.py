"""Exact-identity checks that need no PDE solve.

Each check returns a small dict of measured residuals plus a ``passed`` flag;
``identity_suite`` bundles them for the CLI.
"""
from __future__ import annotations

import json
import math
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from .bumps import Bump
from .faddeev import FieldJets, eval_F, eval_G, principal_probe, reconstruct
from .grid import Jet2, UniformGrid
from .nullforms import NullFrame, null_identity_residual, qmn_all
from .vectorfields import Patch, apply_generator, box_stack, inequality_harness, stack_from_function
from .waves import tail_identity

ORACLE = Path(__file__).with_name("data") / "faddeev_oracle.json"


def random_jets(rng: np.random.Generator, dim: int, n: int, scale: float = 1.0) -> Jet2:
    """n independent jets with entries uniform in [-scale, scale]."""
    v = rng.uniform(-scale, scale, n)
    d1 = rng.uniform(-scale, scale, (dim + 1, n))
    d2 = rng.uniform(-scale, scale, (dim + 1, dim + 1, n))
    d2 = 0.5 * (d2 + np.swapaxes(d2, 0, 1))
    return Jet2(v, d1, d2)


def random_frames(rng: np.random.Generator, dim: int, n: int) -> NullFrame:
    x = rng.normal(size=(dim, n))
    x *= rng.uniform(0.1, 10.0, n) / np.linalg.norm(x, axis=0)
    return NullFrame.at(x)


def _rel(a, b):
    return np.abs(a - b) / np.maximum(np.abs(b), 1.0)


def check_null_identities(n: int = 1000, seed: int = 0, tol: float = 1e-12) -> dict:
    rng = np.random.default_rng(seed)
    worst = 0.0
    antisym = True
    for dim in (2, 3):
        f = random_jets(rng, dim, n)
        g = random_jets(rng, dim, n)
        frame = random_frames(rng, dim, n)
        rq, rm = null_identity_residual(f, g, frame)
        worst = max(worst, float(rq.max()), float(rm.max()))
        Q = qmn_all(f, g)
        antisym &= bool(np.all(Q == -np.swapaxes(Q, 0, 1)))
    return {"max_residual": worst, "antisymmetric": antisym, "passed": worst <= tol and antisym}


def _frac_jet(spec) -> Jet2:
    v, d1, d2 = spec
    fl = lambda s: float(Fraction(s))
    return Jet2(fl(v), [fl(x) for x in d1], [[fl(x) for x in row] for row in d2])


def load_oracle(path=ORACLE) -> list:
    return json.loads(Path(path).read_text())


def check_rhs_oracle(tol: float = 1e-12) -> dict:
    """F, G and the principal matrix against frozen computer-algebra values."""
    cases = load_oracle()
    worst = 0.0
    worst_m = 0.0
    for c in cases:
        j = FieldJets(_frac_jet(c["theta"]), _frac_jet(c["phi"]))
        worst = max(worst, float(_rel(eval_F(j), float(c["F"]))), float(_rel(eval_G(j), float(c["G"]))))
        m = principal_probe(j).m
        ref = np.array([[float(x) for x in row] for row in c["m"]])
        worst_m = max(worst_m, float(np.max(_rel(m, ref))))
    return {"cases": len(cases), "max_rel_error": worst, "max_rel_error_m": worst_m,
            "passed": worst <= tol and worst_m <= tol}


def check_annihilation(n: int = 1000, seed: int = 1) -> dict:
    """F = G = 0 exactly when every phi-jet entry vanishes."""
    rng = np.random.default_rng(seed)
    exact = True
    for dim in (2, 3):
        th = random_jets(rng, dim, n, 2.0)
        j = FieldJets(th, Jet2.zero(dim, (n,)))
        exact &= bool(np.all(eval_F(j) == 0.0) and np.all(eval_G(j) == 0.0))
    return {"exact_zero": exact, "passed": exact}


def check_reconstruction(n: int = 1000, seed: int = 2, tol: float = 1e-12) -> dict:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for dim in (2, 3):
        j = FieldJets(random_jets(rng, dim, n), random_jets(rng, dim, n))
        F, G = reconstruct(j)
        worst = max(worst, float(_rel(F, eval_F(j)).max()), float(_rel(G, eval_G(j)).max()))
    return {"max_rel_error": worst, "passed": worst <= tol}


def check_tails(tol: float = 1e-10) -> dict:
    """f(t) recovered from the m-th derivative tail integral, m = 1..4."""
    worst = 0.0
    for fam in ("poly12", "bump"):
        f = Bump(1, 1.0, fam)
        for m in range(1, 5):
            fm = lambda s, m=m: f.partial((m,), np.asarray(s)[:, None])
            for t in np.linspace(-0.95, 0.95, 9):
                ref = float(f(np.array([[t]]))[0])
                worst = max(worst, abs(tail_identity(fm, m, float(t), n=64) - ref))
    return {"max_abs_error": worst, "passed": bool(worst <= tol)}


# ---------------------------------------------------------------------------
# commutators on an exactly known smooth space-time function

def _test_function(dim: int):
    """u = cos(t + a.x) exp(-|x - c|^2 / 2) with exact time derivatives."""
    a = np.array([0.3, -0.2, 0.1])[:dim]
    c = np.array([0.2, 0.1, -0.1])[:dim]

    def fn(k, t, xs):
        phase = t + sum(ai * x for ai, x in zip(a, xs))
        env = np.exp(-0.5 * sum((x - ci) ** 2 for x, ci in zip(xs, c)))
        return np.cos(phase + 0.5 * math.pi * k) * env

    return fn


def commutator_residuals(dim: int, h: float, t: float = 0.7, half: float = 6.0, inner: float = 2.0) -> dict:
    """max |[box, G] u - expected| on |x_i| <= inner for each generator G."""
    grid = UniformGrid(dim, half, h)
    patch = Patch.whole(grid)
    st = stack_from_function(patch, t, _test_function(dim), 5)
    mask = np.all([np.abs(x) <= inner for x in patch.coords()], axis=0)
    box_u = box_stack(st)
    out = {}
    for g in ("O12", "S", "L1", "d1", "dt"):
        lhs = box_stack(apply_generator(st, g)).coeffs[0]
        rhs = apply_generator(box_u, g).coeffs[0]
        if g == "S":
            rhs = rhs + 2.0 * box_u.coeffs[0]
        out[g] = float(np.max(np.abs(lhs - rhs)[mask]))
    # t box u = S d_t u - L_i d_i u
    st_t = apply_generator(st, "dt")
    rhs = apply_generator(st_t, "S").coeffs[0]
    for i in range(1, dim + 1):
        rhs = rhs - apply_generator(apply_generator(st, f"d{i}"), f"L{i}").coeffs[0]
    out["t_box"] = float(np.max(np.abs(t * box_u.coeffs[0] - rhs)[mask]))
    return out


def check_commutators(h: float = 0.1, min_order: float = 3.0, floor: float = 1e-10) -> dict:
    """Refinement order of each commutator residual; residuals below ``floor`` are round-off."""
    res = {}
    orders = {}
    ok = True
    for dim in (2, 3):
        hh = h if dim == 2 else 2 * h
        half = 6.0 if dim == 2 else 4.0
        a = commutator_residuals(dim, hh, half=half)
        b = commutator_residuals(dim, hh / 2, half=half)
        res[dim] = {"coarse": a, "fine": b}
        orders[dim] = {}
        for k in a:
            order = math.log2(a[k] / b[k]) if b[k] > 0 else math.inf
            orders[dim][k] = order
            ok &= order >= min_order or max(a[k], b[k]) < floor
    return {"residuals": res, "orders": orders, "passed": ok}


# ---------------------------------------------------------------------------
# inequality harnesses on a random family

HARNESS_TIMES = (0.0, 5.0, 10.0, 20.0)


def harness_family(n: int = 50, h: float = 0.05, times=HARNESS_TIMES, seed: int = 0):
    """Stacks of u = sum_j a_j cos(w_j t + p_j) B_j(x): three random 2D bumps in |x| <= 1 each.

    Every member is supported in |x| <= 1 <= t + 1, as the Hardy bound requires.
    """
    rng = np.random.default_rng(seed)
    patch = Patch.whole(UniformGrid(2, 1.5, h))
    out = []
    for _ in range(n):
        terms = []
        for _ in range(3):
            w = rng.uniform(0.3, 0.6)
            c = rng.normal(size=2)
            c *= rng.uniform(0.0, 1.0 - w) / np.linalg.norm(c)
            terms.append((Bump(2, rng.normal(), "poly12", tuple(c), w), rng.uniform(0.5, 2.0),
                          rng.uniform(0, 2 * math.pi)))

        def fn(k, t, xs, terms=terms):
            pts = np.stack(xs, -1)
            return sum(b(pts) * om**k * math.cos(om * t + ph + 0.5 * math.pi * k) for b, om, ph in terms)

        out.extend(stack_from_function(patch, t, fn, 3) for t in times)
    return out


def check_harnesses(h: float = 0.05, n: int = 50, seed: int = 0) -> dict:
    """Max Klainerman-Sobolev (k = 2) and Hardy ratios over the harness family."""
    fam = harness_family(n, h, seed=seed)
    ks = inequality_harness("klainerman_sobolev", fam).max_ratio
    hardy = inequality_harness("hardy", fam).max_ratio
    return {"klainerman_sobolev": ks, "hardy": hardy,
            "passed": bool(np.isfinite(ks) and np.isfinite(hardy))}


def identity_suite(seed: int = 0) -> dict:
    """All exact checks with timing; ``passed`` is the conjunction."""
    checks = {
        "null_identities": lambda: check_null_identities(seed=seed),
        "rhs_oracle": check_rhs_oracle,
        "annihilation": lambda: check_annihilation(seed=seed + 1),
        "reconstruction": lambda: check_reconstruction(seed=seed + 2),
        "tails": check_tails,
        "commutators": check_commutators,
        "harnesses": check_harnesses,
    }
    out = {}
    for name, fn in checks.items():
        t0 = time.perf_counter()
        r = fn()
        r["seconds"] = time.perf_counter() - t0
        out[name] = r
    out["passed"] = all(r["passed"] for r in out.values())
    return out
