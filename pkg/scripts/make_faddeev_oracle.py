"""Regenerate the frozen computer-algebra values for F, G and the principal matrix.

Each jet is realised as the quadratic polynomial it describes, the null forms
are applied symbolically (so the nested form is genuinely differentiated), and
the results are evaluated at the origin to 30 significant digits.
Run from the repository root: python3 scripts/make_faddeev_oracle.py
"""
import json
import random
from fractions import Fraction
from pathlib import Path

import sympy as sp

OUT = Path(__file__).resolve().parents[1] / "src" / "faddeevlab" / "data" / "faddeev_oracle.json"


def rand_rat(rng, den=8, span=12):
    return Fraction(rng.randint(-span, span), rng.randint(1, den))


def rand_jet(rng, n):
    value = rand_rat(rng, 8, 10)
    d1 = [rand_rat(rng) for _ in range(n + 1)]
    d2 = [[Fraction(0)] * (n + 1) for _ in range(n + 1)]
    for a in range(n + 1):
        for b in range(a, n + 1):
            d2[a][b] = d2[b][a] = rand_rat(rng)
    return value, d1, d2


def poly(jet, X):
    v, d1, d2 = jet
    e = sp.Rational(v.numerator, v.denominator)
    n1 = len(d1)
    for a in range(n1):
        e += sp.Rational(d1[a].numerator, d1[a].denominator) * X[a]
        for b in range(n1):
            e += sp.Rational(d2[a][b].numerator, d2[a][b].denominator) * X[a] * X[b] / 2
    return e


def build(n):
    X = sp.symbols(f"x0:{n + 1}")
    sig = [1] + [-1] * n

    def d(f, mu):
        return sp.diff(f, X[mu])

    def Q(f, g):
        return sum(sig[m] * d(f, m) * d(g, m) for m in range(n + 1))

    def Qlow(f, g, m, k):
        return d(f, m) * d(g, k) - d(f, k) * d(g, m)

    def box(f):
        return sum(sig[m] * d(d(f, m), m) for m in range(n + 1))

    def F_G(th, ph):
        qq = sum(sig[m] * sig[k] * Qlow(th, ph, m, k) ** 2 for m in range(n + 1) for k in range(n + 1))
        nest_f = sum(d(ph, m) * d(sig[m] * sig[k] * Qlow(th, ph, m, k), k)
                     - d(ph, k) * d(sig[m] * sig[k] * Qlow(th, ph, m, k), m)
                     for m in range(n + 1) for k in range(n + 1))
        nest_g = sum(d(th, m) * d(sig[m] * sig[k] * Qlow(th, ph, m, k), k)
                     - d(th, k) * d(sig[m] * sig[k] * Qlow(th, ph, m, k), m)
                     for m in range(n + 1) for k in range(n + 1))
        F = (-sp.Rational(1, 2) * sp.sin(2 * th) * Q(ph, ph) - sp.Rational(1, 4) * sp.sin(2 * th) * qq
             - sp.Rational(1, 2) * sp.cos(th) ** 2 * nest_f)
        G = (sp.sin(th) ** 2 * box(ph) + sp.sin(2 * th) * Q(th, ph)
             + sp.Rational(1, 2) * sp.cos(th) ** 2 * nest_g)
        return F, G

    return X, F_G


def main():
    rng = random.Random(20240531)
    cases = []
    for n in (2, 3):
        X, F_G = build(n)
        at0 = {x: 0 for x in X}
        for _ in range(50):
            jt, jp = rand_jet(rng, n), rand_jet(rng, n)
            a, b = sp.symbols("a b")
            jt_s = (jt[0], jt[1], [[Fraction(0) if (i, k) == (0, 0) else jt[2][i][k] for k in range(n + 1)] for i in range(n + 1)])
            jp_s = (jp[0], jp[1], [[Fraction(0) if (i, k) == (0, 0) else jp[2][i][k] for k in range(n + 1)] for i in range(n + 1)])
            th = poly(jt, X)
            ph = poly(jp, X)
            F, G = F_G(th, ph)
            # principal matrix: derivative with respect to the d_t^2 slots
            th_p = poly(jt_s, X) + a * X[0] ** 2 / 2
            ph_p = poly(jp_s, X) + b * X[0] ** 2 / 2
            Fp, Gp = F_G(th_p, ph_p)
            Fp0, Gp0 = Fp.subs(at0), Gp.subs(at0)
            m = [[sp.diff(Fp0, a), sp.diff(Fp0, b)], [sp.diff(Gp0, a), sp.diff(Gp0, b)]]
            ev = lambda e: str(sp.N(e.subs({a: 0, b: 0}), 30))
            cases.append({
                "dim": n,
                "theta": [str(jt[0]), [str(v) for v in jt[1]], [[str(v) for v in row] for row in jt[2]]],
                "phi": [str(jp[0]), [str(v) for v in jp[1]], [[str(v) for v in row] for row in jp[2]]],
                "F": ev(F.subs(at0)), "G": ev(G.subs(at0)),
                "m": [[ev(e) for e in row] for row in m],
            })
    OUT.write_text(json.dumps(cases, indent=1))


if __name__ == "__main__":
    main()
