"""Independent reference solutions shared by the wave and acceptance tests."""
import math

import numpy as np

from faddeevlab.bumps import Bump
from faddeevlab.waves import BackgroundSpec


def _gauss(a, b, n=200):
    g, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * g + 0.5 * (b + a), 0.5 * (b - a) * w


def dalembert_radial(f0: Bump, f1: Bump, amp, t, r):
    """u(t, r) for radial 3D data from r u = 1D d'Alembert solution (even extensions)."""
    B = lambda s: Bump(1, f0.amplitude, f0.family, (), f0.width)(np.atleast_1d(s)[:, None])
    C = Bump(1, f1.amplitude, f1.family, (), f1.width)
    val = 0.5 * ((r + t) * B(r + t)[0] + (r - t) * B(r - t)[0])
    # integral of s C(s) over [r - t, r + t], split at the support edges
    cuts = sorted({r - t, r + t, *[c for c in (-f1.width, f1.width) if r - t < c < r + t]})
    for a, b in zip(cuts[:-1], cuts[1:]):
        s, w = _gauss(a, b)
        val += 0.5 * np.sum(s * C(s[:, None]) * w)
    return amp * val / r


def descent_oracle(u0: Bump, u1: Bump, amp, t, x):
    """2D solution as a 3D spherical mean of z-independent data (polar-angle quadrature)."""
    th, wth = _gauss(0.0, 0.5 * math.pi, 400)
    nphi = 800
    ph = (np.arange(nphi) + 0.5) * 2 * math.pi / nphi
    s = np.sin(th)[:, None]
    om = np.stack([s * np.cos(ph), s * np.sin(ph)], -1)
    weight = 2.0 * (np.sin(th) * wth)[:, None] * (2 * math.pi / nphi) / (4 * math.pi)
    pts = np.asarray(x) + t * om

    def mean(vals):
        return float(np.sum(vals * weight))

    radial = u0.partial((1, 0), pts) * om[..., 0] + u0.partial((0, 1), pts) * om[..., 1]
    return amp * (t * mean(u1(pts)) + mean(u0(pts)) + t * mean(radial))


def generic2(fam="poly12", amp=0.3):
    return BackgroundSpec(2, {"family": fam, "center": (0.2, 0.1), "width": 0.6},
                          {"family": fam, "center": (-0.1, 0.2), "width": 0.7}, amp)


def generic3(fam="poly12", amp=0.3):
    return BackgroundSpec(3, {"family": fam, "center": (0.2, 0.1, -0.1), "width": 0.6},
                          {"family": fam, "center": (-0.1, 0.2, 0.0), "width": 0.7}, amp)


def wave_residual(ev, spec, t, x, step=1e-3):
    """d_t^2 u - lap u with 5-point stencils on exact samples."""
    c = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12 * step * step)
    offs = np.arange(-2, 3) * step
    utt = sum(ci * ev(spec, t + o, x, 1e-12) for ci, o in zip(c, offs))
    lap = 0.0
    for i in range(len(x)):
        e = np.zeros(len(x))
        e[i] = 1.0
        lap += sum(ci * ev(spec, t, x + o * e, 1e-12) for ci, o in zip(c, offs))
    return utt - lap


def random_spacetime(rng, dim, n):
    ts = rng.uniform(0.2, 1.8, n)
    xs = rng.uniform(-1.2, 1.2, (n, dim))
    return zip(ts, xs)
