"""E1 drift and time-reversal error of free waves (phi = 0) under grid refinement.

    python3 scripts/linear_wave_study.py radial 0.025 0.0125 0.00625
    python3 scripts/linear_wave_study.py 2 0.125 0.0625
"""
import sys
import time

import numpy as np

from faddeevlab.grid import UniformGrid, diff_array
from faddeevlab.integrator import IntegratorSettings, StateSnapshot, integrate, time_reversed
from faddeevlab.waves import BackgroundField, BackgroundSpec, wave_energy


def energy(s):
    g = s.grid
    grad = [diff_array(s.theta, g, 1, 1, 1)] if g.radial else [diff_array(s.theta, g, a, 1) for a in range(1, g.dim + 1)]
    return wave_energy(s.theta_t, grad, g)


def study(mode, h, T=10.0):
    dim = 3 if mode == "radial" else int(mode)
    g = UniformGrid(1, T + 4, h, "radial3d") if mode == "radial" else UniformGrid(dim, T + 4, h)
    bf = BackgroundField(BackgroundSpec(dim, {"family": "poly12"}, {"family": "poly12", "amplitude": 0.5}, 0.01))
    th = bf.time_derivatives(g, 0.0, 1)
    s0 = StateSnapshot(g, 0.0, th[0], th[1], g.zeros(), g.zeros())
    dt = 0.4 * h
    n = int(round(T / dt))
    e0 = energy(s0)
    es = [e0]
    t0 = time.perf_counter()
    s1 = integrate(s0, dt, n, callback=lambda k, s, _: es.append(energy(s)) if k % 10 == 0 else None)
    back = integrate(time_reversed(s1), dt, n, IntegratorSettings(full_grid=True))
    rev = max(float(np.max(np.abs(back.theta - s0.theta))), float(np.max(np.abs(back.theta_t + s0.theta_t))))
    drift = max(abs(e - e0) for e in es) / e0
    return drift, rev, time.perf_counter() - t0


if __name__ == "__main__":
    mode = sys.argv[1]
    for h in map(float, sys.argv[2:]):
        d, r, w = study(mode, h)
        print(f"{mode} h={h:g}: E1 drift {d:.3e}  reversal {r:.3e}  ({w:.1f} s)", flush=True)
