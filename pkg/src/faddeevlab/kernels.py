"""Fused per-node kernels for the accelerations (th_tt, ph_tt).

Each node gathers fourth-order centred differences of th, ph, th_t, ph_t,
evaluates F and G with both d_t^2 slots zeroed through the closed forms

    Q_{mu nu}(f, g) Q^{mu nu}(f, g) = 2 (Q(f,f) Q(g,g) - Q(f,g)^2),
    Q_{mu nu}(a, Q^{mu nu}(b, c)) = 2 (H_b(a,c) - H_c(a,b) + Q(a,b) box c - Q(a,c) box b),

with H_f(a, b) = d^mu a d^nu b d_mu d_nu f, and solves the 2x2 system
(I - m) acc = (lap th + F0, lap ph + G0).  The literal jet implementation
in ``faddeev`` is the reference these kernels are tested against.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

C1 = (1.0 / 12, -8.0 / 12, 0.0, 8.0 / 12, -1.0 / 12)
C2 = (-1.0 / 12, 16.0 / 12, -30.0 / 12, 16.0 / 12, -1.0 / 12)


@njit(cache=True, inline="always")
def _H(at, ax, ay, az, bt, bx, by, bz, ftx, fty, ftz, fxx, fxy, fxz, fyy, fyz, fzz):
    # d_t^2 slot of f is zero here
    return (-(at * bx + ax * bt) * ftx - (at * by + ay * bt) * fty - (at * bz + az * bt) * ftz
            + ax * bx * fxx + ay * by * fyy + az * bz * fzz
            + (ax * by + ay * bx) * fxy + (ax * bz + az * bx) * fxz + (ay * bz + az * by) * fyz)


@njit(cache=True)
def node_accel(th, tht, tx, ty, tz, ttx, tty, ttz, txx, txy, txz, tyy, tyz, tzz,
               pht, px, py, pz, ptx, pty, ptz, pxx, pxy, pxz, pyy, pyz, pzz):
    """Accelerations and |m|_2 at one node from its first and second derivatives."""
    s = math.sin(th)
    c = math.cos(th)
    s2 = 2.0 * s * c
    c2 = c * c
    q_tt = tht * tht - (tx * tx + ty * ty + tz * tz)
    q_pp = pht * pht - (px * px + py * py + pz * pz)
    q_tp = tht * pht - (tx * px + ty * py + tz * pz)
    qq = 2.0 * (q_tt * q_pp - q_tp * q_tp)
    lap_t = txx + tyy + tzz
    lap_p = pxx + pyy + pzz
    box_t = -lap_t
    box_p = -lap_p
    h_t_pp = _H(pht, px, py, pz, pht, px, py, pz, ttx, tty, ttz, txx, txy, txz, tyy, tyz, tzz)
    h_p_pt = _H(pht, px, py, pz, tht, tx, ty, tz, ptx, pty, ptz, pxx, pxy, pxz, pyy, pyz, pzz)
    k_f = 2.0 * (h_t_pp - h_p_pt + q_tp * box_p - q_pp * box_t)
    h_t_tp = _H(tht, tx, ty, tz, pht, px, py, pz, ttx, tty, ttz, txx, txy, txz, tyy, tyz, tzz)
    h_p_tt = _H(tht, tx, ty, tz, tht, tx, ty, tz, ptx, pty, ptz, pxx, pxy, pxz, pyy, pyz, pzz)
    k_g = 2.0 * (h_t_tp - h_p_tt + q_tt * box_p - q_tp * box_t)
    f0 = -0.5 * s2 * q_pp - 0.25 * s2 * qq - 0.5 * c2 * k_f
    g0 = s * s * box_p + s2 * q_tp + 0.5 * c2 * k_g
    gpp = px * px + py * py + pz * pz
    gtt = tx * tx + ty * ty + tz * tz
    gtp = tx * px + ty * py + tz * pz
    m00 = -c2 * gpp
    m01 = c2 * gtp
    m10 = m01
    m11 = s * s - c2 * gtt
    ssum = m00 * m00 + m01 * m01 + m10 * m10 + m11 * m11
    det_m = m00 * m11 - m01 * m10
    disc = ssum * ssum - 4.0 * det_m * det_m
    if disc < 0.0:
        disc = 0.0
    norm = math.sqrt(0.5 * (ssum + math.sqrt(disc)))
    r0 = lap_t + f0
    r1 = lap_p + g0
    a = 1.0 - m00
    b = -m01
    cc = -m10
    d = 1.0 - m11
    det = a * d - b * cc
    return (d * r0 - b * r1) / det, (a * r1 - cc * r0) / det, norm


@njit(cache=True, parallel=True)
def accel_2d(th, tht, ph, pht, h, lo0, hi0, lo1, hi1, out_t, out_p, row_norm):
    """Accelerations on nodes [lo0, hi0) x [lo1, hi1); other entries untouched."""
    ih = 1.0 / h
    ih2 = ih * ih
    for i in prange(lo0, hi0):
        mx = 0.0
        for j in range(lo1, hi1):
            tx = 0.0
            ty = 0.0
            px = 0.0
            py = 0.0
            ttx = 0.0
            tty = 0.0
            ptx = 0.0
            pty = 0.0
            txx = 0.0
            tyy = 0.0
            pxx = 0.0
            pyy = 0.0
            txy = 0.0
            pxy = 0.0
            for k in range(5):
                o = k - 2
                tx += C1[k] * th[i + o, j]
                ty += C1[k] * th[i, j + o]
                px += C1[k] * ph[i + o, j]
                py += C1[k] * ph[i, j + o]
                ttx += C1[k] * tht[i + o, j]
                tty += C1[k] * tht[i, j + o]
                ptx += C1[k] * pht[i + o, j]
                pty += C1[k] * pht[i, j + o]
                txx += C2[k] * th[i + o, j]
                tyy += C2[k] * th[i, j + o]
                pxx += C2[k] * ph[i + o, j]
                pyy += C2[k] * ph[i, j + o]
                if o != 0:
                    dty = 0.0
                    dpy = 0.0
                    for l in range(5):
                        ol = l - 2
                        dty += C1[l] * th[i + o, j + ol]
                        dpy += C1[l] * ph[i + o, j + ol]
                    txy += C1[k] * dty
                    pxy += C1[k] * dpy
            a_t, a_p, nrm = node_accel(
                th[i, j], tht[i, j], tx * ih, ty * ih, 0.0, ttx * ih, tty * ih, 0.0,
                txx * ih2, txy * ih2, 0.0, tyy * ih2, 0.0, 0.0,
                pht[i, j], px * ih, py * ih, 0.0, ptx * ih, pty * ih, 0.0,
                pxx * ih2, pxy * ih2, 0.0, pyy * ih2, 0.0, 0.0)
            out_t[i, j] = a_t
            out_p[i, j] = a_p
            if nrm > mx:
                mx = nrm
        row_norm[i] = mx


@njit(cache=True, parallel=True)
def accel_3d(th, tht, ph, pht, h, lo, hi, out_t, out_p, row_norm):
    """Cartesian 3D accelerations on the box lo <= idx < hi (per axis)."""
    ih = 1.0 / h
    ih2 = ih * ih
    for i in prange(lo[0], hi[0]):
        mx = 0.0
        for j in range(lo[1], hi[1]):
            for q in range(lo[2], hi[2]):
                d_t = np.zeros(3)
                d_p = np.zeros(3)
                d_tt = np.zeros(3)
                d_pt = np.zeros(3)
                h_t = np.zeros((3, 3))
                h_p = np.zeros((3, 3))
                for k in range(5):
                    o = k - 2
                    d_t[0] += C1[k] * th[i + o, j, q]
                    d_t[1] += C1[k] * th[i, j + o, q]
                    d_t[2] += C1[k] * th[i, j, q + o]
                    d_p[0] += C1[k] * ph[i + o, j, q]
                    d_p[1] += C1[k] * ph[i, j + o, q]
                    d_p[2] += C1[k] * ph[i, j, q + o]
                    d_tt[0] += C1[k] * tht[i + o, j, q]
                    d_tt[1] += C1[k] * tht[i, j + o, q]
                    d_tt[2] += C1[k] * tht[i, j, q + o]
                    d_pt[0] += C1[k] * pht[i + o, j, q]
                    d_pt[1] += C1[k] * pht[i, j + o, q]
                    d_pt[2] += C1[k] * pht[i, j, q + o]
                    h_t[0, 0] += C2[k] * th[i + o, j, q]
                    h_t[1, 1] += C2[k] * th[i, j + o, q]
                    h_t[2, 2] += C2[k] * th[i, j, q + o]
                    h_p[0, 0] += C2[k] * ph[i + o, j, q]
                    h_p[1, 1] += C2[k] * ph[i, j + o, q]
                    h_p[2, 2] += C2[k] * ph[i, j, q + o]
                    if o != 0:
                        for l in range(5):
                            ol = l - 2
                            if ol == 0:
                                continue
                            w = C1[k] * C1[l]
                            h_t[0, 1] += w * th[i + o, j + ol, q]
                            h_t[0, 2] += w * th[i + o, j, q + ol]
                            h_t[1, 2] += w * th[i, j + o, q + ol]
                            h_p[0, 1] += w * ph[i + o, j + ol, q]
                            h_p[0, 2] += w * ph[i + o, j, q + ol]
                            h_p[1, 2] += w * ph[i, j + o, q + ol]
                a_t, a_p, nrm = node_accel(
                    th[i, j, q], tht[i, j, q], d_t[0] * ih, d_t[1] * ih, d_t[2] * ih,
                    d_tt[0] * ih, d_tt[1] * ih, d_tt[2] * ih,
                    h_t[0, 0] * ih2, h_t[0, 1] * ih2, h_t[0, 2] * ih2, h_t[1, 1] * ih2,
                    h_t[1, 2] * ih2, h_t[2, 2] * ih2,
                    pht[i, j, q], d_p[0] * ih, d_p[1] * ih, d_p[2] * ih,
                    d_pt[0] * ih, d_pt[1] * ih, d_pt[2] * ih,
                    h_p[0, 0] * ih2, h_p[0, 1] * ih2, h_p[0, 2] * ih2, h_p[1, 1] * ih2,
                    h_p[1, 2] * ih2, h_p[2, 2] * ih2)
                out_t[i, j, q] = a_t
                out_p[i, j, q] = a_p
                if nrm > mx:
                    mx = nrm
        row_norm[i] = mx


@njit(cache=True)
def _radial_d(f, i, h):
    """(f_r, f_rr) at node i with even reflection across r = 0."""
    d1 = 0.0
    d2 = 0.0
    for k in range(5):
        idx = i + k - 2
        if idx < 0:
            idx = -idx
        d1 += C1[k] * f[idx]
        d2 += C2[k] * f[idx]
    return d1 / h, d2 / (h * h)


@njit(cache=True)
def accel_radial(th, tht, ph, pht, h, hi, out_t, out_p, row_norm):
    """Radially symmetric 3D accelerations on nodes [0, hi); jets taken at x = r e_1."""
    for i in range(hi):
        tr, trr = _radial_d(th, i, h)
        pr, prr = _radial_d(ph, i, h)
        ttr, _ = _radial_d(tht, i, h)
        ptr, _ = _radial_d(pht, i, h)
        if i == 0:
            t_or = trr
            p_or = prr
            tr = 0.0
            pr = 0.0
            ttr = 0.0
            ptr = 0.0
        else:
            r = i * h
            t_or = tr / r
            p_or = pr / r
        a_t, a_p, nrm = node_accel(
            th[i], tht[i], tr, 0.0, 0.0, ttr, 0.0, 0.0, trr, 0.0, 0.0, t_or, 0.0, t_or,
            pht[i], pr, 0.0, 0.0, ptr, 0.0, 0.0, prr, 0.0, 0.0, p_or, 0.0, p_or)
        out_t[i] = a_t
        out_p[i] = a_p
        row_norm[i] = nrm
