# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel for GaBP butterfly stage updates.

Numerically mirrors _gabp_np (same closed-form 2x2 algebra, same layout);
kept in lockstep by the backend parity tests.
"""
import numpy as np

BACKEND = "cython"

ctypedef Py_ssize_t ip


cdef inline void _inv2(double a00, double a01, double a10, double a11,
                       double* b00, double* b01, double* b10, double* b11) nogil:
    cdef double d = a00 * a11 - a01 * a10
    b00[0] = a11 / d
    b01[0] = -a01 / d
    b10[0] = -a10 / d
    b11[0] = a00 / d


def stage_forward(double[:, ::1] mx, double[:, :, ::1] cx,
                  double[:, ::1] my, double[:, :, ::1] cy,
                  ip[::1] i0, ip[::1] i1,
                  double[::1] wr, double[::1] wi,
                  double[:, ::1] om, double[:, :, ::1] oc):
    cdef ip n = i0.shape[0]
    cdef ip j, a0, a1
    cdef double c, s
    cdef double m00, m01, m10, m11  # means: (x0), (x1)
    cdef double s0a, s0b, s0d, s1a, s1b, s1d  # covs as (a b; b d)
    cdef double p00, p01, p10, p11, t0a, t0b, t0d, t1a, t1b, t1d
    cdef double rx, ry, ax, ay, bx, by
    cdef double ga, gb, gd  # G = R S1 R^T
    cdef double q00, q01, q11  # S00 = S0 + G
    cdef double x00, x01, x11  # S01 = S0 - G
    cdef double ma, mb, md, ia, ib, id_
    cdef double k00, k01, k10, k11
    cdef double dx, dy

    for j in range(n):
        a0 = i0[j]
        a1 = i1[j]
        c = wr[j]
        s = wi[j]
        m00 = mx[a0, 0]; m01 = mx[a0, 1]
        m10 = mx[a1, 0]; m11 = mx[a1, 1]
        s0a = cx[a0, 0, 0]; s0b = cx[a0, 0, 1]; s0d = cx[a0, 1, 1]
        s1a = cx[a1, 0, 0]; s1b = cx[a1, 0, 1]; s1d = cx[a1, 1, 1]
        p00 = my[a0, 0]; p01 = my[a0, 1]
        t0a = cy[a0, 0, 0]; t0b = cy[a0, 0, 1]; t0d = cy[a0, 1, 1]
        p10 = my[a1, 0]; p11 = my[a1, 1]
        t1a = cy[a1, 0, 0]; t1b = cy[a1, 0, 1]; t1d = cy[a1, 1, 1]

        # R m1 with R = [[c, -s], [s, c]]
        rx = c * m10 - s * m11
        ry = s * m10 + c * m11
        ax = m00 + rx; ay = m01 + ry
        bx = m00 - rx; by = m01 - ry

        # G = R S1 R^T
        ga = c * c * s1a - 2.0 * c * s * s1b + s * s * s1d
        gb = c * s * (s1a - s1d) + (c * c - s * s) * s1b
        gd = s * s * s1a + 2.0 * c * s * s1b + c * c * s1d

        q00 = s0a + ga; q01 = s0b + gb; q11 = s0d + gd  # cov(y0) = cov(y1)
        x00 = s0a - ga; x01 = s0b - gb; x11 = s0d - gd  # cross cov, symmetric

        # xi_y0: condition on nu_y1.  M = S00 + T1
        ma = q00 + t1a; mb = q01 + t1b; md = q11 + t1d
        _inv2(ma, mb, mb, md, &ia, &ib, &ib, &id_)
        k00 = x00 * ia + x01 * ib; k01 = x00 * ib + x01 * id_
        k10 = x01 * ia + x11 * ib; k11 = x01 * ib + x11 * id_
        dx = p10 - bx; dy = p11 - by
        om[a0, 0] = ax + k00 * dx + k01 * dy
        om[a0, 1] = ay + k10 * dx + k11 * dy
        oc[a0, 0, 0] = q00 - (k00 * x00 + k01 * x01)
        oc[a0, 1, 1] = q11 - (k10 * x01 + k11 * x11)
        oc[a0, 0, 1] = q01 - 0.5 * ((k00 * x01 + k01 * x11) + (k10 * x00 + k11 * x01))
        oc[a0, 1, 0] = oc[a0, 0, 1]

        # xi_y1: condition on nu_y0.  M = S00 + T0
        ma = q00 + t0a; mb = q01 + t0b; md = q11 + t0d
        _inv2(ma, mb, mb, md, &ia, &ib, &ib, &id_)
        k00 = x00 * ia + x01 * ib; k01 = x00 * ib + x01 * id_
        k10 = x01 * ia + x11 * ib; k11 = x01 * ib + x11 * id_
        dx = p00 - ax; dy = p01 - ay
        om[a1, 0] = bx + k00 * dx + k01 * dy
        om[a1, 1] = by + k10 * dx + k11 * dy
        oc[a1, 0, 0] = q00 - (k00 * x00 + k01 * x01)
        oc[a1, 1, 1] = q11 - (k10 * x01 + k11 * x11)
        oc[a1, 0, 1] = q01 - 0.5 * ((k00 * x01 + k01 * x11) + (k10 * x00 + k11 * x01))
        oc[a1, 1, 0] = oc[a1, 0, 1]


def stage_backward(double[:, ::1] my, double[:, :, ::1] cy,
                   double[:, ::1] mx, double[:, :, ::1] cx,
                   ip[::1] i0, ip[::1] i1,
                   double[::1] wr, double[::1] wi,
                   double[:, ::1] om, double[:, :, ::1] oc):
    cdef ip n = i0.shape[0]
    cdef ip j, a0, a1
    cdef double c, s
    cdef double p00, p01, p10, p11
    cdef double t0a, t0b, t0d, t1a, t1b, t1d
    cdef double m00, m01, m10, m11, s0a, s0b, s0d, s1a, s1b, s1d
    cdef double cx0, cy0, dx1, dy1, ex, ey
    cdef double u00a, u00b, u00d  # T00 = (T0+T1)/4
    cdef double u11a, u11b, u11d  # T11 = R^T (T0+T1) R / 4
    cdef double v00, v01, v10, v11  # T01 = (T0-T1) R / 4 (not symmetric)
    cdef double ea, eb, ed
    cdef double ma, mb, md, ia, ib, id_
    cdef double k00, k01, k10, k11, gx, gy

    for j in range(n):
        a0 = i0[j]
        a1 = i1[j]
        c = wr[j]
        s = wi[j]
        p00 = my[a0, 0]; p01 = my[a0, 1]
        t0a = cy[a0, 0, 0]; t0b = cy[a0, 0, 1]; t0d = cy[a0, 1, 1]
        p10 = my[a1, 0]; p11 = my[a1, 1]
        t1a = cy[a1, 0, 0]; t1b = cy[a1, 0, 1]; t1d = cy[a1, 1, 1]
        m00 = mx[a0, 0]; m01 = mx[a0, 1]
        s0a = cx[a0, 0, 0]; s0b = cx[a0, 0, 1]; s0d = cx[a0, 1, 1]
        m10 = mx[a1, 0]; m11 = mx[a1, 1]
        s1a = cx[a1, 0, 0]; s1b = cx[a1, 0, 1]; s1d = cx[a1, 1, 1]

        cx0 = 0.5 * (p00 + p10); cy0 = 0.5 * (p01 + p11)
        ex = 0.5 * (p00 - p10); ey = 0.5 * (p01 - p11)
        # d = R^T e with R^T = [[c, s], [-s, c]]
        dx1 = c * ex + s * ey
        dy1 = -s * ex + c * ey

        ea = 0.25 * (t0a + t1a); eb = 0.25 * (t0b + t1b); ed = 0.25 * (t0d + t1d)
        u00a = ea; u00b = eb; u00d = ed
        # T11 = R^T E R (E = (T0+T1)/4)
        u11a = c * c * ea + 2.0 * c * s * eb + s * s * ed
        u11b = c * s * (ed - ea) + (c * c - s * s) * eb
        u11d = s * s * ea - 2.0 * c * s * eb + c * c * ed
        # T01 = F R, F = (T0-T1)/4
        ea = 0.25 * (t0a - t1a); eb = 0.25 * (t0b - t1b); ed = 0.25 * (t0d - t1d)
        v00 = ea * c + eb * s; v01 = -ea * s + eb * c
        v10 = eb * c + ed * s; v11 = -eb * s + ed * c

        # xi_x0: condition on nu_x1.  M = T11 + S1, K = T01 M^-1
        ma = u11a + s1a; mb = u11b + s1b; md = u11d + s1d
        _inv2(ma, mb, mb, md, &ia, &ib, &ib, &id_)
        k00 = v00 * ia + v01 * ib; k01 = v00 * ib + v01 * id_
        k10 = v10 * ia + v11 * ib; k11 = v10 * ib + v11 * id_
        gx = m10 - dx1; gy = m11 - dy1
        om[a0, 0] = cx0 + k00 * gx + k01 * gy
        om[a0, 1] = cy0 + k10 * gx + k11 * gy
        # cov = T00 - K T01^T
        oc[a0, 0, 0] = u00a - (k00 * v00 + k01 * v01)
        oc[a0, 1, 1] = u00d - (k10 * v10 + k11 * v11)
        oc[a0, 0, 1] = u00b - 0.5 * ((k00 * v10 + k01 * v11) + (k10 * v00 + k11 * v01))
        oc[a0, 1, 0] = oc[a0, 0, 1]

        # xi_x1: condition on nu_x0.  M = T00 + S0, K = T01^T M^-1
        ma = u00a + s0a; mb = u00b + s0b; md = u00d + s0d
        _inv2(ma, mb, mb, md, &ia, &ib, &ib, &id_)
        k00 = v00 * ia + v10 * ib; k01 = v00 * ib + v10 * id_
        k10 = v01 * ia + v11 * ib; k11 = v01 * ib + v11 * id_
        gx = m00 - cx0; gy = m01 - cy0
        om[a1, 0] = dx1 + k00 * gx + k01 * gy
        om[a1, 1] = dy1 + k10 * gx + k11 * gy
        # cov = T11 - K T01
        oc[a1, 0, 0] = u11a - (k00 * v00 + k01 * v10)
        oc[a1, 1, 1] = u11d - (k10 * v01 + k11 * v11)
        oc[a1, 0, 1] = u11b - 0.5 * ((k00 * v01 + k01 * v11) + (k10 * v00 + k11 * v10))
        oc[a1, 1, 0] = oc[a1, 0, 1]
