# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: bearing-sum coefficients, the placement search
objective, and raster evaluation of the dilution-of-precision metric.

Semantics mirror ``_ref.py``; that module is the import-time fallback.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, cos, hypot, isfinite, sin, sqrt

cnp.import_array()

cdef double EPS_DET = 1e-12


cdef inline int _coeffs(const double[::1] a_tx, const double[::1] b_tx,
                        const double[::1] a_rx, const double[::1] b_rx,
                        const double[::1] weights, bint deflate,
                        double* g_x, double* g_y, double* h) noexcept nogil:
    cdef Py_ssize_t m = a_tx.shape[0]
    cdef Py_ssize_t n = a_rx.shape[0]
    cdef Py_ssize_t k, l
    cdef double asum, bsum, w
    cdef double gx = 0.0, gy = 0.0, hh = 0.0, sa = 0.0, sb = 0.0
    for l in range(n):
        for k in range(m):
            w = weights[l * m + k]
            asum = a_rx[l] + a_tx[k]
            bsum = b_rx[l] + b_tx[k]
            gx += w * bsum * bsum
            gy += w * asum * asum
            hh -= w * asum * bsum
            sa += asum
            sb += bsum
    if deflate:
        gx -= sb * sb / (m * n)
        gy -= sa * sa / (m * n)
        hh += sa * sb / (m * n)
    g_x[0] = gx
    g_y[0] = gy
    h[0] = hh
    return 0


def path_coefficients(a_tx, b_tx, a_rx, b_rx, weights, bint deflate):
    """Weighted bearing-sum coefficients (g_x, g_y, h); see _ref.py."""
    cdef double[::1] at = np.ascontiguousarray(a_tx, dtype=np.float64)
    cdef double[::1] bt = np.ascontiguousarray(b_tx, dtype=np.float64)
    cdef double[::1] ar = np.ascontiguousarray(a_rx, dtype=np.float64)
    cdef double[::1] br = np.ascontiguousarray(b_rx, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef double g_x = 0.0, g_y = 0.0, h = 0.0
    _coeffs(at, bt, ar, br, w, deflate, &g_x, &g_y, &h)
    return g_x, g_y, h


def trace_objective(tx_angles, rx_angles):
    """Dimensionless coherent-bound trace from bearing angles; see _ref.py."""
    cdef double[::1] phi = np.ascontiguousarray(tx_angles, dtype=np.float64)
    cdef double[::1] psi = np.ascontiguousarray(rx_angles, dtype=np.float64)
    cdef Py_ssize_t m = phi.shape[0]
    cdef Py_ssize_t n = psi.shape[0]
    cdef Py_ssize_t k, l
    cdef double asum, bsum
    cdef double gx = 0.0, gy = 0.0, hh = 0.0, sa = 0.0, sb = 0.0, det
    with nogil:
        for l in range(n):
            for k in range(m):
                asum = cos(psi[l]) + cos(phi[k])
                bsum = sin(psi[l]) + sin(phi[k])
                gx += bsum * bsum
                gy += asum * asum
                hh -= asum * bsum
                sa += asum
                sb += bsum
        gx -= sb * sb / (m * n)
        gy -= sa * sa / (m * n)
        hh += sa * sb / (m * n)
        det = gx * gy - hh * hh
    if not isfinite(det) or det <= EPS_DET * gx * gy or det <= 0.0:
        return INFINITY
    return (gx + gy) / det


def gdop_raster(tx_pos, rx_pos, x_centers, y_centers, double half_dx, double half_dy):
    """Raster of the dilution-of-precision metric; see _ref.py."""
    cdef double[:, ::1] tp = np.ascontiguousarray(tx_pos, dtype=np.float64)
    cdef double[:, ::1] rp = np.ascontiguousarray(rx_pos, dtype=np.float64)
    cdef double[::1] xs = np.ascontiguousarray(x_centers, dtype=np.float64)
    cdef double[::1] ys = np.ascontiguousarray(y_centers, dtype=np.float64)
    cdef Py_ssize_t m = tp.shape[0]
    cdef Py_ssize_t n = rp.shape[0]
    cdef Py_ssize_t nx = xs.shape[0]
    cdef Py_ssize_t ny = ys.shape[0]
    out_arr = np.empty((ny, nx), dtype=np.float64)
    cdef double[:, ::1] out = out_arr

    # scratch per-cell bearing cos/sin
    at_arr = np.empty(m)
    bt_arr = np.empty(m)
    ar_arr = np.empty(n)
    br_arr = np.empty(n)
    cdef double[::1] at = at_arr
    cdef double[::1] bt = bt_arr
    cdef double[::1] ar = ar_arr
    cdef double[::1] br = br_arr

    cdef Py_ssize_t ix, iy, k, l
    cdef double xc, yc, d, asum, bsum
    cdef double gx, gy, hh, sa, sb, det
    cdef bint bad
    with nogil:
        for iy in range(ny):
            yc = ys[iy]
            for ix in range(nx):
                xc = xs[ix]
                bad = 0
                for k in range(m):
                    if (xc - half_dx <= tp[k, 0] <= xc + half_dx and
                            yc - half_dy <= tp[k, 1] <= yc + half_dy):
                        bad = 1
                        break
                    d = hypot(xc - tp[k, 0], yc - tp[k, 1])
                    if d == 0.0:
                        bad = 1
                        break
                    at[k] = (xc - tp[k, 0]) / d
                    bt[k] = (yc - tp[k, 1]) / d
                if not bad:
                    for l in range(n):
                        if (xc - half_dx <= rp[l, 0] <= xc + half_dx and
                                yc - half_dy <= rp[l, 1] <= yc + half_dy):
                            bad = 1
                            break
                        d = hypot(xc - rp[l, 0], yc - rp[l, 1])
                        if d == 0.0:
                            bad = 1
                            break
                        ar[l] = (xc - rp[l, 0]) / d
                        br[l] = (yc - rp[l, 1]) / d
                if bad:
                    out[iy, ix] = INFINITY
                    continue
                gx = 0.0
                gy = 0.0
                hh = 0.0
                sa = 0.0
                sb = 0.0
                for l in range(n):
                    for k in range(m):
                        asum = ar[l] + at[k]
                        bsum = br[l] + bt[k]
                        gx += bsum * bsum
                        gy += asum * asum
                        hh -= asum * bsum
                        sa += asum
                        sb += bsum
                gx -= sb * sb / (m * n)
                gy -= sa * sa / (m * n)
                hh += sa * sb / (m * n)
                det = gx * gy - hh * hh
                if not isfinite(det) or det <= EPS_DET * gx * gy or det <= 0.0:
                    out[iy, ix] = INFINITY
                else:
                    out[iy, ix] = sqrt((gx + gy) / det)
    return out_arr
