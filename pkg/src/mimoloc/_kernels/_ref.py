"""NumPy reference implementation of the hot kernels.

Selected at import time when the compiled extension is unavailable (or when
``MIMOLOC_PURE_PYTHON=1``).  Semantics match ``_fast.pyx`` bit-for-bit up to
floating-point reassociation; ``tests/test_kernels.py`` pins the agreement.

Path ordering everywhere: index i = l*M + k (receiver-major, transmitter
fastest), matching the rest of the package.
"""

import numpy as np

EPS_DET = 1e-12


def path_coefficients(a_tx, b_tx, a_rx, b_rx, weights, deflate):
    """Weighted bearing-sum coefficients (g_x, g_y, h) over all MN paths.

    g_x sums the squared sine terms, g_y the squared cosine terms and h the
    negated cross products, each weighted per path.  With ``deflate`` the
    unweighted mean-square terms -(1/MN)(sum)^2 (and +(1/MN) sum*sum for h)
    are subtracted, which is the form the amplitude-nuisance elimination
    produces in the phase-coherent bound.

    Parameters
    ----------
    a_tx, b_tx : (M,) float arrays, cos/sin of transmitter bearings
    a_rx, b_rx : (N,) float arrays, cos/sin of receiver bearings
    weights : (M*N,) float array, path-ordered i = l*M + k
    deflate : bool

    Returns
    -------
    (g_x, g_y, h) floats
    """
    a_tx = np.asarray(a_tx, dtype=float)
    b_tx = np.asarray(b_tx, dtype=float)
    a_rx = np.asarray(a_rx, dtype=float)
    b_rx = np.asarray(b_rx, dtype=float)
    m = a_tx.shape[0]
    n = a_rx.shape[0]
    w = np.asarray(weights, dtype=float).reshape(n, m)

    a_sum = a_rx[:, None] + a_tx[None, :]
    b_sum = b_rx[:, None] + b_tx[None, :]

    g_x = float(np.sum(w * b_sum**2))
    g_y = float(np.sum(w * a_sum**2))
    h = -float(np.sum(w * a_sum * b_sum))
    if deflate:
        sa = float(np.sum(a_sum))
        sb = float(np.sum(b_sum))
        mn = m * n
        g_x -= sb * sb / mn
        g_y -= sa * sa / mn
        h += sa * sb / mn
    return g_x, g_y, h


def trace_objective(tx_angles, rx_angles):
    """Dimensionless coherent-bound trace (g_x+g_y)/(g_x*g_y - h^2).

    Unit weights, deflated form (narrowband bound).  Returns +inf when the
    geometry is numerically rank deficient.
    """
    tx_angles = np.asarray(tx_angles, dtype=float)
    rx_angles = np.asarray(rx_angles, dtype=float)
    weights = np.ones(tx_angles.size * rx_angles.size)
    g_x, g_y, h = path_coefficients(
        np.cos(tx_angles), np.sin(tx_angles),
        np.cos(rx_angles), np.sin(rx_angles),
        weights, True,
    )
    det = g_x * g_y - h * h
    if not np.isfinite(det) or det <= EPS_DET * g_x * g_y or det <= 0.0:
        return float("inf")
    return (g_x + g_y) / det


def gdop_raster(tx_pos, rx_pos, x_centers, y_centers, half_dx, half_dy):
    """Evaluate the dilution-of-precision metric on a cell-center lattice.

    Cells containing a sensor, and cells whose geometry is rank deficient,
    receive +inf.  Rows are evaluated independently; output is (ny, nx),
    row-major with y as the outer axis.
    """
    tx_pos = np.asarray(tx_pos, dtype=float)
    rx_pos = np.asarray(rx_pos, dtype=float)
    x_centers = np.asarray(x_centers, dtype=float)
    y_centers = np.asarray(y_centers, dtype=float)
    m = tx_pos.shape[0]
    n = rx_pos.shape[0]
    mn = m * n
    nx = x_centers.size
    out = np.empty((y_centers.size, nx))

    sensors = np.vstack([tx_pos, rx_pos])
    for iy, yc in enumerate(y_centers):
        dx_t = x_centers[:, None] - tx_pos[None, :, 0]
        dy_t = yc - tx_pos[None, :, 1]
        dist_t = np.hypot(dx_t, dy_t)
        dx_r = x_centers[:, None] - rx_pos[None, :, 0]
        dy_r = yc - rx_pos[None, :, 1]
        dist_r = np.hypot(dx_r, dy_r)

        with np.errstate(divide="ignore", invalid="ignore"):
            a_t = dx_t / dist_t
            b_t = dy_t / dist_t
            a_r = dx_r / dist_r
            b_r = dy_r / dist_r

            a_sum = a_r[:, :, None] + a_t[:, None, :]
            b_sum = b_r[:, :, None] + b_t[:, None, :]
            g1 = np.sum(b_sum**2, axis=(1, 2)) - np.sum(b_sum, axis=(1, 2)) ** 2 / mn
            g2 = np.sum(a_sum**2, axis=(1, 2)) - np.sum(a_sum, axis=(1, 2)) ** 2 / mn
            h = -np.sum(a_sum * b_sum, axis=(1, 2)) + (
                np.sum(a_sum, axis=(1, 2)) * np.sum(b_sum, axis=(1, 2)) / mn
            )
            det = g1 * g2 - h * h
            vals = np.sqrt((g1 + g2) / det)

        bad = ~np.isfinite(vals) | (det <= EPS_DET * g1 * g2) | (det <= 0.0)
        # cells that contain a sensor
        in_x = np.abs(x_centers[:, None] - sensors[None, :, 0]) <= half_dx
        in_y = np.abs(yc - sensors[None, :, 1]) <= half_dy
        bad |= np.any(in_x & in_y, axis=1)
        vals = np.where(bad, np.inf, vals)
        out[iy, :] = vals
    return out
