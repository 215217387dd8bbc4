"""Geometric dilution of precision: point evaluation and region rasters.

GDOP is a geometry-only accuracy multiplier: it equals the localization
standard deviation divided by c * sigma_eps, so it depends on the bearings of
the sensors at the evaluation point and on nothing else (not the propagation
speed, the delay noise, or the carrier).
"""

from dataclasses import dataclass

import numpy as np

from mimoloc import _kernels
from mimoloc.errors import InvalidParameter
from mimoloc.geometry import bearing_angles, validate_speed

EPS_DET = 1e-12


def gdop_at(layout, point):
    """GDOP at one point: sqrt((g1 + g2) / (g1 g2 - h^2)) from its bearings.

    Rank-deficient (collinear) geometry yields +inf rather than an exception,
    so rasters stay total; a point coinciding with a sensor still raises
    DegenerateGeometry.
    """
    bearings = bearing_angles(layout, point)
    weights = np.ones(bearings.mn)
    g1, g2, h = _kernels.path_coefficients(
        bearings.a_tx, bearings.b_tx, bearings.a_rx, bearings.b_rx, weights, True
    )
    det = g1 * g2 - h * h
    if not np.isfinite(det) or det <= EPS_DET * g1 * g2 or det <= 0.0:
        return float("inf")
    return float(np.sqrt((g1 + g2) / det))


@dataclass(frozen=True)
class GdopGrid:
    """Row-major ny x nx raster of GDOP over a rectangle (y is the outer axis).

    Degenerate cells (containing a sensor, or rank-deficient geometry) hold
    +inf.
    """

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    nx: int
    ny: int
    values: np.ndarray

    def x_centers(self):
        dx = (self.x_max - self.x_min) / self.nx
        return self.x_min + dx * (np.arange(self.nx) + 0.5)

    def y_centers(self):
        dy = (self.y_max - self.y_min) / self.ny
        return self.y_min + dy * (np.arange(self.ny) + 0.5)

    def finite_min(self):
        """(min value, x, y) over finite cells."""
        finite = np.isfinite(self.values)
        if not np.any(finite):
            raise InvalidParameter("raster has no finite cells")
        masked = np.where(finite, self.values, np.inf)
        iy, ix = np.unravel_index(np.argmin(masked), masked.shape)
        return (
            float(self.values[iy, ix]),
            float(self.x_centers()[ix]),
            float(self.y_centers()[iy]),
        )


def gdop_grid(layout, extent, nx, ny):
    """Evaluate GDOP on the cell-center lattice of a rectangle.

    ``extent`` is (x_min, x_max, y_min, y_max).  Cell-center sampling puts
    the optimum of a symmetric layout in the central cell of odd-sized grids.
    """
    x_min, x_max, y_min, y_max = (float(v) for v in extent)
    if not (x_min < x_max and y_min < y_max):
        raise InvalidParameter("extent must have positive width and height")
    if nx < 2 or ny < 2:
        raise InvalidParameter("need nx >= 2 and ny >= 2")
    dx = (x_max - x_min) / nx
    dy = (y_max - y_min) / ny
    xs = x_min + dx * (np.arange(nx) + 0.5)
    ys = y_min + dy * (np.arange(ny) + 0.5)
    values = _kernels.gdop_raster(
        layout.tx_positions, layout.rx_positions, xs, ys, dx / 2.0, dy / 2.0
    )
    return GdopGrid(
        x_min=x_min,
        x_max=x_max,
        y_min=y_min,
        y_max=y_max,
        nx=nx,
        ny=ny,
        values=values,
    )


def localization_error_from_gdop(gdop, sigma_eps, c):
    """Localization standard deviation gdop * c * sigma_eps, meters."""
    c = validate_speed(c)
    if gdop < 0 or sigma_eps < 0:
        raise InvalidParameter("gdop and sigma_eps must be nonnegative")
    return gdop * c * sigma_eps
