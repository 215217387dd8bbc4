"""Planar sensor/target geometry.

Bearing angles, propagation delays, and the two matrices that couple the
geometry to the bounds and estimators: the 2 x (MN) bearing-sum matrix H and
the (MN) x 3 linearized-delay matrix D.

Path ordering convention used across the whole package: a transmitter k
(0-based) and receiver l (0-based) form path i = l*M + k, i.e. receiver-major
with the transmitter index running fastest.  Every vector or matrix indexed
over paths follows it.
"""

from dataclasses import dataclass, field

import numpy as np

from mimoloc.errors import DegenerateGeometry, InvalidParameter, NonFiniteInput

SPEED_OF_LIGHT = 299792458.0  # m/s, default propagation speed
COINCIDENCE_TOL = 1e-12  # m; below this sensor-to-point distance bearings are meaningless


def _as_point(p):
    p = np.asarray(p, dtype=float).reshape(2)
    if not np.all(np.isfinite(p)):
        raise NonFiniteInput(f"point {p} is not finite")
    return p


def validate_speed(c):
    """Check a propagation speed (m/s): finite and strictly positive."""
    c = float(c)
    if not np.isfinite(c) or c <= 0.0:
        raise InvalidParameter(f"propagation speed must be positive, got {c}")
    return c


@dataclass(frozen=True)
class SensorLayout:
    """Positions of M transmitters and N receivers in the plane (meters)."""

    tx_positions: np.ndarray
    rx_positions: np.ndarray

    def __post_init__(self):
        tx = np.atleast_2d(np.asarray(self.tx_positions, dtype=float))
        rx = np.atleast_2d(np.asarray(self.rx_positions, dtype=float))
        if tx.ndim != 2 or tx.shape[1] != 2 or tx.shape[0] < 1:
            raise InvalidParameter(f"tx_positions must be (M, 2) with M >= 1, got {tx.shape}")
        if rx.ndim != 2 or rx.shape[1] != 2 or rx.shape[0] < 1:
            raise InvalidParameter(f"rx_positions must be (N, 2) with N >= 1, got {rx.shape}")
        if not (np.all(np.isfinite(tx)) and np.all(np.isfinite(rx))):
            raise NonFiniteInput("sensor positions must be finite")
        object.__setattr__(self, "tx_positions", tx)
        object.__setattr__(self, "rx_positions", rx)

    @property
    def m(self):
        return self.tx_positions.shape[0]

    @property
    def n(self):
        return self.rx_positions.shape[0]

    @property
    def mn(self):
        return self.m * self.n


def unit_circle_layout(tx_angles, rx_angles, radius=1.0):
    """Layout with all sensors on a circle of given radius around the origin."""
    tx_angles = np.asarray(tx_angles, dtype=float)
    rx_angles = np.asarray(rx_angles, dtype=float)
    tx = radius * np.column_stack([np.cos(tx_angles), np.sin(tx_angles)])
    rx = radius * np.column_stack([np.cos(rx_angles), np.sin(rx_angles)])
    return SensorLayout(tx, rx)


@dataclass(frozen=True)
class BearingSet:
    """Bearings of every sensor toward a reference point, with their cos/sin.

    ``phi``/``varphi`` are the full-quadrant angles of the rays
    transmitter->point and receiver->point; ``a_* = cos(angle)`` and
    ``b_* = sin(angle)`` exactly by construction.
    """

    phi: np.ndarray
    varphi: np.ndarray
    a_tx: np.ndarray
    b_tx: np.ndarray
    a_rx: np.ndarray
    b_rx: np.ndarray
    reference_point: np.ndarray = field(default_factory=lambda: np.zeros(2))

    @property
    def m(self):
        return self.phi.shape[0]

    @property
    def n(self):
        return self.varphi.shape[0]

    @property
    def mn(self):
        return self.m * self.n


def bearing_angles(layout, point):
    """Bearings of all sensors toward ``point``.

    Uses the two-argument arctangent, so angles are full-quadrant; a
    ratio-based arctangent would flip the signs of the cos/sin terms in two
    quadrants and corrupt every downstream bound.

    Raises
    ------
    DegenerateGeometry
        If any sensor lies within ``COINCIDENCE_TOL`` of ``point``.
    """
    point = _as_point(point)

    def _angles(positions, kind):
        delta = point[None, :] - positions
        dist = np.hypot(delta[:, 0], delta[:, 1])
        if np.any(dist < COINCIDENCE_TOL):
            idx = int(np.argmin(dist))
            raise DegenerateGeometry(
                f"{kind} sensor {idx} coincides with the reference point {point}"
            )
        return np.arctan2(delta[:, 1], delta[:, 0])

    phi = _angles(layout.tx_positions, "tx")
    varphi = _angles(layout.rx_positions, "rx")
    return BearingSet(
        phi=phi,
        varphi=varphi,
        a_tx=np.cos(phi),
        b_tx=np.sin(phi),
        a_rx=np.cos(varphi),
        b_rx=np.sin(varphi),
        reference_point=point,
    )


def propagation_delay(tx, rx, point, c=SPEED_OF_LIGHT):
    """Two-leg propagation time (||tx - point|| + ||rx - point||) / c."""
    c = validate_speed(c)
    tx = _as_point(tx)
    rx = _as_point(rx)
    point = _as_point(point)
    return (np.hypot(*(tx - point)) + np.hypot(*(rx - point))) / c


def path_delays(layout, point, c=SPEED_OF_LIGHT):
    """All MN propagation delays, path-ordered (i = l*M + k)."""
    c = validate_speed(c)
    point = _as_point(point)
    d_tx = np.hypot(*(point[:, None] - layout.tx_positions.T))
    d_rx = np.hypot(*(point[:, None] - layout.rx_positions.T))
    return (np.add.outer(d_rx, d_tx) / c).ravel()


def h_matrix(bearings):
    """2 x (MN) matrix of bearing sums.

    Column i = l*M + k holds [a_tx[k] + a_rx[l]; b_tx[k] + b_rx[l]].
    """
    a = np.add.outer(bearings.a_rx, bearings.a_tx).ravel()
    b = np.add.outer(bearings.b_rx, bearings.b_tx).ravel()
    return np.vstack([a, b])


def d_matrix(bearings, c=SPEED_OF_LIGHT):
    """(MN) x 3 linearized-delay matrix.

    Row i = -(1/c) * [a_tx[k] + a_rx[l], b_tx[k] + b_rx[l], 1]; the first two
    columns equal -(1/c) H^T and the third models a common delay offset.
    """
    c = validate_speed(c)
    h = h_matrix(bearings)
    mn = h.shape[1]
    return -np.column_stack([h[0], h[1], np.ones(mn)]) / c
