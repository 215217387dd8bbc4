import numpy as np
import pytest

from mimoloc import disjoint_band_waveforms, unit_circle_layout
from mimoloc.geometry import SensorLayout


def ring_angles(count, rotation=0.0):
    """Evenly spaced angles for any count (no optimality claim attached)."""
    return rotation + 2.0 * np.pi * np.arange(count) / count


def random_layout(rng, m, n, r_min=0.5, r_max=3.0):
    """Random non-degenerate layout: sensors scattered in an annulus."""
    def ring(count):
        radii = rng.uniform(r_min, r_max, count)
        angles = rng.uniform(0.0, 2.0 * np.pi, count)
        return np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])

    return SensorLayout(ring(m), ring(n))


def symmetric_layout(m, n, rot_tx=0.0, rot_rx=0.0, radius=1.0):
    return unit_circle_layout(
        ring_angles(m, rot_tx), ring_angles(n, rot_rx), radius
    )


@pytest.fixture(scope="session")
def wset3():
    """Three-band orthogonal set used by the oracle tests (fc near the bands)."""
    return disjoint_band_waveforms(3, sample_rate=64.0, duration=64.0,
                                   carrier_frequency=16.0)


@pytest.fixture(scope="session")
def narrow_wset3():
    """Three narrow low bands, fc well above them: near-narrowband regime."""
    return disjoint_band_waveforms(
        3, sample_rate=64.0, duration=64.0, carrier_frequency=32.0,
        band_width=2.0, spacing=3.0, first_center=2.0,
    )
