import numpy as np
import pytest

from mimoloc.crlb import (
    CoherentChannel,
    NoncoherentChannel,
    crlb_coherent,
    crlb_from_fim,
    crlb_noncoherent,
    eta_coherent,
    eta_noncoherent,
    fim_numeric_coherent,
    fim_numeric_noncoherent,
)
from mimoloc.errors import DelayOutOfRange, SingularGeometry
from mimoloc.geometry import SensorLayout, bearing_angles, path_delays
from mimoloc.waveforms import BandwidthSummary, bandwidth_summary

from conftest import random_layout, symmetric_layout

UNIT_BANDS3 = BandwidthSummary.from_betas(np.full(3, 1.0), carrier_frequency=1.0)


def unit_channel_nc(mn):
    return NoncoherentChannel(alpha=np.ones(mn), sigma_w_sq=1.0)


UNIT_CHANNEL_C = CoherentChannel(zeta=1.0, sigma_w_sq=1.0, f_c=1.0)


def collinear_layout():
    theta = 1.1
    u = np.array([np.cos(theta), np.sin(theta)])
    return SensorLayout(np.array([-2.0 * u, -3.0 * u]), np.array([-4.0 * u, -5.0 * u]))


class TestNoncoherentClosedForm:
    def test_symmetric_3x3(self):
        b = bearing_angles(symmetric_layout(3, 3, rot_rx=0.4), (0.0, 0.0))
        r = crlb_noncoherent(b, unit_channel_nc(9), UNIT_BANDS3, c=1.0)
        assert r.h == pytest.approx(0.0, abs=1e-12)
        assert r.g_x == pytest.approx(9.0, rel=1e-12)
        assert r.g_y == pytest.approx(9.0, rel=1e-12)
        assert r.trace == pytest.approx(1.0 / (36.0 * np.pi**2), rel=1e-12)
        assert r.trace == pytest.approx(2.8145e-3, rel=1e-4)

    def test_collinear_raises(self):
        b = bearing_angles(collinear_layout(), (0.0, 0.0))
        with pytest.raises(SingularGeometry):
            crlb_noncoherent(b, unit_channel_nc(4), BandwidthSummary.from_betas([1.0, 1.0], 1.0), c=1.0)

    def test_noise_scaling_exact(self):
        rng = np.random.default_rng(11)
        b = bearing_angles(random_layout(rng, 3, 3), (0.0, 0.0))
        lo = crlb_noncoherent(b, unit_channel_nc(9), UNIT_BANDS3, c=1.0)
        hi = crlb_noncoherent(
            b, NoncoherentChannel(alpha=np.ones(9), sigma_w_sq=2.0), UNIT_BANDS3, c=1.0
        )
        assert hi.sigma_x_sq == pytest.approx(2.0 * lo.sigma_x_sq, rel=1e-15)
        assert hi.sigma_y_sq == pytest.approx(2.0 * lo.sigma_y_sq, rel=1e-15)


class TestCoherentClosedForm:
    def test_symmetric_3x3_optimal_trace(self):
        b = bearing_angles(symmetric_layout(3, 3, rot_rx=0.9), (0.0, 0.0))
        r = crlb_coherent(b, UNIT_CHANNEL_C, UNIT_BANDS3, c=1.0, narrowband=True)
        assert r.trace == pytest.approx(2.0 * r.eta / 9.0, rel=1e-12)
        assert r.trace == pytest.approx(1.0 / (36.0 * np.pi**2), rel=1e-12)

    def test_simo_coefficients(self):
        # 1 transmitter anywhere + 12 symmetric receivers
        lay = symmetric_layout(1, 12, rot_tx=0.7)
        b = bearing_angles(lay, (0.0, 0.0))
        bands = BandwidthSummary.from_betas([1.0], 1.0)
        r = crlb_coherent(b, UNIT_CHANNEL_C, bands, c=1.0, narrowband=True)
        assert r.g_x == pytest.approx(6.0, rel=1e-12)
        assert r.g_y == pytest.approx(6.0, rel=1e-12)
        assert r.h == pytest.approx(0.0, abs=1e-12)
        assert r.trace == pytest.approx(4.0 * r.eta / 12.0, rel=1e-12)

    def test_zeta_scaling(self):
        rng = np.random.default_rng(12)
        b = bearing_angles(random_layout(rng, 3, 3), (0.0, 0.0))
        base = crlb_coherent(b, UNIT_CHANNEL_C, UNIT_BANDS3, c=1.0)
        strong = crlb_coherent(
            b,
            CoherentChannel(zeta=2.0, sigma_w_sq=1.0, f_c=1.0),
            UNIT_BANDS3,
            c=1.0,
        )
        assert strong.trace == pytest.approx(base.trace / 4.0, rel=1e-15)

    def test_rotation_leaves_trace_invariant(self):
        rng = np.random.default_rng(13)
        lay = random_layout(rng, 4, 3)
        b = bearing_angles(lay, (0.0, 0.0))
        base = crlb_coherent(b, UNIT_CHANNEL_C, BandwidthSummary.from_betas(np.full(4, 1.0), 1.0), c=1.0, narrowband=True)
        rho = 0.83
        rot = np.array([[np.cos(rho), -np.sin(rho)], [np.sin(rho), np.cos(rho)]])
        lay_r = SensorLayout(lay.tx_positions @ rot.T, lay.rx_positions @ rot.T)
        b_r = bearing_angles(lay_r, (0.0, 0.0))
        turned = crlb_coherent(b_r, UNIT_CHANNEL_C, BandwidthSummary.from_betas(np.full(4, 1.0), 1.0), c=1.0, narrowband=True)
        assert turned.trace == pytest.approx(base.trace, rel=1e-9)

    def test_coherency_gain_ratio(self):
        # symmetric layout, unit amplitudes, beta_r = 1: g/h coincide and the
        # trace ratio collapses to the eta ratio (fc/beta)^2
        b = bearing_angles(symmetric_layout(3, 3, rot_rx=0.2), (0.0, 0.0))
        for ratio in (100.0, 1000.0):
            bands = BandwidthSummary.from_betas(np.full(3, 1.0), carrier_frequency=ratio)
            ch_c = CoherentChannel(zeta=1.0, sigma_w_sq=1.0, f_c=ratio)
            r_nc = crlb_noncoherent(b, unit_channel_nc(9), bands, c=1.0)
            r_c = crlb_coherent(b, ch_c, bands, c=1.0, narrowband=True)
            assert np.sqrt(r_nc.trace / r_c.trace) == pytest.approx(ratio, rel=1e-9)

    def test_trace_floor_on_random_layouts(self):
        rng = np.random.default_rng(14)
        for _ in range(100):
            lay = random_layout(rng, 3, 4)
            b = bearing_angles(lay, rng.uniform(-0.3, 0.3, 2))
            bands = BandwidthSummary.from_betas(np.full(3, 1.0), 1.0)
            try:
                r = crlb_coherent(b, UNIT_CHANNEL_C, bands, c=1.0, narrowband=True)
            except SingularGeometry:
                continue
            assert r.trace >= 2.0 * r.eta / 12.0 - 1e-12


class TestEtaTerms:
    def test_eta_values(self):
        assert eta_noncoherent(1.0, 1.0, 1.0) == pytest.approx(1.0 / (8 * np.pi**2))
        assert eta_coherent(1.0, 1.0, 1.0, 1.0) == pytest.approx(1.0 / (8 * np.pi**2))
        # coherent eta is carrier-scaled
        assert eta_coherent(1.0, 10.0, 1.0, 1.0) == pytest.approx(
            eta_noncoherent(1.0, 10.0, 1.0), rel=1e-15
        )


@pytest.fixture(scope="module")
def oracle_scene(wset3):
    rng = np.random.default_rng(400)
    lay = random_layout(rng, 3, 3, r_min=1.0, r_max=2.0)
    target = np.array([0.1, -0.2])
    bearings = bearing_angles(lay, target)
    delays = path_delays(lay, target, c=1.0)
    bands = bandwidth_summary(wset3)
    return lay, target, bearings, delays, bands


class TestFimOracleNoncoherent:
    def test_orthogonal_blocks(self, wset3, oracle_scene):
        _, _, _, delays, bands = oracle_scene
        rng = np.random.default_rng(401)
        alpha = rng.standard_normal(9) + 1j * rng.standard_normal(9)
        channel = NoncoherentChannel(alpha=alpha, sigma_w_sq=0.7)
        fim = fim_numeric_noncoherent(wset3, delays, channel)
        mn = 9
        blocks = fim.values * channel.sigma_w_sq / 2.0
        s_diag = np.diag(blocks[:mn, :mn])
        expected = (
            4.0
            * np.pi**2
            * bands.beta**2
            * np.abs(alpha) ** 2
            * np.tile(bands.beta_r**2, 3)
        )
        np.testing.assert_allclose(s_diag, expected, rtol=1e-3)
        # V block vanishes and the amplitude block is the identity
        assert np.max(np.abs(blocks[:mn, mn:])) < 1e-3
        np.testing.assert_allclose(blocks[mn:, mn:], np.eye(2 * mn), atol=1e-3)

    def test_zero_amplitude_path(self, wset3, oracle_scene):
        _, _, _, delays, _ = oracle_scene
        alpha = np.ones(9, dtype=complex)
        alpha[4] = 0.0
        channel = NoncoherentChannel(alpha=alpha, sigma_w_sq=1.0)
        fim = fim_numeric_noncoherent(wset3, delays, channel)
        assert fim.values[4, 4] == pytest.approx(0.0, abs=1e-12)

    def test_symmetry(self, wset3, oracle_scene):
        _, _, _, delays, _ = oracle_scene
        channel = NoncoherentChannel(alpha=np.ones(9), sigma_w_sq=1.0)
        fim = fim_numeric_noncoherent(wset3, delays, channel)
        scale = np.max(np.abs(fim.values))
        assert np.max(np.abs(fim.values - fim.values.T)) < 1e-9 * scale

    def test_delays_on_edge_rejected(self, wset3):
        with pytest.raises(DelayOutOfRange):
            fim_numeric_noncoherent(
                wset3, np.zeros(9), NoncoherentChannel(np.ones(9), 1.0)
            )


class TestFimOracleCoherent:
    def test_orthogonal_blocks(self, wset3, oracle_scene):
        _, _, _, delays, bands = oracle_scene
        zeta = 0.8 + 0.6j
        channel = CoherentChannel(zeta=zeta, sigma_w_sq=0.5, f_c=16.0)
        fim = fim_numeric_coherent(wset3, delays, channel)
        mn = 9
        blocks = fim.values * channel.sigma_w_sq / 2.0
        expected = 4.0 * np.pi**2 * abs(zeta) ** 2 * 16.0**2 * np.tile(bands.f_r, 3)
        np.testing.assert_allclose(np.diag(blocks[:mn, :mn]), expected, rtol=1e-3)
        # amplitude block: MN * identity (see decisions ledger on the printed
        # 1/MN); the off-diagonal vanishes
        np.testing.assert_allclose(blocks[mn:, mn:], 9.0 * np.eye(2), rtol=1e-3, atol=1e-9)
        # V columns: [2 pi fc zeta_im, 2 pi fc zeta_re] per path
        np.testing.assert_allclose(
            blocks[:mn, mn], 2.0 * np.pi * 16.0 * zeta.imag, rtol=1e-3
        )
        np.testing.assert_allclose(
            np.abs(blocks[:mn, mn + 1]), 2.0 * np.pi * 16.0 * abs(zeta.real), rtol=1e-3
        )

    def test_real_zeta_zeroes_first_v_column(self, wset3, oracle_scene):
        _, _, _, delays, _ = oracle_scene
        channel = CoherentChannel(zeta=1.0, sigma_w_sq=1.0, f_c=16.0)
        fim = fim_numeric_coherent(wset3, delays, channel)
        v_col1 = fim.values[:9, 9] * channel.sigma_w_sq / 2.0
        assert np.max(np.abs(v_col1)) < 1e-3 * 2.0 * np.pi * 16.0

    def test_symmetry(self, wset3, oracle_scene):
        _, _, _, delays, _ = oracle_scene
        channel = CoherentChannel(zeta=1.0 - 0.5j, sigma_w_sq=1.0, f_c=16.0)
        fim = fim_numeric_coherent(wset3, delays, channel)
        scale = np.max(np.abs(fim.values))
        assert np.max(np.abs(fim.values - fim.values.T)) < 1e-9 * scale


class TestCrlbFromFim:
    def test_coherent_oracle_matches_closed_form(self, wset3, oracle_scene):
        _, _, bearings, delays, bands = oracle_scene
        channel = CoherentChannel(zeta=0.9 - 0.2j, sigma_w_sq=0.8, f_c=16.0)
        fim = fim_numeric_coherent(wset3, delays, channel)
        cov = crlb_from_fim(fim, bearings, c=1.0, mode="coherent")
        closed = crlb_coherent(bearings, channel, bands, c=1.0)
        np.testing.assert_allclose(cov, closed.covariance, rtol=1e-3)
        # symmetric positive definite
        assert cov[0, 1] == pytest.approx(cov[1, 0], rel=1e-9)
        assert np.all(np.linalg.eigvalsh(cov) > 0)

    def test_noncoherent_oracle_matches_closed_form(self, wset3, oracle_scene):
        _, _, bearings, delays, bands = oracle_scene
        rng = np.random.default_rng(402)
        alpha = rng.standard_normal(9) + 1j * rng.standard_normal(9)
        channel = NoncoherentChannel(alpha=alpha, sigma_w_sq=0.8)
        fim = fim_numeric_noncoherent(wset3, delays, channel)
        cov = crlb_from_fim(fim, bearings, c=1.0, mode="noncoherent")
        closed = crlb_noncoherent(bearings, channel, bands, c=1.0)
        np.testing.assert_allclose(cov, closed.covariance, rtol=1e-3)

    def test_noncoherent_schur_term_negligible(self, wset3, oracle_scene):
        # orthogonal waveforms: V = 0, so zeroing the cross block changes
        # nothing and the bound reduces to the (H S H^T)^-1 route
        _, _, bearings, delays, _ = oracle_scene
        channel = NoncoherentChannel(alpha=np.ones(9), sigma_w_sq=1.0)
        fim = fim_numeric_noncoherent(wset3, delays, channel)
        cov = crlb_from_fim(fim, bearings, c=1.0)
        stripped = fim.values.copy()
        stripped[:9, 9:] = 0.0
        stripped[9:, :9] = 0.0
        from mimoloc.crlb import FimMatrix

        cov0 = crlb_from_fim(
            FimMatrix(values=stripped, mode="noncoherent", mn=9), bearings, c=1.0
        )
        np.testing.assert_allclose(cov, cov0, rtol=1e-6)

    def test_random_4x5_coherent(self):
        # different waveform count and geometry than the shared scene
        from mimoloc.waveforms import disjoint_band_waveforms

        wset = disjoint_band_waveforms(4, 64.0, 64.0, carrier_frequency=16.0)
        rng = np.random.default_rng(403)
        lay = random_layout(rng, 4, 5, r_min=1.0, r_max=2.0)
        target = np.array([-0.05, 0.15])
        bearings = bearing_angles(lay, target)
        delays = path_delays(lay, target, c=1.0)
        bands = bandwidth_summary(wset)
        channel = CoherentChannel(zeta=1.2 + 0.4j, sigma_w_sq=0.6, f_c=16.0)
        fim = fim_numeric_coherent(wset, delays, channel)
        cov = crlb_from_fim(fim, bearings, c=1.0)
        closed = crlb_coherent(bearings, channel, bands, c=1.0)
        assert np.trace(cov) == pytest.approx(closed.trace, rel=1e-3)
