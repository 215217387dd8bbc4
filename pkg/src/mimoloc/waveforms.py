"""Sampled lowpass-equivalent waveforms and their spectral machinery.

Everything here works on one shared sample grid: ``n`` samples at
``sample_rate``, spanning a common duration ``T``.  Delays are applied by a
spectral phase ramp (band-limited, circular), never by nearest-sample
rounding: the bounds of interest live far below one sample period, so
sub-sample fidelity is not optional.

The default transmit family is frequency-division: per-transmitter bands that
occupy exactly disjoint DFT bins with a root-raised-cosine spectral taper.
Disjoint bins make the cross-correlations vanish at every relative delay,
which is precisely what the orthogonal-waveform closed forms assume, and the
Hermitian (real-signal) spectra have zero first spectral moment, matching the
implicit centering in those forms.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from mimoloc.errors import (
    DelayOutOfRange,
    InvalidParameter,
    NonFiniteInput,
    ZeroEnergy,
)
from mimoloc.geometry import path_delays, validate_speed

ENERGY_TOL = 1e-9  # unit-energy invariant on construction
_ZERO_ENERGY = 1e-30


def fft_frequencies(n, sample_rate):
    """DFT bin frequencies in (-sample_rate/2, sample_rate/2], Hz."""
    f = np.fft.fftfreq(n, d=1.0 / sample_rate)
    if n % 2 == 0:
        f[n // 2] = abs(f[n // 2])
    return f


def delay_waveform(samples, sample_rate, tau):
    """Circularly delay a sampled waveform by ``tau`` seconds (spectral shift)."""
    samples = np.asarray(samples, dtype=complex)
    f = fft_frequencies(samples.shape[-1], sample_rate)
    return np.fft.ifft(np.fft.fft(samples) * np.exp(-2j * np.pi * f * tau))


@dataclass(frozen=True)
class WaveformSet:
    """M unit-energy lowpass-equivalent waveforms on one sample grid.

    ``samples`` has shape (M, n) with n = round(duration * sample_rate); each
    row satisfies sum |s|^2 * dt = 1 within ``ENERGY_TOL``.
    """

    samples: np.ndarray
    sample_rate: float
    duration: float
    carrier_frequency: float

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.samples, dtype=complex))
        if s.ndim != 2 or s.shape[0] < 1:
            raise InvalidParameter(f"samples must be (M, n), got {s.shape}")
        if not np.all(np.isfinite(s)):
            raise NonFiniteInput("waveform samples must be finite")
        n = int(round(self.duration * self.sample_rate))
        if s.shape[1] != n:
            raise InvalidParameter(
                f"sample count {s.shape[1]} does not match duration*rate = {n}"
            )
        energies = np.sum(np.abs(s) ** 2, axis=1) / self.sample_rate
        if np.any(np.abs(energies - 1.0) > ENERGY_TOL):
            worst = int(np.argmax(np.abs(energies - 1.0)))
            raise InvalidParameter(
                f"waveform {worst} energy {energies[worst]:.12g} is not unit"
            )
        object.__setattr__(self, "samples", s)

    @property
    def m(self):
        return self.samples.shape[0]

    @property
    def n_samples(self):
        return self.samples.shape[1]

    @property
    def dt(self):
        return 1.0 / self.sample_rate

    def narrowband_ratios(self):
        """Per-waveform beta_k^2 / f_c^2 (should be << 1 for narrowband use)."""
        betas = np.array(
            [effective_bandwidth(s, self.sample_rate) for s in self.samples]
        )
        return betas**2 / self.carrier_frequency**2


@dataclass(frozen=True)
class BandwidthSummary:
    """Per-waveform effective bandwidths and the derived summary terms.

    beta is the rms of beta_k, beta_r[k] = beta_k / beta, and
    f_r[k] = 1 + beta_k^2 / f_c^2 (the exact carrier-ratio factor; it tends
    to 1 for narrowband signals).
    """

    beta_k: np.ndarray
    beta: float
    beta_r: np.ndarray
    f_r: np.ndarray
    carrier_frequency: float

    @classmethod
    def from_betas(cls, beta_k, carrier_frequency):
        beta_k = np.asarray(beta_k, dtype=float)
        if beta_k.ndim != 1 or beta_k.size < 1:
            raise InvalidParameter("beta_k must be a 1-D vector")
        if np.any(beta_k <= 0) or not np.all(np.isfinite(beta_k)):
            raise InvalidParameter("beta_k must be positive and finite")
        carrier_frequency = float(carrier_frequency)
        if carrier_frequency <= 0:
            raise InvalidParameter("carrier frequency must be positive")
        beta = float(np.sqrt(np.mean(beta_k**2)))
        return cls(
            beta_k=beta_k,
            beta=beta,
            beta_r=beta_k / beta,
            f_r=1.0 + beta_k**2 / carrier_frequency**2,
            carrier_frequency=carrier_frequency,
        )

    @property
    def m(self):
        return self.beta_k.shape[0]


def effective_bandwidth(waveform, sample_rate):
    """Root of the second spectral moment about zero, in Hz.

    Computed on the discrete spectrum with frequencies in
    (-sample_rate/2, sample_rate/2], rectangle rule.
    """
    waveform = np.asarray(waveform, dtype=complex)
    spec_sq = np.abs(np.fft.fft(waveform)) ** 2
    total = float(np.sum(spec_sq))
    if total / waveform.size / sample_rate < _ZERO_ENERGY:
        raise ZeroEnergy("waveform has (numerically) zero energy")
    f = fft_frequencies(waveform.size, sample_rate)
    return float(np.sqrt(np.sum(f**2 * spec_sq) / total))


def bandwidth_summary(waveform_set):
    """Effective bandwidths beta_k and derived summary for a WaveformSet."""
    beta_k = np.array(
        [effective_bandwidth(s, waveform_set.sample_rate) for s in waveform_set.samples]
    )
    return BandwidthSummary.from_betas(beta_k, waveform_set.carrier_frequency)


class CorrelationKernel:
    """Evaluator of waveform cross-correlations at arbitrary real lags.

    ``at(k, kp, deltas)`` returns dt * sum_t s_k(t - delta) s_kp*(t) for each
    requested delta, evaluated spectrally (exact for the circular grid).
    """

    def __init__(self, waveform_set):
        self.sample_rate = waveform_set.sample_rate
        self.n = waveform_set.n_samples
        self.freqs = fft_frequencies(self.n, self.sample_rate)
        self._spectra = np.fft.fft(waveform_set.samples, axis=1)
        self._scale = 1.0 / (self.sample_rate * self.n)

    def at(self, k, kp, deltas):
        deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
        cross = self._spectra[k] * np.conj(self._spectra[kp])
        phases = np.exp(-2j * np.pi * np.outer(deltas, self.freqs))
        return self._scale * (phases @ cross)

    def lag_grid(self, k, kp):
        """Correlation at every integer lag m*dt, m = 0..n-1 (circular)."""
        cross = self._spectra[k] * np.conj(self._spectra[kp])
        return np.fft.fft(cross) * self._scale


@dataclass(frozen=True)
class CorrelationMatrix:
    """(MN) x (MN) waveform correlation matrix at given path delays.

    Entries pair paths that share a receiver; cross-receiver entries are
    exactly zero.  Path order i = l*M + k.
    """

    values: np.ndarray
    delays: np.ndarray


def _check_delays(delays, duration, mn=None):
    delays = np.asarray(delays, dtype=float).ravel()
    if mn is not None and delays.size != mn:
        raise InvalidParameter(f"expected {mn} delays, got {delays.size}")
    if not np.all(np.isfinite(delays)):
        raise NonFiniteInput("delays must be finite")
    if np.any(delays < 0.0) or np.any(delays >= duration):
        raise DelayOutOfRange(
            f"delays must lie in [0, {duration}), got range "
            f"[{delays.min()}, {delays.max()}]"
        )
    return delays


def correlation_matrix(waveform_set, delays):
    """Correlation matrix R over all MN paths at the given delay vector."""
    m = waveform_set.m
    delays = _check_delays(delays, waveform_set.duration)
    if delays.size % m:
        raise InvalidParameter(
            f"delay count {delays.size} is not a multiple of M={m}"
        )
    n_rx = delays.size // m
    kernel = CorrelationKernel(waveform_set)
    mn = delays.size
    values = np.zeros((mn, mn), dtype=complex)
    for l in range(n_rx):
        for k in range(m):
            i = l * m + k
            for kp in range(m):
                ip = l * m + kp
                values[i, ip] = kernel.at(k, kp, delays[i] - delays[ip])[0]
    return CorrelationMatrix(values=values, delays=delays)


@dataclass(frozen=True)
class OrthogonalityReport:
    passed: bool
    worst_pair: tuple
    worst_delay: float
    worst_magnitude: float
    tolerance: float


def orthogonality_check(waveform_set, delay_span, tolerance):
    """Scan cross-correlations of all pairs k != k' over a lag grid.

    Passes iff the largest cross-correlation magnitude within
    [-delay_span, delay_span] stays below ``tolerance``.
    """
    if not 0 <= delay_span < waveform_set.duration:
        raise InvalidParameter("delay_span must lie in [0, duration)")
    kernel = CorrelationKernel(waveform_set)
    n = waveform_set.n_samples
    lags = np.arange(n) * waveform_set.dt
    lags[lags > waveform_set.duration / 2] -= waveform_set.duration
    in_span = np.abs(lags) <= delay_span
    worst = (0, 0)
    worst_delay = 0.0
    worst_mag = 0.0
    for k in range(waveform_set.m):
        for kp in range(k + 1, waveform_set.m):
            mags = np.abs(kernel.lag_grid(k, kp))
            idx = int(np.argmax(np.where(in_span, mags, -1.0)))
            if mags[idx] > worst_mag:
                worst_mag = float(mags[idx])
                worst = (k, kp)
                worst_delay = float(lags[idx])
    return OrthogonalityReport(
        passed=worst_mag < tolerance,
        worst_pair=worst,
        worst_delay=worst_delay,
        worst_magnitude=worst_mag,
        tolerance=tolerance,
    )


def _rrc_band_profile(freqs, center, width, rolloff):
    """Root-raised-cosine magnitude profile for one band, zero outside it."""
    u = np.abs(freqs - center)
    flat_edge = (1.0 - rolloff) * width / 2.0
    profile = np.zeros_like(freqs)
    profile[u <= flat_edge] = 1.0
    taper = (u > flat_edge) & (u <= width / 2.0)
    t = (u[taper] - flat_edge) / (rolloff * width / 2.0)
    profile[taper] = np.sqrt(0.5 * (1.0 + np.cos(np.pi * t)))
    return profile


def disjoint_band_waveforms(
    m,
    sample_rate,
    duration,
    carrier_frequency,
    band_width=None,
    spacing=None,
    first_center=None,
    rolloff=0.25,
):
    """Frequency-division waveform family on exactly disjoint DFT bins.

    Waveform k occupies the bands +-(first_center + k*spacing +- band_width/2)
    with a root-raised-cosine spectral taper; the two-sided (Hermitian)
    construction keeps the time samples real and the spectral centroid at
    zero.  Defaults pack the m bands into the lower half of (0, rate/2).
    """
    if m < 1:
        raise InvalidParameter("need at least one waveform")
    nyquist = sample_rate / 2.0
    if band_width is None:
        band_width = nyquist / (2.0 * m + 1.0)
    if spacing is None:
        spacing = 1.5 * band_width
    if first_center is None:
        first_center = band_width
    top = first_center + (m - 1) * spacing + band_width / 2.0
    if first_center - band_width / 2.0 <= 0.0 or top >= nyquist:
        raise InvalidParameter(
            f"band plan [{first_center - band_width / 2.0}, {top}] does not "
            f"fit inside (0, {nyquist})"
        )
    if spacing < band_width:
        raise InvalidParameter("spacing smaller than band_width: bands overlap")

    n = int(round(duration * sample_rate))
    freqs = fft_frequencies(n, sample_rate)
    samples = np.empty((m, n), dtype=complex)
    for k in range(m):
        center = first_center + k * spacing
        spectrum = _rrc_band_profile(freqs, center, band_width, rolloff)
        spectrum += _rrc_band_profile(freqs, -center, band_width, rolloff)
        s = np.fft.ifft(spectrum)
        energy = np.sum(np.abs(s) ** 2) / sample_rate
        samples[k] = s / np.sqrt(energy)
    return WaveformSet(
        samples=samples,
        sample_rate=sample_rate,
        duration=duration,
        carrier_frequency=carrier_frequency,
    )


def synthesize_received(
    layout,
    target,
    waveform_set,
    zeta,
    sigma_w_sq,
    c,
    seed,
    alpha=None,
):
    """Simulate the N received baseband signals for a point target.

    Each receiver superposes the band-limited delayed copies of all M
    transmit waveforms.  With ``alpha`` unset (phase-coherent sensors) the
    path amplitude is zeta * exp(-j 2 pi f_c tau); with ``alpha`` given (one
    complex value per path) the supplied amplitudes are used instead, which
    models transmitters without a shared phase reference.  Noise is circular
    complex white Gaussian with variance sigma_w_sq / dt per sample,
    deterministic for a given seed.
    """
    c = validate_speed(c)
    zeta = complex(zeta)
    sigma_w_sq = float(sigma_w_sq)
    if not np.isfinite(zeta) or not np.isfinite(sigma_w_sq) or sigma_w_sq < 0:
        raise NonFiniteInput("zeta and sigma_w_sq must be finite, noise power >= 0")
    if layout.m != waveform_set.m:
        raise InvalidParameter(
            f"layout has {layout.m} transmitters but set has {waveform_set.m} waveforms"
        )
    delays = _check_delays(
        path_delays(layout, target, c), waveform_set.duration, layout.mn
    )
    if alpha is not None:
        alpha = np.asarray(alpha, dtype=complex).ravel()
        if alpha.size != layout.mn:
            raise InvalidParameter(f"alpha must have {layout.mn} entries")
        if not np.all(np.isfinite(alpha)):
            raise NonFiniteInput("alpha must be finite")
    ratios = waveform_set.narrowband_ratios()
    if np.max(ratios) > 0.5:
        warnings.warn(
            f"waveforms are far from narrowband (max beta^2/fc^2 = {ratios.max():.3g})",
            stacklevel=2,
        )

    m, n = waveform_set.m, waveform_set.n_samples
    n_rx = layout.n
    f_c = waveform_set.carrier_frequency
    spectra = np.fft.fft(waveform_set.samples, axis=1)
    freqs = fft_frequencies(n, waveform_set.sample_rate)

    received = np.zeros((n_rx, n), dtype=complex)
    for l in range(n_rx):
        acc = np.zeros(n, dtype=complex)
        for k in range(m):
            i = l * m + k
            tau = delays[i]
            if alpha is None:
                amp = zeta * np.exp(-2j * np.pi * f_c * tau)
            else:
                amp = alpha[i]
            acc += amp * (spectra[k] * np.exp(-2j * np.pi * freqs * tau))
        received[l] = np.fft.ifft(acc)

    rng = np.random.default_rng(seed)
    scale = np.sqrt(sigma_w_sq * waveform_set.sample_rate / 2.0)
    noise = scale * (
        rng.standard_normal((n_rx, n)) + 1j * rng.standard_normal((n_rx, n))
    )
    return received + noise
