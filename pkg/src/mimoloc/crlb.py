"""Lower bounds on localization covariance, closed form and numeric.

Two routes to the same 2x2 bound:

* closed forms for orthogonal waveforms (``crlb_noncoherent`` /
  ``crlb_coherent``), built from weighted bearing-sum coefficients, and
* a numeric Fisher-information oracle (``fim_numeric_*`` + ``crlb_from_fim``)
  that differentiates the sampled waveform correlations by central finite
  differences and never touches the closed-form coefficients.

The two are kept strictly independent so each can certify the other.

In the phase-synchronized model the only amplitude nuisance is the single
complex target amplitude; eliminating it produces the -(1/MN)(sum)^2
deflation terms in the coefficients.  Without phase synchronization every
path carries its own complex amplitude and no deflation appears.
"""

from dataclasses import dataclass

import numpy as np

from mimoloc import _kernels
from mimoloc.errors import (
    DelayOutOfRange,
    InvalidParameter,
    NonFiniteInput,
    SingularFim,
    SingularGeometry,
)
from mimoloc.geometry import SPEED_OF_LIGHT, h_matrix, validate_speed
from mimoloc.waveforms import CorrelationKernel

EPS_DET = 1e-12  # relative determinant threshold separating rank loss from roundoff
SOLVE_RESIDUAL_TOL = 1e-8  # max-norm residual allowed on nuisance-block solves


@dataclass(frozen=True)
class NoncoherentChannel:
    """Per-path complex amplitudes and the noise level, no phase reference."""

    alpha: np.ndarray
    sigma_w_sq: float

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=complex).ravel()
        if not np.all(np.isfinite(alpha)):
            raise NonFiniteInput("alpha must be finite")
        if not np.isfinite(self.sigma_w_sq) or self.sigma_w_sq <= 0:
            raise InvalidParameter("sigma_w_sq must be positive")
        object.__setattr__(self, "alpha", alpha)

    @property
    def mn(self):
        return self.alpha.shape[0]


@dataclass(frozen=True)
class CoherentChannel:
    """Complex target amplitude, noise level and carrier frequency."""

    zeta: complex
    sigma_w_sq: float
    f_c: float

    def __post_init__(self):
        zeta = complex(self.zeta)
        if not np.isfinite(zeta):
            raise NonFiniteInput("zeta must be finite")
        if abs(zeta) <= 0:
            raise InvalidParameter("zeta must be nonzero for bound evaluation")
        if not np.isfinite(self.sigma_w_sq) or self.sigma_w_sq <= 0:
            raise InvalidParameter("sigma_w_sq must be positive")
        if not np.isfinite(self.f_c) or self.f_c <= 0:
            raise InvalidParameter("f_c must be positive")
        object.__setattr__(self, "zeta", zeta)


@dataclass(frozen=True)
class CrlbResult:
    """Scale factor eta, geometry coefficients and the 2x2 bound they induce."""

    eta: float
    g_x: float
    g_y: float
    h: float
    covariance: np.ndarray
    sigma_x_sq: float
    sigma_y_sq: float

    @property
    def trace(self):
        return self.sigma_x_sq + self.sigma_y_sq


@dataclass(frozen=True)
class FimMatrix:
    """Fisher information over (delays, amplitude nuisances).

    ``mode`` is "noncoherent" (3MN x 3MN over MN delays and the per-path
    amplitude real/imag parts) or "coherent" ((MN+2) x (MN+2) over MN delays
    and the target-amplitude real/imag parts).
    """

    values: np.ndarray
    mode: str
    mn: int


def _assemble(eta, g_x, g_y, h):
    det = g_x * g_y - h * h
    if not np.isfinite(det) or det <= EPS_DET * g_x * g_y or det <= 0.0:
        raise SingularGeometry(
            f"bearing geometry is rank deficient (g_x={g_x:.6g}, g_y={g_y:.6g}, h={h:.6g})"
        )
    covariance = (eta / det) * np.array([[g_x, h], [h, g_y]])
    return CrlbResult(
        eta=eta,
        g_x=g_x,
        g_y=g_y,
        h=h,
        covariance=covariance,
        sigma_x_sq=eta * g_x / det,
        sigma_y_sq=eta * g_y / det,
    )


def eta_noncoherent(sigma_w_sq, beta, c=SPEED_OF_LIGHT):
    """Range-estimation floor c^2 sigma_w^2 / (8 pi^2 beta^2), m^2."""
    return c**2 * sigma_w_sq / (8.0 * np.pi**2 * beta**2)


def eta_coherent(sigma_w_sq, f_c, zeta_abs=1.0, c=SPEED_OF_LIGHT):
    """Phase-exploiting floor c^2 sigma_w^2 / (8 pi^2 f_c^2 |zeta|^2), m^2."""
    return c**2 * sigma_w_sq / (8.0 * np.pi**2 * f_c**2 * zeta_abs**2)


def crlb_noncoherent(bearings, channel, bands, c=SPEED_OF_LIGHT):
    """Closed-form 2x2 bound, envelope-only processing, orthogonal waveforms.

    Weights each path by |alpha|^2 beta_r[k]^2; no deflation terms because
    every path amplitude is its own nuisance.
    """
    c = validate_speed(c)
    if bearings.mn < 2:
        raise InvalidParameter("need MN >= 2 paths")
    if channel.mn != bearings.mn:
        raise InvalidParameter(
            f"channel has {channel.mn} paths, geometry has {bearings.mn}"
        )
    if bands.m != bearings.m:
        raise InvalidParameter(
            f"bandwidth summary covers {bands.m} waveforms, layout has {bearings.m}"
        )
    weights = np.abs(channel.alpha) ** 2 * np.tile(bands.beta_r**2, bearings.n)
    g_x, g_y, h = _kernels.path_coefficients(
        bearings.a_tx, bearings.b_tx, bearings.a_rx, bearings.b_rx, weights, False
    )
    eta = eta_noncoherent(channel.sigma_w_sq, bands.beta, c)
    return _assemble(eta, g_x, g_y, h)


def crlb_coherent(bearings, channel, bands, c=SPEED_OF_LIGHT, narrowband=False):
    """Closed-form 2x2 bound, phase-synchronized sensors, orthogonal waveforms.

    Weights each path by the exact carrier-ratio factor f_r[k]; with
    ``narrowband`` the f_r[k] ~ 1 simplification is applied instead, which is
    the form the placement analysis uses.
    """
    c = validate_speed(c)
    if bearings.mn < 2:
        raise InvalidParameter("need MN >= 2 paths")
    if bands.m != bearings.m:
        raise InvalidParameter(
            f"bandwidth summary covers {bands.m} waveforms, layout has {bearings.m}"
        )
    if narrowband:
        weights = np.ones(bearings.mn)
    else:
        weights = np.tile(bands.f_r, bearings.n)
    g_x, g_y, h = _kernels.path_coefficients(
        bearings.a_tx, bearings.b_tx, bearings.a_rx, bearings.b_rx, weights, True
    )
    eta = eta_coherent(channel.sigma_w_sq, channel.f_c, abs(channel.zeta), c)
    return _assemble(eta, g_x, g_y, h)


class _KernelDerivatives:
    """Finite-difference value/first/second derivatives of correlation kernels.

    Every kernel entry depends on its two delays only through their
    difference, so the mixed partial over (row delay, column delay) equals
    minus the second derivative in the lag variable.  Derivatives use the
    five-point central stencils; the step must resolve the carrier phase
    (h_fd * f_c < 1/16 documented in the package constraints).
    """

    def __init__(self, waveform_set, h_fd=None):
        self.kernel = CorrelationKernel(waveform_set)
        self.h = 1.0 / (64.0 * waveform_set.sample_rate) if h_fd is None else h_fd

    def stencil(self, k, kp, delta, phase_rate=0.0):
        """Return (value, d/d_lag, d2/d_lag2) at the given lag.

        ``phase_rate`` multiplies the correlation by exp(-2j pi rate * lag)
        before differencing (the phase-synchronized kernel).
        """
        h = self.h
        lags = delta + h * np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
        vals = self.kernel.at(k, kp, lags)
        if phase_rate:
            vals = vals * np.exp(-2j * np.pi * phase_rate * lags)
        value = vals[2]
        first = (vals[0] - 8.0 * vals[1] + 8.0 * vals[3] - vals[4]) / (12.0 * h)
        second = (
            -vals[0] + 16.0 * vals[1] - 30.0 * vals[2] + 16.0 * vals[3] - vals[4]
        ) / (12.0 * h * h)
        return value, first, second


def _check_oracle_delays(delays, waveform_set, m, h):
    delays = np.asarray(delays, dtype=float).ravel()
    if delays.size % m:
        raise InvalidParameter(f"delay count {delays.size} not a multiple of M={m}")
    lo, hi = 2.0 * h, waveform_set.duration - 2.0 * h
    if np.any(delays < lo) or np.any(delays > hi):
        raise DelayOutOfRange(
            f"oracle delays must lie in [{lo}, {hi}] to leave stencil room"
        )
    return delays


def fim_numeric_noncoherent(waveform_set, delays, channel, h_fd=None):
    """Numeric (3MN)x(3MN) Fisher information without a phase reference.

    Parameters are the MN delays followed by the per-path amplitude real
    parts, then imaginary parts.  Built entirely from finite differences of
    the sampled correlation kernel, scaled by 2/sigma_w^2.
    """
    m = waveform_set.m
    deriv = _KernelDerivatives(waveform_set, h_fd)
    delays = _check_oracle_delays(delays, waveform_set, m, deriv.h)
    mn = delays.size
    n_rx = mn // m
    alpha = channel.alpha
    if alpha.shape[0] != mn:
        raise InvalidParameter(f"channel has {alpha.shape[0]} paths, delays {mn}")

    r_s = np.zeros((mn, mn), dtype=complex)
    d_r = np.zeros((mn, mn), dtype=complex)  # d/d(row delay)
    d2_r = np.zeros((mn, mn), dtype=complex)  # mixed partial (row, col)
    for l in range(n_rx):
        for k in range(m):
            i = l * m + k
            for kp in range(m):
                ip = l * m + kp
                value, first, second = deriv.stencil(k, kp, delays[i] - delays[ip])
                r_s[i, ip] = value
                d_r[i, ip] = first
                d2_r[i, ip] = -second

    s_nc = np.real(alpha[:, None] * np.conj(alpha[None, :]) * d2_r)
    v_alpha = alpha[:, None] * d_r
    v_nc = np.hstack([np.real(v_alpha), -np.imag(v_alpha)])
    lam = np.block(
        [[np.real(r_s), -np.imag(r_s)], [-np.imag(r_s), np.real(r_s)]]
    )
    j = np.block([[s_nc, v_nc], [v_nc.T, lam]]) * (2.0 / channel.sigma_w_sq)
    return FimMatrix(values=j, mode="noncoherent", mn=mn)


def fim_numeric_coherent(waveform_set, delays, channel, h_fd=None):
    """Numeric (MN+2)x(MN+2) Fisher information with phase-synchronized sensors.

    Parameters are the MN delays plus the real and imaginary parts of the
    target amplitude.  The differenced kernel carries the carrier phase
    exp(-2j pi f_c lag).
    """
    m = waveform_set.m
    deriv = _KernelDerivatives(waveform_set, h_fd)
    delays = _check_oracle_delays(delays, waveform_set, m, deriv.h)
    mn = delays.size
    n_rx = mn // m
    zeta = channel.zeta
    f_c = channel.f_c

    s_c = np.zeros((mn, mn))
    v_rows = np.zeros(mn, dtype=complex)
    lam_sum = 0.0 + 0.0j
    for l in range(n_rx):
        for k in range(m):
            i = l * m + k
            for kp in range(m):
                ip = l * m + kp
                value, first, second = deriv.stencil(
                    k, kp, delays[i] - delays[ip], phase_rate=f_c
                )
                s_c[i, ip] = abs(zeta) ** 2 * np.real(-second)
                v_rows[i] += zeta * first
                lam_sum += value

    v_c = np.column_stack([np.real(v_rows), -np.imag(v_rows)])
    lam = np.array(
        [
            [np.real(lam_sum), -np.imag(lam_sum)],
            [-np.imag(lam_sum), np.real(lam_sum)],
        ]
    )
    j = np.block([[s_c, v_c], [v_c.T, lam]]) * (2.0 / channel.sigma_w_sq)
    return FimMatrix(values=j, mode="coherent", mn=mn)


def crlb_from_fim(fim, bearings, c=SPEED_OF_LIGHT, mode=None):
    """2x2 position bound from a delay-space Fisher information matrix.

    Chains the delay FIM through the bearing matrix H and removes the
    amplitude nuisances by the Schur complement
    (H S H^T - H V Lambda^-1 V^T H^T)^-1, scaled by c^2 (the 2/sigma_w^2
    factors inside the FIM blocks cancel).
    """
    c = validate_speed(c)
    if mode is not None and mode != fim.mode:
        raise InvalidParameter(f"fim mode is {fim.mode!r}, requested {mode!r}")
    mn = fim.mn
    expected = 3 * mn if fim.mode == "noncoherent" else mn + 2
    if fim.values.shape != (expected, expected):
        raise InvalidParameter(
            f"{fim.mode} FIM must be {expected}x{expected}, got {fim.values.shape}"
        )
    if bearings.mn != mn:
        raise InvalidParameter(f"geometry has {bearings.mn} paths, FIM {mn}")

    j = fim.values
    s_blk = j[:mn, :mn]
    v_blk = j[:mn, mn:]
    lam_blk = j[mn:, mn:]
    try:
        x = np.linalg.solve(lam_blk, v_blk.T)
    except np.linalg.LinAlgError as exc:
        raise SingularFim(f"amplitude-nuisance block is singular: {exc}") from exc
    residual = np.max(np.abs(lam_blk @ x - v_blk.T))
    scale = max(np.max(np.abs(v_blk)), 1.0)
    if residual > SOLVE_RESIDUAL_TOL * scale:
        raise SingularFim(
            f"nuisance solve residual {residual:.3g} exceeds tolerance"
        )

    h = h_matrix(bearings)
    info = h @ (s_blk - v_blk @ x) @ h.T
    det = info[0, 0] * info[1, 1] - info[0, 1] * info[1, 0]
    if not np.isfinite(det) or det <= EPS_DET * abs(info[0, 0] * info[1, 1]) or det <= 0:
        raise SingularFim("position information block is singular")
    inv = np.array([[info[1, 1], -info[0, 1]], [-info[1, 0], info[0, 0]]]) / det
    return c**2 * inv
