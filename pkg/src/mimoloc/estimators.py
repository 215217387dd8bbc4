"""Target localization estimators and the Monte Carlo validation harness.

The linear-estimator route works on "observed" time delays: a matched filter
extracts per-path delays from the received signals, the delays are linearized
about an explicit expansion point, and a Gauss-Markov (weighted least
squares) solve produces the position fix together with its covariance.  A
two-stage grid maximum-likelihood search operates on the signals directly.

Linear-model convention: with D from ``geometry.d_matrix`` (rows
-(1/c)[cos-sum, sin-sum, 1] at the expansion point), the model observation
for path i is

    obs_i = tau_i(expansion) - mu_i,

where mu_i is the physically measured delay.  Fitting obs = D theta + noise
then yields theta = (dx, dy, range-offset): the displacement from the
expansion point plus a common range offset (meters) absorbing any shared
delay bias.  ``monte_carlo`` performs this conversion; ``blue_estimate``
itself is purely the linear-model solve.
"""

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from mimoloc.errors import (
    BoundaryMaximum,
    InvalidParameter,
    MimolocError,
    NonFiniteInput,
    PeakNotFound,
    RankDeficient,
    SingularGeometry,
)
from mimoloc.geometry import (
    SPEED_OF_LIGHT,
    bearing_angles,
    d_matrix,
    h_matrix,
    path_delays,
    validate_speed,
)
from mimoloc.waveforms import synthesize_received

EPS_DET = 1e-12
OVERSAMPLE = 16  # refinement grid density per sample for delay extraction


@dataclass(frozen=True)
class DelayErrorModel:
    """Delay-observation error: zero mean, common variance, uncorrelated paths."""

    variance: float

    def __post_init__(self):
        if not np.isfinite(self.variance) or self.variance < 0:
            raise InvalidParameter("delay-error variance must be >= 0")

    @property
    def sigma(self):
        return float(np.sqrt(self.variance))

    def covariance(self, mn):
        return self.variance * np.eye(mn)


def delay_error_covariance(f_c, zeta_sq, sigma_w_sq):
    """Small-error delay variance sigma_w^2 / (8 pi^2 f_c^2 |zeta|^2).

    This is the variance of per-path maximum-likelihood delay estimates at
    high SNR; paths are uncorrelated so the covariance is diagonal.
    """
    for name, value in (("f_c", f_c), ("zeta_sq", zeta_sq), ("sigma_w_sq", sigma_w_sq)):
        if not np.isfinite(value) or value <= 0:
            raise InvalidParameter(f"{name} must be positive, got {value}")
    return DelayErrorModel(variance=sigma_w_sq / (8.0 * np.pi**2 * f_c**2 * zeta_sq))


@dataclass(frozen=True)
class BlueResult:
    """Linear position fix and its covariance.

    ``offset_hat`` is the common range-offset nuisance (meters) carried by
    the all-ones column of the linearized model; ``position_covariance`` is
    the 2x2 block in the explicit closed form (g1/g2/h coefficient sums).
    """

    x_hat: float
    y_hat: float
    offset_hat: float
    covariance: np.ndarray
    position_covariance: np.ndarray
    g1: float
    g2: float
    h: float


class BlueCovariance(NamedTuple):
    sigma_x_sq: float
    sigma_y_sq: float
    g1: float
    g2: float
    h: float


def _blue_coefficients(bearings):
    h2 = h_matrix(bearings)
    a_sum = h2[0]
    b_sum = h2[1]
    mn = a_sum.size
    sa = float(np.sum(a_sum))
    sb = float(np.sum(b_sum))
    g1 = float(np.sum(b_sum**2)) - sb * sb / mn
    g2 = float(np.sum(a_sum**2)) - sa * sa / mn
    h = -float(np.sum(a_sum * b_sum)) + sa * sb / mn
    return a_sum, b_sum, g1, g2, h


def blue_covariance(bearings, err, c=SPEED_OF_LIGHT):
    """Closed-form position variances of the linear estimator.

    sigma_x^2 = c^2 sigma_eps^2 g1 / (g1 g2 - h^2), and symmetrically for y.
    """
    c = validate_speed(c)
    _, _, g1, g2, h = _blue_coefficients(bearings)
    det = g1 * g2 - h * h
    if not np.isfinite(det) or det <= EPS_DET * g1 * g2 or det <= 0:
        raise SingularGeometry("collinear bearings: linear model is rank deficient")
    scale = c**2 * err.variance / det
    return BlueCovariance(
        sigma_x_sq=scale * g1, sigma_y_sq=scale * g2, g1=g1, g2=g2, h=h
    )


def blue_estimate(obs, bearings, err, c=SPEED_OF_LIGHT):
    """Gauss-Markov solve of the linearized delay model.

    Solves theta = (D^T C^-1 D)^-1 D^T C^-1 obs with D built at the bearing
    set's expansion point, and cross-checks the explicit 2x2 closed form
    (offset-centered observations through the g1/g2/h coefficient matrix)
    against the generic solve to 1e-9 relative.
    """
    c = validate_speed(c)
    obs = np.asarray(obs, dtype=float).ravel()
    mn = bearings.mn
    if obs.size != mn:
        raise InvalidParameter(f"expected {mn} observations, got {obs.size}")
    if not np.all(np.isfinite(obs)):
        raise NonFiniteInput("observations must be finite")
    if mn < 3:
        raise InvalidParameter("need MN >= 3 paths for the 3-parameter model")

    d = d_matrix(bearings, c)
    normal = d.T @ d
    det3 = np.linalg.det(normal)
    if not np.isfinite(det3) or det3 <= EPS_DET * np.prod(np.diag(normal)):
        raise RankDeficient("linearized model matrix is rank deficient")
    theta = np.linalg.solve(normal, d.T @ obs)
    covariance = err.variance * np.linalg.inv(normal)

    # explicit closed form: centered observations through the 2x2 adjugate
    a_sum, b_sum, g1, g2, h = _blue_coefficients(bearings)
    det = g1 * g2 - h * h
    centered = obs - np.mean(obs)
    u = np.array([np.sum(a_sum * centered), np.sum(b_sum * centered)])
    g_b = np.array([[g1, h], [h, g2]]) / det
    explicit = -c * (g_b @ u)
    gm = theta[:2]
    if np.linalg.norm(explicit - gm) > 1e-9 * max(np.linalg.norm(gm), 1e-30):
        raise MimolocError(
            "explicit closed form and Gauss-Markov solve disagree: "
            f"{explicit} vs {gm}"
        )

    position_covariance = c**2 * err.variance * g_b
    return BlueResult(
        x_hat=float(theta[0]),
        y_hat=float(theta[1]),
        offset_hat=float(theta[2]),
        covariance=covariance,
        position_covariance=position_covariance,
        g1=g1,
        g2=g2,
        h=h,
    )


class _CorrelationTable:
    """Oversampled receiver-vs-waveform cross-correlations with lag lookup."""

    def __init__(self, received, waveform_set):
        received = np.atleast_2d(np.asarray(received, dtype=complex))
        n = waveform_set.n_samples
        if received.shape[1] != n:
            raise InvalidParameter(
                f"received rows have {received.shape[1]} samples, waveforms {n}"
            )
        self.n = n
        self.dt = waveform_set.dt
        self.duration = waveform_set.duration
        self.n_up = n * OVERSAMPLE
        r_spec = np.fft.fft(received, axis=1)
        s_spec = np.fft.fft(waveform_set.samples, axis=1)
        # cross spectrum of corr(v) = dt * sum_t r(t) s*(t - v)
        self.tables = {}
        half = n // 2
        for l in range(received.shape[0]):
            for k in range(waveform_set.m):
                cross = r_spec[l] * np.conj(s_spec[k])
                padded = np.zeros(self.n_up, dtype=complex)
                padded[:half] = cross[:half]
                padded[-(n - half):] = cross[half:]
                self.tables[(l, k)] = np.fft.ifft(padded) * (OVERSAMPLE * self.dt)

    def grid_lag(self, index):
        """Lag (seconds) of oversampled index, wrapped to [-T/2, T/2)."""
        v = index * (self.dt / OVERSAMPLE)
        return v - self.duration * (v >= self.duration / 2.0)

    def index_of(self, v):
        return np.mod(np.round(v / (self.dt / OVERSAMPLE)).astype(int), self.n_up)

    def complex_at(self, l, k, v):
        """Linear interpolation of the oversampled correlation at lag(s) v."""
        table = self.tables[(l, k)]
        pos = np.mod(np.asarray(v, dtype=float) / (self.dt / OVERSAMPLE), self.n_up)
        i0 = np.floor(pos).astype(int)
        frac = pos - i0
        i1 = (i0 + 1) % self.n_up
        return table[i0] * (1.0 - frac) + table[i1] * frac


def matched_filter_delays(received, waveform_set, window):
    """Per-path delay extraction by matched filtering.

    For each receiver/waveform pair, the coarse stage takes the envelope peak
    of the cross-correlation on the sample grid inside ``window``; the fine
    stage maximizes the carrier-rotated real part
    Re{exp(j 2 pi f_c v) corr(v)} on the 16x-oversampled neighborhood, with a
    final three-point quadratic fit.  Carrier-cycle ambiguity is resolved by
    staying within one sample of the envelope maximum.

    Raises PeakNotFound when a coarse envelope peak lands on the window edge.
    Returns all MN delays, path-ordered.
    """
    v_lo, v_hi = float(window[0]), float(window[1])
    if not 0.0 <= v_lo < v_hi < waveform_set.duration:
        raise InvalidParameter("window must satisfy 0 <= lo < hi < duration")
    table = _CorrelationTable(received, waveform_set)
    received = np.atleast_2d(np.asarray(received, dtype=complex))
    n_rx = received.shape[0]
    m = waveform_set.m
    f_c = waveform_set.carrier_frequency
    dt = waveform_set.dt
    fine_step = dt / OVERSAMPLE

    coarse_idx = np.arange(int(np.ceil(v_lo / dt)), int(np.floor(v_hi / dt)) + 1)
    if coarse_idx.size < 3:
        raise InvalidParameter("window shorter than three samples")
    coarse_lags = coarse_idx * dt

    mu = np.empty(n_rx * m)
    for l in range(n_rx):
        for k in range(m):
            # coarse: envelope peak on the sample grid
            env = np.abs(table.complex_at(l, k, coarse_lags))
            peak = int(np.argmax(env))
            if peak == 0 or peak == coarse_idx.size - 1:
                raise PeakNotFound(
                    f"envelope maximum for path (rx={l}, tx={k}) sits on the "
                    "window boundary"
                )
            v0 = coarse_lags[peak]
            # fine: carrier-rotated objective on +-1 sample at 16x density
            offsets = np.arange(-OVERSAMPLE, OVERSAMPLE + 1) * fine_step
            vs = np.clip(v0 + offsets, v_lo, v_hi)
            obj = np.real(
                np.exp(2j * np.pi * f_c * vs) * table.complex_at(l, k, vs)
            )
            j = int(np.clip(np.argmax(obj), 1, vs.size - 2))
            y0, y1, y2 = obj[j - 1], obj[j], obj[j + 1]
            denom = y0 - 2.0 * y1 + y2
            shift = 0.0 if denom == 0.0 else 0.5 * (y0 - y2) / denom
            mu[l * m + k] = vs[j] + np.clip(shift, -1.0, 1.0) * fine_step
    return mu


def mle_grid_search(
    received,
    waveform_set,
    layout,
    region,
    coarse_step,
    fine_step,
    c=SPEED_OF_LIGHT,
):
    """Two-stage grid maximization of the compressed likelihood.

    Coarse stage: envelope statistic sum_i |corr_i(tau_i(x, y))|^2 on a
    coarse lattice over ``region`` (x_min, x_max, y_min, y_max).  Fine stage:
    carrier-phase statistic |sum_i exp(j 2 pi f_c tau_i) corr_i(tau_i)|^2 on
    a fine lattice around the coarse peak (the target-amplitude estimate is
    substituted analytically, leaving this single coherent statistic).

    Raises BoundaryMaximum when the optimum sits on the region edge.
    """
    c = validate_speed(c)
    x_min, x_max, y_min, y_max = (float(v) for v in region)
    if not (x_min < x_max and y_min < y_max):
        raise InvalidParameter("region must have positive extent")
    if not 0 < fine_step < coarse_step:
        raise InvalidParameter("need 0 < fine_step < coarse_step")
    lambda_c = c / waveform_set.carrier_frequency
    if fine_step > lambda_c / 2.0:
        warnings.warn(
            f"fine_step {fine_step} exceeds half the carrier wavelength "
            f"{lambda_c / 2:.3g}; the carrier-phase statistic may alias to a "
            "sidelobe",
            stacklevel=2,
        )
    table = _CorrelationTable(received, waveform_set)
    m = waveform_set.m
    n_rx = np.atleast_2d(received).shape[0]
    f_c = waveform_set.carrier_frequency

    def grid_stat(xs, ys, coherent):
        px, py = np.meshgrid(xs, ys)
        px, py = px.ravel(), py.ravel()
        d_tx = np.hypot(
            px[None, :] - layout.tx_positions[:, 0:1],
            py[None, :] - layout.tx_positions[:, 1:2],
        )
        d_rx = np.hypot(
            px[None, :] - layout.rx_positions[:, 0:1],
            py[None, :] - layout.rx_positions[:, 1:2],
        )
        acc = np.zeros(px.size, dtype=complex if coherent else float)
        for l in range(n_rx):
            for k in range(m):
                tau = (d_tx[k] + d_rx[l]) / c
                corr = table.complex_at(l, k, tau)
                if coherent:
                    acc += np.exp(2j * np.pi * f_c * tau) * corr
                else:
                    acc += np.abs(corr) ** 2
        stat = np.abs(acc) ** 2 if coherent else acc
        return stat.reshape(ys.size, xs.size)

    xs = np.arange(x_min, x_max + coarse_step / 2, coarse_step)
    ys = np.arange(y_min, y_max + coarse_step / 2, coarse_step)
    stats = grid_stat(xs, ys, coherent=False)
    iy, ix = np.unravel_index(np.argmax(stats), stats.shape)
    if ix in (0, xs.size - 1) or iy in (0, ys.size - 1):
        raise BoundaryMaximum("coarse maximum on the region edge")
    x0, y0 = xs[ix], ys[iy]

    fx = np.arange(x0 - coarse_step, x0 + coarse_step + fine_step / 2, fine_step)
    fy = np.arange(y0 - coarse_step, y0 + coarse_step + fine_step / 2, fine_step)
    fx = fx[(fx >= x_min) & (fx <= x_max)]
    fy = fy[(fy >= y_min) & (fy <= y_max)]
    fine = grid_stat(fx, fy, coherent=True)
    jy, jx = np.unravel_index(np.argmax(fine), fine.shape)
    x_hat, y_hat = float(fx[jx]), float(fy[jy])
    if np.isclose(x_hat, x_min) or np.isclose(x_hat, x_max) or np.isclose(
        y_hat, y_min
    ) or np.isclose(y_hat, y_max):
        raise BoundaryMaximum("fine maximum on the region edge")
    return x_hat, y_hat


@dataclass(frozen=True)
class MonteCarloReport:
    """Empirical vs. theoretical localization error over repeated trials."""

    mode: str
    trials: int
    completed: int
    failures: int
    empirical_mse: float
    theoretical_trace: float
    ratio: float
    mean_error: np.ndarray
    delay_error_variance: float = None
    delay_error_expected: float = None


def _observation_vector(mu, expansion_delays):
    return expansion_delays - mu


def monte_carlo(
    layout,
    target,
    trials,
    seed,
    mode="analytic",
    *,
    snr_t_db=0.0,
    zeta=1.0 + 0.0j,
    c=SPEED_OF_LIGHT,
    carrier_frequency=None,
    waveform_set=None,
    expansion_point=None,
    delay_window=None,
    threads=1,
):
    """Monte Carlo validation of the linear estimator against its covariance.

    analytic mode draws delay observations mu = tau + eps with eps i.i.d.
    Gaussian at the analytic small-error variance; full-signal mode
    synthesizes waveform-level receptions, extracts delays with the matched
    filter, and feeds those.  Both then run the linear solve about
    ``expansion_point`` (default: the true target, which is the covariance
    validation setting) and compare the empirical position MSE with the
    theoretical trace.

    Per-trial randomness comes from child seeds spawned deterministically
    from ``seed``; results are identical for any thread count.
    """
    if trials < 100:
        raise InvalidParameter("need at least 100 trials")
    if mode not in ("analytic", "full-signal"):
        raise InvalidParameter(f"unknown mode {mode!r}")
    c = validate_speed(c)
    target = np.asarray(target, dtype=float).reshape(2)
    expansion = (
        target if expansion_point is None else np.asarray(expansion_point, float)
    )
    sigma_w_sq = 10.0 ** (-snr_t_db / 10.0)
    zeta = complex(zeta)

    if mode == "full-signal" and waveform_set is None:
        raise InvalidParameter("full-signal mode needs a waveform set")
    if waveform_set is not None:
        f_c = waveform_set.carrier_frequency
    elif carrier_frequency is not None:
        f_c = float(carrier_frequency)
    else:
        raise InvalidParameter("need a waveform set or an explicit carrier frequency")

    # built directly so sigma_w_sq = 0 (noise-free runs) stays legal
    err = DelayErrorModel(
        variance=sigma_w_sq / (8.0 * np.pi**2 * f_c**2 * abs(zeta) ** 2)
    )
    bearings = bearing_angles(layout, expansion)
    expansion_delays = path_delays(layout, expansion, c)
    true_delays = path_delays(layout, target, c)
    theory = blue_covariance(bearings, err, c)
    theoretical_trace = theory.sigma_x_sq + theory.sigma_y_sq

    if mode == "full-signal" and delay_window is None:
        pad = 20.0 * waveform_set.dt
        delay_window = (
            max(0.0, true_delays.min() - pad),
            min(waveform_set.duration * 0.999, true_delays.max() + pad),
        )

    child_seeds = np.random.SeedSequence(seed).spawn(trials)
    mn = layout.mn
    errors = np.full((trials, 2), np.nan)
    delay_errors = np.full((trials, mn), np.nan)

    def run_trial(t):
        rng = np.random.default_rng(child_seeds[t])
        try:
            if mode == "analytic":
                mu = true_delays + err.sigma * rng.standard_normal(mn)
            else:
                received = synthesize_received(
                    layout,
                    target,
                    waveform_set,
                    zeta,
                    sigma_w_sq,
                    c,
                    seed=child_seeds[t],
                )
                mu = matched_filter_delays(received, waveform_set, delay_window)
            result = blue_estimate(
                _observation_vector(mu, expansion_delays), bearings, err, c
            )
            fix = expansion + np.array([result.x_hat, result.y_hat])
            errors[t] = fix - target
            delay_errors[t] = mu - true_delays
        except MimolocError:
            pass  # counted as a failed trial

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run_trial, range(trials)))
    else:
        for t in range(trials):
            run_trial(t)

    done = ~np.isnan(errors[:, 0])
    completed = int(np.sum(done))
    if completed == 0:
        raise MimolocError("every trial failed")
    empirical_mse = float(np.mean(np.sum(errors[done] ** 2, axis=1)))
    if theoretical_trace > 0:
        ratio = empirical_mse / theoretical_trace
    else:
        ratio = 0.0 if empirical_mse == 0.0 else float("inf")
    report = {
        "mode": mode,
        "trials": trials,
        "completed": completed,
        "failures": trials - completed,
        "empirical_mse": empirical_mse,
        "theoretical_trace": theoretical_trace,
        "ratio": ratio,
        "mean_error": errors[done].mean(axis=0),
    }
    if mode == "full-signal":
        # variance about the per-path mean: a common bias (shared amplitude
        # phase) is absorbed by the offset column and must not count
        per_path = delay_errors[done]
        report["delay_error_variance"] = float(
            np.mean(np.var(per_path, axis=0))
        )
        report["delay_error_expected"] = err.variance
    return MonteCarloReport(**report)
