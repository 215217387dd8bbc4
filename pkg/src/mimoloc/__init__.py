"""Localization accuracy analysis for widely distributed MIMO radar.

Closed-form and numeric lower bounds on target-localization covariance
(with and without phase synchronization), GDOP mapping over a region,
sensor-placement optimization, a closed-form linear localizer, and a
waveform-level Monte Carlo harness that validates the bounds.
"""

__version__ = "0.1.0"

from mimoloc._kernels import active_backend
from mimoloc.crlb import (
    CoherentChannel,
    CrlbResult,
    FimMatrix,
    NoncoherentChannel,
    crlb_coherent,
    crlb_from_fim,
    crlb_noncoherent,
    eta_coherent,
    eta_noncoherent,
    fim_numeric_coherent,
    fim_numeric_noncoherent,
)
from mimoloc.estimators import (
    BlueResult,
    DelayErrorModel,
    MonteCarloReport,
    blue_covariance,
    blue_estimate,
    delay_error_covariance,
    matched_filter_delays,
    mle_grid_search,
    monte_carlo,
)
from mimoloc.gdop import GdopGrid, gdop_at, gdop_grid, localization_error_from_gdop
from mimoloc.geometry import (
    SPEED_OF_LIGHT,
    BearingSet,
    SensorLayout,
    bearing_angles,
    d_matrix,
    h_matrix,
    path_delays,
    propagation_delay,
    unit_circle_layout,
)
from mimoloc.placement import (
    AngleConstellation,
    OptimalityReport,
    optimal_trace,
    optimality_residuals,
    optimize_placement,
    simo_trace,
    solve_kkt,
    symmetric_constellation,
    t_moments,
)
from mimoloc.waveforms import (
    BandwidthSummary,
    CorrelationKernel,
    CorrelationMatrix,
    WaveformSet,
    bandwidth_summary,
    correlation_matrix,
    disjoint_band_waveforms,
    effective_bandwidth,
    orthogonality_check,
    synthesize_received,
)
