"""Command-line surface: scenario configs in, reports and rasters out.

Subcommands: ``crlb``, ``gdop``, ``optimize``, ``blue``, ``simulate``.  Every
subcommand takes ``--config`` (JSON scenario file, schema below) and
``--json`` for machine-readable output.  Verbosity is controlled by the
``MIMOLOC_LOG`` environment variable (DEBUG/INFO/WARNING/ERROR).

Config schema (all positions meters, angles radians, SNR in dB):

    {
      "layout": {"tx": [[x, y], ...], "rx": [[x, y], ...]},   required
      "target": [x, y],                    required by crlb/blue/simulate
      "region": {"x_min": .., "x_max": .., "y_min": .., "y_max": ..,
                 "nx": .., "ny": ..},      required by gdop
      "carrier_frequency": 1e9,            required
      "snr_t_db": 0.0,                     default 0 (sigma_w^2 = 10^(-snr/10))
      "zeta": {"magnitude": 1.0, "phase": 0.0},               default
      "alpha": [[re, im], ...],            default: 1 per path
      "bandwidths": {"beta_k": [...]},     default: carrier_frequency/100 each
      "waveforms": {"sample_rate": .., "duration": ..,
                    "band_width": .., "spacing": .., "first_center": ..,
                    "rolloff": 0.25},      required by simulate full-signal
      "c": 299792458.0,                    default
      "seed": 0,                           default
      "expansion_point": [x, y],           default: target
      "simulate_tolerance": {"analytic": [0.95, 1.05],
                             "full-signal": [0.8, 1.3]}       default
    }

Exit codes: 0 success, 1 simulation outside its tolerance band, 2 usage or
config error, 3 I/O error, 4 numerical degeneracy.
"""

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from mimoloc import __version__, _kernels
from mimoloc.crlb import (
    CoherentChannel,
    NoncoherentChannel,
    crlb_coherent,
    crlb_noncoherent,
    eta_coherent,
)
from mimoloc.errors import (
    ConfigError,
    DegenerateGeometry,
    DegenerateOptimum,
    MimolocError,
    RankDeficient,
    SingularFim,
    SingularGeometry,
)
from mimoloc.estimators import blue_covariance, delay_error_covariance, monte_carlo
from mimoloc.gdop import gdop_at, gdop_grid
from mimoloc.geometry import SPEED_OF_LIGHT, SensorLayout, bearing_angles
from mimoloc.placement import (
    optimal_trace,
    optimality_residuals,
    optimize_placement,
    simo_trace,
)
from mimoloc.waveforms import (
    BandwidthSummary,
    bandwidth_summary,
    disjoint_band_waveforms,
)

log = logging.getLogger("mimoloc")

EXIT_OK = 0
EXIT_OUT_OF_TOLERANCE = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DEGENERATE = 4

_DEGENERATE_ERRORS = (
    SingularGeometry,
    SingularFim,
    RankDeficient,
    DegenerateGeometry,
    DegenerateOptimum,
)


@dataclass
class ScenarioConfig:
    """Validated scenario: layout, physics and simulation parameters."""

    layout: SensorLayout
    target: np.ndarray = None
    region: dict = None
    carrier_frequency: float = None
    snr_t_db: float = 0.0
    zeta: complex = 1.0 + 0.0j
    alpha: np.ndarray = None
    beta_k: np.ndarray = None
    waveforms: dict = None
    c: float = SPEED_OF_LIGHT
    seed: int = 0
    expansion_point: np.ndarray = None
    simulate_tolerance: dict = field(
        default_factory=lambda: {"analytic": (0.95, 1.05), "full-signal": (0.8, 1.3)}
    )
    digest: str = ""

    @property
    def sigma_w_sq(self):
        return 10.0 ** (-self.snr_t_db / 10.0)


def _require(raw, key, kind, where="config"):
    if key not in raw:
        raise ConfigError(f"{where}: missing required field '{key}'")
    value = raw[key]
    if kind is not None and not isinstance(value, kind):
        raise ConfigError(
            f"{where}.{key}: expected {getattr(kind, '__name__', kind)}, "
            f"got {type(value).__name__}"
        )
    return value


def _point(value, where):
    try:
        p = np.asarray(value, dtype=float).reshape(2)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: expected [x, y], got {value!r}") from exc
    if not np.all(np.isfinite(p)):
        raise ConfigError(f"{where}: coordinates must be finite")
    return p


def load_config(path):
    """Parse and validate a scenario JSON file."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")

    layout_raw = _require(raw, "layout", dict)
    tx = _require(layout_raw, "tx", list, "layout")
    rx = _require(layout_raw, "rx", list, "layout")
    try:
        layout = SensorLayout(np.asarray(tx, float), np.asarray(rx, float))
    except (MimolocError, ValueError) as exc:
        raise ConfigError(f"layout: {exc}") from exc

    cfg = ScenarioConfig(layout=layout)
    if "target" in raw:
        cfg.target = _point(raw["target"], "target")
    if "region" in raw:
        region = raw["region"]
        for key in ("x_min", "x_max", "y_min", "y_max", "nx", "ny"):
            _require(region, key, (int, float), "region")
        if not (region["x_min"] < region["x_max"] and region["y_min"] < region["y_max"]):
            raise ConfigError("region: must have positive width and height")
        if int(region["nx"]) < 2 or int(region["ny"]) < 2:
            raise ConfigError("region: nx and ny must be >= 2")
        cfg.region = region
    cfg.carrier_frequency = float(_require(raw, "carrier_frequency", (int, float)))
    if cfg.carrier_frequency <= 0:
        raise ConfigError("carrier_frequency: must be positive")
    cfg.snr_t_db = float(raw.get("snr_t_db", 0.0))
    if "zeta" in raw:
        z = raw["zeta"]
        if not isinstance(z, dict) or "magnitude" not in z:
            raise ConfigError("zeta: expected {'magnitude': .., 'phase': ..}")
        mag = float(z["magnitude"])
        if mag <= 0:
            raise ConfigError("zeta.magnitude: must be positive")
        cfg.zeta = mag * np.exp(1j * float(z.get("phase", 0.0)))
    if raw.get("alpha") is not None:
        try:
            pairs = np.asarray(raw["alpha"], dtype=float)
            cfg.alpha = pairs[:, 0] + 1j * pairs[:, 1]
        except (IndexError, TypeError, ValueError) as exc:
            raise ConfigError(f"alpha: expected [[re, im], ...]: {exc}") from exc
        if cfg.alpha.size != layout.mn:
            raise ConfigError(
                f"alpha: expected {layout.mn} entries, got {cfg.alpha.size}"
            )
    else:
        cfg.alpha = np.ones(layout.mn, dtype=complex)
    if "bandwidths" in raw:
        beta_k = _require(raw["bandwidths"], "beta_k", list, "bandwidths")
        cfg.beta_k = np.asarray(beta_k, dtype=float)
        if cfg.beta_k.size != layout.m:
            raise ConfigError(
                f"bandwidths.beta_k: expected {layout.m} entries, got {cfg.beta_k.size}"
            )
    else:
        cfg.beta_k = np.full(layout.m, cfg.carrier_frequency / 100.0)
    if "waveforms" in raw:
        wf = raw["waveforms"]
        for key in ("sample_rate", "duration"):
            _require(wf, key, (int, float), "waveforms")
        cfg.waveforms = wf
    cfg.c = float(raw.get("c", SPEED_OF_LIGHT))
    if cfg.c <= 0:
        raise ConfigError("c: must be positive")
    cfg.seed = int(raw.get("seed", 0))
    if "expansion_point" in raw:
        cfg.expansion_point = _point(raw["expansion_point"], "expansion_point")
    if "simulate_tolerance" in raw:
        tol = raw["simulate_tolerance"]
        if not isinstance(tol, dict):
            raise ConfigError("simulate_tolerance: expected an object")
        merged = dict(cfg.simulate_tolerance)
        for key, band in tol.items():
            if key not in merged or len(band) != 2:
                raise ConfigError(f"simulate_tolerance.{key}: expected [lo, hi]")
            merged[key] = (float(band[0]), float(band[1]))
        cfg.simulate_tolerance = merged

    cfg.digest = hashlib.sha256(
        json.dumps(raw, sort_keys=True).encode()
    ).hexdigest()[:16]
    return cfg


def _build_waveform_set(cfg):
    wf = cfg.waveforms
    if wf is None:
        raise ConfigError("this command needs a 'waveforms' section in the config")
    return disjoint_band_waveforms(
        cfg.layout.m,
        float(wf["sample_rate"]),
        float(wf["duration"]),
        cfg.carrier_frequency,
        band_width=wf.get("band_width"),
        spacing=wf.get("spacing"),
        first_center=wf.get("first_center"),
        rolloff=float(wf.get("rolloff", 0.25)),
    )


def _bands(cfg):
    if cfg.waveforms is not None:
        return bandwidth_summary(_build_waveform_set(cfg))
    return BandwidthSummary.from_betas(cfg.beta_k, cfg.carrier_frequency)


def _report_header(cfg):
    return {
        "version": __version__,
        "config_digest": cfg.digest,
        "backend": _kernels.active_backend(),
    }


def _emit(report, as_json):
    if as_json:
        print(json.dumps(report, sort_keys=True, default=_json_default))
    else:
        for key, value in report.items():
            if isinstance(value, dict):
                print(f"{key}:")
                for k2, v2 in value.items():
                    print(f"  {k2}: {_fmt(v2)}")
            else:
                print(f"{key}: {_fmt(value)}")


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.9g}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    return str(value)


def _json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    raise TypeError(f"not JSON serializable: {type(value)}")


def _crlb_section(result):
    return {
        "eta": result.eta,
        "g_x": result.g_x,
        "g_y": result.g_y,
        "h": result.h,
        "sigma_x_sq": result.sigma_x_sq,
        "sigma_y_sq": result.sigma_y_sq,
        "trace": result.trace,
    }


def run_crlb(cfg, mode, as_json):
    if cfg.target is None:
        raise ConfigError("crlb needs a 'target' in the config")
    bearings = bearing_angles(cfg.layout, cfg.target)
    bands = _bands(cfg)
    report = dict(_report_header(cfg))
    report["mode"] = mode
    if mode in ("noncoherent", "both"):
        channel = NoncoherentChannel(alpha=cfg.alpha, sigma_w_sq=cfg.sigma_w_sq)
        report["noncoherent"] = _crlb_section(
            crlb_noncoherent(bearings, channel, bands, cfg.c)
        )
    if mode in ("coherent", "both"):
        channel = CoherentChannel(
            zeta=cfg.zeta, sigma_w_sq=cfg.sigma_w_sq, f_c=cfg.carrier_frequency
        )
        report["coherent"] = _crlb_section(
            crlb_coherent(bearings, channel, bands, cfg.c)
        )
    if mode == "both":
        # gain from the eta ratio: equals fc*|zeta|/beta whatever the geometry
        report["coherency_gain"] = float(
            np.sqrt(report["noncoherent"]["eta"] / report["coherent"]["eta"])
        )
        report["trace_ratio_sqrt"] = float(
            np.sqrt(report["noncoherent"]["trace"] / report["coherent"]["trace"])
        )
        report["fc_over_beta"] = cfg.carrier_frequency / bands.beta
    _emit(report, as_json)
    return EXIT_OK


def run_gdop(cfg, out_path, as_json):
    if cfg.region is None:
        raise ConfigError("gdop needs a 'region' in the config")
    region = cfg.region
    grid = gdop_grid(
        cfg.layout,
        (region["x_min"], region["x_max"], region["y_min"], region["y_max"]),
        int(region["nx"]),
        int(region["ny"]),
    )
    best, bx, by = grid.finite_min()
    if out_path:
        try:
            with open(out_path, "w", encoding="utf-8") as fh:
                fh.write("x,y,gdop\n")
                xs = grid.x_centers()
                ys = grid.y_centers()
                for iy in range(grid.ny):
                    for ix in range(grid.nx):
                        v = grid.values[iy, ix]
                        cell = f"{v:.9g}" if np.isfinite(v) else ""
                        fh.write(f"{xs[ix]:.9g},{ys[iy]:.9g},{cell}\n")
        except OSError as exc:
            log.error("cannot write raster: %s", exc)
            return EXIT_IO
    report = dict(_report_header(cfg))
    report.update(
        {
            "nx": grid.nx,
            "ny": grid.ny,
            "min_gdop": best,
            "min_cell": [bx, by],
            "degenerate_cells": int(np.sum(~np.isfinite(grid.values))),
            "out": out_path or "",
        }
    )
    _emit(report, as_json)
    return EXIT_OK


def run_optimize(cfg, restarts, seed, as_json):
    m, n = cfg.layout.m, cfg.layout.n
    eta = eta_coherent(
        cfg.sigma_w_sq, cfg.carrier_frequency, abs(cfg.zeta), cfg.c
    )
    constellation, trace = optimize_placement(m, n, eta, restarts, seed)
    opt = optimality_residuals(constellation, eta)
    bound = optimal_trace(m, n, eta)
    report = dict(_report_header(cfg))
    report.update(
        {
            "m": m,
            "n": n,
            "restarts": restarts,
            "seed": seed,
            "tx_angles": constellation.tx_angles.tolist(),
            "rx_angles": constellation.rx_angles.tolist(),
            "trace": trace,
            "optimal_trace": bound,
            "trace_over_bound": trace / bound,
            "simo_trace": simo_trace(m * n, eta),
            "residuals": {k: float(v) for k, v in opt.residuals.items()},
            "status": opt.status,
        }
    )
    _emit(report, as_json)
    return EXIT_OK


def run_blue(cfg, as_json):
    if cfg.target is None:
        raise ConfigError("blue needs a 'target' in the config")
    point = cfg.expansion_point if cfg.expansion_point is not None else cfg.target
    bearings = bearing_angles(cfg.layout, point)
    err = delay_error_covariance(
        cfg.carrier_frequency, abs(cfg.zeta) ** 2, cfg.sigma_w_sq
    )
    cov = blue_covariance(bearings, err, cfg.c)
    bands = _bands(cfg)
    channel = CoherentChannel(
        zeta=cfg.zeta, sigma_w_sq=cfg.sigma_w_sq, f_c=cfg.carrier_frequency
    )
    crlb = crlb_coherent(bearings, channel, bands, cfg.c, narrowband=True)
    report = dict(_report_header(cfg))
    report.update(
        {
            "expansion_point": point.tolist(),
            "sigma_x_sq": cov.sigma_x_sq,
            "sigma_y_sq": cov.sigma_y_sq,
            "trace": cov.sigma_x_sq + cov.sigma_y_sq,
            "g1": cov.g1,
            "g2": cov.g2,
            "h": cov.h,
            "crlb_trace": crlb.trace,
            "gdop": gdop_at(cfg.layout, point),
            "delay_sigma": err.sigma,
        }
    )
    _emit(report, as_json)
    return EXIT_OK


def run_simulate(cfg, mode, trials, seed, threads, as_json):
    if cfg.target is None:
        raise ConfigError("simulate needs a 'target' in the config")
    waveform_set = None
    if mode == "full-signal" or cfg.waveforms is not None:
        waveform_set = _build_waveform_set(cfg)
    result = monte_carlo(
        cfg.layout,
        cfg.target,
        trials,
        seed,
        mode,
        snr_t_db=cfg.snr_t_db,
        zeta=cfg.zeta,
        c=cfg.c,
        carrier_frequency=cfg.carrier_frequency,
        waveform_set=waveform_set,
        expansion_point=cfg.expansion_point,
        threads=threads,
    )
    lo, hi = cfg.simulate_tolerance[mode]
    report = dict(_report_header(cfg))
    report.update(
        {
            "mode": mode,
            "trials": result.trials,
            "completed": result.completed,
            "failures": result.failures,
            "empirical_mse": result.empirical_mse,
            "theoretical_trace": result.theoretical_trace,
            "ratio": result.ratio,
            "tolerance_band": [lo, hi],
            "within_tolerance": bool(lo <= result.ratio <= hi),
        }
    )
    if result.delay_error_variance is not None:
        report["delay_error_variance"] = result.delay_error_variance
        report["delay_error_expected"] = result.delay_error_expected
    _emit(report, as_json)
    return EXIT_OK if report["within_tolerance"] else EXIT_OUT_OF_TOLERANCE


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mimoloc",
        description="Localization bounds, GDOP maps, placement optimization "
        "and Monte Carlo validation for distributed MIMO radar",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="scenario JSON file")
        p.add_argument("--json", action="store_true", help="machine-readable output")

    p_crlb = sub.add_parser("crlb", help="closed-form localization bounds")
    add_common(p_crlb)
    p_crlb.add_argument(
        "--mode",
        choices=["coherent", "noncoherent", "both"],
        default="both",
    )

    p_gdop = sub.add_parser("gdop", help="GDOP raster over a region")
    add_common(p_gdop)
    p_gdop.add_argument("--out", help="CSV raster output path")

    p_opt = sub.add_parser("optimize", help="search for optimal sensor bearings")
    add_common(p_opt)
    p_opt.add_argument("--restarts", type=int, default=20)
    p_opt.add_argument("--seed", type=int, default=None)

    p_blue = sub.add_parser("blue", help="linear-estimator covariance at the target")
    add_common(p_blue)

    p_sim = sub.add_parser("simulate", help="Monte Carlo estimator validation")
    add_common(p_sim)
    p_sim.add_argument(
        "--mode", choices=["analytic", "full-signal"], default="analytic"
    )
    p_sim.add_argument("--trials", type=int, default=1000)
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--threads", type=int, default=1)
    return parser


def main(argv=None):
    level = os.environ.get("MIMOLOC_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE

    try:
        cfg = load_config(args.config)
        seed = getattr(args, "seed", None)
        if seed is None:
            seed = cfg.seed
        if args.command == "crlb":
            return run_crlb(cfg, args.mode, args.json)
        if args.command == "gdop":
            return run_gdop(cfg, args.out, args.json)
        if args.command == "optimize":
            return run_optimize(cfg, args.restarts, seed, args.json)
        if args.command == "blue":
            return run_blue(cfg, args.json)
        if args.command == "simulate":
            return run_simulate(
                cfg, args.mode, args.trials, seed, args.threads, args.json
            )
        parser.error(f"unknown command {args.command}")
    except ConfigError as exc:
        log.error("config error: %s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _DEGENERATE_ERRORS as exc:
        print(f"error: numerical degeneracy: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except MimolocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
