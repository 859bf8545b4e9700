"""Command-line harness: JSON configs in, CSV/JSON artifacts out.

Subcommands: train, refine, track, sweep, codebook, report.  Exit codes:
0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .arrays import (ArrayConfig, ChannelScenario, sample_channel,
                     snr_db_to_noise_power)
from .codebooks import validate_quantization
from .harness.experiments import (ExperimentSpec, gain_vs_distance, gain_vs_snr,
                                  overhead_report, positioning_cdf,
                                  refinement_grid, tracking_experiment, workspace)
from .harness.io import (ConfigError, fail, load_config, require_keys, write_csv,
                         write_manifest)
from .harness.svgplot import svg_line_plot
from .refinement import run_brpss
from .tracking import TrackerConfig, TrackingScenario, Trajectory
from .training import run_thbt


def parse_array(node: dict) -> ArrayConfig:
    try:
        return ArrayConfig(n_antennas=int(node["n_antennas"]),
                           n_rf=int(node["n_rf"]),
                           wavelength=float(node["wavelength"]))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad array description: {exc}") from exc


def parse_paths(node: dict) -> ChannelScenario:
    try:
        return ChannelScenario(
            n_paths=int(node["count"]),
            gain_vars=tuple(float(v) for v in node["gain_vars"]),
            angle_range=tuple(float(v) for v in node["angle_range"]),
            range_range=tuple(float(v) for v in node["range_range"]),
        )
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad paths description: {exc}") from exc


SCENARIO_KEYS = ["scenario.n_antennas", "scenario.n_rf", "scenario.wavelength",
                 "scenario.paths.count", "scenario.paths.gain_vars",
                 "scenario.paths.angle_range", "scenario.paths.range_range",
                 "scenario.snr_db"]


def scenario_of(config: dict) -> tuple[ArrayConfig, ChannelScenario, float, int]:
    require_keys(config, SCENARIO_KEYS)
    node = config["scenario"]
    cfg = parse_array(node)
    scen = parse_paths(node["paths"])
    seed = int(node.get("seed", config.get("seed", 0)))
    return cfg, scen, float(node["snr_db"]), seed


def codebook_of(config: dict) -> tuple[int, int]:
    require_keys(config, ["codebook.q", "codebook.s"])
    return int(config["codebook"]["q"]), int(config["codebook"]["s"])


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(config: dict, args) -> int:
    cfg, scen, snr_db, seed = scenario_of(config)
    q, s = codebook_of(config)
    if args.seed is not None:
        seed = args.seed
    book, sub_book, design = workspace(cfg, q, s)
    rng = np.random.default_rng(seed)
    channel = sample_channel(cfg, rng, scen)
    noise = snr_db_to_noise_power(snr_db, cfg)
    res = run_thbt(cfg, book, design, channel, noise, rng)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    from .combining import alignment_gain, design_hybrid

    pair = design_hybrid(cfg, sub_book, res.rough_omega, res.rough_range,
                         quantize=False)
    result = {
        "best_index": res.best_index,
        "rough_omega": res.rough_omega,
        "rough_range_m": None if math.isinf(res.rough_range) else res.rough_range,
        "far_field": res.is_far,
        "gain": alignment_gain(cfg, channel.paths, pair.combined_vector()),
        "pilots": res.pilots,
    }
    (out / "train_result.json").write_text(json.dumps(result, sort_keys=True,
                                                      indent=2) + "\n")
    outputs = ["train_result.json"]
    if args.powers:
        rows = [{"p": int(p + 1), "power": float(v)}
                for p, v in enumerate(res.powers)]
        write_csv(out / "train_powers.csv", rows, ["p", "power"])
        outputs.append("train_powers.csv")
    write_manifest(out / "manifest.json", config, seed, outputs)
    print(json.dumps(result, sort_keys=True))
    return 0


def cmd_refine(config: dict, args) -> int:
    cfg, scen, snr_db, seed = scenario_of(config)
    require_keys(config, ["coarse.omega", "coarse.range_m"])
    if args.seed is not None:
        seed = args.seed
    coarse_omega = float(config["coarse"]["omega"])
    raw_range = config["coarse"]["range_m"]
    coarse_range = math.inf if raw_range in (None, "inf") else float(raw_range)
    rng = np.random.default_rng(seed)
    channel = sample_channel(cfg, rng, scen)
    noise = snr_db_to_noise_power(snr_db, cfg)
    res = run_brpss(cfg, channel, coarse_omega, coarse_range, noise, rng)
    result = {
        "k": res.k, "b": res.b, "omega": res.omega,
        "range_m": None if math.isinf(res.range_m) else res.range_m,
        "far_field": res.is_far, "refined": res.refined, "pilots": res.pilots,
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "refine_result.json").write_text(json.dumps(result, sort_keys=True,
                                                       indent=2) + "\n")
    write_manifest(out / "manifest.json", config, seed, ["refine_result.json"])
    print(json.dumps(result, sort_keys=True))
    return 0


def tracker_config_of(config: dict, traj: Trajectory) -> TrackerConfig:
    node = config.get("tracker", {})
    cov = node.get("meas_cov")
    return TrackerConfig(
        dt=traj.dt, n_blocks=traj.n_blocks,
        accel_intensity=float(node.get("accel_intensity", 1.0)),
        meas_cov=None if cov is None else np.asarray(cov, dtype=float),
        init_cov_diag=tuple(node.get("init_cov_diag", (1.0, 1.0, 25.0, 25.0))),
        innovation_gate=node.get("innovation_gate", 13.8),
    )


def trajectory_of(config: dict) -> Trajectory:
    require_keys(config, ["trajectory.start", "trajectory.velocity",
                          "trajectory.dt", "trajectory.blocks"])
    node = config["trajectory"]
    return Trajectory(start=tuple(float(v) for v in node["start"]),
                      velocity=tuple(float(v) for v in node["velocity"]),
                      dt=float(node["dt"]), n_blocks=int(node["blocks"]))


def tracking_scenario_of(config: dict) -> TrackingScenario:
    node = config.get("tracking_channel", {})
    kwargs = {}
    if "fading" in node:
        kwargs["fading"] = bool(node["fading"])
    if "n_nlos" in node:
        kwargs["n_nlos"] = int(node["n_nlos"])
    if "nlos_gain_var" in node:
        kwargs["nlos_gain_var"] = float(node["nlos_gain_var"])
    return TrackingScenario(**kwargs)


def cmd_track(config: dict, args) -> int:
    require_keys(config, ["array.n_antennas", "array.n_rf", "array.wavelength",
                          "snr_db"])
    cfg = parse_array(config["array"])
    traj = trajectory_of(config)
    tcfg = tracker_config_of(config, traj)
    scen = tracking_scenario_of(config)
    seed = args.seed if args.seed is not None else int(config.get("seed", 0))
    noise = snr_db_to_noise_power(float(config["snr_db"]), cfg)
    if tcfg.meas_cov is None:
        from .tracking import calibrate_measurement_cov

        mid = traj.position(traj.n_blocks // 2)
        zeta = float(np.hypot(mid[0], mid[1]))
        cov = calibrate_measurement_cov(cfg, noise, zeta, float(mid[1] / zeta),
                                        scen, seed=seed ^ 0xC0FFEE)
        tcfg = TrackerConfig(dt=tcfg.dt, n_blocks=tcfg.n_blocks,
                             accel_intensity=tcfg.accel_intensity, meas_cov=cov,
                             init_cov_diag=tcfg.init_cov_diag,
                             innovation_gate=tcfg.innovation_gate)
    from .codebooks import build_subarray_codebook
    from .tracking import run_tracking

    rng = np.random.default_rng(seed)
    log = run_tracking(cfg, build_subarray_codebook(cfg), traj, tcfg, noise, rng,
                       scen)
    rows = []
    for b in log:
        rows.append({
            "t_s": b.t_s, "truth_x": float(b.truth[0]), "truth_y": float(b.truth[1]),
            "pred_x": float(b.predicted[0]), "pred_y": float(b.predicted[1]),
            "meas_x": float(b.measured[0]) if b.measured is not None else math.nan,
            "meas_y": float(b.measured[1]) if b.measured is not None else math.nan,
            "filt_x": float(b.filtered[0]), "filt_y": float(b.filtered[1]),
            "gain": b.gain, "se_bits": b.se_bits,
        })
    out = Path(args.out)
    write_csv(out / "track_blocks.csv", rows,
              ["t_s", "truth_x", "truth_y", "pred_x", "pred_y", "meas_x",
               "meas_y", "filt_x", "filt_y", "gain", "se_bits"])
    write_manifest(out / "manifest.json", config, seed, ["track_blocks.csv"])
    print(f"tracked {len(rows)} blocks -> {out / 'track_blocks.csv'}")
    return 0


EXPERIMENTS = {
    "gain_vs_snr": gain_vs_snr,
    "gain_vs_distance": gain_vs_distance,
    "positioning_cdf": positioning_cdf,
    "refinement_grid": refinement_grid,
    "tracking": tracking_experiment,
}

CSV_COLUMNS = {
    "gain_vs_snr": ["experiment", "scheme", "snr_db", "mean_gain", "std_gain",
                    "trials", "pilots"],
    "gain_vs_distance": ["experiment", "scheme", "r_max_m", "snr_db", "mean_gain",
                         "std_gain", "trials", "pilots"],
    "positioning_cdf": ["experiment", "scheme", "snr_db", "quantile", "error_m",
                        "trials"],
    "refinement_grid": ["experiment", "param", "value", "q", "s", "snr_db",
                        "median_error_m", "p90_error_m", "density_ok", "trials"],
    "tracking": ["experiment", "scheme", "snr_db", "t_s", "mean_gain",
                 "mean_se_bits", "seeds", "pilots_per_block"],
}


def experiment_spec_of(config: dict, args) -> tuple[str, ExperimentSpec, dict]:
    require_keys(config, ["experiment", "array.n_antennas", "array.n_rf",
                          "array.wavelength", "codebook.q", "codebook.s"])
    kind = config["experiment"]
    if kind not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment: {kind} "
                          f"(choose from {sorted(EXPERIMENTS)})")
    cfg = parse_array(config["array"])
    q, s = codebook_of(config)
    seed = args.seed if args.seed is not None else int(config.get("seed", 0))
    trials = args.trials if args.trials is not None else int(config.get("trials", 200))
    schemes = tuple(config.get("schemes", ["thbt", "thbt_brpss", "hfbs", "ffbs"]))
    scen = parse_paths(config["paths"]) if "paths" in config else ChannelScenario()
    snr_grid = tuple(float(v) for v in config.get("snr_grid_db", [10.0]))
    extras = {}
    kwargs = dict(cfg=cfg, n_angles=q, n_rings=s, schemes=schemes, trials=trials,
                  seed=seed, workers=args.threads, snr_grid_db=snr_grid,
                  scenario=scen)
    if "r_max_grid" in config:
        kwargs["r_max_grid"] = tuple(float(v) for v in config["r_max_grid"])
    if kind == "tracking":
        traj = trajectory_of(config)
        kwargs["trajectory"] = traj
        kwargs["tracker"] = tracker_config_of(config, traj)
        kwargs["tracking_scenario"] = tracking_scenario_of(config)
    if kind == "refinement_grid":
        extras["q_grid"] = tuple(int(v) for v in config.get("q_grid", []))
        extras["s_grid"] = tuple(int(v) for v in config.get("s_grid", []))
        if "fixed_q" in config:
            extras["fixed_q"] = int(config["fixed_q"])
        if "fixed_s" in config:
            extras["fixed_s"] = int(config["fixed_s"])
    return kind, ExperimentSpec(**kwargs), extras


def cmd_sweep(config: dict, args) -> int:
    kind, spec, extras = experiment_spec_of(config, args)
    rows = EXPERIMENTS[kind](spec, **extras)
    out = Path(args.out)
    csv_name = f"{kind}.csv"
    write_csv(out / csv_name, rows, CSV_COLUMNS[kind])
    outputs = [csv_name]
    if args.svg:
        svg_name = f"{kind}.svg"
        _sweep_svg(kind, rows, out / svg_name)
        outputs.append(svg_name)
    write_manifest(out / "manifest.json", config, spec.seed, outputs)
    print(f"{kind}: {len(rows)} rows -> {out / csv_name}")
    return 0


def _sweep_svg(kind: str, rows: list[dict], path) -> None:
    axes = {
        "gain_vs_snr": ("snr_db", "mean_gain", "SNR (dB)", "mean gain"),
        "gain_vs_distance": ("r_max_m", "mean_gain", "max range (m)", "mean gain"),
        "positioning_cdf": ("error_m", "quantile", "error (m)", "CDF"),
        "refinement_grid": ("value", "median_error_m", "grid size",
                            "median error (m)"),
        "tracking": ("t_s", "mean_gain", "time (s)", "mean gain"),
    }
    xkey, ykey, xlabel, ylabel = axes[kind]
    series = {}
    for row in rows:
        if kind == "tracking" and row["experiment"] != "tracking_gain_vs_time":
            continue
        label = str(row.get("scheme", row.get("param", "series")))
        xs, ys = series.setdefault(label, ([], []))
        x, y = row[xkey], row[ykey]
        if isinstance(x, (int, float)) and math.isfinite(float(x)):
            xs.append(float(x))
            ys.append(float(y) if math.isfinite(float(y)) else math.nan)
    svg_line_plot(path, series, title=kind, xlabel=xlabel, ylabel=ylabel)


def cmd_codebook(config: dict, args) -> int:
    require_keys(config, ["array.n_antennas", "array.n_rf", "array.wavelength",
                          "codebook.q", "codebook.s"])
    cfg = parse_array(config["array"])
    q, s = codebook_of(config)
    book, _, _ = workspace(cfg, q, s)
    report = validate_quantization(cfg, q, s)
    meta = {
        "n_antennas": cfg.n_antennas, "n_rf": cfg.n_rf,
        "wavelength": cfg.wavelength, "q": q, "s": s,
        "columns": book.n_columns, "near_columns": q * s, "far_columns": q,
        "range_floor_m": cfg.range_floor,
        "below_floor_columns": int(book.below_floor.sum()),
        "density_ok": bool(report.ok), "s_min": report.s_min,
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "codebook_meta.json").write_text(json.dumps(meta, sort_keys=True,
                                                       indent=2) + "\n")
    outputs = ["codebook_meta.json"]
    if args.columns:
        rows = []
        for p in range(1, book.n_columns + 1):
            cw = book.params(p)
            rows.append({"p": p, "kind": cw.kind, "q": cw.q,
                         "s": cw.s if cw.s is not None else "",
                         "theta": cw.theta,
                         "distance_m": cw.distance if math.isfinite(cw.distance)
                         else math.inf})
        write_csv(out / "codebook_columns.csv", rows,
                  ["p", "kind", "q", "s", "theta", "distance_m"])
        outputs.append("codebook_columns.csv")
    write_manifest(out / "manifest.json", config, 0, outputs)
    print(json.dumps(meta, sort_keys=True))
    return 0


def cmd_report(config: dict, args) -> int:
    require_keys(config, ["array.n_antennas", "array.n_rf", "array.wavelength",
                          "codebook.q", "codebook.s"])
    cfg = parse_array(config["array"])
    q, s = codebook_of(config)
    seed = args.seed if args.seed is not None else int(config.get("seed", 0))
    rows = overhead_report(cfg, q, s, measure=not args.no_measure, seed=seed)
    out = Path(args.out)
    write_csv(out / "overheads.csv", rows,
              ["table", "scheme", "formula", "parameters", "pilots",
               "implemented", "measured"])
    write_manifest(out / "manifest.json", config, seed, ["overheads.csv"])
    for row in rows:
        print(f"{row['table']:9s} {row['scheme']:12s} {row['pilots']:>6} "
              f"{'' if row['implemented'] else '(not implemented)'}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xlbeam",
        description="Beam training, refinement, and tracking simulator for "
                    "very large hybrid arrays")
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--trials", type=int, default=None,
                        help="override the trial count")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for Monte Carlo trials")
    sub = parser.add_subparsers(dest="command", required=True)
    p_train = sub.add_parser("train", help="one beam-training run")
    p_train.add_argument("--powers", action="store_true",
                         help="also dump the per-codeword power profile")
    sub.add_parser("refine", help="one beam-refinement run")
    sub.add_parser("track", help="one tracking run along a trajectory")
    p_sweep = sub.add_parser("sweep", help="Monte Carlo experiment driver")
    p_sweep.add_argument("--svg", action="store_true",
                         help="emit a line plot next to the CSV")
    p_book = sub.add_parser("codebook", help="codebook metadata and geometry table")
    p_book.add_argument("--columns", action="store_true",
                        help="emit the per-column geometry CSV")
    p_report = sub.add_parser("report", help="pilot-overhead accounting table")
    p_report.add_argument("--no-measure", action="store_true",
                          help="skip runtime pilot counting")
    return parser


COMMANDS = {
    "train": cmd_train,
    "refine": cmd_refine,
    "track": cmd_track,
    "sweep": cmd_sweep,
    "codebook": cmd_codebook,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        return COMMANDS[args.command](config, args)
    except ConfigError as exc:
        return fail(str(exc), 2)
    except Exception as exc:  # runtime failures map to exit 1
        return fail(f"{type(exc).__name__}: {exc}", 1)


if __name__ == "__main__":
    sys.exit(main())
