"""Command-line workbench: table builds, optimization runs, sweeps, reports.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .budget import (PowerAllocation, ase_powers, ber_from_snr,
                     combine_with_input_snr, snrs, total_rate, write_budget_csv)
from .config import ConfigError, load_config
from .optimize import BarrierSettings, solve_flat, solve_max_rate, solve_min_max_margin
from .quadrature import QuadratureSpec
from .tables import (NliTableError, TableCacheError, build_tables, load_tables,
                     save_tables)
from .units import db_to_linear, dbm_to_watt, linear_to_db, watt_to_dbm

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def _file_hash(path):
    return hashlib.blake2b(Path(path).read_bytes(), digest_size=8).hexdigest()


def make_manifest(command, args, cfg, tables_path=None, extra=None):
    manifest = {
        "tool": "egnopt",
        "version": __version__,
        "command": command,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "config_path": str(args.config),
        "config_hash": cfg.grid_hash(),
        "seed": args.seed,
        "settings": extra or {},
    }
    if tables_path is not None:
        manifest["tables_path"] = str(tables_path)
        manifest["tables_hash"] = _file_hash(tables_path)
    return manifest


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _quad_spec(args):
    return QuadratureSpec(order_2d=args.order_2d, samples_3d=args.samples_3d,
                          samples_4d=args.samples_4d, base_seed=args.seed)


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_tables_checked(args, cfg):
    if not args.tables:
        raise ConfigError("this command requires --tables PATH")
    return load_tables(args.tables, cfg)


def cmd_tables(args):
    cfg = load_config(args.config)
    spec = _quad_spec(args)
    out_path = Path(args.tables) if args.tables else _out_dir(args) / "tables.nlit"
    progress = print if args.progress else None
    tables = build_tables(cfg, spec, corrections=args.corrections, progress=progress)
    save_tables(tables, out_path)
    manifest = make_manifest("tables", args, cfg, out_path,
                             extra={"quadrature": vars(spec) | {},
                                    "corrections": args.corrections})
    _write_json(out_path.with_suffix(".manifest.json"), _jsonable(manifest))
    print(f"wrote {out_path} ({tables.num_channels} channels, "
          f"mode={cfg.model_mode}, corrections={args.corrections})")
    return EXIT_OK


def _solve(objective, flat, tables, cfg, settings):
    if flat:
        return solve_flat(objective, tables, cfg, settings)
    if objective == "margin":
        return solve_min_max_margin(tables, cfg, settings)
    return solve_max_rate(tables, cfg, settings)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [float(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return float(obj)
    return obj


def solution_report(solution, tables, cfg, objective, settings):
    return {
        "objective": objective,
        "objective_value": solution.objective,
        "allocation_dbm": [float(watt_to_dbm(p)) for p in solution.allocation.x],
        "snr_db": [float(linear_to_db(v)) for v in solution.snr],
        "margins_db": [float(linear_to_db(v)) for v in solution.margins],
        "outer_iterations": solution.outer_iterations,
        "inner_iterations": solution.inner_iterations,
        "converged": solution.converged,
        "config_hash": cfg.grid_hash(),
        "tables_grid_hash": tables.metadata["grid_hash"],
        "model_mode": tables.metadata["model_mode"],
        "pol_factor": settings.pol_factor,
    }


def cmd_optimize(args):
    cfg = load_config(args.config)
    tables = _load_tables_checked(args, cfg)
    settings = BarrierSettings()
    solution = _solve(args.objective, args.flat, tables, cfg, settings)
    out = _out_dir(args)
    report = solution_report(solution, tables, cfg, args.objective, settings)
    report["manifest"] = _jsonable(make_manifest(
        "optimize", args, cfg, args.tables,
        extra={"objective": args.objective, "flat": args.flat}))
    _write_json(out / "solution.json", _jsonable(report))
    write_budget_csv(out / "budget.csv", solution.allocation, tables, cfg,
                     settings.pol_factor)
    print(f"objective={args.objective} value={solution.objective:.6g} "
          f"converged={solution.converged}")
    if not solution.converged:
        print("warning: optimizer did not converge", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_sweep(args):
    cfg = load_config(args.config)
    tables = _load_tables_checked(args, cfg)
    try:
        start, stop, step = (float(v) for v in args.power_range.split(":"))
    except ValueError as exc:
        raise ConfigError(f"bad --power-range {args.power_range!r}") from exc
    if step <= 0 or stop < start:
        raise ConfigError("power range must be a:b:step with b >= a, step > 0")
    powers = np.arange(start, stop + step / 2, step)
    snr_input = db_to_linear(args.input_snr) if args.input_snr is not None else None
    out = _out_dir(args)
    rows = []
    for p_dbm in powers:
        allocation = PowerAllocation.flat(dbm_to_watt(p_dbm), cfg.grid.num_channels)
        snr_vec = snrs(allocation, tables, cfg)
        combined = (combine_with_input_snr(snr_vec, snr_input)
                    if snr_input is not None else snr_vec)
        ber = ber_from_snr(combined)
        for c in range(cfg.grid.num_channels):
            rows.append([float(p_dbm), c + 1,
                         float(linear_to_db(snr_vec[c])),
                         float(linear_to_db(combined[c])),
                         float(ber[c])])
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["power_dbm", "channel", "snr_db",
                         "snr_with_tx_noise_db", "ber"])
        writer.writerows(rows)
    _write_json(out / "sweep.manifest.json", _jsonable(make_manifest(
        "sweep", args, cfg, args.tables,
        extra={"power_range": args.power_range, "input_snr_db": args.input_snr})))
    print(f"wrote {out / 'sweep.csv'} ({len(rows)} rows)")
    return EXIT_OK


def _tables_for_mode(cfg, mode, spec, corrections):
    return build_tables(cfg.with_model_mode(mode), spec, corrections=corrections)


def cmd_compare(args):
    cfg = load_config(args.config)
    modes = [m.strip() for m in args.models.split(",") if m.strip()]
    if any(m not in ("egn", "gn") for m in modes) or len(modes) != 2:
        raise ConfigError("--models must name two of egn,gn")
    spec = _quad_spec(args)
    settings = BarrierSettings()
    out = _out_dir(args)
    per_mode = {}
    for mode in modes:
        mode_cfg = cfg.with_model_mode(mode)
        tables = _tables_for_mode(cfg, mode, spec, args.corrections)
        flat = solve_flat("margin", tables, mode_cfg, settings)
        per_ch = solve_min_max_margin(tables, mode_cfg, settings)
        rate = solve_max_rate(tables, mode_cfg, settings)
        per_mode[mode] = {
            "flat_optimum_dbm": flat.history[0]["flat_power_dbm"],
            "flat_snr_db": [float(linear_to_db(v)) for v in flat.snr],
            "per_channel_dbm": [float(watt_to_dbm(p)) for p in per_ch.allocation.x],
            "per_channel_snr_db": [float(linear_to_db(v)) for v in per_ch.snr],
            "aggregate_rate_bits_per_symbol": rate.objective,
            "converged": bool(flat.converged and per_ch.converged and rate.converged),
        }
    a, b = modes
    center = cfg.grid.num_channels // 2
    deltas = {
        "optimal_power_gap_db": per_mode[a]["flat_optimum_dbm"]
                                - per_mode[b]["flat_optimum_dbm"],
        "flat_snr_gap_db": per_mode[a]["flat_snr_db"][center]
                           - per_mode[b]["flat_snr_db"][center],
        "rate_gap_bits_per_symbol": per_mode[a]["aggregate_rate_bits_per_symbol"]
                                    - per_mode[b]["aggregate_rate_bits_per_symbol"],
    }
    report = {"models": modes, "results": per_mode, "deltas": deltas,
              "manifest": _jsonable(make_manifest("compare", args, cfg))}
    _write_json(out / "compare.json", _jsonable(report))
    print(json.dumps(_jsonable(deltas), indent=2))
    return EXIT_OK


def cmd_reproduce(args):
    cfg = load_config(args.config)
    nch = args.scale or cfg.grid.num_channels
    if nch > cfg.grid.num_channels:
        raise ConfigError("--scale exceeds the configured channel count")
    if nch != cfg.grid.num_channels:
        from dataclasses import replace as dc_replace
        from .config import SystemConfig, ChannelGrid
        grid = ChannelGrid(f0=cfg.grid.f0, delta_f=cfg.grid.delta_f,
                           num_channels=nch, symbol_rate=cfg.grid.symbol_rate)
        cfg = SystemConfig(fiber=cfg.fiber, grid=grid, modulation=cfg.modulation,
                           amplifier=cfg.amplifier, model_mode=cfg.model_mode)
    spec = _quad_spec(args)
    settings = BarrierSettings()
    out = _out_dir(args)
    results = {}
    for mode in ("egn", "gn"):
        mode_cfg = cfg.with_model_mode(mode)
        tables = build_tables(mode_cfg, spec, corrections=args.corrections)
        results[mode] = {
            "tables": tables,
            "cfg": mode_cfg,
            "flat": solve_flat("margin", tables, mode_cfg, settings),
            "per_channel": solve_min_max_margin(tables, mode_cfg, settings),
        }
    name = args.figure
    path = out / f"{name}.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if name == "fig3":
            writer.writerow(["channel", "egn_per_channel_dbm", "gn_per_channel_dbm",
                             "egn_flat_dbm", "gn_flat_dbm"])
            for c in range(nch):
                writer.writerow([c + 1] + [
                    float(watt_to_dbm(results["egn"]["per_channel"].allocation.x[c])),
                    float(watt_to_dbm(results["gn"]["per_channel"].allocation.x[c])),
                    float(watt_to_dbm(results["egn"]["flat"].allocation.x[c])),
                    float(watt_to_dbm(results["gn"]["flat"].allocation.x[c]))])
        elif name == "fig5":
            writer.writerow(["model", "channels", "aggregate_rate_bits_per_symbol",
                             "spectral_efficiency_bps_hz"])
            for mode in ("egn", "gn"):
                sol = solve_max_rate(results[mode]["tables"], results[mode]["cfg"],
                                     settings)
                _, agg, se = total_rate(sol.allocation, results[mode]["tables"],
                                        results[mode]["cfg"], settings.pol_factor)
                writer.writerow([mode, nch, float(agg), float(se)])
        elif name == "fig6":
            writer.writerow(["channel", "egn_flat_snr_db", "gn_flat_snr_db",
                             "egn_per_channel_snr_db", "gn_per_channel_snr_db"])
            for c in range(nch):
                writer.writerow([c + 1] + [
                    float(linear_to_db(results["egn"]["flat"].snr[c])),
                    float(linear_to_db(results["gn"]["flat"].snr[c])),
                    float(linear_to_db(results["egn"]["per_channel"].snr[c])),
                    float(linear_to_db(results["gn"]["per_channel"].snr[c]))])
        else:
            raise ConfigError(f"unknown figure {name!r}")
    _write_json(out / f"{name}.manifest.json", _jsonable(make_manifest(
        "reproduce", args, cfg, extra={"figure": name, "scale": nch,
                                       "corrections": args.corrections})))
    print(f"wrote {path}")
    return EXIT_OK


def cmd_calibrate(args):
    cfg = load_config(args.config)
    amp = cfg.amplifier
    n_sp = amp.n_sp
    lines = []
    for label, factor in (("F = n_sp", n_sp), ("F = 2*n_sp", 2.0 * n_sp)):
        from .config import AmplifierSpec, SystemConfig
        alt_amp = AmplifierSpec(noise_factor=max(factor, 1.0), n_sp=n_sp,
                                ref_frequency=amp.ref_frequency,
                                planck_h=amp.planck_h)
        alt_cfg = SystemConfig(fiber=cfg.fiber, grid=cfg.grid,
                               modulation=cfg.modulation, amplifier=alt_amp,
                               model_mode=cfg.model_mode)
        p_ase = float(ase_powers(alt_cfg)[0])
        lines.append((label, p_ase))
        print(f"{label}: F = {alt_amp.noise_factor:.4g}, "
              f"P_ASE = {p_ase:.4e} W ({watt_to_dbm(p_ase):.2f} dBm)")
    if args.out:
        out = _out_dir(args)
        payload = {"interpretations": [
            {"label": lbl, "p_ase_watt": p, "p_ase_dbm": float(watt_to_dbm(p))}
            for lbl, p in lines],
            "manifest": _jsonable(make_manifest("calibrate", args, cfg))}
        _write_json(out / "calibrate.json", _jsonable(payload))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="egnopt",
        description="NLI lookup tables and launch-power optimization for "
                    "coherent WDM links")
    parser.add_argument("--config", required=True, help="JSON system config")
    parser.add_argument("--tables", help="table cache path (input or output)")
    parser.add_argument("--seed", type=int, default=20240901,
                        help="base quadrature seed")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--order-2d", type=int, default=24)
    parser.add_argument("--samples-3d", type=int, default=32768)
    parser.add_argument("--samples-4d", type=int, default=65536)
    parser.add_argument("--corrections", choices=("full", "dominant", "off"),
                        default="full")
    parser.add_argument("--progress", action="store_true")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("tables", help="build and cache the NLI lookup tables")

    p_opt = sub.add_parser("optimize", help="solve a power-allocation problem")
    p_opt.add_argument("--objective", choices=("margin", "rate"), default="margin")
    p_opt.add_argument("--flat", action="store_true")

    p_sweep = sub.add_parser("sweep", help="flat-power SNR/BER sweep")
    p_sweep.add_argument("--power-range", required=True, metavar="A:B:STEP",
                         help="dBm range, e.g. -10:5:0.5")
    p_sweep.add_argument("--input-snr", type=float, default=None,
                         help="transmitter SNR ceiling in dB")

    p_cmp = sub.add_parser("compare", help="EGN vs GN side-by-side report")
    p_cmp.add_argument("--models", default="egn,gn")

    p_rep = sub.add_parser("reproduce", help="emit figure-reproduction datasets")
    p_rep.add_argument("figure", choices=("fig3", "fig5", "fig6"))
    p_rep.add_argument("--scale", type=int, default=None,
                       help="channel count override")

    sub.add_parser("calibrate", help="ASE under both noise-figure readings")
    return parser


_COMMANDS = {
    "tables": cmd_tables,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
    "reproduce": cmd_reproduce,
    "calibrate": cmd_calibrate,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, TableCacheError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NliTableError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
