"""Batch command-line interface.

Subcommands: ``phase-diagram``, ``q-sweep``, ``gap``, ``simulate``,
``validate-config``.  Exit codes: 0 on success, 1 on configuration errors,
2 when at least one grid cell failed numerically (results are still
written).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .config import ConfigError
from .dynamics import ShockModel, dump_trace, simulate_linear
from .network import sample_holdings, spawn_rng, to_weights
from .params import ParameterError, solve_heterogeneity
from .spectral import PhiOperator
from .sweep import SweepConfig, run_gap_analysis, run_phase_diagram, run_q_sweep

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="flat key=value config file")
    parser.add_argument("--seed", type=int, help="global RNG seed")
    parser.add_argument("--samples", type=int, help="Monte Carlo samples per cell")
    parser.add_argument("--workers", type=int, help="process-pool size")
    parser.add_argument(
        "--methods", help="comma list from diagonalization,corsi,replica"
    )
    parser.add_argument("--out-dir", help="directory for result files")
    parser.add_argument("--format", choices=("csv", "json"), help="results format")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="firesale",
        description="stability sweeps for sparse bank-asset investment networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("phase-diagram", "heterogeneity grid with stability classification"),
        ("q-sweep", "average largest eigenvalue versus diversification"),
        ("gap", "approximation gaps against paired diagonalization"),
        ("simulate", "time-domain endogenous-return paths"),
        ("validate-config", "parse and echo the resolved configuration"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "simulate":
            p.add_argument("--horizon", type=int, help="steps per path")
            p.add_argument("--paths", type=int, help="number of paths")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    mapping = {
        "seed": "run.seed",
        "samples": "run.samples",
        "workers": "run.workers",
        "methods": "run.methods",
        "out_dir": "run.out_dir",
        "format": "run.format",
        "horizon": "sim.horizon",
        "paths": "sim.paths",
    }
    out = {}
    for attr, key in mapping.items():
        value = getattr(args, attr, None)
        if value is not None:
            out[key] = value
    return out


def _sweep_config(settings: dict, kind: str) -> SweepConfig:
    model = cfgmod.model_from_settings(settings)
    out_dir = settings["run.out_dir"] or None
    kwargs = dict(
        model=model,
        methods=cfgmod.methods_from_settings(settings),
        samples=settings["run.samples"],
        seed=settings["run.seed"],
        workers=settings["run.workers"],
        out_dir=Path(out_dir) if out_dir else None,
        fmt=settings["run.format"],
        heatmaps=settings["run.heatmaps"],
        solver=settings["run.solver"],
        het_phi=settings["het.phi"],
        het_p_heavy=settings["het.p_b"],
        replica_pop=settings["replica.pop_size"],
        replica_equilibration=settings["replica.equilibration"],
        replica_measurement=settings["replica.measurement"],
        replica_tol=settings["replica.tol"],
        replica_breakdown_tol=settings["replica.breakdown_tol"],
        gap_scales=cfgmod.scales_from_settings(settings),
    )
    if kind == "phase-diagram":
        kwargs["phi_values"] = cfgmod.axis_from_settings(settings, "phi")
        kwargs["p_heavy_values"] = cfgmod.axis_from_settings(settings, "p_b")
    elif kind in ("q-sweep", "gap"):
        kwargs["q_values"] = cfgmod.axis_from_settings(settings, "q")
    return SweepConfig(**kwargs)


def _run_simulate(settings: dict) -> int:
    model = cfgmod.model_from_settings(settings)
    het = solve_heterogeneity(settings["het.phi"], settings["het.p_b"])
    seed = settings["run.seed"]
    horizon = settings["sim.horizon"]
    n_paths = settings["sim.paths"]
    shock = ShockModel(model.sigma_f2, model.sigma_nu2)
    x = sample_holdings(model, het, spawn_rng(seed, 0))
    op = PhiOperator.from_weights(to_weights(x), model)
    traces = np.empty((n_paths, horizon, model.n_assets))
    any_diverged = False
    for ip in range(n_paths):
        rng = spawn_rng(seed, 1, ip)
        shocks = shock.draw_path(rng, model.n_assets, horizon)
        trace, diverged = simulate_linear(op, shocks)
        traces[ip] = trace
        any_diverged = any_diverged or diverged
    out_dir = settings["run.out_dir"] or "."
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_trace(out / "simulate_trace.csv", traces, paths_axis=True)
    print(f"wrote {out / 'simulate_trace.csv'} ({n_paths} paths x {horizon} steps)")
    if any_diverged:
        print("note: at least one path diverged (unstable instance)")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        file_values = (
            cfgmod.parse_config_file(args.config) if args.config else {}
        )
        settings = cfgmod.resolve(file_values, _overrides(args))
    except (ConfigError, ParameterError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "validate-config":
            cfgmod.model_from_settings(settings)  # trips invalid model values
            for key in sorted(settings):
                print(f"{key} = {settings[key]}")
            return EXIT_OK
        if args.command == "simulate":
            return _run_simulate(settings)
        cfg = _sweep_config(settings, args.command)
        if args.command == "phase-diagram":
            result = run_phase_diagram(cfg)
        elif args.command == "q-sweep":
            result = run_q_sweep(cfg)
        else:
            result = run_gap_analysis(cfg)
    except (ConfigError, ParameterError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if result.n_failed:
        print(
            f"{result.n_failed} of {len(result.cells)} cells failed; "
            "results include the error messages",
            file=sys.stderr,
        )
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
