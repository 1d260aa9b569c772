"""Command-line interface.

Commands::

    analyze            threshold report (R0, drifts, classification, bounds)
    simulate           trajectory CSV files plus a summary JSON
    ensemble           path summaries and pooled occupation diagnostics
    equilibrium        per-regime equilibria of the frozen subsystems
    check-h            span-certificate search over reachable points
    sample-gamma       sample the reachable set, JSON output
    reproduce-example  emit the built-in demo reproduction bundle

Global flags ``--config``, ``--seed``, ``--out``, ``--threads``; flags win
over config keys, which win over ``SIRS_PDMP_*`` environment variables.
``--threads`` affects speed only, never results.

Exit codes: 0 ok, 2 config error, 3 integrator failure, 4 model-structure
error, 5 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import example as demo
from .config import RunConfig, error_report, load_config
from .dynamics import deterministic_r0, find_equilibrium
from .errors import (
    ConfigError,
    GammaSeedError,
    NoEndemicEquilibriumError,
    NumericsError,
    SirsPdmpError,
)
from .lie import find_condition_h_witness, sample_gamma
from .markov import stationary_distribution
from .occupation import HistogramSpec
from .rng import stream
from .simulate import ensemble, simulate, time_mean_infectives
from .thresholds import classify_threshold, invariant_region

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INTEGRATOR = 3
EXIT_STRUCTURE = 4
EXIT_IO = 5


def _emit(payload: dict, out: Path | None, name: str) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)


def cmd_analyze(cfg: RunConfig, out: Path | None) -> int:
    params = cfg.model_params()
    inc = cfg.incidence_function()
    gen = cfg.generator()
    pi = stationary_distribution(gen)
    report = classify_threshold(params, inc, pi).to_dict()
    bounds = invariant_region(params)
    report["pi"] = pi.pi.tolist()
    report["population_bounds"] = {
        "lower": bounds.lower,
        "upper": bounds.upper,
        "degenerate": bounds.degenerate,
    }
    _emit(report, out, "threshold_report.json")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, out: Path | None) -> int:
    params = cfg.model_params()
    inc = cfg.incidence_function()
    gen = cfg.generator()
    z0 = cfg.initial()
    out = out or Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    burn_in = cfg.effective_burn_in()
    summaries = []
    for k in range(cfg.n_paths):
        try:
            traj = simulate(
                params,
                inc,
                gen,
                z0,
                cfg.initial_regime,
                cfg.horizon,
                rtol=cfg.ode.rel_tol,
                atol=cfg.ode.abs_tol,
                output_dt=cfg.output_dt,
                master_seed=cfg.seed,
                path_index=k,
            )
        except NumericsError as exc:
            _emit({**error_report(exc), "path_index": k}, out, "error.json")
            return EXIT_INTEGRATOR
        demo.write_trajectory_csv(out / f"path_{k:04d}.csv", traj)
        from .simulate import time_mean_infectives

        summaries.append(
            {
                "path_index": k,
                "file": f"path_{k:04d}.csv",
                "time_mean_i": time_mean_infectives(traj, burn_in),
                "occupancy": traj.occupancy(params.n_regimes).tolist(),
                "absorbed": traj.absorbed,
                "n_jumps": traj.n_jumps,
                "final_state": [float(traj.s[-1]), float(traj.i[-1]), float(traj.r[-1])],
            }
        )
    _emit({"n_paths": cfg.n_paths, "burn_in": burn_in, "paths": summaries}, out, "summary.json")
    return EXIT_OK


def cmd_ensemble(cfg: RunConfig, out: Path | None, threads: int) -> int:
    params = cfg.model_params()
    inc = cfg.incidence_function()
    gen = cfg.generator()
    spec = HistogramSpec.from_params(
        params, bins=cfg.histogram.bins, max_support=cfg.histogram.max_support
    )
    try:
        result = ensemble(
            params,
            inc,
            gen,
            cfg.initial(),
            cfg.initial_regime,
            cfg.horizon,
            cfg.n_paths,
            cfg.seed,
            rtol=cfg.ode.rel_tol,
            atol=cfg.ode.abs_tol,
            output_dt=cfg.output_dt,
            burn_in=cfg.burn_in,
            histogram=spec,
            n_workers=threads,
        )
    except NumericsError as exc:
        _emit(error_report(exc), out, "error.json")
        return EXIT_INTEGRATOR
    payload = {
        "n_paths": cfg.n_paths,
        "seed": cfg.seed,
        "burn_in": cfg.effective_burn_in(),
        "paths": [s.to_dict() for s in result.summaries],
        "pooled_occupancy": result.pooled_occupancy().tolist(),
        "regime_marginal": result.histogram.regime_marginal().tolist(),
        "total_weight": result.histogram.total_weight,
    }
    _emit(payload, out, "ensemble_summary.json")
    return EXIT_OK


def cmd_equilibrium(cfg: RunConfig, out: Path | None) -> int:
    params = cfg.model_params()
    inc = cfg.incidence_function()
    regimes = []
    for e in range(params.n_regimes):
        r0e = deterministic_r0(params, inc, e)
        entry: dict = {"regime": e, "r0": r0e}
        if r0e > 1.0:
            eq = find_equilibrium(params, inc, e)
            entry["endemic"] = list(eq.state.as_tuple())
            entry["residual"] = eq.residual
        else:
            entry["endemic"] = None
            entry["disease_free"] = [params.population_cap, 0.0, 0.0]
        regimes.append(entry)
    _emit({"regimes": regimes}, out, "equilibria.json")
    return EXIT_OK


def cmd_check_h(cfg: RunConfig, out: Path | None, budget: int, max_depth: int) -> int:
    params = cfg.model_params()
    inc = cfg.incidence_function()
    gen = cfg.generator()
    rng = stream(cfg.seed, 0)
    try:
        report = find_condition_h_witness(
            params,
            inc,
            gen,
            rng,
            budget=budget,
            max_depth=max_depth,
            rtol=cfg.ode.rel_tol,
            atol=cfg.ode.abs_tol,
        )
    except GammaSeedError as exc:
        _emit(error_report(exc), out, "witness.json")
        return EXIT_STRUCTURE
    payload = report.to_dict()
    payload["status"] = "found" if report.found else "not-found"
    _emit(payload, out, "witness.json")
    return EXIT_OK


def cmd_sample_gamma(cfg: RunConfig, out: Path | None, n_points: int) -> int:
    params = cfg.model_params()
    inc = cfg.incidence_function()
    gen = cfg.generator()
    rng = stream(cfg.seed, 0)
    try:
        sample = sample_gamma(
            params,
            inc,
            gen,
            n_points,
            rng,
            rtol=cfg.ode.rel_tol,
            atol=cfg.ode.abs_tol,
        )
    except GammaSeedError as exc:
        _emit(error_report(exc), out, "gamma_sample.json")
        return EXIT_STRUCTURE
    _emit(sample.to_dict(), out, "gamma_sample.json")
    return EXIT_OK


def cmd_reproduce_example(out: Path | None, seed: int, threads: int) -> int:
    target = out or Path("example_bundle")
    result = demo.build_bundle(target, seed=seed, threads=threads)
    sys.stdout.write(
        json.dumps(
            {
                "out_dir": str(result.out_dir),
                "files": list(result.files),
                "r0": result.threshold["r0"],
                "flow_check_within_tolerance": result.flow_check["within_tolerance"],
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sirs-pdmp",
        description="Simulate and analyze a regime-switching SIRS epidemic",
    )
    parser.add_argument("--config", type=Path, help="JSON config file")
    parser.add_argument("--seed", type=int, help="master seed (overrides config)")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker processes for ensembles (speed only, never results)",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze")
    sub.add_parser("simulate")
    sub.add_parser("ensemble")
    sub.add_parser("equilibrium")
    p_check = sub.add_parser("check-h")
    p_check.add_argument("--budget", type=int, default=100)
    p_check.add_argument("--max-depth", type=int, default=3)
    p_gamma = sub.add_parser("sample-gamma")
    p_gamma.add_argument("--points", type=int, default=1000)
    sub.add_parser("reproduce-example")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    try:
        if args.command == "reproduce-example":
            seed = args.seed if args.seed is not None else 20260810
            return cmd_reproduce_example(args.out, seed, args.threads or 1)

        if args.config is None:
            raise ConfigError(f"command {args.command} requires --config")
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        threads = args.threads if args.threads is not None else cfg.threads
        out = args.out

        if args.command == "analyze":
            return cmd_analyze(cfg, out)
        if args.command == "simulate":
            return cmd_simulate(cfg, out)
        if args.command == "ensemble":
            return cmd_ensemble(cfg, out, threads)
        if args.command == "equilibrium":
            return cmd_equilibrium(cfg, out)
        if args.command == "check-h":
            return cmd_check_h(cfg, out, args.budget, args.max_depth)
        if args.command == "sample-gamma":
            return cmd_sample_gamma(cfg, out, args.points)
        raise ConfigError(f"unknown command {args.command}")
    except ConfigError as exc:
        sys.stderr.write(json.dumps(error_report(exc)) + "\n")
        return EXIT_CONFIG
    except (NoEndemicEquilibriumError, GammaSeedError) as exc:
        sys.stderr.write(json.dumps(error_report(exc)) + "\n")
        return EXIT_STRUCTURE
    except NumericsError as exc:
        sys.stderr.write(json.dumps(error_report(exc)) + "\n")
        return EXIT_INTEGRATOR
    except SirsPdmpError as exc:
        sys.stderr.write(json.dumps(error_report(exc)) + "\n")
        return EXIT_CONFIG
    except OSError as exc:
        sys.stderr.write(json.dumps(error_report(exc)) + "\n")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
