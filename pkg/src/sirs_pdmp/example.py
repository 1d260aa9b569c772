"""Built-in two-regime demo configuration and its reproduction bundle.

A benchmark setup for a disease in a rodent colony with non-monotonic
incidence and two environmental regimes: a high-transmission regime whose
frozen subsystem sustains the disease and a low-transmission regime where
it dies out, switching on a timescale of a few days. The switching system
is persistent (weighted reproduction number ~1.87).

``REFERENCE`` collects the published values this setup is expected to
reproduce; the bundle writer emits the computed counterparts next to them
so deviations are visible in the output.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig, config_from_dict
from .dynamics import find_equilibrium, flow
from .incidence import NonmonotonicIncidence
from .lie import det_bracket_2regime, det_bracket_numeric
from .markov import (
    RegimePath,
    sample_path,
    sample_path_n_jumps,
    stationary_distribution,
    validate_generator,
)
from .model import ModelParams
from .rng import stream
from .simulate import simulate_along
from .thresholds import classify_threshold, invariant_region

DEMO_PARAMS = ModelParams(
    lambda_in=0.33,
    mu=0.006,
    lambda_loss=0.021,
    alpha=0.06,
    delta=0.04,
    betas=(0.0056, 0.0013),
)
DEMO_INCIDENCE = NonmonotonicIncidence(a=0.001)
# switching rates stored as the literal factor times integer entries to
# avoid transcription rounding
_Q_FACTOR = 0.5 / 365.0
DEMO_Q = [
    [-169.0 * _Q_FACTOR, 169.0 * _Q_FACTOR],
    [196.0 * _Q_FACTOR, -196.0 * _Q_FACTOR],
]
DEMO_Z0 = (50.0, 1.0, 0.0)
DEMO_E0 = 0

#: published reference values for this setup (4-decimal precision)
REFERENCE = {
    "r0_regime0": 2.9057,
    "r0_regime1": 0.6745,
    "r0": 1.8726,
    "pi": (196.0 / 365.0, 169.0 / 365.0),
    "endemic_equilibrium_regime0": (19.0161, 2.8783, 4.2830),
    # endpoint of the regime-1 flow started at the reference equilibrium
    "flow_probe_start": (19.0161, 2.8783, 4.2830),
    "flow_probe_regime": 1,
    "flow_probe_t": 100.0,
    "flow_probe_end": (37.3966, 0.0033, 0.4464),
}


def demo_config(**overrides) -> RunConfig:
    """The demo setup as a RunConfig; keyword overrides patch top-level keys."""
    data = {
        "params": {
            "lambda_in": 0.33,
            "mu": 0.006,
            "lambda_loss": 0.021,
            "alpha": 0.06,
            "delta": 0.04,
            "betas": [0.0056, 0.0013],
        },
        "incidence": {"kind": "nonmonotonic", "a": 0.001},
        "q_matrix": DEMO_Q,
        "initial_state": list(DEMO_Z0),
        "initial_regime": DEMO_E0,
        "horizon": 2000.0,
        "output_dt": 1.0,
        "seed": 20260810,
    }
    data.update(overrides)
    return config_from_dict(data)


def write_trajectory_csv(path: Path, traj) -> None:
    """CSV with header ``t,S,I,R,regime`` and 10 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "S", "I", "R", "regime"])
        for k in range(len(traj.t)):
            writer.writerow(
                [
                    f"{traj.t[k]:.10g}",
                    f"{traj.s[k]:.10g}",
                    f"{traj.i[k]:.10g}",
                    f"{traj.r[k]:.10g}",
                    int(traj.regime[k]),
                ]
            )


def _projection_csv(path: Path, traj, cols: tuple[str, str]) -> None:
    arrays = {"S": traj.s, "I": traj.i, "R": traj.r}
    a, b = arrays[cols[0]], arrays[cols[1]]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([cols[0], cols[1], "regime"])
        for k in range(len(traj.t)):
            writer.writerow([f"{a[k]:.10g}", f"{b[k]:.10g}", int(traj.regime[k])])


@dataclass(frozen=True)
class BundleResult:
    """Files written by the reproduction bundle, with the headline numbers."""

    out_dir: Path
    files: tuple[str, ...]
    threshold: dict
    equilibrium: dict
    flow_check: dict


def build_bundle(out_dir: str | Path, seed: int = 20260810, threads: int = 1) -> BundleResult:
    """Emit the full demo reproduction bundle into ``out_dir``.

    Contents: threshold report, endemic equilibrium of the sustaining
    regime, the 100-day flow probe in the decaying regime, a 2000-switch
    sample orbit with its three 2D projections, and the three single-path
    panels (each frozen regime alone plus the switching system).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params, inc = DEMO_PARAMS, DEMO_INCIDENCE
    gen = validate_generator(DEMO_Q)
    pi = stationary_distribution(gen)
    files: list[str] = []

    # (a) threshold report
    report = classify_threshold(params, inc, pi)
    bounds = invariant_region(params)
    threshold = report.to_dict()
    threshold["pi"] = pi.pi.tolist()
    threshold["population_bounds"] = {
        "lower": bounds.lower,
        "upper": bounds.upper,
        "degenerate": bounds.degenerate,
    }
    threshold["reference"] = {
        "r0_per_regime": [REFERENCE["r0_regime0"], REFERENCE["r0_regime1"]],
        "r0": REFERENCE["r0"],
    }
    _write_json(out / "threshold_report.json", threshold)
    files.append("threshold_report.json")

    # (b) endemic equilibrium of the sustaining regime
    eq = find_equilibrium(params, inc, 0)
    ref_eq = REFERENCE["endemic_equilibrium_regime0"]
    eq_dict = {
        "regime": 0,
        "computed": list(eq.state.as_tuple()),
        "residual": eq.residual,
        "reference": list(ref_eq),
        "max_abs_difference": max(
            abs(a - b) for a, b in zip(eq.state.as_tuple(), ref_eq)
        ),
    }
    _write_json(out / "equilibrium.json", eq_dict)
    files.append("equilibrium.json")

    # (c) flow probe: decaying regime for 100 days from the reference point
    probe_start = REFERENCE["flow_probe_start"]
    probe_end = flow(
        params,
        inc,
        REFERENCE["flow_probe_regime"],
        probe_start,
        REFERENCE["flow_probe_t"],
    )
    ref_end = REFERENCE["flow_probe_end"]
    max_diff = max(abs(a - b) for a, b in zip(probe_end.as_tuple(), ref_end))
    det_cf = det_bracket_2regime(params, inc, probe_end)
    flow_check = {
        "regime": REFERENCE["flow_probe_regime"],
        "t": REFERENCE["flow_probe_t"],
        "start": list(probe_start),
        "computed_end": list(probe_end.as_tuple()),
        "reference_end": list(ref_end),
        "max_abs_difference": max_diff,
        "within_tolerance": max_diff <= 1e-2,
        "bracket_determinant_closed_form": det_cf,
        "bracket_determinant_numeric": det_bracket_numeric(params, inc, probe_end),
    }
    _write_json(out / "flow_check.json", flow_check)
    files.append("flow_check.json")

    # (d) sample orbit with exactly 2000 environmental switches
    rng = stream(seed, 0)
    orbit_path = sample_path_n_jumps(gen, DEMO_E0, 2000, rng)
    orbit = simulate_along(params, inc, orbit_path, DEMO_Z0, master_seed=seed)
    write_trajectory_csv(out / "orbit_2000_switches.csv", orbit)
    files.append("orbit_2000_switches.csv")

    # (e) its three coordinate-plane projections
    for cols, name in ((("S", "I"), "si"), (("S", "R"), "sr"), (("I", "R"), "ir")):
        fname = f"orbit_projection_{name}.csv"
        _projection_csv(out / fname, orbit, cols)
        files.append(fname)

    # (f) single-path panels: each frozen regime alone, then the switching run
    for e, name in ((0, "panel_regime0.csv"), (1, "panel_regime1.csv")):
        frozen_params = ModelParams(
            lambda_in=params.lambda_in,
            mu=params.mu,
            lambda_loss=params.lambda_loss,
            alpha=params.alpha,
            delta=params.delta,
            betas=(params.betas[e],),
        )
        frozen_path = _single_regime_path(2000.0)
        panel = simulate_along(frozen_params, inc, frozen_path, DEMO_Z0, master_seed=seed)
        write_trajectory_csv(out / name, panel)
        files.append(name)
    # fresh stream index for the switching panel, independent of the orbit
    switch_path = sample_path(gen, DEMO_E0, 2000.0, stream(seed, 2))
    panel_c = simulate_along(params, inc, switch_path, DEMO_Z0, master_seed=seed)
    write_trajectory_csv(out / "panel_switching.csv", panel_c)
    files.append("panel_switching.csv")

    manifest = {
        "seed": seed,
        "files": files,
        "config": demo_config().to_dict(),
    }
    _write_json(out / "manifest.json", manifest)
    files.append("manifest.json")

    return BundleResult(
        out_dir=out,
        files=tuple(files),
        threshold=threshold,
        equilibrium=eq_dict,
        flow_check=flow_check,
    )


def _single_regime_path(horizon: float) -> RegimePath:
    """Trivial jump-free path covering [0, horizon]."""
    return RegimePath(jump_times=np.array([0.0]), states=np.array([0]), horizon=horizon)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
