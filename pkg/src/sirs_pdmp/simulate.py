"""Hybrid simulation of the switching epidemic and ensemble summaries.

The regime path is autonomous (its rates do not depend on the epidemic
state), so a trajectory is built by sampling the jump path first and then
threading the frozen-regime ODE through the jump times, hitting each one
exactly. Output rows cover a uniform grid plus every jump instant; the
regime column is right-continuous (a row at a jump time carries the
post-jump regime).

Ensembles assign stream (master_seed, path_index) to each path, so results
are reproducible and independent of worker count and scheduling.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import ode
from .dynamics import rhs_closure
from .errors import DomainError, NumericsError
from .incidence import IncidenceFunction
from .markov import CtmcGenerator, RegimePath, sample_path
from .model import ModelParams, as_state_tuple
from .occupation import HistogramSpec, OccupationHistogram, new_histogram
from .rng import stream

#: infective counts below this are treated as extinct and clamped to zero
INFECTIVE_FLOOR = 1e-15


@dataclass(frozen=True)
class Trajectory:
    """One simulated path sampled on the output grid plus jump instants."""

    t: np.ndarray
    s: np.ndarray
    i: np.ndarray
    r: np.ndarray
    regime: np.ndarray
    master_seed: int | None
    path_index: int
    absorbed: bool
    n_jumps: int

    @property
    def horizon(self) -> float:
        return float(self.t[-1])

    def population(self) -> np.ndarray:
        return self.s + self.i + self.r

    def occupancy(self, n_regimes: int) -> np.ndarray:
        """Exact time fraction per regime (rows include all jump instants)."""
        w = np.diff(self.t)
        out = np.zeros(n_regimes)
        np.add.at(out, self.regime[:-1], w)
        return out / (self.t[-1] - self.t[0])


def simulate_along(
    params: ModelParams,
    inc: IncidenceFunction,
    path: RegimePath,
    z0,
    *,
    rtol: float = ode.DEFAULT_RTOL,
    atol: float = ode.DEFAULT_ATOL,
    output_dt: float | None = 1.0,
    i_floor: float | None = INFECTIVE_FLOOR,
    master_seed: int | None = None,
    path_index: int = 0,
) -> Trajectory:
    """Integrate the epidemic along a given regime path (deterministic)."""
    y = as_state_tuple(z0)
    horizon = path.horizon
    if output_dt is not None and output_dt <= 0:
        raise DomainError("output_dt must be positive or None")
    grid = (
        np.arange(output_dt, horizon, output_dt)
        if output_dt is not None
        else np.empty(0)
    )

    rhss = [rhs_closure(params, inc, e) for e in range(params.n_regimes)]
    ts = [0.0]
    ss = [y[0]]
    is_ = [y[1]]
    rs = [y[2]]
    es = [int(path.states[0])]

    def sink(tg, s, i, r):
        ts.append(tg)
        ss.append(s)
        is_.append(i)
        rs.append(r)

    bounds = np.append(path.jump_times, horizon)
    n_seg = len(path.states)
    gp = 0
    h_carry = None
    absorbed = False
    for k in range(n_seg):
        t_a, t_b = bounds[k], bounds[k + 1]
        if t_b <= t_a:
            continue
        e = int(path.states[k])
        gp_end = int(np.searchsorted(grid, t_b, side="left"))
        n_before = len(ts)
        try:
            y, h_carry, hit_floor = ode.integrate(
                rhss[e],
                y,
                float(t_a),
                float(t_b),
                rtol,
                atol,
                h0=h_carry,
                grid=grid[gp:gp_end],
                sink=sink,
                i_floor=i_floor,
            )
        except NumericsError as exc:
            raise type(exc)(f"{exc} (regime {e}, segment [{t_a:.6g}, {t_b:.6g}])") from exc
        es.extend([e] * (len(ts) - n_before))
        gp = gp_end
        absorbed = absorbed or hit_floor
        ts.append(float(t_b))
        ss.append(y[0])
        is_.append(y[1])
        rs.append(y[2])
        es.append(int(path.states[k + 1]) if k + 1 < n_seg else e)

    return Trajectory(
        t=np.array(ts),
        s=np.array(ss),
        i=np.array(is_),
        r=np.array(rs),
        regime=np.array(es, dtype=np.int64),
        master_seed=master_seed,
        path_index=path_index,
        absorbed=absorbed,
        n_jumps=path.n_jumps,
    )


def simulate(
    params: ModelParams,
    inc: IncidenceFunction,
    gen: CtmcGenerator,
    z0,
    e0: int,
    horizon: float,
    *,
    rtol: float = ode.DEFAULT_RTOL,
    atol: float = ode.DEFAULT_ATOL,
    output_dt: float | None = 1.0,
    master_seed: int = 0,
    path_index: int = 0,
    i_floor: float | None = INFECTIVE_FLOOR,
) -> Trajectory:
    """Simulate one path; the regime path comes from stream
    ``(master_seed, path_index)``."""
    if params.n_regimes != gen.n_regimes:
        raise DomainError(
            f"params have {params.n_regimes} regimes but generator has {gen.n_regimes}"
        )
    rng = stream(master_seed, path_index)
    path = sample_path(gen, e0, horizon, rng)
    return simulate_along(
        params,
        inc,
        path,
        z0,
        rtol=rtol,
        atol=atol,
        output_dt=output_dt,
        i_floor=i_floor,
        master_seed=master_seed,
        path_index=path_index,
    )


def time_mean_infectives(traj: Trajectory, burn_in: float = 0.0) -> float:
    """Trapezoidal time average of I over [burn_in, horizon]."""
    if burn_in >= traj.horizon:
        raise DomainError("burn_in must be smaller than the horizon")
    mask = traj.t >= burn_in
    t = traj.t[mask]
    i = traj.i[mask]
    if len(t) < 2:
        raise DomainError("not enough samples after burn_in")
    return float(np.trapezoid(i, t) / (t[-1] - t[0]))


class DecayFit(NamedTuple):
    """Least-squares slope of log I over a trailing window."""

    slope: float
    truncated: bool
    t_lo: float
    t_hi: float
    n_points: int


def log_decay_slope(traj: Trajectory, window: float) -> DecayFit:
    """Fit the exponential decay rate of I on the trailing window.

    Rows with I = 0 (an absorbed tail) are excluded; the window then ends
    at the last positive sample and the fit is flagged truncated.
    """
    if window <= 0:
        raise DomainError("window must be > 0")
    pos = traj.i > 0.0
    if not pos.any():
        raise DomainError("trajectory has no positive infective samples")
    t_pos = traj.t[pos]
    i_pos = traj.i[pos]
    t_hi = t_pos[-1]
    truncated = bool(t_hi < traj.t[-1])
    t_lo = max(t_pos[0], t_hi - window)
    sel = t_pos >= t_lo
    t = t_pos[sel]
    y = np.log(i_pos[sel])
    if len(t) < 2:
        raise NumericsError("window contains fewer than 2 positive samples")
    slope = float(np.polyfit(t, y, 1)[0])
    return DecayFit(slope=slope, truncated=truncated, t_lo=float(t_lo), t_hi=float(t_hi), n_points=len(t))


@dataclass(frozen=True)
class PathSummary:
    """Per-path reductions used by ensemble reports."""

    path_index: int
    time_mean_i: float
    min_population: float
    max_population: float
    occupancy: tuple[float, ...]
    final_state: tuple[float, float, float]
    absorbed: bool
    n_jumps: int
    decay_slope: float | None = None
    decay_truncated: bool | None = None

    def to_dict(self) -> dict:
        return {
            "path_index": self.path_index,
            "time_mean_i": self.time_mean_i,
            "min_population": self.min_population,
            "max_population": self.max_population,
            "occupancy": list(self.occupancy),
            "final_state": list(self.final_state),
            "absorbed": self.absorbed,
            "n_jumps": self.n_jumps,
            "decay_slope": self.decay_slope,
            "decay_truncated": self.decay_truncated,
        }


@dataclass(frozen=True)
class EnsembleResult:
    """Summaries (in path order) plus optional pooled occupation tables."""

    summaries: tuple[PathSummary, ...]
    histogram: OccupationHistogram | None = None
    window_histograms: tuple[OccupationHistogram, ...] | None = None

    def pooled_occupancy(self) -> np.ndarray:
        occ = np.array([s.occupancy for s in self.summaries])
        return occ.mean(axis=0)


class _PathTask(NamedTuple):
    params: ModelParams
    inc: IncidenceFunction
    gen: CtmcGenerator
    z0: tuple[float, float, float]
    e0: int
    horizon: float
    rtol: float
    atol: float
    output_dt: float | None
    master_seed: int
    path_index: int
    burn_in: float
    decay_window: float | None
    histogram: HistogramSpec | None
    windows: tuple[tuple[float, float], ...] | None
    support_stride: int


def _run_path(task: _PathTask):
    traj = simulate(
        task.params,
        task.inc,
        task.gen,
        task.z0,
        task.e0,
        task.horizon,
        rtol=task.rtol,
        atol=task.atol,
        output_dt=task.output_dt,
        master_seed=task.master_seed,
        path_index=task.path_index,
    )
    occupancy = traj.occupancy(task.params.n_regimes)
    n = traj.population()
    decay_slope = None
    decay_truncated = None
    if task.decay_window is not None:
        fit = log_decay_slope(traj, task.decay_window)
        decay_slope = fit.slope
        decay_truncated = fit.truncated
    summary = PathSummary(
        path_index=task.path_index,
        time_mean_i=time_mean_infectives(traj, task.burn_in),
        min_population=float(n.min()),
        max_population=float(n.max()),
        occupancy=tuple(float(v) for v in occupancy),
        final_state=(float(traj.s[-1]), float(traj.i[-1]), float(traj.r[-1])),
        absorbed=traj.absorbed,
        n_jumps=traj.n_jumps,
        decay_slope=decay_slope,
        decay_truncated=decay_truncated,
    )
    hist = None
    whists = None
    if task.histogram is not None:
        hist = new_histogram(task.histogram)
        hist.accumulate(traj, t_lo=task.burn_in, support_stride=task.support_stride)
        if task.windows is not None:
            whists = []
            for lo, hi in task.windows:
                wh = new_histogram(task.histogram)
                # window tables are only compared distributionally; skip support
                wh.accumulate(traj, t_lo=lo, t_hi=hi, support_stride=0)
                whists.append(wh)
    return task.path_index, summary, hist, whists


def ensemble(
    params: ModelParams,
    inc: IncidenceFunction,
    gen: CtmcGenerator,
    z0,
    e0: int,
    horizon: float,
    n_paths: int,
    master_seed: int,
    *,
    rtol: float = ode.DEFAULT_RTOL,
    atol: float = ode.DEFAULT_ATOL,
    output_dt: float | None = 1.0,
    burn_in: float | None = None,
    decay_window: float | None = None,
    histogram: HistogramSpec | None = None,
    windows: Sequence[tuple[float, float]] | None = None,
    n_workers: int = 1,
) -> EnsembleResult:
    """Run independent paths with streams (master_seed, k), k = 0..n_paths-1.

    Results are identical for any ``n_workers``: per-path work depends only
    on the stream key and the pooled tables are merged in path order.
    ``burn_in`` defaults to 10% of the horizon.
    """
    if n_paths < 1:
        raise DomainError("n_paths must be >= 1")
    if burn_in is None:
        burn_in = 0.1 * horizon
    if burn_in >= horizon:
        raise DomainError("burn_in must be smaller than the horizon")

    support_stride = 1
    if histogram is not None and output_dt is not None:
        rows_estimate = n_paths * (horizon - burn_in) / output_dt
        support_stride = max(1, int(math.ceil(rows_estimate / histogram.max_support)))

    tasks = [
        _PathTask(
            params=params,
            inc=inc,
            gen=gen,
            z0=tuple(float(v) for v in as_state_tuple(z0)),
            e0=e0,
            horizon=float(horizon),
            rtol=rtol,
            atol=atol,
            output_dt=output_dt,
            master_seed=int(master_seed),
            path_index=k,
            burn_in=float(burn_in),
            decay_window=decay_window,
            histogram=histogram,
            windows=tuple((float(a), float(b)) for a, b in windows) if windows else None,
            support_stride=support_stride,
        )
        for k in range(n_paths)
    ]

    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            raw = list(pool.map(_run_path, tasks, chunksize=max(1, n_paths // (4 * n_workers))))
    else:
        raw = [_run_path(t) for t in tasks]

    raw.sort(key=lambda item: item[0])
    summaries = tuple(item[1] for item in raw)

    pooled = None
    pooled_windows = None
    if histogram is not None:
        pooled = new_histogram(histogram)
        for item in raw:
            pooled.merge(item[2])
        if windows is not None:
            pooled_windows = [new_histogram(histogram) for _ in windows]
            for item in raw:
                for wh, part in zip(pooled_windows, item[3]):
                    wh.merge(part)
            pooled_windows = tuple(pooled_windows)

    return EnsembleResult(
        summaries=summaries, histogram=pooled, window_histograms=pooled_windows
    )
