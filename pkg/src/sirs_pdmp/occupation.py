"""Empirical occupation measures and convergence diagnostics.

A trajectory's occupation measure weights each visited state by the time
spent there. To bound memory the joint law over (S, I, R, regime) is stored
as three pairwise 2D tables, the three 1D marginals, and the regime
marginal; distances computed on these tables are therefore *discretized*
total-variation values and lower-bound the true TV. A strided subsample of
the raw time-weighted states (support points) is kept for geometric checks
against reachable-set samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import DomainError, HistogramMismatchError
from .model import ModelParams

if TYPE_CHECKING:  # pragma: no cover
    from .simulate import Trajectory


@dataclass(frozen=True)
class HistogramSpec:
    """Binning layout shared by comparable histograms."""

    bins: int
    n_regimes: int
    s_range: tuple[float, float]
    i_range: tuple[float, float]
    r_range: tuple[float, float]
    max_support: int = 200_000

    def __post_init__(self):
        if self.bins < 2:
            raise DomainError("bins must be >= 2")
        if self.n_regimes < 1:
            raise DomainError("n_regimes must be >= 1")
        for name in ("s_range", "i_range", "r_range"):
            lo, hi = getattr(self, name)
            if not hi > lo:
                raise DomainError(f"{name} must be increasing, got ({lo}, {hi})")

    @classmethod
    def from_params(
        cls, params: ModelParams, bins: int = 64, max_support: int = 200_000
    ) -> "HistogramSpec":
        """Default box [0, lambda_in/mu] per axis (the trapping region cap)."""
        cap = params.population_cap
        return cls(
            bins=bins,
            n_regimes=params.n_regimes,
            s_range=(0.0, cap),
            i_range=(0.0, cap),
            r_range=(0.0, cap),
            max_support=max_support,
        )

    def edges(self, axis: str) -> np.ndarray:
        lo, hi = getattr(self, f"{axis}_range")
        return np.linspace(lo, hi, self.bins + 1)


@dataclass
class OccupationHistogram:
    """Time-weighted occupation tables accumulated from trajectories."""

    spec: HistogramSpec
    marg_s: np.ndarray
    marg_i: np.ndarray
    marg_r: np.ndarray
    pair_si: np.ndarray
    pair_sr: np.ndarray
    pair_ir: np.ndarray
    regime_weight: np.ndarray
    total_weight: float = 0.0
    support_points: list = field(default_factory=list)
    support_weights: list = field(default_factory=list)

    def _bin(self, values: np.ndarray, axis: str) -> np.ndarray:
        lo, hi = getattr(self.spec, f"{axis}_range")
        idx = ((values - lo) / (hi - lo) * self.spec.bins).astype(np.int64)
        return np.clip(idx, 0, self.spec.bins - 1)

    def accumulate(
        self,
        traj: "Trajectory",
        t_lo: float = 0.0,
        t_hi: float | None = None,
        support_stride: int = 1,
    ) -> None:
        """Add the trajectory's time mass on [t_lo, t_hi) to the tables.

        Each row is weighted by the time to the next row (clipped to the
        window); the state is taken at the left endpoint, which is exact
        for the regime marginal (rows include every jump instant) and an
        O(output_dt) approximation for the continuous coordinates.
        """
        end = traj.t[-1] if t_hi is None else min(t_hi, traj.t[-1])
        sel = np.nonzero((traj.t >= t_lo) & (traj.t < end))[0]
        sel = sel[sel < len(traj.t) - 1]
        if len(sel) == 0:
            return
        w = np.minimum(traj.t[sel + 1], end) - traj.t[sel]
        s, i, r = traj.s[sel], traj.i[sel], traj.r[sel]
        bs = self._bin(s, "s")
        bi = self._bin(i, "i")
        br = self._bin(r, "r")
        np.add.at(self.marg_s, bs, w)
        np.add.at(self.marg_i, bi, w)
        np.add.at(self.marg_r, br, w)
        nb = self.spec.bins
        np.add.at(self.pair_si.ravel(), bs * nb + bi, w)
        np.add.at(self.pair_sr.ravel(), bs * nb + br, w)
        np.add.at(self.pair_ir.ravel(), bi * nb + br, w)
        np.add.at(self.regime_weight, traj.regime[sel], w)
        self.total_weight += float(w.sum())
        if support_stride > 0:
            keep = slice(None, None, support_stride)
            self.support_points.append(np.column_stack([s, i, r])[keep])
            self.support_weights.append(w[keep])

    def merge(self, other: "OccupationHistogram") -> None:
        """Pool another histogram with identical binning into this one."""
        if other.spec != self.spec:
            raise HistogramMismatchError("histogram specs differ")
        self.marg_s += other.marg_s
        self.marg_i += other.marg_i
        self.marg_r += other.marg_r
        self.pair_si += other.pair_si
        self.pair_sr += other.pair_sr
        self.pair_ir += other.pair_ir
        self.regime_weight += other.regime_weight
        self.total_weight += other.total_weight
        self.support_points.extend(other.support_points)
        self.support_weights.extend(other.support_weights)

    def regime_marginal(self) -> np.ndarray:
        if self.total_weight <= 0:
            raise DomainError("histogram is empty")
        return self.regime_weight / self.total_weight

    def support(self) -> tuple[np.ndarray, np.ndarray]:
        """Subsampled time-weighted states as (points, weights)."""
        if not self.support_points:
            return np.empty((0, 3)), np.empty(0)
        return np.vstack(self.support_points), np.concatenate(self.support_weights)

    def band_mass_fraction(self, params: ModelParams, tol: float = 1e-9) -> float:
        """Fraction of (subsampled) mass with population inside the band."""
        pts, w = self.support()
        if len(pts) == 0:
            raise DomainError("histogram kept no support points")
        n = pts.sum(axis=1)
        inside = (n >= params.population_floor - tol) & (n <= params.population_cap + tol)
        return float(w[inside].sum() / w.sum())


def new_histogram(spec: HistogramSpec) -> OccupationHistogram:
    nb = spec.bins
    return OccupationHistogram(
        spec=spec,
        marg_s=np.zeros(nb),
        marg_i=np.zeros(nb),
        marg_r=np.zeros(nb),
        pair_si=np.zeros((nb, nb)),
        pair_sr=np.zeros((nb, nb)),
        pair_ir=np.zeros((nb, nb)),
        regime_weight=np.zeros(spec.n_regimes),
    )


def occupation_histogram(
    trajs: Sequence["Trajectory"],
    spec: HistogramSpec,
    burn_in: float = 0.0,
    t_max: float | None = None,
    support_stride: int = 1,
) -> OccupationHistogram:
    """Pool the post-burn-in occupation of several trajectories."""
    hist = new_histogram(spec)
    for traj in trajs:
        hist.accumulate(traj, t_lo=burn_in, t_hi=t_max, support_stride=support_stride)
    return hist


def tv_distance(h1: OccupationHistogram, h2: OccupationHistogram) -> float:
    """Discretized total-variation distance between two occupation laws.

    Computed as the largest half-L1 distance across the stored tables
    (three pairwise 2D tables and the regime marginal, all normalized).
    Since every table is a projection of the full joint law, the result is
    a lower bound on the true total variation.
    """
    if h1.spec != h2.spec:
        raise HistogramMismatchError("histogram specs differ")
    if h1.total_weight <= 0 or h2.total_weight <= 0:
        raise DomainError("cannot compare an empty histogram")
    best = 0.0
    for a, b in (
        (h1.pair_si, h2.pair_si),
        (h1.pair_sr, h2.pair_sr),
        (h1.pair_ir, h2.pair_ir),
        (h1.regime_weight, h2.regime_weight),
    ):
        d = 0.5 * float(
            np.abs(a / h1.total_weight - b / h2.total_weight).sum()
        )
        best = max(best, d)
    return best


def gamma_support_check(
    hist: OccupationHistogram,
    gamma_points: np.ndarray,
    radius: float,
) -> float:
    """Fraction of occupation mass within ``radius`` of a reachable point.

    Distances are Euclidean in (S, I, R); the mass is the time-weighted
    support subsample kept by the histogram.
    """
    pts = np.asarray(gamma_points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) == 0:
        raise DomainError("gamma_points must be a nonempty (n, 3) array")
    if radius < 0:
        raise DomainError("radius must be >= 0")
    support, w = hist.support()
    if len(support) == 0:
        raise DomainError("histogram kept no support points")
    if np.isinf(radius):
        return 1.0
    tree = cKDTree(pts)
    dist, _ = tree.query(support, k=1)
    return float(w[dist <= radius].sum() / w.sum())
