"""Driving continuous-time Markov chain: generator, stationary law, paths.

The environment process is a CTMC on regimes {0, ..., E-1} with generator
matrix Q (row sums zero, nonnegative off-diagonal). Between jumps the regime
is constant; holding times in regime e are exponential with rate -q[e, e],
and the embedded chain moves e -> e' with probability q[e, e'] / (-q[e, e]).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DomainError,
    InvalidGeneratorError,
    InvalidRateError,
    NumericsError,
    ReducibleChainError,
)

#: row sums of a generator must vanish to this absolute tolerance
ROW_SUM_TOL = 1e-12
#: residual tolerance required of a stationary distribution
STATIONARY_TOL = 1e-12


@dataclass(frozen=True)
class CtmcGenerator:
    """Validated transition-rate matrix. Use :func:`validate_generator`."""

    q: np.ndarray

    @property
    def n_regimes(self) -> int:
        return self.q.shape[0]

    def exit_rate(self, e: int) -> float:
        """Total rate of leaving regime e."""
        return -float(self.q[e, e])


@dataclass(frozen=True)
class StationaryDist:
    """Probability vector pi with pi Q = 0."""

    pi: np.ndarray

    def __getitem__(self, e: int) -> float:
        return float(self.pi[e])


@dataclass(frozen=True)
class RegimePath:
    """One realized jump path of the chain on [0, horizon].

    ``jump_times[0] = 0`` and ``states[k]`` is the regime holding on
    ``[jump_times[k], jump_times[k+1])`` (right-continuous), the last state
    holding up to the horizon.
    """

    jump_times: np.ndarray
    states: np.ndarray
    horizon: float

    @property
    def n_jumps(self) -> int:
        return len(self.jump_times) - 1

    def occupancy(self, n_regimes: int | None = None) -> np.ndarray:
        """Exact fraction of [0, horizon] spent in each regime."""
        bounds = np.append(self.jump_times, self.horizon)
        durations = np.diff(bounds)
        size = n_regimes if n_regimes is not None else int(self.states.max()) + 1
        out = np.zeros(size)
        np.add.at(out, self.states, durations)
        return out / self.horizon


def _strongly_connected(adj: np.ndarray) -> bool:
    """Reachability check on the boolean adjacency pattern."""
    n = adj.shape[0]

    def reach(a: np.ndarray) -> bool:
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        stack = [0]
        while stack:
            v = stack.pop()
            for w in np.nonzero(a[v])[0]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(int(w))
        return bool(seen.all())

    return reach(adj) and reach(adj.T)


def validate_generator(q_matrix) -> CtmcGenerator:
    """Validate a rate matrix and wrap it.

    Raises
    ------
    InvalidRateError
        If an off-diagonal entry is negative.
    InvalidGeneratorError
        If the matrix is not square or a row sum exceeds ``ROW_SUM_TOL``.
    ReducibleChainError
        If E > 1 and the nonzero off-diagonal pattern is not strongly
        connected.
    """
    q = np.array(q_matrix, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise InvalidGeneratorError(f"generator must be square, got shape {q.shape}")
    if not np.isfinite(q).all():
        raise InvalidGeneratorError("generator contains non-finite entries")
    n = q.shape[0]
    off = q.copy()
    np.fill_diagonal(off, 0.0)
    if (off < 0).any():
        e, e2 = np.argwhere(off < 0)[0]
        raise InvalidRateError(f"negative transition rate q[{e},{e2}] = {q[e, e2]}")
    rows = q.sum(axis=1)
    bad = np.abs(rows) > ROW_SUM_TOL
    if bad.any():
        e = int(np.nonzero(bad)[0][0])
        raise InvalidGeneratorError(f"row {e} sums to {rows[e]:.3e}, expected 0")
    if n > 1 and not _strongly_connected(off > 0):
        raise ReducibleChainError("transition pattern is not irreducible")
    q.setflags(write=False)
    return CtmcGenerator(q=q)


def stationary_distribution(gen: CtmcGenerator) -> StationaryDist:
    """Solve pi Q = 0, sum(pi) = 1.

    The singular system is made square by replacing one column of Q^T with
    the normalization row; exact for the small regime counts used here.
    """
    n = gen.n_regimes
    if n == 1:
        return StationaryDist(pi=np.array([1.0]))
    a = gen.q.T.copy()
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise NumericsError(f"stationary system is singular: {exc}") from exc
    residual = float(np.max(np.abs(pi @ gen.q)))
    if residual > STATIONARY_TOL:
        raise NumericsError(f"stationary residual {residual:.3e} exceeds tolerance")
    if (pi <= 0).any():
        raise NumericsError("stationary distribution has nonpositive entries")
    return StationaryDist(pi=pi)


def sample_path(
    gen: CtmcGenerator,
    e0: int,
    horizon: float,
    rng: np.random.Generator,
) -> RegimePath:
    """Draw one jump path on [0, horizon] starting from regime e0.

    Deterministic given the generator state of ``rng``.
    """
    n = gen.n_regimes
    if not 0 <= e0 < n:
        raise DomainError(f"initial regime {e0} out of range 0..{n - 1}")
    if not horizon > 0:
        raise DomainError("horizon must be > 0")
    times = [0.0]
    states = [int(e0)]
    if n == 1:
        return RegimePath(np.array(times), np.array(states), float(horizon))

    q = gen.q
    # per-regime jump distributions, precomputed
    rates = -np.diag(q)
    targets = []
    cdfs = []
    for e in range(n):
        cols = np.nonzero(q[e] > 0)[0]
        targets.append(cols)
        cdfs.append(np.cumsum(q[e, cols]) / rates[e])

    t = 0.0
    e = int(e0)
    while True:
        t += rng.exponential(1.0 / rates[e])
        if t >= horizon:
            break
        u = rng.random()
        k = int(np.searchsorted(cdfs[e], u))
        e = int(targets[e][min(k, len(targets[e]) - 1)])
        times.append(t)
        states.append(e)
    return RegimePath(np.array(times), np.array(states, dtype=np.int64), float(horizon))


def sample_path_n_jumps(
    gen: CtmcGenerator,
    e0: int,
    n_jumps: int,
    rng: np.random.Generator,
) -> RegimePath:
    """Draw a path with exactly ``n_jumps`` switches; horizon = last jump time."""
    n = gen.n_regimes
    if not 0 <= e0 < n:
        raise DomainError(f"initial regime {e0} out of range 0..{n - 1}")
    if n == 1:
        raise DomainError("a single-regime chain never jumps")
    if n_jumps < 1:
        raise DomainError("n_jumps must be >= 1")
    q = gen.q
    rates = -np.diag(q)
    times = [0.0]
    states = [int(e0)]
    t = 0.0
    e = int(e0)
    for _ in range(n_jumps):
        t += rng.exponential(1.0 / rates[e])
        cols = np.nonzero(q[e] > 0)[0]
        cdf = np.cumsum(q[e, cols]) / rates[e]
        k = int(np.searchsorted(cdf, rng.random()))
        e = int(cols[min(k, len(cols) - 1)])
        times.append(t)
        states.append(e)
    return RegimePath(np.array(times), np.array(states, dtype=np.int64), float(t))


def regime_at(path: RegimePath, t: float) -> int:
    """Right-continuous lookup of the regime at time t."""
    if t < 0 or t > path.horizon:
        raise DomainError(f"time {t} outside [0, {path.horizon}]")
    idx = int(np.searchsorted(path.jump_times, t, side="right")) - 1
    return int(path.states[idx])
