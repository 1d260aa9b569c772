"""Numerical Lie brackets, span certificates, and reachable-set sampling.

The ergodicity certificate asks whether the regime vector fields together
with their iterated brackets span R^3 at some point of the set reachable
from the endemic equilibrium by composing frozen-regime flows. This module
evaluates brackets numerically, certifies the span by singular values, and
samples the reachable set.

Bracket words are nested 2-tuples over regime indices: ``0`` is the bare
field of regime 0, ``(0, 1)`` the bracket of fields 0 and 1, ``(0, (0, 1))``
a depth-2 iterate, and so on. Depth-1 brackets use analytic Jacobians when
the incidence kind provides derivatives; Jacobians of bracket words are
always central finite differences (error grows roughly like step^(2/3) per
nesting, so the practical depth cap is 3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import dynamics
from .dynamics import find_equilibrium, flow, jacobian
from .errors import DomainError, GammaSeedError, NoEndemicEquilibriumError
from .incidence import IncidenceFunction
from .markov import CtmcGenerator
from .model import EpidemicState, ModelParams, as_state_tuple

#: singular values below this fraction of the largest count as zero
RANK_RTOL = 1e-6

FieldSpec = object  # int regime index | (FieldSpec, FieldSpec) | callable


def word_depth(word: FieldSpec) -> int:
    """Nesting depth: 0 for a bare field, 1 + max of the parts for a bracket."""
    if isinstance(word, tuple):
        a, b = word
        return 1 + max(word_depth(a), word_depth(b))
    return 0


def format_word(word: FieldSpec) -> str:
    if isinstance(word, tuple):
        a, b = word
        return f"[{format_word(a)},{format_word(b)}]"
    if callable(word):
        return getattr(word, "__name__", "field")
    return f"Y{word}"


def _fd_step(z: Sequence[float]) -> float:
    return 1e-5 * max(math.sqrt(sum(v * v for v in z)), 1.0)


def _eval_field(params, inc, spec, z: np.ndarray) -> np.ndarray:
    if isinstance(spec, tuple):
        return lie_bracket(params, inc, spec[0], spec[1], z)
    if callable(spec):
        return np.asarray(spec(z), dtype=float)
    # raw right-hand side: finite-difference probes may sit slightly outside
    # the orthant, so skip state validation here
    rhs = dynamics.rhs_closure(params, inc, spec)
    return np.array(rhs(float(z[0]), float(z[1]), float(z[2])))


def _field_jacobian(params, inc, spec, z: np.ndarray) -> np.ndarray:
    """Jacobian of a field spec; analytic only for bare regime fields."""
    if not isinstance(spec, tuple) and not callable(spec):
        return jacobian(params, inc, spec, z)
    h = _fd_step(z)
    jac = np.empty((3, 3))
    for k in range(3):
        zp = z.copy()
        zm = z.copy()
        zp[k] += h
        zm[k] -= h
        jac[:, k] = (_eval_field(params, inc, spec, zp) - _eval_field(params, inc, spec, zm)) / (2 * h)
    return jac


def lie_bracket(
    params: ModelParams,
    inc: IncidenceFunction,
    a: FieldSpec,
    b: FieldSpec,
    z: EpidemicState | Sequence[float],
) -> np.ndarray:
    """[a, b](z) = J_b(z) a(z) - J_a(z) b(z).

    ``a`` and ``b`` are regime indices, nested bracket words, or callables
    mapping a length-3 array to a length-3 array.
    """
    zv = np.asarray(as_state_tuple(z) if not isinstance(z, np.ndarray) else z, dtype=float)
    av = _eval_field(params, inc, a, zv)
    bv = _eval_field(params, inc, b, zv)
    ja = _field_jacobian(params, inc, a, zv)
    jb = _field_jacobian(params, inc, b, zv)
    return jb @ av - ja @ bv


def det_bracket_2regime(
    params: ModelParams,
    inc: IncidenceFunction,
    z: EpidemicState | Sequence[float],
) -> float:
    """Closed-form det(Y_0, Y_1, [Y_0, Y_1]) for two-regime models.

    The bracket of the two fields is proportional to (beta_0 - beta_1) and
    the determinant collapses to

        -[(beta_0 - beta_1) S G(I)]^2
            * [mu delta (lambda_in/mu - (S+I+R)) - alpha (mu+lambda_loss) R]

    so it vanishes exactly on I = 0 and on the surface where the second
    factor changes sign. Cross-check against :func:`det_bracket_numeric`.
    """
    if params.n_regimes != 2:
        raise DomainError("closed-form determinant requires exactly 2 regimes")
    s, i, r = as_state_tuple(z)
    g = inc.value(i)
    b0, b1 = params.betas
    factor = (b0 - b1) * s * g
    inner = params.mu * params.delta * (
        params.population_cap - (s + i + r)
    ) - params.alpha * (params.mu + params.lambda_loss) * r
    return -(factor * factor) * inner


def det_bracket_numeric(
    params: ModelParams,
    inc: IncidenceFunction,
    z: EpidemicState | Sequence[float],
) -> float:
    """det(Y_0, Y_1, [Y_0, Y_1]) evaluated from the bracket definition."""
    if params.n_regimes != 2:
        raise DomainError("numeric determinant requires exactly 2 regimes")
    zv = np.asarray(as_state_tuple(z), dtype=float)
    cols = np.column_stack(
        [
            _eval_field(params, inc, 0, zv),
            _eval_field(params, inc, 1, zv),
            lie_bracket(params, inc, 0, 1, zv),
        ]
    )
    return float(np.linalg.det(cols))


def enumerate_words(n_regimes: int, max_depth: int):
    """Breadth-first bracket words up to ``max_depth``.

    Depth 0 are the bare fields; depth 1 the pairs (i, j) with i < j (the
    reversed pair is a sign flip and spans nothing new); deeper levels
    left-extend each previous-level word by every regime.
    """
    if max_depth < 0:
        raise DomainError("max_depth must be >= 0")
    level: list[FieldSpec] = list(range(n_regimes))
    yield from level
    if max_depth == 0:
        return
    level = [(i, j) for i in range(n_regimes) for j in range(i + 1, n_regimes)]
    yield from level
    for _ in range(max_depth - 1):
        level = [(e, w) for e in range(n_regimes) for w in level]
        yield from level


@dataclass(frozen=True)
class RankCertificate:
    """Numerical span certificate at a point."""

    rank: int
    witness_words: tuple
    singular_values: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "rank": self.rank,
            "witness_words": [format_word(w) for w in self.witness_words],
            "singular_values": list(self.singular_values),
        }


def condition_h_rank(
    params: ModelParams,
    inc: IncidenceFunction,
    z: EpidemicState | Sequence[float],
    max_depth: int = 1,
    *,
    rank_rtol: float = RANK_RTOL,
) -> RankCertificate:
    """Numerical rank of the bracket hierarchy at z, with early exit at 3.

    Columns are accumulated breadth-first; a column joins the witness set
    when it raises the numerical rank (singular values above
    ``rank_rtol * sigma_max``). Rank below 3 at the depth cap is reported
    as-is; it does not disprove the full condition.
    """
    zv = np.asarray(as_state_tuple(z), dtype=float)
    kept: list[np.ndarray] = []
    words: list[FieldSpec] = []
    rank = 0
    sv: np.ndarray = np.array([])
    for word in enumerate_words(params.n_regimes, max_depth):
        col = _eval_field(params, inc, word, zv)
        if not np.isfinite(col).all():
            continue
        trial = np.column_stack(kept + [col]) if kept else col.reshape(3, 1)
        tsv = np.linalg.svd(trial, compute_uv=False)
        trank = int(np.sum(tsv > rank_rtol * tsv[0])) if tsv[0] > 0 else 0
        if trank > rank:
            kept.append(col)
            words.append(word)
            rank, sv = trank, tsv
            if rank == 3:
                break
    return RankCertificate(
        rank=rank,
        witness_words=tuple(words),
        singular_values=tuple(float(v) for v in sv),
    )


@dataclass(frozen=True)
class GammaSample:
    """Points reachable from the seed equilibrium by composed frozen flows.

    ``words[k]`` is the (regime, duration) sequence that produced
    ``points[k]`` from ``seed_point``; replaying it through
    :func:`compose_word` reproduces the point.
    """

    points: np.ndarray
    words: tuple[tuple[tuple[int, float], ...], ...]
    seed_point: EpidemicState
    seed_regime: int

    def __len__(self) -> int:
        return len(self.points)

    def within_band(self, params: ModelParams, tol: float = 1e-6) -> np.ndarray:
        """Boolean mask: point totals inside the closed population band."""
        totals = self.points.sum(axis=1)
        return (totals >= params.population_floor - tol) & (
            totals <= params.population_cap + tol
        )

    def to_dict(self) -> dict:
        return {
            "seed_point": list(self.seed_point.as_tuple()),
            "seed_regime": self.seed_regime,
            "points": self.points.tolist(),
            "words": [[[e, t] for e, t in w] for w in self.words],
        }


def compose_word(
    params: ModelParams,
    inc: IncidenceFunction,
    z0: EpidemicState | Sequence[float],
    word: Sequence[tuple[int, float]],
    rtol: float = 1e-8,
    atol: float = 1e-10,
) -> EpidemicState:
    """Apply the flow composition described by (regime, duration) pairs."""
    z = EpidemicState(*as_state_tuple(z0))
    for regime, duration in word:
        z = flow(params, inc, regime, z, duration, rtol=rtol, atol=atol)
    return z


def _seed_equilibrium(params, inc, seed_regime=None):
    if seed_regime is not None:
        try:
            return find_equilibrium(params, inc, seed_regime)
        except NoEndemicEquilibriumError as exc:
            raise GammaSeedError(str(exc)) from exc
    for e in range(params.n_regimes):
        if dynamics.deterministic_r0(params, inc, e) > 1.0:
            return find_equilibrium(params, inc, e)
    raise GammaSeedError("no regime has reproduction ratio > 1; cannot seed")


def _draw_word(gen: CtmcGenerator, rng, length: int) -> tuple[tuple[int, float], ...]:
    """Random admissible word: consecutive regimes follow positive rates."""
    n = gen.n_regimes
    word = []
    e = int(rng.integers(n))
    for _ in range(length):
        duration = float(np.exp(rng.uniform(np.log(1e-2), np.log(1e3))))
        word.append((e, duration))
        succ = np.nonzero(gen.q[e] > 0)[0]
        if len(succ) == 0:
            break
        e = int(succ[rng.integers(len(succ))])
    return tuple(word)


def sample_gamma(
    params: ModelParams,
    inc: IncidenceFunction,
    gen: CtmcGenerator,
    n_points: int,
    rng: np.random.Generator,
    *,
    word_len_mean: float = 4.0,
    seed_regime: int | None = None,
    rtol: float = 1e-8,
    atol: float = 1e-10,
) -> GammaSample:
    """Sample the reachable set from the seed endemic equilibrium.

    Word lengths are geometric with the given mean, durations log-uniform
    on [1e-2, 1e3] days, successive regimes restricted to transitions with
    positive rate (so every sampled point is dynamically reachable).
    """
    if n_points < 1:
        raise DomainError("n_points must be >= 1")
    if word_len_mean < 1:
        raise DomainError("word_len_mean must be >= 1")
    eq = _seed_equilibrium(params, inc, seed_regime)
    z0 = eq.state
    p = 1.0 / word_len_mean
    points = np.empty((n_points, 3))
    words = []
    for k in range(n_points):
        length = int(rng.geometric(p))
        word = _draw_word(gen, rng, length)
        z = compose_word(params, inc, z0, word, rtol=rtol, atol=atol)
        points[k] = z.as_tuple()
        words.append(word)
    return GammaSample(
        points=points, words=tuple(words), seed_point=z0, seed_regime=eq.regime
    )


@dataclass(frozen=True)
class WitnessReport:
    """Outcome of the span-certificate search over reachable points.

    ``found = False`` after exhausting the budget is a negative search
    report, not a disproof.
    """

    found: bool
    point: EpidemicState | None
    rank: int
    witness_words: tuple
    producing_word: tuple[tuple[int, float], ...] | None
    det_closed_form: float | None
    det_numeric: float | None
    n_tried: int
    budget: int
    max_depth: int

    def to_dict(self) -> dict:
        return {
            "found": self.found,
            "point": list(self.point.as_tuple()) if self.point else None,
            "rank": self.rank,
            "witness_words": [format_word(w) for w in self.witness_words],
            "producing_word": (
                [[e, t] for e, t in self.producing_word]
                if self.producing_word is not None
                else None
            ),
            "det_closed_form": self.det_closed_form,
            "det_numeric": self.det_numeric,
            "n_tried": self.n_tried,
            "budget": self.budget,
            "max_depth": self.max_depth,
        }


def find_condition_h_witness(
    params: ModelParams,
    inc: IncidenceFunction,
    gen: CtmcGenerator,
    rng: np.random.Generator,
    *,
    budget: int = 100,
    max_depth: int = 3,
    seed_regime: int | None = None,
    rtol: float = 1e-8,
    atol: float = 1e-10,
) -> WitnessReport:
    """Search reachable points for one where the bracket hierarchy spans R^3.

    Each sampled point is tested at increasing depth (1, then deeper up to
    ``max_depth``) before moving on. Returns the first full-rank point, or
    a not-found report after ``budget`` points.
    """
    if budget < 1:
        raise DomainError("budget must be >= 1")
    eq = _seed_equilibrium(params, inc, seed_regime)
    z0 = eq.state
    best_rank = 0
    for k in range(budget):
        word = _draw_word(gen, rng, int(rng.geometric(1.0 / 4.0)))
        z = compose_word(params, inc, z0, word, rtol=rtol, atol=atol)
        cert = None
        for depth in range(1, max_depth + 1):
            cert = condition_h_rank(params, inc, z, depth)
            if cert.rank == 3:
                det_cf = det_num = None
                if params.n_regimes == 2:
                    det_cf = det_bracket_2regime(params, inc, z)
                    det_num = det_bracket_numeric(params, inc, z)
                return WitnessReport(
                    found=True,
                    point=z,
                    rank=3,
                    witness_words=cert.witness_words,
                    producing_word=word,
                    det_closed_form=det_cf,
                    det_numeric=det_num,
                    n_tried=k + 1,
                    budget=budget,
                    max_depth=depth,
                )
        best_rank = max(best_rank, cert.rank if cert else 0)
    return WitnessReport(
        found=False,
        point=None,
        rank=best_rank,
        witness_words=(),
        producing_word=None,
        det_closed_form=None,
        det_numeric=None,
        n_tried=budget,
        budget=budget,
        max_depth=max_depth,
    )
