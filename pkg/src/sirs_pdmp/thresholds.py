"""Threshold quantities: reproduction number, drifts, persistence/extinction.

The long-run behaviour is decided by the stationary-average growth rate of
log I near the disease-free state. Each regime contributes the drift

    B(e) = lambda_in * beta_e * G'(0) / mu - (mu + alpha + delta)

and the weighted drift sum(pi_e B(e)) has the same sign as R0 - 1, where R0
is the pi-weighted mean of the frozen-regime reproduction ratios. Negative
drift forces exponential extinction; positive drift yields a time-mean
persistence level bounded below in terms of the Lipschitz constant theta of
the incidence ratio.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dynamics import deterministic_r0
from .errors import DomainError, NotPersistentError
from .incidence import IncidenceFunction, validate_assumptions
from .markov import StationaryDist
from .model import ModelParams


class PopulationBounds(NamedTuple):
    """Open population band (lower, upper) that traps every trajectory."""

    lower: float
    upper: float
    degenerate: bool


@dataclass(frozen=True)
class ThresholdReport:
    """Classification of the switching system by its reproduction number."""

    r0: float
    r0_per_regime: tuple[float, ...]
    b_values: tuple[float, ...]
    weighted_drift: float
    classification: str  # "extinct" | "persistent" | "critical"
    persistence_bound: float | None
    extinction_rate: float | None
    theta_estimate: float | None

    def to_dict(self) -> dict:
        return {
            "r0": self.r0,
            "r0_per_regime": list(self.r0_per_regime),
            "b_values": list(self.b_values),
            "weighted_drift": self.weighted_drift,
            "classification": self.classification,
            "persistence_bound": self.persistence_bound,
            "extinction_rate": self.extinction_rate,
            "theta_estimate": self.theta_estimate,
            "theta_is_estimate": self.theta_estimate is not None,
        }


def basic_reproduction_number(
    params: ModelParams, inc: IncidenceFunction, pi: StationaryDist
) -> float:
    """Stationary-weighted reproduction number of the switching system."""
    r0s = [deterministic_r0(params, inc, e) for e in range(params.n_regimes)]
    return float(np.dot(pi.pi, r0s))


def regime_drift(params: ModelParams, inc: IncidenceFunction, e: int) -> float:
    """Exponential drift B(e) of log I contributed by regime e."""
    if not 0 <= e < params.n_regimes:
        raise DomainError(f"regime {e} out of range 0..{params.n_regimes - 1}")
    return (
        params.lambda_in * params.betas[e] * inc.gprime0 / params.mu
        - params.removal_rate
    )


def persistence_lower_bound(
    params: ModelParams,
    inc: IncidenceFunction,
    pi: StationaryDist,
    theta: float,
) -> float:
    """Lower bound on the time mean of I when the weighted drift is positive.

    theta is the Lipschitz constant (estimate) of the incidence ratio on the
    population band; a larger theta only weakens the bound.
    """
    if theta < 0:
        raise DomainError("theta must be >= 0")
    drift = float(
        np.dot(pi.pi, [regime_drift(params, inc, e) for e in range(params.n_regimes)])
    )
    if drift <= 0:
        raise NotPersistentError(f"weighted drift {drift:.4g} is not positive")
    beta_max = max(params.betas)
    gp0 = inc.gprime0
    denom = beta_max * (params.mu * theta + beta_max * gp0 * gp0) * params.lambda_in
    return params.mu**2 / denom * drift


def invariant_region(params: ModelParams) -> PopulationBounds:
    """Open band (lambda_in/(mu+alpha), lambda_in/mu) trapping the population.

    With alpha = 0 the band is empty (the population converges to the single
    level lambda_in/mu); the ``degenerate`` flag reports that case.
    """
    lower = params.population_floor
    upper = params.population_cap
    return PopulationBounds(lower=lower, upper=upper, degenerate=lower == upper)


def classify_threshold(
    params: ModelParams,
    inc: IncidenceFunction,
    pi: StationaryDist,
    eps: float = 1e-9,
    *,
    theta: float | None = None,
) -> ThresholdReport:
    """Classify extinction vs persistence by the position of R0 against 1.

    Within ``|R0 - 1| <= eps`` no call is made ("critical"). For persistent
    systems the report carries the time-mean lower bound (computed with
    ``theta``, estimated from the default validation grid when not given);
    for extinct systems it carries the exponential decay rate
    ``-sum(pi_e B(e))`` of the infective count.
    """
    if eps < 0:
        raise DomainError("eps must be >= 0")
    r0s = tuple(deterministic_r0(params, inc, e) for e in range(params.n_regimes))
    bs = tuple(regime_drift(params, inc, e) for e in range(params.n_regimes))
    r0 = float(np.dot(pi.pi, r0s))
    drift = float(np.dot(pi.pi, bs))

    persistence_bound = None
    extinction_rate = None
    theta_used = theta
    if abs(r0 - 1.0) <= eps:
        classification = "critical"
    elif r0 > 1.0:
        classification = "persistent"
        if theta_used is None:
            theta_used = validate_assumptions(inc, params).theta_estimate
        persistence_bound = persistence_lower_bound(params, inc, pi, theta_used)
    else:
        classification = "extinct"
        extinction_rate = -drift

    return ThresholdReport(
        r0=r0,
        r0_per_regime=r0s,
        b_values=bs,
        weighted_drift=drift,
        classification=classification,
        persistence_bound=persistence_bound,
        extinction_rate=extinction_rate,
        theta_estimate=theta_used,
    )
