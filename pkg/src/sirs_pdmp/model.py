"""Model parameters and the epidemic state point.

The compartment model tracks susceptibles S, infectives I and recovered R.
Susceptibles are recruited at a constant rate, everyone dies at the natural
mortality rate, infectives suffer extra disease mortality and recover at a
fixed rate, and recovered individuals lose immunity and return to the
susceptible pool. Transmission is regime-dependent: regime ``e`` uses the
transmission rate ``betas[e]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import DomainError


@dataclass(frozen=True)
class ModelParams:
    """Scalar rates of the compartment model (all per day).

    Attributes
    ----------
    lambda_in : recruitment rate of new susceptibles (individuals/day, > 0)
    mu : natural mortality rate (> 0)
    lambda_loss : immunity-loss rate (>= 0)
    alpha : disease-induced mortality rate (>= 0)
    delta : recovery rate (>= 0)
    betas : per-regime transmission rates, one per regime (each > 0)
    """

    lambda_in: float
    mu: float
    lambda_loss: float
    alpha: float
    delta: float
    betas: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        rates = {
            "lambda_in": self.lambda_in,
            "mu": self.mu,
            "lambda_loss": self.lambda_loss,
            "alpha": self.alpha,
            "delta": self.delta,
        }
        for name, v in rates.items():
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite, got {v!r}")
        if self.lambda_in <= 0:
            raise DomainError("recruitment rate lambda_in must be > 0")
        if self.mu <= 0:
            raise DomainError("mortality rate mu must be > 0")
        if self.lambda_loss < 0 or self.alpha < 0 or self.delta < 0:
            raise DomainError("lambda_loss, alpha, delta must be >= 0")
        if not self.betas:
            raise DomainError("at least one transmission rate is required")
        for e, b in enumerate(self.betas):
            if not math.isfinite(b) or b <= 0:
                raise DomainError(f"betas[{e}] must be finite and > 0, got {b!r}")

    @property
    def n_regimes(self) -> int:
        return len(self.betas)

    @property
    def removal_rate(self) -> float:
        """Total per-capita outflow rate from the infective compartment."""
        return self.mu + self.alpha + self.delta

    @property
    def population_cap(self) -> float:
        """Upper population bound lambda_in / mu of the trapping region."""
        return self.lambda_in / self.mu

    @property
    def population_floor(self) -> float:
        """Lower population bound lambda_in / (mu + alpha)."""
        return self.lambda_in / (self.mu + self.alpha)


@dataclass(frozen=True)
class EpidemicState:
    """A point (S, I, R) in the nonnegative orthant."""

    s: float
    i: float
    r: float

    def __post_init__(self):
        for name in ("s", "i", "r"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise DomainError(f"coordinate {name} must be finite, got {v!r}")
            if v < 0:
                raise DomainError(f"coordinate {name} must be >= 0, got {v!r}")

    @property
    def total(self) -> float:
        return self.s + self.i + self.r

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.s, self.i, self.r)


def as_state_tuple(z: EpidemicState | Sequence[float]) -> tuple[float, float, float]:
    """Coerce a state-like argument to a validated (s, i, r) tuple."""
    if isinstance(z, EpidemicState):
        return z.as_tuple()
    s, i, r = (float(v) for v in z)
    return EpidemicState(s, i, r).as_tuple()
