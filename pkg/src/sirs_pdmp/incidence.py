"""Incidence function family and validation of its structural assumptions.

The force of infection is ``beta * S * G(I)`` where G is a nonlinear shape
with G(0) = 0. Everything downstream needs two structural facts about G on
the population range [0, lambda_in/mu]:

* bounded growth: 0 < G(x) <= x * G'(0) for x > 0, so the linearization at
  zero dominates;
* the ratio g(x) = G(x)/x (extended by g(0) = G'(0)) is Lipschitz, with some
  finite constant theta.

``validate_assumptions`` checks both on a grid and estimates theta, which
feeds the persistence lower bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, InvalidIncidenceError
from .model import ModelParams


class IncidenceFunction:
    """Base class: a shape G with derivatives and the ratio g(x) = G(x)/x."""

    kind: str = "custom"
    #: True when derivative / second_derivative are analytic (not finite diff.)
    has_derivative: bool = False
    has_second_derivative: bool = False
    #: True when ratio_slope is analytic.
    has_ratio_slope: bool = False

    @property
    def gprime0(self) -> float:
        """Slope of G at zero."""
        raise NotImplementedError

    def value(self, x: float) -> float:
        raise NotImplementedError

    def derivative(self, x: float) -> float:
        raise NotImplementedError

    def second_derivative(self, x: float) -> float:
        raise NotImplementedError

    def ratio(self, x: float) -> float:
        """g(x) = G(x)/x, continuously extended by g(0) = G'(0)."""
        if x < 0:
            raise DomainError(f"incidence ratio needs x >= 0, got {x!r}")
        if x == 0.0:
            return self.gprime0
        return self.value(x) / x

    def ratio_slope(self, x: float) -> float:
        """g'(x) where the kind provides it analytically."""
        raise NotImplementedError

    def value_fn(self) -> Callable[[float], float]:
        """Plain closure computing G, for tight integration loops."""
        return self.value

    def _check_domain(self, x: float) -> None:
        if x < 0:
            raise DomainError(f"incidence evaluated at negative x = {x!r}")

    def params_dict(self) -> dict:
        """Parameters identifying this instance (for configs and reports)."""
        return {}


@dataclass(frozen=True)
class LinearIncidence(IncidenceFunction):
    """Bilinear incidence, G(x) = x."""

    kind = "linear"
    has_derivative = True
    has_second_derivative = True
    has_ratio_slope = True

    @property
    def gprime0(self) -> float:
        return 1.0

    def value(self, x):
        self._check_domain(x)
        return x

    def derivative(self, x):
        return 1.0

    def second_derivative(self, x):
        return 0.0

    def ratio_slope(self, x):
        return 0.0

    def value_fn(self):
        return lambda x: x


@dataclass(frozen=True)
class SaturatedIncidence(IncidenceFunction):
    """Saturating incidence, G(x) = x / (1 + a x)."""

    a: float
    kind = "saturated"
    has_derivative = True
    has_second_derivative = True
    has_ratio_slope = True

    def __post_init__(self):
        if not (math.isfinite(self.a) and self.a > 0):
            raise InvalidIncidenceError("saturation coefficient a must be > 0")

    @property
    def gprime0(self) -> float:
        return 1.0

    def value(self, x):
        self._check_domain(x)
        return x / (1.0 + self.a * x)

    def derivative(self, x):
        return 1.0 / (1.0 + self.a * x) ** 2

    def second_derivative(self, x):
        return -2.0 * self.a / (1.0 + self.a * x) ** 3

    def ratio_slope(self, x):
        return -self.a / (1.0 + self.a * x) ** 2

    def value_fn(self):
        a = self.a
        return lambda x: x / (1.0 + a * x)

    def params_dict(self):
        return {"a": self.a}


@dataclass(frozen=True)
class NonmonotonicIncidence(IncidenceFunction):
    """Non-monotonic incidence, G(x) = x / (1 + a x^2).

    Rises to a maximum at x = 1/sqrt(a) and then decays, modelling contact
    reduction when prevalence is high.
    """

    a: float
    kind = "nonmonotonic"
    has_derivative = True
    has_second_derivative = True
    has_ratio_slope = True

    def __post_init__(self):
        if not (math.isfinite(self.a) and self.a > 0):
            raise InvalidIncidenceError("inhibition coefficient a must be > 0")

    @property
    def gprime0(self) -> float:
        return 1.0

    def value(self, x):
        self._check_domain(x)
        return x / (1.0 + self.a * x * x)

    def derivative(self, x):
        q = 1.0 + self.a * x * x
        return (1.0 - self.a * x * x) / (q * q)

    def second_derivative(self, x):
        q = 1.0 + self.a * x * x
        return 2.0 * self.a * x * (self.a * x * x - 3.0) / (q * q * q)

    def ratio_slope(self, x):
        q = 1.0 + self.a * x * x
        return -2.0 * self.a * x / (q * q)

    def value_fn(self):
        a = self.a
        return lambda x: x / (1.0 + a * x * x)

    def params_dict(self):
        return {"a": self.a}


@dataclass(frozen=True)
class MediaExpIncidence(IncidenceFunction):
    """Exponentially damped incidence, G(x) = x * exp(-m x)."""

    m: float
    kind = "media1"
    has_derivative = True
    has_second_derivative = True
    has_ratio_slope = True

    def __post_init__(self):
        if not (math.isfinite(self.m) and self.m > 0):
            raise InvalidIncidenceError("damping coefficient m must be > 0")

    @property
    def gprime0(self) -> float:
        return 1.0

    def value(self, x):
        self._check_domain(x)
        return x * math.exp(-self.m * x)

    def derivative(self, x):
        return (1.0 - self.m * x) * math.exp(-self.m * x)

    def second_derivative(self, x):
        return self.m * (self.m * x - 2.0) * math.exp(-self.m * x)

    def ratio_slope(self, x):
        return -self.m * math.exp(-self.m * x)

    def value_fn(self):
        m = self.m
        exp = math.exp
        return lambda x: x * exp(-m * x)

    def params_dict(self):
        return {"m": self.m}


@dataclass(frozen=True)
class MediaSuppressedIncidence(IncidenceFunction):
    """Incidence reduced by a saturating awareness function,
    G(x) = x * (1 - reduction * f(x)).

    ``f`` must satisfy f(0) = 0, be nondecreasing and approach 1, and
    ``reduction`` in (0, 1) is the asymptotic fraction by which transmission
    is suppressed relative to the baseline rate. Monotonicity of ``f`` is
    sampled by ``validate_assumptions`` rather than proven.
    """

    reduction: float
    f: Callable[[float], float]
    fprime: Callable[[float], float] | None = None
    kind = "media2"
    has_derivative = False
    has_second_derivative = False

    def __post_init__(self):
        if not (math.isfinite(self.reduction) and 0 < self.reduction < 1):
            raise InvalidIncidenceError("reduction must lie in (0, 1)")
        f0 = self.f(0.0)
        if abs(f0) > 1e-12:
            raise InvalidIncidenceError(f"f(0) must be 0, got {f0!r}")
        object.__setattr__(self, "has_derivative", self.fprime is not None)
        object.__setattr__(self, "has_ratio_slope", self.fprime is not None)

    @property
    def gprime0(self) -> float:
        return 1.0

    def value(self, x):
        self._check_domain(x)
        return x * (1.0 - self.reduction * self.f(x))

    def derivative(self, x):
        if self.fprime is None:
            raise NotImplementedError("no analytic derivative without fprime")
        return 1.0 - self.reduction * (self.f(x) + x * self.fprime(x))

    def ratio_slope(self, x):
        if self.fprime is None:
            raise NotImplementedError("no analytic ratio slope without fprime")
        return -self.reduction * self.fprime(x)

    def value_fn(self):
        c, f = self.reduction, self.f
        return lambda x: x * (1.0 - c * f(x))

    def params_dict(self):
        return {"reduction": self.reduction}


class CustomIncidence(IncidenceFunction):
    """User-supplied G with optional analytic derivatives.

    When ``gprime`` is omitted, downstream consumers fall back to finite
    differences; ``gprime0`` is then mandatory.
    """

    kind = "custom"

    def __init__(self, g, gprime=None, gsecond=None, gprime0=None):
        if abs(g(0.0)) > 1e-12:
            raise InvalidIncidenceError("custom incidence must satisfy G(0) = 0")
        self._g = g
        self._gprime = gprime
        self._gsecond = gsecond
        self.has_derivative = gprime is not None
        self.has_second_derivative = gsecond is not None
        self.has_ratio_slope = False
        if gprime0 is not None:
            self._gprime0 = float(gprime0)
        elif gprime is not None:
            self._gprime0 = float(gprime(0.0))
        else:
            raise InvalidIncidenceError("custom incidence needs gprime or gprime0")
        if not (math.isfinite(self._gprime0) and self._gprime0 > 0):
            raise InvalidIncidenceError("G'(0) must be finite and > 0")

    @property
    def gprime0(self) -> float:
        return self._gprime0

    def value(self, x):
        self._check_domain(x)
        return self._g(x)

    def derivative(self, x):
        if self._gprime is None:
            raise NotImplementedError("custom incidence has no analytic derivative")
        return self._gprime(x)

    def second_derivative(self, x):
        if self._gsecond is None:
            raise NotImplementedError("custom incidence has no analytic G''")
        return self._gsecond(x)

    def value_fn(self):
        return self._g


_KINDS = {
    "linear": LinearIncidence,
    "saturated": SaturatedIncidence,
    "nonmonotonic": NonmonotonicIncidence,
    "media1": MediaExpIncidence,
    "media2": MediaSuppressedIncidence,
}


def make_incidence(kind: str, **params) -> IncidenceFunction:
    """Build a built-in incidence kind from keyword parameters.

    For ``media2`` without an explicit callable ``f``, a saturating shape
    f(x) = x / (half_saturation + x) is used.
    """
    if kind == "custom":
        return CustomIncidence(**params)
    cls = _KINDS.get(kind)
    if cls is None:
        raise InvalidIncidenceError(
            f"unknown incidence kind {kind!r}; expected one of "
            f"{sorted(_KINDS)} or 'custom'"
        )
    if kind == "media2" and "f" not in params:
        h = float(params.pop("half_saturation", 1.0))
        if not (math.isfinite(h) and h > 0):
            raise InvalidIncidenceError("half_saturation must be > 0")
        params["f"] = lambda x: x / (h + x)
        params["fprime"] = lambda x: h / (h + x) ** 2
    return cls(**params)


@dataclass(frozen=True)
class AssumptionReport:
    """Outcome of the structural checks on an incidence function.

    ``theta_estimate`` is a grid estimate of the Lipschitz constant of the
    ratio g on [0, lambda_in/mu]; it is an estimate, not a certified bound.
    """

    h1_ok: bool
    h2_ok: bool
    theta_estimate: float
    grid_n: int
    domain_upper: float
    theta_is_estimate: bool = True
    violations: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "h1_ok": self.h1_ok,
            "h2_ok": self.h2_ok,
            "theta_estimate": self.theta_estimate,
            "theta_is_estimate": self.theta_is_estimate,
            "grid_n": self.grid_n,
            "domain_upper": self.domain_upper,
            "violations": list(self.violations),
        }


def validate_assumptions(
    inc: IncidenceFunction, params: ModelParams, grid_n: int = 10_001
) -> AssumptionReport:
    """Check the growth bound and ratio Lipschitz-ness of G on a grid.

    The grid spans [0, lambda_in/mu] with ``grid_n`` points. The growth
    bound 0 < G(x) <= x G'(0) is tested at every interior point (a relative
    slack of 1e-9 absorbs round-off on the boundary case G(x) = x G'(0)).
    The Lipschitz estimate is max |g'| on the grid when the kind provides
    the analytic slope, otherwise the max divided-difference slope between
    consecutive grid points.

    Raises
    ------
    InvalidIncidenceError
        If G evaluates to a non-finite value anywhere on the grid.
    """
    if grid_n < 2:
        raise DomainError("grid_n must be >= 2")
    upper = params.population_cap
    xs = np.linspace(0.0, upper, grid_n)
    gp0 = inc.gprime0
    gfun = inc.value_fn()

    violations: list[str] = []
    gv = np.empty(grid_n)
    for k, x in enumerate(xs):
        v = gfun(float(x))
        if not math.isfinite(v):
            raise InvalidIncidenceError(f"G({x}) is not finite: {v!r}")
        gv[k] = v
    interior = xs[1:]
    vals = gv[1:]
    slack = 1e-9
    low_bad = vals <= 0.0
    high_bad = vals > interior * gp0 * (1.0 + slack)
    if low_bad.any():
        violations.append(
            f"G(x) <= 0 at x = {interior[low_bad][0]:.6g} (and "
            f"{int(low_bad.sum()) - 1} more grid points)"
        )
    if high_bad.any():
        violations.append(
            f"G(x) > x G'(0) at x = {interior[high_bad][0]:.6g} (and "
            f"{int(high_bad.sum()) - 1} more grid points)"
        )
    h1_ok = not (low_bad.any() or high_bad.any())

    if inc.has_ratio_slope:
        slopes = np.abs([inc.ratio_slope(float(x)) for x in xs])
        theta = float(slopes.max())
    else:
        ratios = np.empty(grid_n)
        ratios[0] = gp0
        ratios[1:] = vals / interior
        theta = float(np.max(np.abs(np.diff(ratios) / np.diff(xs))))

    h2_ok = math.isfinite(theta)
    if not h2_ok:
        violations.append("ratio slope estimate is not finite")

    if isinstance(inc, MediaSuppressedIncidence):
        fvals = np.array([inc.f(float(x)) for x in xs])
        if (np.diff(fvals) < -1e-12).any():
            h2_ok = False
            violations.append("media2 awareness function f is not nondecreasing")

    return AssumptionReport(
        h1_ok=h1_ok,
        h2_ok=h2_ok,
        theta_estimate=theta,
        grid_n=grid_n,
        domain_upper=upper,
        violations=tuple(violations),
    )
