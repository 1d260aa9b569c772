"""Frozen-regime vector fields, flow maps, and endemic equilibria.

For a fixed regime e the dynamics are the autonomous system

    dS/dt = lambda_in - mu S + lambda_loss R - beta_e S G(I)
    dI/dt = beta_e S G(I) - (mu + alpha + delta) I
    dR/dt = delta I - (mu + lambda_loss) R

whose flow map is computed by the adaptive integrator in :mod:`.ode`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import ode
from .errors import DomainError, NoEndemicEquilibriumError, NumericsError
from .incidence import IncidenceFunction
from .model import EpidemicState, ModelParams, as_state_tuple


@dataclass(frozen=True)
class VectorFieldEval:
    """The three time derivatives at a point."""

    ds: float
    di: float
    dr: float

    def as_array(self) -> np.ndarray:
        return np.array([self.ds, self.di, self.dr])


@dataclass(frozen=True)
class Equilibrium:
    """A certified stationary point of one frozen-regime subsystem."""

    state: EpidemicState
    regime: int
    residual: float


def _check_regime(params: ModelParams, e: int) -> None:
    if not 0 <= e < params.n_regimes:
        raise DomainError(f"regime {e} out of range 0..{params.n_regimes - 1}")


def rhs_closure(params: ModelParams, inc: IncidenceFunction, e: int):
    """Fast autonomous right-hand side for regime e: (s,i,r) -> (ds,di,dr)."""
    _check_regime(params, e)
    lam_in = params.lambda_in
    mu = params.mu
    lam = params.lambda_loss
    de = params.delta
    mad = params.removal_rate
    mulam = mu + lam
    beta = params.betas[e]
    g = inc.value_fn()

    def rhs(s: float, i: float, r: float):
        bsg = beta * s * g(i)
        return (lam_in - mu * s + lam * r - bsg, bsg - mad * i, de * i - mulam * r)

    return rhs


def vector_field(
    params: ModelParams,
    inc: IncidenceFunction,
    e: int,
    z: EpidemicState | Sequence[float],
) -> VectorFieldEval:
    """Evaluate the regime-e vector field at a nonnegative point."""
    s, i, r = as_state_tuple(z)
    ds, di, dr = rhs_closure(params, inc, e)(s, i, r)
    return VectorFieldEval(ds, di, dr)


def jacobian(
    params: ModelParams,
    inc: IncidenceFunction,
    e: int,
    z: EpidemicState | Sequence[float],
    *,
    fd_rel_step: float = 1e-6,
) -> np.ndarray:
    """3x3 Jacobian of the regime-e field.

    Analytic when the incidence kind provides G'; otherwise central finite
    differences of G with relative step ``fd_rel_step``. Accepts points a
    finite-difference probe away from the orthant boundary, so the state is
    not re-validated here.
    """
    _check_regime(params, e)
    if isinstance(z, EpidemicState):
        s, i, r = z.as_tuple()
    else:
        s, i, r = (float(v) for v in z)
    mu = params.mu
    lam = params.lambda_loss
    de = params.delta
    mad = params.removal_rate
    beta = params.betas[e]

    gfun = inc.value_fn()
    gi = gfun(i)
    if inc.has_derivative:
        gpi = inc.derivative(i)
    else:
        # user-supplied G may be undefined below 0, so clip the stencil
        h = fd_rel_step * max(abs(i), 1.0)
        hi = max(i + h, h)
        lo = max(i - h, 0.0)
        gpi = (gfun(hi) - gfun(lo)) / (hi - lo)

    return np.array(
        [
            [-mu - beta * gi, -beta * s * gpi, lam],
            [beta * gi, beta * s * gpi - mad, 0.0],
            [0.0, de, -(mu + lam)],
        ]
    )


def flow(
    params: ModelParams,
    inc: IncidenceFunction,
    e: int,
    z0: EpidemicState | Sequence[float],
    t: float,
    rtol: float = ode.DEFAULT_RTOL,
    atol: float = ode.DEFAULT_ATOL,
) -> EpidemicState:
    """The time-t flow map of regime e applied to z0."""
    if t < 0:
        raise DomainError("flow time must be >= 0")
    y0 = as_state_tuple(z0)
    rhs = rhs_closure(params, inc, e)
    y, _, _ = ode.integrate(rhs, y0, 0.0, t, rtol, atol)
    return EpidemicState(*y)


def deterministic_r0(params: ModelParams, inc: IncidenceFunction, e: int) -> float:
    """Reproduction ratio of the frozen regime-e subsystem."""
    _check_regime(params, e)
    return (
        params.lambda_in
        * params.betas[e]
        * inc.gprime0
        / (params.mu * params.removal_rate)
    )


def find_equilibrium(
    params: ModelParams,
    inc: IncidenceFunction,
    e: int,
    *,
    residual_tol: float | None = None,
    max_iter: int = 60,
) -> Equilibrium:
    """Endemic equilibrium of the frozen regime-e subsystem.

    Requires the regime's reproduction ratio to exceed 1. The starting guess
    comes from a long flow (t = 1e4) from an interior point, then damped
    Newton iterations polish it to the residual tolerance
    ``1e-12 * max(lambda_in/mu, 1)`` (stricter than the certified bound so
    round-trip checks have headroom).

    Raises
    ------
    NoEndemicEquilibriumError
        If the regime's reproduction ratio is <= 1 (the disease-free point
        (lambda_in/mu, 0, 0) is then the attractor).
    NumericsError
        If Newton fails to converge from two starting points.
    """
    r0e = deterministic_r0(params, inc, e)
    if r0e <= 1.0:
        raise NoEndemicEquilibriumError(
            f"regime {e} has reproduction ratio {r0e:.4g} <= 1; "
            "only the disease-free equilibrium exists"
        )
    scale = max(params.population_cap, 1.0)
    tol = residual_tol if residual_tol is not None else 1e-12 * scale

    rhs = rhs_closure(params, inc, e)

    def newton(z: np.ndarray) -> tuple[np.ndarray, float] | None:
        res = np.array(rhs(*z))
        rnorm = float(np.max(np.abs(res)))
        for _ in range(max_iter):
            if rnorm <= tol:
                return z, rnorm
            try:
                step = np.linalg.solve(jacobian(params, inc, e, z), -res)
            except np.linalg.LinAlgError:
                return None
            lam = 1.0
            for _ in range(40):
                znew = z + lam * step
                if (znew >= 0).all():
                    rnew = np.array(rhs(*znew))
                    rnew_norm = float(np.max(np.abs(rnew)))
                    if rnew_norm < rnorm:
                        z, res, rnorm = znew, rnew, rnew_norm
                        break
                lam *= 0.5
            else:
                return None
        return (z, rnorm) if rnorm <= tol else None

    cap = params.population_cap
    interior = (0.5 * cap, 0.02 * cap, 0.01 * cap)
    seed = flow(params, inc, e, interior, 1e4, rtol=1e-10, atol=1e-12)
    result = newton(np.array(seed.as_tuple()))
    if result is None:
        # restart from a different probe before giving up
        probe = flow(params, inc, e, (0.9 * cap, 0.05 * cap, 0.0), 1e4, rtol=1e-10, atol=1e-12)
        result = newton(np.array(probe.as_tuple()))
    if result is None:
        raise NumericsError(f"Newton did not converge for regime {e}")
    z, rnorm = result
    if z[1] <= 0:
        raise NumericsError(f"regime {e} Newton converged to a non-endemic point")
    return Equilibrium(state=EpidemicState(*z), regime=e, residual=rnorm)


def disease_free_equilibrium(params: ModelParams) -> EpidemicState:
    """The infection-free stationary point (lambda_in/mu, 0, 0)."""
    return EpidemicState(params.population_cap, 0.0, 0.0)
