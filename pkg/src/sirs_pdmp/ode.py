"""Adaptive Dormand-Prince 5(4) integrator specialized to 3-state systems.

The compartment dynamics are smooth and non-stiff, but the hybrid simulation
integrates millions of short inter-jump segments, so this module keeps the
state as three scalars and avoids array allocation entirely. Features:

* embedded 5(4) error estimate with PI step-size control (the classic
  0.17/0.04 exponent pair, safety 0.9, growth clamped to [0.1, 10]);
* fourth-order dense output used to fill uniform output grids without
  constraining the step sequence;
* a positivity guard: accepted steps may not take any coordinate below
  ``-pos_tol``; smaller undershoots are clamped to 0 (the model is
  positivity-invariant, so violations are pure truncation noise);
* optional absorbing floor for the infective coordinate: once it drops
  below the floor it is set to exactly 0, which the vector field preserves.

The right-hand side is autonomous: ``rhs(s, i, r) -> (ds, di, dr)``.
"""

from __future__ import annotations

import math

from .errors import DomainError, NumericsError, StiffnessError

# Dormand-Prince 5(4) tableau
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = (
    9017 / 3168,
    -355 / 33,
    46732 / 5247,
    49 / 176,
    -5103 / 18656,
)
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# difference between the 5th- and 4th-order weights
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)
# dense-output polynomial, columns are coefficients of x, x^2, x^3, x^4
_P = (
    (1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432),
    (0.0, 0.0, 0.0, 0.0),
    (0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799),
    (0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072),
    (0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632),
    (0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844),
    (0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423),
)

_SAFETY = 0.9
_MIN_FACTOR = 0.1
_MAX_FACTOR = 10.0
_EXPO = 0.17  # ~1/5 with PI damping
_BETA = 0.04

DEFAULT_RTOL = 1e-8
DEFAULT_ATOL = 1e-10

_MAX_STEPS = 10_000_000


def _initial_step(rhs, y, f, t_span, rtol, atol):
    """Cheap starting step: a fraction of the state scale over the slope."""
    s, i, r = y
    fs, fi, fr = f
    d0 = max(abs(s), abs(i), abs(r), 1.0)
    d1 = max(abs(fs), abs(fi), abs(fr))
    if d1 == 0.0:
        return t_span
    return min(0.01 * d0 / d1, t_span)


def integrate(
    rhs,
    y0,
    t0: float,
    t1: float,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    *,
    h0: float | None = None,
    grid=None,
    sink=None,
    i_floor: float | None = None,
    pos_tol: float | None = None,
):
    """Integrate from t0 to t1, hitting t1 exactly.

    Parameters
    ----------
    rhs : callable
        Autonomous right-hand side ``(s, i, r) -> (ds, di, dr)``.
    y0 : tuple of float
        Initial state.
    h0 : float, optional
        Starting step size (e.g. carried over from the previous segment).
    grid : sequence of float, optional
        Strictly increasing output times inside (t0, t1); each is evaluated
        from the dense interpolant and passed to ``sink(t, s, i, r)``.
    i_floor : float, optional
        Absorb the infective coordinate to exactly 0 once it falls below
        this value (only meaningful for decaying epidemics).
    pos_tol : float, optional
        Positivity slack; defaults to ``atol``.

    Returns
    -------
    (y, h_next, absorbed) : final state tuple, suggested next step size,
    and whether the infective floor was triggered.
    """
    if t1 < t0:
        raise DomainError(f"integration span is negative: [{t0}, {t1}]")
    s, i, r = (float(v) for v in y0)
    if t1 == t0:
        return (s, i, r), h0 or 0.0, False

    if pos_tol is None:
        pos_tol = atol
    span = t1 - t0
    fs, fi, fr = rhs(s, i, r)
    if h0 is not None and h0 > 0:
        h = min(h0, span)
    else:
        h = _initial_step(rhs, (s, i, r), (fs, fi, fr), span, rtol, atol)

    grid_idx = 0
    n_grid = len(grid) if grid is not None else 0

    t = t0
    facold = 1e-4
    absorbed = False
    hit_end = False
    steps = 0
    while not hit_end:
        steps += 1
        if steps > _MAX_STEPS:
            raise NumericsError(f"step budget exhausted at t = {t:.6g}")
        if h < 1e-14 * max(abs(t), 1.0):
            raise StiffnessError(f"step size underflow at t = {t:.6g}")
        if t + h >= t1:
            h = t1 - t
            hit_end = True

        k2s = s + h * (_A21 * fs)
        k2i = i + h * (_A21 * fi)
        k2r = r + h * (_A21 * fr)
        f2s, f2i, f2r = rhs(k2s, k2i, k2r)

        k3s = s + h * (_A31 * fs + _A32 * f2s)
        k3i = i + h * (_A31 * fi + _A32 * f2i)
        k3r = r + h * (_A31 * fr + _A32 * f2r)
        f3s, f3i, f3r = rhs(k3s, k3i, k3r)

        k4s = s + h * (_A41 * fs + _A42 * f2s + _A43 * f3s)
        k4i = i + h * (_A41 * fi + _A42 * f2i + _A43 * f3i)
        k4r = r + h * (_A41 * fr + _A42 * f2r + _A43 * f3r)
        f4s, f4i, f4r = rhs(k4s, k4i, k4r)

        k5s = s + h * (_A51 * fs + _A52 * f2s + _A53 * f3s + _A54 * f4s)
        k5i = i + h * (_A51 * fi + _A52 * f2i + _A53 * f3i + _A54 * f4i)
        k5r = r + h * (_A51 * fr + _A52 * f2r + _A53 * f3r + _A54 * f4r)
        f5s, f5i, f5r = rhs(k5s, k5i, k5r)

        k6s = s + h * (_A61 * fs + _A62 * f2s + _A63 * f3s + _A64 * f4s + _A65 * f5s)
        k6i = i + h * (_A61 * fi + _A62 * f2i + _A63 * f3i + _A64 * f4i + _A65 * f5i)
        k6r = r + h * (_A61 * fr + _A62 * f2r + _A63 * f3r + _A64 * f4r + _A65 * f5r)
        f6s, f6i, f6r = rhs(k6s, k6i, k6r)

        ys = s + h * (_B1 * fs + _B3 * f3s + _B4 * f4s + _B5 * f5s + _B6 * f6s)
        yi = i + h * (_B1 * fi + _B3 * f3i + _B4 * f4i + _B5 * f5i + _B6 * f6i)
        yr = r + h * (_B1 * fr + _B3 * f3r + _B4 * f4r + _B5 * f5r + _B6 * f6r)
        f7s, f7i, f7r = rhs(ys, yi, yr)

        es = h * (_E1 * fs + _E3 * f3s + _E4 * f4s + _E5 * f5s + _E6 * f6s + _E7 * f7s)
        ei = h * (_E1 * fi + _E3 * f3i + _E4 * f4i + _E5 * f5i + _E6 * f6i + _E7 * f7i)
        er = h * (_E1 * fr + _E3 * f3r + _E4 * f4r + _E5 * f5r + _E6 * f6r + _E7 * f7r)

        scs = atol + rtol * max(abs(s), abs(ys))
        sci = atol + rtol * max(abs(i), abs(yi))
        scr = atol + rtol * max(abs(r), abs(yr))
        err = math.sqrt(((es / scs) ** 2 + (ei / sci) ** 2 + (er / scr) ** 2) / 3.0)

        if err > 1.0:
            hit_end = False
            h *= max(_MIN_FACTOR, _SAFETY / err**_EXPO)
            continue
        if ys < -pos_tol or yi < -pos_tol or yr < -pos_tol:
            # positivity violation beyond tolerance: the faces are invariant,
            # so this is truncation noise; halve and retry
            hit_end = False
            h *= 0.5
            continue

        # dense output for pending grid points inside (t, t + h]
        if grid_idx < n_grid and grid[grid_idx] <= t + h:
            q0 = (
                fs * _P[0][0],
                fs * _P[0][1] + f3s * _P[2][1] + f4s * _P[3][1] + f5s * _P[4][1] + f6s * _P[5][1] + f7s * _P[6][1],
                fs * _P[0][2] + f3s * _P[2][2] + f4s * _P[3][2] + f5s * _P[4][2] + f6s * _P[5][2] + f7s * _P[6][2],
                fs * _P[0][3] + f3s * _P[2][3] + f4s * _P[3][3] + f5s * _P[4][3] + f6s * _P[5][3] + f7s * _P[6][3],
            )
            q1 = (
                fi * _P[0][0],
                fi * _P[0][1] + f3i * _P[2][1] + f4i * _P[3][1] + f5i * _P[4][1] + f6i * _P[5][1] + f7i * _P[6][1],
                fi * _P[0][2] + f3i * _P[2][2] + f4i * _P[3][2] + f5i * _P[4][2] + f6i * _P[5][2] + f7i * _P[6][2],
                fi * _P[0][3] + f3i * _P[2][3] + f4i * _P[3][3] + f5i * _P[4][3] + f6i * _P[5][3] + f7i * _P[6][3],
            )
            q2 = (
                fr * _P[0][0],
                fr * _P[0][1] + f3r * _P[2][1] + f4r * _P[3][1] + f5r * _P[4][1] + f6r * _P[5][1] + f7r * _P[6][1],
                fr * _P[0][2] + f3r * _P[2][2] + f4r * _P[3][2] + f5r * _P[4][2] + f6r * _P[5][2] + f7r * _P[6][2],
                fr * _P[0][3] + f3r * _P[2][3] + f4r * _P[3][3] + f5r * _P[4][3] + f6r * _P[5][3] + f7r * _P[6][3],
            )
            while grid_idx < n_grid and grid[grid_idx] <= t + h:
                tg = grid[grid_idx]
                x = (tg - t) / h
                gs = s + h * x * (q0[0] + x * (q0[1] + x * (q0[2] + x * q0[3])))
                gi = i + h * x * (q1[0] + x * (q1[1] + x * (q1[2] + x * q1[3])))
                gr = r + h * x * (q2[0] + x * (q2[1] + x * (q2[2] + x * q2[3])))
                sink(tg, gs, gi, gr)
                grid_idx += 1

        t = t + h
        s, i, r = ys, yi, yr
        # clamp round-off undershoots; the faces are invariant for the model
        if s < 0.0:
            s = 0.0
        if i < 0.0:
            i = 0.0
        if r < 0.0:
            r = 0.0
        if i_floor is not None and 0.0 < i < i_floor:
            i = 0.0
            absorbed = True
        fs, fi, fr = f7s, f7i, f7r
        if i != yi or s != ys or r != yr:
            fs, fi, fr = rhs(s, i, r)

        if err > 0.0:
            fac = err**_EXPO / facold**_BETA
            h *= min(_MAX_FACTOR, max(_MIN_FACTOR, _SAFETY / fac))
        else:
            h *= _MAX_FACTOR
        facold = max(err, 1e-4)

    return (s, i, r), h, absorbed
