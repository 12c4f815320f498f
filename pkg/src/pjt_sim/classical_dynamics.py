"""Classical trajectories of the three-mode crossing.

Mode-ell dynamics on R^2 x R^2 is Hamiltonian for H = |p|^2/2 + ell*|q|:

    qdot = p,    pdot = -ell * q / |q|      (zero force for ell = 0)

Two first integrals exist for every mode and drive all the verification here:
the energy E = H and the wedge invariant eta = q1 p2 - q2 p1 (the force is
radial, so angular momentum about the crossing point is conserved).  eta
measures the impact parameter with respect to the crossing set {q = 0} and
parameterizes the transition strength at a passage.

A crossing passage is a local minimum of |q| along the flow, i.e. a sign
change of g = q.p from negative to positive.  detect_crossing locates the
first such event by bisection on a dense-output interpolant, then
re-integrates to the event time so the reported state carries full
integrator accuracy.  The reported p_norm is the momentum the trajectory
would have on the crossing set itself, sqrt(2E), which is the quantity the
transition coefficient is built from (the geometric minimum sits at
|q| ~ |eta|/p_norm with momentum within O(|q|) of that value).

Integrator: Dormand-Prince 4(5) with error-per-unit-time control (accept
when err <= tol * h), so the global drift of the invariants stays at the
scale of settings.tol over order-one time spans.  The step is additionally
capped by h <= 0.02 + 0.2 |q|: the force stiffens like 1/|q| near the gap
and the cap keeps the g-monitor dense enough that no minimum is stepped
over.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from .errors import SingularityReached
from .pjt_model import Mode

__all__ = [
    "PhaseState",
    "CrossingEvent",
    "IntegratorSettings",
    "energy",
    "wedge_invariant",
    "integrate",
    "detect_crossing",
]


@dataclass
class PhaseState:
    """Classical point (q, p) with its time and mode tag."""

    q: np.ndarray
    p: np.ndarray
    t: float
    mode: Mode

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float).reshape(2).copy()
        self.p = np.asarray(self.p, dtype=float).reshape(2).copy()
        self.t = float(self.t)


@dataclass
class CrossingEvent:
    """Crossing passage: gap-distance minimum with the hop-relevant scalars."""

    t_star: float
    state: PhaseState
    eta: float      # wedge invariant q ^ p at the event
    p_norm: float   # sqrt(2E): momentum on the crossing set at this energy


@dataclass
class IntegratorSettings:
    tol: float = 1e-10        # error-per-unit-time target
    event_tol: float = 1e-10  # bisection tolerance on the event time
    q_floor: float = 1e-9     # |q| below this with eta ~ 0 is a singular hit


def energy(s: PhaseState) -> float:
    """E = |p|^2/2 + ell |q|; exactly conserved by the continuous flow."""
    return 0.5 * float(s.p @ s.p) + s.mode.ell * float(np.hypot(s.q[0], s.q[1]))


def wedge_invariant(s: PhaseState) -> float:
    """eta = q1 p2 - q2 p1; conserved by all three flows (radial force)."""
    return float(s.q[0] * s.p[1] - s.q[1] * s.p[0])


# ---------------------------------------------------------------------------
# numba kernel layer: state vector y = (q1, q2, p1, p2)

# Dormand-Prince 4(5) tableau; row 6 equals the 5th-order weights so the
# last stage is the FSAL evaluation at the step end.
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = np.zeros((7, 7))
_DP_A[1, 0] = 1 / 5
_DP_A[2, :2] = (3 / 40, 9 / 40)
_DP_A[3, :3] = (44 / 45, -56 / 15, 32 / 9)
_DP_A[4, :4] = (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729)
_DP_A[5, :5] = (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656)
_DP_A[6, :6] = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
_DP_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)

_STATUS_OK = 0
_STATUS_SINGULAR = 1


@njit(cache=True)
def _deriv(ell, y, f):
    f[0] = y[2]
    f[1] = y[3]
    if ell == 0:
        f[2] = 0.0
        f[3] = 0.0
    else:
        r = math.sqrt(y[0] * y[0] + y[1] * y[1])
        c = -ell / r
        f[2] = c * y[0]
        f[3] = c * y[1]


@njit(cache=True)
def _dp45_step(ell, y, h, k, ynew):
    """One Dormand-Prince step of (signed) size h; k[0] holds f(y) on entry.

    Writes the 5th-order result into ynew and f(ynew) into k[6] (FSAL).
    Returns the embedded error estimate (max-abs).
    """
    ytmp = np.empty(4)
    for i in range(1, 7):
        for m in range(4):
            acc = 0.0
            for j in range(i):
                acc += _DP_A[i, j] * k[j, m]
            ytmp[m] = y[m] + h * acc
        if i < 6:
            _deriv(ell, ytmp, k[i])
        else:
            for m in range(4):
                ynew[m] = ytmp[m]
            _deriv(ell, ynew, k[6])
    err = 0.0
    for m in range(4):
        acc = 0.0
        for j in range(7):
            acc += _DP_E[j] * k[j, m]
        a = abs(h * acc)
        if a > err:
            err = a
    return err


@njit(cache=True)
def _max_step(y):
    # cap keyed to |q|: resolves the 1/|q| stiffening near the gap
    r = math.sqrt(y[0] * y[0] + y[1] * y[1])
    return 0.02 + 0.2 * r


@njit(cache=True)
def _singular_hit(ell, y, q_floor):
    if ell == 0:
        return False
    r = math.sqrt(y[0] * y[0] + y[1] * y[1])
    if r >= q_floor:
        return False
    eta = y[0] * y[3] - y[1] * y[2]
    pn = math.sqrt(y[2] * y[2] + y[3] * y[3])
    return abs(eta) <= 1e-12 * (1.0 + pn)


@njit(cache=True)
def _advance(ell, y, t0, t1, tol, q_floor):
    """Adaptive integration t0 -> t1 (either direction), in place.  Returns status."""
    if t1 == t0:
        return _STATUS_OK
    k = np.empty((7, 4))
    ynew = np.empty(4)
    _deriv(ell, y, k[0])
    direction = 1.0 if t1 > t0 else -1.0
    t = t0
    h = direction * min(1e-3, _max_step(y))
    while (t1 - t) * direction > 0.0:
        if _singular_hit(ell, y, q_floor):
            return _STATUS_SINGULAR
        hmax = _max_step(y)
        if abs(h) > hmax:
            h = direction * hmax
        if abs(h) > abs(t1 - t):
            h = t1 - t
        err = _dp45_step(ell, y, h, k, ynew)
        tol_step = tol * abs(h)
        if err <= tol_step:
            t = t + h
            for m in range(4):
                y[m] = ynew[m]
            for m in range(4):
                k[0, m] = k[6, m]
            if err > 0.0:
                fac = 0.9 * (tol_step / err) ** 0.25
                if fac > 5.0:
                    fac = 5.0
                h = h * fac
            else:
                h = h * 5.0
        else:
            fac = 0.9 * (tol_step / err) ** 0.25
            if fac < 0.2:
                fac = 0.2
            h = h * fac
            if abs(h) < 1e-15:
                return _STATUS_SINGULAR
    return _STATUS_OK


@njit(cache=True)
def _hermite(y0, f0, y1, f1, h, theta, out):
    # cubic Hermite on one accepted step
    a = (1.0 - theta) * (1.0 - theta) * (1.0 + 2.0 * theta)
    b = theta * theta * (3.0 - 2.0 * theta)
    c = theta * (1.0 - theta) * (1.0 - theta) * h
    d = -theta * theta * (1.0 - theta) * h
    for m in range(4):
        out[m] = a * y0[m] + b * y1[m] + c * f0[m] + d * f1[m]


@njit(cache=True)
def _arm_gate(y):
    """Negative threshold below which g = q.p counts as a genuine approach.

    A state placed exactly at a minimum carries a residual g of the order of
    the event bisection accuracy; without hysteresis it would re-arm and
    re-fire the same minimum indefinitely.
    """
    return -1e-8 * (1.0 + y[0] * y[0] + y[1] * y[1] + y[2] * y[2] + y[3] * y[3])


@njit(cache=True)
def _advance_events(ell, y, t0, t1, tol, event_tol, q_floor, armed):
    """Advance until the first gap-distance minimum or until t1.

    The monitor g = q.p arms on g < -g_tol (approaching, with hysteresis
    g_tol = 1e-8 (1 + |y|^2) so the residual at a freshly located event
    cannot re-arm) and fires on the next accepted step whose endpoint has
    g >= 0.  The zero of g inside the step is bisected on the cubic Hermite
    interpolant, then the state is re-integrated from the step start to the
    event time.

    Returns (found, t_reached, armed, status); y holds the state at
    t_reached (event point if found, else t1).
    """
    if t1 <= t0:
        return 0, t0, armed, _STATUS_OK
    k = np.empty((7, 4))
    ynew = np.empty(4)
    ystep = np.empty(4)
    yint = np.empty(4)
    _deriv(ell, y, k[0])
    t = t0
    h = min(1e-3, _max_step(y))
    g = y[0] * y[2] + y[1] * y[3]
    if g < _arm_gate(y):
        armed = 1
    while t < t1:
        if _singular_hit(ell, y, q_floor):
            return 0, t, armed, _STATUS_SINGULAR
        hmax = _max_step(y)
        if h > hmax:
            h = hmax
        if h > t1 - t:
            h = t1 - t
        err = _dp45_step(ell, y, h, k, ynew)
        tol_step = tol * h
        if err <= tol_step:
            g_new = ynew[0] * ynew[2] + ynew[1] * ynew[3]
            if armed == 1 and g_new >= 0.0:
                # bisect g's upcrossing on the Hermite interpolant
                for m in range(4):
                    ystep[m] = y[m]
                lo, hi = 0.0, 1.0
                while (hi - lo) * h > event_tol:
                    mid = 0.5 * (lo + hi)
                    _hermite(ystep, k[0], ynew, k[6], h, mid, yint)
                    gm = yint[0] * yint[2] + yint[1] * yint[3]
                    if gm < 0.0:
                        lo = mid
                    else:
                        hi = mid
                t_star = t + 0.5 * (lo + hi) * h
                status = _advance(ell, ystep, t, t_star, tol, q_floor)
                for m in range(4):
                    y[m] = ystep[m]
                return 1, t_star, 0, status
            t = t + h
            for m in range(4):
                y[m] = ynew[m]
            for m in range(4):
                k[0, m] = k[6, m]
            if g_new < _arm_gate(ynew):
                armed = 1
            if err > 0.0:
                fac = 0.9 * (tol_step / err) ** 0.25
                if fac > 5.0:
                    fac = 5.0
                h = h * fac
            else:
                h = h * 5.0
        else:
            fac = 0.9 * (tol_step / err) ** 0.25
            if fac < 0.2:
                fac = 0.2
            h = h * fac
            if h < 1e-15:
                return 0, t, armed, _STATUS_SINGULAR
    return 0, t1, armed, _STATUS_OK


# ---------------------------------------------------------------------------
# public wrappers


def _pack(s: PhaseState) -> np.ndarray:
    return np.array([s.q[0], s.q[1], s.p[0], s.p[1]])


def _unpack(y: np.ndarray, t: float, mode: Mode) -> PhaseState:
    return PhaseState(q=y[:2].copy(), p=y[2:].copy(), t=t, mode=mode)


def integrate(s: PhaseState, t_end: float, settings: IntegratorSettings = None) -> PhaseState:
    """Advance the state to t_end (forward or backward) along its mode's flow."""
    if settings is None:
        settings = IntegratorSettings()
    y = _pack(s)
    status = _advance(s.mode.ell, y, s.t, float(t_end), settings.tol, settings.q_floor)
    if status == _STATUS_SINGULAR:
        raise SingularityReached(
            f"trajectory reached |q| < {settings.q_floor} with no wedge invariant"
        )
    return _unpack(y, float(t_end), s.mode)


def detect_crossing(
    s: PhaseState, t_end: float, settings: IntegratorSettings = None
) -> Optional[CrossingEvent]:
    """First gap-distance minimum in (s.t, t_end], or None.

    The event state is re-integrated to the bisected time, so its accuracy
    is that of the integrator, not of the interpolant.  p_norm is sqrt(2E)
    with E evaluated at the event: the crossing-set momentum of this energy
    shell (for passages that do not reach the crossing set, i.e. E < 0,
    p_norm is reported as 0, which corresponds to vanishing transfer).
    """
    if settings is None:
        settings = IntegratorSettings()
    y = _pack(s)
    armed0 = 1 if (y[0] * y[2] + y[1] * y[3]) < _arm_gate(y) else 0
    found, t_reached, _, status = _advance_events(
        s.mode.ell, y, s.t, float(t_end), settings.tol, settings.event_tol,
        settings.q_floor, armed0,
    )
    if status == _STATUS_SINGULAR:
        raise SingularityReached(
            f"trajectory reached |q| < {settings.q_floor} with no wedge invariant"
        )
    if not found:
        return None
    state = _unpack(y, t_reached, s.mode)
    e = energy(state)
    p_norm = math.sqrt(2.0 * e) if e > 0.0 else 0.0
    return CrossingEvent(
        t_star=t_reached, state=state, eta=wedge_invariant(state), p_norm=p_norm
    )
