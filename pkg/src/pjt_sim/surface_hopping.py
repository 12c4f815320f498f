"""Monte-Carlo transport of mode populations through the crossing.

The initial quantum state is a semiclassical Gaussian on one mode; its
phase-space density is again Gaussian, with variance epsilon/2 per axis in
both position and momentum.  The algorithm samples that density with
weighted particles, transports each particle along its mode's classical
flow, and at every gap-distance minimum (local minimum of |q| along the
trajectory) splits the particle into the three modes, distributing its
weight with the branching matrix at

    T* = exp(-pi eta^2 / (2 epsilon |p*|^3)),

where eta is the particle's wedge invariant and |p*| its crossing-set
momentum sqrt(2E).  Weight is transported deterministically (no stochastic
mode switching), so the only randomness is the initial sampling.  Children
below the pruning threshold are dropped into a pruned-mass account, keeping

    sum of weights + pruned mass = 1

exact at all times.  Populations are weight sums per mode.

Determinism: every particle owns a counter-based RNG stream keyed by
(seed, particle index), splitting is particle-local, and reductions run in
fixed index order, so results are bitwise reproducible for a given
(seed, n_particles) regardless of how the work is scheduled.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .classical_dynamics import (
    IntegratorSettings,
    PhaseState,
    CrossingEvent,
    _advance_events,
)
from .errors import SingularityReached, ZeroMomentum
from .pjt_model import MODE_ORDER, Mode, branching_matrix, transition_coefficient

__all__ = [
    "Particle",
    "Ensemble",
    "HoppingConfig",
    "PopulationSeries",
    "sample_initial_ensemble",
    "hop_split",
    "run",
]

_ELL = np.array([1, -1, 0], dtype=np.int64)  # ell per mode index (+, -, 0)


@dataclass
class Particle:
    """Weighted phase-space sample; armed while approaching the gap."""

    state: PhaseState
    weight: float
    armed: bool = True


@dataclass
class HoppingConfig:
    epsilon: float
    n_particles: int
    seed: int
    q0: np.ndarray
    p0: np.ndarray
    t_grid: np.ndarray
    initial_mode: Mode = Mode.PLUS
    weight_floor: float = 1e-8
    settings: IntegratorSettings = field(default_factory=IntegratorSettings)

    def __post_init__(self):
        self.q0 = np.asarray(self.q0, dtype=float).reshape(2)
        self.p0 = np.asarray(self.p0, dtype=float).reshape(2)
        self.t_grid = np.asarray(self.t_grid, dtype=float).reshape(-1)
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if self.t_grid.size < 1 or self.t_grid[0] != 0.0 or np.any(np.diff(self.t_grid) <= 0):
            raise ValueError("t_grid must increase strictly from 0")


@dataclass
class Ensemble:
    """Flat particle storage: row i is particle i's (q1, q2, p1, p2)."""

    y: np.ndarray
    mode_idx: np.ndarray
    weights: np.ndarray
    armed: np.ndarray
    t: float

    @property
    def n(self):
        return self.y.shape[0]

    def mode_weights(self):
        """Weight sum per mode in (Plus, Minus, Zero) order, fixed index order."""
        return np.array([float(np.sum(self.weights[self.mode_idx == j])) for j in range(3)])


@dataclass
class PopulationSeries:
    """Per output time: populations (n+, n-, n0) and cumulative pruned mass."""

    times: np.ndarray
    values: np.ndarray       # shape (n_times, 3), ordered (+, -, 0)
    pruned_mass: np.ndarray  # shape (n_times,)


def sample_initial_ensemble(cfg: HoppingConfig) -> Ensemble:
    """Draw the Gaussian phase-space ensemble, one RNG stream per particle.

    q ~ Normal(q0, (eps/2) Id), p ~ Normal(p0, (eps/2) Id), all weights
    1/n (the last weight is nudged so the total is exactly 1).  Particles
    start armed iff they are moving toward the gap (q.p < 0).
    """
    n = cfg.n_particles
    sig = math.sqrt(cfg.epsilon / 2.0)
    y = np.empty((n, 4))
    for i in range(n):
        rng = np.random.Generator(
            np.random.Philox(key=np.array([cfg.seed, i], dtype=np.uint64))
        )
        zs = rng.standard_normal(4)
        y[i, 0] = cfg.q0[0] + sig * zs[0]
        y[i, 1] = cfg.q0[1] + sig * zs[1]
        y[i, 2] = cfg.p0[0] + sig * zs[2]
        y[i, 3] = cfg.p0[1] + sig * zs[3]
    weights = np.full(n, 1.0 / n)
    for _ in range(3):
        gap = 1.0 - float(np.sum(weights))
        if gap == 0.0:
            break
        weights[-1] += gap
    mode_idx = np.full(n, cfg.initial_mode.index, dtype=np.int64)
    gate = -1e-8 * (1.0 + np.sum(y * y, axis=1))
    armed = (y[:, 0] * y[:, 2] + y[:, 1] * y[:, 3] < gate).astype(np.uint8)
    return Ensemble(y=y, mode_idx=mode_idx, weights=weights, armed=armed, t=0.0)


def hop_split(part: Particle, event: CrossingEvent, epsilon: float):
    """Split a particle at a crossing passage into the three modes.

    The children share the event's phase-space point, carry modes
    (+, -, 0), weights w * B(T*)[:, parent mode], and are disarmed until
    they approach the gap again.
    """
    if event.p_norm <= 1e-12:
        raise ZeroMomentum("crossing passage with vanishing crossing-set momentum")
    t_star = transition_coefficient(
        np.array([event.p_norm, 0.0]), event.eta / math.sqrt(epsilon)
    )
    col = branching_matrix(t_star)[:, part.state.mode.index]
    children = []
    for mode, w in zip(MODE_ORDER, col):
        st = PhaseState(
            q=event.state.q.copy(), p=event.state.p.copy(),
            t=event.t_star, mode=mode,
        )
        children.append(Particle(state=st, weight=part.weight * w, armed=False))
    return tuple(children)


_STACK_CAP = 64


@njit(cache=True)
def _interval_kernel(y, mode_idx, weights, armed, t0, t1, eps, tol, event_tol,
                     q_floor, wfloor, out_y, out_mode, out_w, out_armed):
    """Advance every particle from t0 to t1, splitting at gap minima.

    Children are processed depth-first from a fixed-capacity local stack;
    finished particles land in the out arrays in deterministic order.
    Returns (status, n_out, pruned): status 0 ok, 1 singular hit,
    2 stack overflow, 3 out-array overflow.
    """
    n = y.shape[0]
    cap_out = out_y.shape[0]
    n_out = 0
    pruned = 0.0
    sy = np.empty((_STACK_CAP, 4))
    st = np.empty(_STACK_CAP)
    sm = np.empty(_STACK_CAP, dtype=np.int64)
    sw = np.empty(_STACK_CAP)
    sa = np.empty(_STACK_CAP, dtype=np.uint8)
    yw = np.empty(4)
    for i in range(n):
        sp = 0
        for m in range(4):
            sy[0, m] = y[i, m]
        st[0] = t0
        sm[0] = mode_idx[i]
        sw[0] = weights[i]
        sa[0] = armed[i]
        sp = 1
        while sp > 0:
            sp -= 1
            for m in range(4):
                yw[m] = sy[sp, m]
            t_cur = st[sp]
            midx = sm[sp]
            w = sw[sp]
            arm = sa[sp]
            ell = _ELL[midx]
            found, t_reached, arm_f, status = _advance_events(
                ell, yw, t_cur, t1, tol, event_tol, q_floor, arm
            )
            if status != 0:
                return 1, n_out, pruned
            if found == 1:
                eta = yw[0] * yw[3] - yw[1] * yw[2]
                e2 = yw[2] * yw[2] + yw[3] * yw[3] + 2.0 * ell * math.sqrt(
                    yw[0] * yw[0] + yw[1] * yw[1]
                )  # 2E at the event
                if e2 > 1e-24:
                    pn = math.sqrt(e2)
                    tc = math.exp(-math.pi * eta * eta / (2.0 * eps * pn * pn * pn))
                    u = 1.0 - tc
                    cross = 2.0 * tc * u
                    if midx == 0:
                        b0, b1, b2 = u * u, tc * tc, cross
                    elif midx == 1:
                        b0, b1, b2 = tc * tc, u * u, cross
                    else:
                        b0, b1, b2 = cross, cross, (1.0 - 2.0 * tc) ** 2
                    if sp + 3 > _STACK_CAP:
                        return 2, n_out, pruned
                    # push children in reverse so they pop in (+, -, 0) order
                    for child in (2, 1, 0):
                        wc = w * (b0 if child == 0 else (b1 if child == 1 else b2))
                        if wc < wfloor:
                            pruned += wc
                        else:
                            for m in range(4):
                                sy[sp, m] = yw[m]
                            st[sp] = t_reached
                            sm[sp] = child
                            sw[sp] = wc
                            sa[sp] = 0
                            sp += 1
                else:
                    # passage that never reaches the crossing set: no transfer
                    if sp + 1 > _STACK_CAP:
                        return 2, n_out, pruned
                    for m in range(4):
                        sy[sp, m] = yw[m]
                    st[sp] = t_reached
                    sm[sp] = midx
                    sw[sp] = w
                    sa[sp] = 0
                    sp += 1
            else:
                if n_out >= cap_out:
                    return 3, n_out, pruned
                for m in range(4):
                    out_y[n_out, m] = yw[m]
                out_mode[n_out] = midx
                out_w[n_out] = w
                out_armed[n_out] = arm_f
                n_out += 1
    return 0, n_out, pruned


def _advance_interval(ens: Ensemble, t1: float, cfg: HoppingConfig):
    """One output interval for the whole ensemble; returns (ensemble, pruned)."""
    s = cfg.settings
    cap = 4 * ens.n + 64
    while True:
        out_y = np.empty((cap, 4))
        out_mode = np.empty(cap, dtype=np.int64)
        out_w = np.empty(cap)
        out_armed = np.empty(cap, dtype=np.uint8)
        status, n_out, pruned = _interval_kernel(
            ens.y, ens.mode_idx, ens.weights, ens.armed, ens.t, t1,
            cfg.epsilon, s.tol, s.event_tol, s.q_floor, cfg.weight_floor,
            out_y, out_mode, out_w, out_armed,
        )
        if status == 0:
            return (
                Ensemble(
                    y=out_y[:n_out].copy(), mode_idx=out_mode[:n_out].copy(),
                    weights=out_w[:n_out].copy(), armed=out_armed[:n_out].copy(),
                    t=t1,
                ),
                pruned,
            )
        if status == 1:
            raise SingularityReached(
                "a sampled trajectory hit the crossing point head-on"
            )
        if status == 2:
            raise RuntimeError("crossing cascade exceeded the per-particle stack")
        cap *= 4


def run(cfg: HoppingConfig) -> PopulationSeries:
    """Propagate the sampled ensemble over cfg.t_grid and record populations."""
    ens = sample_initial_ensemble(cfg)
    n_t = cfg.t_grid.size
    values = np.empty((n_t, 3))
    pruned_track = np.empty(n_t)
    values[0] = ens.mode_weights()
    pruned = 0.0
    pruned_track[0] = 0.0
    for k in range(1, n_t):
        ens, dp = _advance_interval(ens, float(cfg.t_grid[k]), cfg)
        pruned += dp
        values[k] = ens.mode_weights()
        pruned_track[k] = pruned
    return PopulationSeries(
        times=cfg.t_grid.copy(), values=values, pruned_mass=pruned_track
    )
