"""Fourier split-step reference solver for the three-band crossing equation.

Integrates i eps d_t psi = (-eps^2/2 Lap + V(q)) psi for psi(q) in C^3 on a
periodic square grid by Strang splitting K(dt/2) P(dt) K(dt/2).  The kinetic
half step K multiplies each Fourier coefficient by exp(-i (dt/2) eps |k|^2 / 2)
and is spectrally exact; the potential step P applies the 3x3 unitary
exp(-i dt V(q)/eps) pointwise in closed form.  Since V^3 = |q|^2 V, the
exponential is the quadratic polynomial

    exp(-i dt V/eps) = Id - i (sin th / |q|) V + ((cos th - 1)/|q|^2) V^2,

with th = dt |q| / eps.  Written through sinc(th) and sinc(th/2)^2 the
coefficients are smooth at q = 0, where the step is the identity; no
per-point eigensolver and no series branch is needed.

Both steps are whole-array numpy operations (the pointwise step and the
batched transforms are data-parallel; each step is a barrier), so results do
not depend on any parallel partition.

Fields are sampled as psi[j, k] = psi(q1_j, q2_k) with q_j = -L + j dx,
dx = 2L/N; the squared L^2 norm is the Riemann sum dx^2 sum |psi|^2.
"""

import functools
import math
import struct
from dataclasses import dataclass

import numpy as np
import scipy.fft
from scipy.special import erf

from .errors import BoxTooSmall, DegenerateReference, OutOfRange, ToleranceNotMet
from .pjt_model import SINGULAR_TOL, SQRT2, Mode, eigenvector

__all__ = [
    "Grid2D",
    "WaveField",
    "SplitStepConfig",
    "init_gaussian",
    "kinetic_half_step",
    "potential_step",
    "strang_step",
    "evolve",
    "populations",
    "dump_density",
]


@dataclass(frozen=True)
class Grid2D:
    """Periodic square grid on [-L, L)^2 with N points per axis."""

    half_width: float
    points_per_axis: int

    def __post_init__(self):
        n = self.points_per_axis
        if self.half_width <= 0.0:
            raise OutOfRange(f"half_width must be positive, got {self.half_width}")
        if n < 2 or n & (n - 1):
            raise OutOfRange(f"points_per_axis must be a power of two >= 2, got {n}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.points_per_axis

    def axis(self) -> np.ndarray:
        """Coordinates -L + j dx, j = 0..N-1 (q = 0 is on the grid)."""
        return -self.half_width + self.spacing * np.arange(self.points_per_axis)


@dataclass
class WaveField:
    """C^3-valued field psi[j, k, :] = psi(q1_j, q2_k) on a Grid2D."""

    psi: np.ndarray
    grid: Grid2D

    def norm(self) -> float:
        """L^2 norm by the Riemann sum (dx^2 sum |psi|^2)^{1/2}."""
        return float(np.sqrt(self.grid.spacing ** 2 * np.sum(np.abs(self.psi) ** 2)))

    def copy(self) -> "WaveField":
        return WaveField(psi=self.psi.copy(), grid=self.grid)


@dataclass
class SplitStepConfig:
    """Step size, scale parameter and output cadence; dt*n_steps is the horizon."""

    dt: float
    epsilon: float
    n_steps: int
    output_stride: int = 1

    def __post_init__(self):
        if self.dt <= 0.0:
            raise OutOfRange(f"dt must be positive, got {self.dt}")
        if self.epsilon <= 0.0:
            raise OutOfRange(f"epsilon must be positive, got {self.epsilon}")
        if self.n_steps < 1:
            raise OutOfRange(f"n_steps must be >= 1, got {self.n_steps}")
        if self.output_stride < 1:
            raise OutOfRange(f"output_stride must be >= 1, got {self.output_stride}")


# ---------------------------------------------------------------------------
# cached step tables (keyed by grid and step parameters)


@functools.lru_cache(maxsize=8)
def _kinetic_phase(grid: Grid2D, half_dt: float, epsilon: float) -> np.ndarray:
    """Diagonal Fourier multiplier exp(-i half_dt eps |k|^2 / 2), k = pi m / L."""
    k = 2.0 * np.pi * np.fft.fftfreq(grid.points_per_axis, d=grid.spacing)
    k2 = k[:, None] ** 2 + k[None, :] ** 2
    return np.exp(-0.5j * half_dt * epsilon * k2)


def _potential_arrays(grid: Grid2D):
    """Pointwise V and V^2 as (N, N, 3, 3) stacks."""
    q = grid.axis()
    q1 = q[:, None] * np.ones_like(q)[None, :]
    q2 = np.ones_like(q)[:, None] * q[None, :]
    n = grid.points_per_axis
    v = np.zeros((n, n, 3, 3))
    v[..., 0, 0] = q1
    v[..., 1, 1] = -q1
    v[..., 0, 2] = v[..., 2, 0] = q2 / SQRT2
    v[..., 1, 2] = v[..., 2, 1] = q2 / SQRT2
    return v, v @ v


@functools.lru_cache(maxsize=8)
def _potential_table(grid: Grid2D, dt: float, epsilon: float) -> np.ndarray:
    """Pointwise unitary exp(-i dt V(q)/eps) as an (N, N, 3, 3) stack."""
    v, v2 = _potential_arrays(grid)
    q = grid.axis()
    r = np.hypot(q[:, None], q[None, :])
    th = dt * r / epsilon
    # sin(th)/r = (dt/eps) sinc(th); (cos th - 1)/r^2 = -(dt/eps)^2 sinc(th/2)^2 / 2
    ca = -1j * (dt / epsilon) * np.sinc(th / np.pi)
    cb = -0.5 * (dt / epsilon) ** 2 * np.sinc(th / (2.0 * np.pi)) ** 2
    u = ca[..., None, None] * v + cb[..., None, None] * v2
    u[..., 0, 0] += 1.0
    u[..., 1, 1] += 1.0
    u[..., 2, 2] += 1.0
    return u


# ---------------------------------------------------------------------------
# steps


def kinetic_half_step(field: WaveField, dt: float, epsilon: float) -> WaveField:
    """Free flight for dt/2: multiply psi-hat by exp(-i (dt/2) eps |k|^2 / 2)."""
    phase = _kinetic_phase(field.grid, 0.5 * dt, epsilon)
    psi_hat = scipy.fft.fft2(field.psi, axes=(0, 1))
    psi_hat *= phase[..., None]
    return WaveField(psi=scipy.fft.ifft2(psi_hat, axes=(0, 1)), grid=field.grid)


def potential_step(field: WaveField, dt: float, epsilon: float) -> WaveField:
    """Pointwise exp(-i dt V(q)/eps); identity at q = 0."""
    u = _potential_table(field.grid, dt, epsilon)
    return WaveField(psi=np.einsum("jkab,jkb->jka", u, field.psi), grid=field.grid)


def strang_step(field: WaveField, cfg: SplitStepConfig) -> WaveField:
    """One step of K(dt/2) P(dt) K(dt/2)."""
    field = kinetic_half_step(field, cfg.dt, cfg.epsilon)
    field = potential_step(field, cfg.dt, cfg.epsilon)
    return kinetic_half_step(field, cfg.dt, cfg.epsilon)


def evolve(field: WaveField, cfg: SplitStepConfig):
    """Yield (step index, field) at step 0, every output_stride steps, and n_steps.

    Between outputs the adjacent kinetic half steps of consecutive Strang
    steps are merged into full steps; every yielded field sits at a true
    Strang time point.  The yielded field is freshly allocated at each
    output and safe to retain.
    """
    yield 0, field
    done = 0
    while done < cfg.n_steps:
        block = min(cfg.output_stride - done % cfg.output_stride,
                    cfg.n_steps - done)
        field = kinetic_half_step(field, cfg.dt, cfg.epsilon)
        field = potential_step(field, cfg.dt, cfg.epsilon)
        for _ in range(block - 1):
            field = kinetic_half_step(field, 2.0 * cfg.dt, cfg.epsilon)
            field = potential_step(field, cfg.dt, cfg.epsilon)
        field = kinetic_half_step(field, cfg.dt, cfg.epsilon)
        done += block
        yield done, field


# ---------------------------------------------------------------------------
# initial data and diagnostics


def _apply_potential(q1, q2, psi):
    """V(q) psi for broadcastable coordinate arrays and psi (..., 3)."""
    c = q2 / SQRT2
    out = np.empty_like(psi)
    out[..., 0] = q1 * psi[..., 0] + c * psi[..., 2]
    out[..., 1] = -q1 * psi[..., 1] + c * psi[..., 2]
    out[..., 2] = c * (psi[..., 0] + psi[..., 1])
    return out


def _reference_vector(q0: np.ndarray, mode: Mode) -> np.ndarray:
    """Eigenvector at the packet center, gauge-fixed by the e1, e2, e3 chain."""
    for k in range(3):
        ref = np.zeros(3)
        ref[k] = 1.0
        try:
            return eigenvector(q0, mode, ref)
        except DegenerateReference:
            continue
    raise DegenerateReference(f"no canonical basis vector overlaps mode {mode} at {q0}")


def init_gaussian(grid: Grid2D, q0, p0, epsilon: float, mode: Mode) -> WaveField:
    """Coherent state (eps pi)^{-1/2} e^{-|q-q0|^2/(2 eps)} e^{i p0.(q-q0)/eps} e_mode(q).

    The vector part is the mode's eigenvector field, gauge-aligned with the
    eigenvector at the packet center; points where that gauge degenerates
    (including q = 0) carry Gaussian mass below round-off and are set to
    zero.  The field is renormalized to unit L^2 norm.
    """
    q0 = np.asarray(q0, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    L = grid.half_width
    rt = math.sqrt(epsilon)
    inside = 1.0
    for c in q0:
        inside *= 0.5 * (erf((L - c) / rt) + erf((L + c) / rt))
    outside = 1.0 - inside
    if outside > 1e-10:
        raise BoxTooSmall(
            f"Gaussian mass {outside:.3e} outside the box exceeds 1e-10; "
            f"increase half_width (= {L}) or move q0 (= {q0})"
        )

    q = grid.axis()
    q1 = q[:, None] - q0[0]
    q2 = q[None, :] - q0[1]
    envelope = (epsilon * np.pi) ** -0.5 * np.exp(
        -(q1 ** 2 + q2 ** 2) / (2.0 * epsilon)
        + 1j * (p0[0] * q1 + p0[1] * q2) / epsilon
    )

    ref = _reference_vector(q0, mode)
    vec = np.broadcast_to(ref.astype(complex), envelope.shape + (3,)).copy()
    x1 = q[:, None] + 0.0 * q[None, :]
    x2 = 0.0 * q[:, None] + q[None, :]
    r = np.hypot(x1, x2)
    if mode is Mode.ZERO:
        vpsi = _apply_potential(x1, x2, vec)
        proj = vec - _apply_potential(x1, x2, vpsi) / np.where(r > 0, r, 1.0)[..., None] ** 2
    else:
        vpsi = _apply_potential(x1, x2, vec)
        v2psi = _apply_potential(x1, x2, vpsi)
        proj = (v2psi + mode.ell * r[..., None] * vpsi) / (2.0 * np.where(r > 0, r, 1.0)[..., None] ** 2)
    proj[r < SINGULAR_TOL] = 0.0
    nrm = np.sqrt(np.sum(np.abs(proj) ** 2, axis=-1))
    good = nrm > 1e-12
    proj[~good] = 0.0
    proj[good] /= nrm[good][..., None]

    field = WaveField(psi=envelope[..., None] * proj, grid=grid)
    total = field.norm()
    if abs(total - 1.0) >= 1e-6:
        raise ToleranceNotMet(
            f"discretized packet norm {total} deviates from 1 by >= 1e-6; grid under-resolved"
        )
    field.psi /= total
    return field


def populations(field: WaveField):
    """(n_plus, n_minus, n_zero): Riemann sums of |Pi^l(q) psi|^2.

    At grid points with |q| < 1e-12 the projectors of the fixed direction
    (1, 0) are used (component weights |psi_1|^2, |psi_2|^2, |psi_3|^2).
    """
    grid = field.grid
    q = grid.axis()
    x1 = q[:, None] + 0.0 * q[None, :]
    x2 = 0.0 * q[:, None] + q[None, :]
    r = np.hypot(x1, x2)
    sing = r < SINGULAR_TOL
    r2safe = np.where(sing, 1.0, r * r)[..., None]

    psi = field.psi
    vpsi = _apply_potential(x1, x2, psi)
    v2psi = _apply_potential(x1, x2, vpsi)
    p_plus = (v2psi + r[..., None] * vpsi) / (2.0 * r2safe)
    p_minus = (v2psi - r[..., None] * vpsi) / (2.0 * r2safe)
    p_zero = psi - v2psi / r2safe
    if np.any(sing):
        for comp, arr in enumerate((p_plus, p_minus, p_zero)):
            arr[sing] = 0.0
            arr[sing, comp] = psi[sing, comp]

    w = grid.spacing ** 2
    return tuple(
        float(w * np.sum(np.abs(arr) ** 2)) for arr in (p_plus, p_minus, p_zero)
    )


def dump_density(field: WaveField, t: float, fh) -> None:
    """Append one |psi|^2 snapshot: header (N, L, t) then row-major data.

    All values are little-endian 64-bit floats; the density is summed over
    the three components, rows indexed by q1.
    """
    grid = field.grid
    fh.write(struct.pack("<3d", float(grid.points_per_axis), grid.half_width, t))
    dens = np.sum(np.abs(field.psi) ** 2, axis=-1)
    fh.write(dens.astype("<f8").tobytes())
