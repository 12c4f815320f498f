"""Algebra of the pseudo Jahn-Teller potential.

The potential is the real symmetric traceless 3x3 matrix

    V(q) = [[q1, 0, q2/s2], [0, -q1, q2/s2], [q2/s2, q2/s2, 0]],  s2 = sqrt(2),

whose eigenvalues are -|q|, 0, +|q| for every q in R^2: the three surfaces
cross jointly at q = 0.  Everything here is closed form.  Projectors come
from the spectral polynomial of V (V satisfies V^3 = |q|^2 V), the branching
matrix and the transition coefficient are direct formula evaluations, and
the gauge matrices are the constant mixing matrix M and the momentum
rotation R(p).

Mode index convention used across the package: populations, matrix rows and
columns are ordered (Plus, Minus, Zero).
"""

import enum

import numpy as np

from .errors import DegenerateReference, OutOfRange, SingularPoint, ZeroMomentum

SQRT2 = np.sqrt(2.0)

# below this |q| the projectors are treated as singular
SINGULAR_TOL = 1e-12


class Mode(enum.Enum):
    """Adiabatic mode label; the value is the band index ell in {-1, 0, +1}."""

    PLUS = 1
    MINUS = -1
    ZERO = 0

    @property
    def ell(self):
        return self.value

    @property
    def index(self):
        """Position in the (Plus, Minus, Zero) ordering."""
        return MODE_ORDER.index(self)

    @classmethod
    def from_name(cls, name):
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise OutOfRange(f"unknown mode name {name!r}; expected plus/minus/zero")


MODE_ORDER = (Mode.PLUS, Mode.MINUS, Mode.ZERO)


def potential_matrix(q):
    """The 3x3 potential matrix at position q = (q1, q2)."""
    q1, q2 = float(q[0]), float(q[1])
    w = q2 / SQRT2
    return np.array([[q1, 0.0, w], [0.0, -q1, w], [w, w, 0.0]])


def eigenvalues(q):
    """Eigenvalues (-|q|, 0, +|q|) sorted ascending."""
    r = float(np.hypot(q[0], q[1]))
    return (-r, 0.0, r)


def projector(q, mode):
    """Rank-1 spectral projector of V(q) for the given mode.

    Closed form from the spectral polynomial: with r = |q|,

        P(+-) = (V^2 +- r V) / (2 r^2),    P(0) = Id - V^2 / r^2.

    Exact (branch free), but genuinely singular at q = 0 where the three
    eigenvalues collide; raises SingularPoint there.
    """
    r = float(np.hypot(q[0], q[1]))
    if r <= SINGULAR_TOL:
        raise SingularPoint(f"projectors undefined at |q| = {r:.3e}")
    v = potential_matrix(q)
    v2 = v @ v
    if mode is Mode.ZERO:
        return np.eye(3) - v2 / r**2
    return (v2 + mode.ell * r * v) / (2.0 * r**2)


def eigenvector(q, mode, reference):
    """Unit vector spanning Ran projector(q, mode), phased against `reference`.

    The sign is fixed so the inner product with `reference` is positive,
    which gives a continuous section in any region where the projected
    reference stays bounded away from zero.
    """
    ref = np.asarray(reference, dtype=float)
    u = projector(q, mode) @ ref
    n = np.linalg.norm(u)
    if n <= 1e-8 * np.linalg.norm(ref):
        raise DegenerateReference(
            f"reference has no component in mode {mode.name} eigenspace at q={tuple(q)}"
        )
    return u / n


def transition_coefficient(p, eta):
    """Landau-Zener-type transfer scale T = exp(-pi eta^2 / (2 |p|^3)).

    eta is the wedge invariant q ^ p evaluated at the crossing passage; for
    the epsilon-scaled hop coefficient pass eta / sqrt(epsilon).
    """
    pn = float(np.hypot(p[0], p[1]))
    if pn <= 1e-12:
        raise ZeroMomentum("transition coefficient undefined at p = 0")
    return float(np.exp(-np.pi * eta**2 / (2.0 * pn**3)))


def branching_matrix(T):
    """Doubly stochastic 3x3 matrix distributing in-mode mass to out-modes.

    Rows and columns ordered (Plus, Minus, Zero):

        [[(1-T)^2,  T^2,      2T(1-T)  ],
         [T^2,      (1-T)^2,  2T(1-T)  ],
         [2T(1-T),  2T(1-T),  (1-2T)^2 ]]
    """
    T = float(T)
    if not 0.0 <= T <= 1.0:
        raise OutOfRange(f"branching parameter T = {T} outside [0, 1]")
    u, c = 1.0 - T, 2.0 * T * (1.0 - T)
    return np.array(
        [
            [u * u, T * T, c],
            [T * T, u * u, c],
            [c, c, (1.0 - 2.0 * T) ** 2],
        ]
    )


def gauge_matrices(p):
    """The constant mixing matrix M and the momentum rotation R(p).

    M = (1/sqrt 2) [[1,1,0],[1,-1,0],[0,0,sqrt 2]] is its own inverse.
    R(p) = (1/|p|) [[|p|,0,0],[0,-p1,-p2],[0,p2,-p1]] rotates the potential
    frame along the momentum direction; invertible for every p != 0.
    """
    pn = float(np.hypot(p[0], p[1]))
    if pn <= 1e-12:
        raise ZeroMomentum("R(p) undefined at p = 0")
    m = np.array([[1.0, 1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 0.0, SQRT2]]) / SQRT2
    p1, p2 = float(p[0]), float(p[1])
    r = np.array([[pn, 0.0, 0.0], [0.0, -p1, -p2], [0.0, p2, -p1]]) / pn
    return m, r
