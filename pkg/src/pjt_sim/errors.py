"""Exception types shared across the package."""


class PjtSimError(Exception):
    """Base class for all package-specific errors."""


class SingularPoint(PjtSimError):
    """Spectral projectors requested at (or too close to) the crossing q = 0."""


class DegenerateReference(PjtSimError):
    """Reference vector has (numerically) no component in the requested eigenspace."""


class ZeroMomentum(PjtSimError):
    """Operation undefined at p = 0 (transversality assumption violated)."""


class OutOfRange(PjtSimError):
    """Scalar argument outside its admissible interval."""


class SingularityReached(PjtSimError):
    """Classical trajectory ran into q = 0 with no angular momentum to deflect it."""


class ToleranceNotMet(PjtSimError):
    """Adaptive integrator could not satisfy the requested tolerance."""


class SchemaError(PjtSimError):
    """Configuration text violates the schema; carries every violation found."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class BoxTooSmall(PjtSimError):
    """Initial wavepacket mass outside the periodic box exceeds the guard threshold."""
