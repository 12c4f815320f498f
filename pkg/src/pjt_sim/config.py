"""Flat key=value experiment configuration.

One ``key = value`` pair per line; blank lines and ``#`` comments are
ignored.  Vectors are comma-separated pairs.  Unknown keys, missing
required keys, and out-of-range values are all collected and reported in a
single SchemaError.

The output cadence is shared between methods: the horizon is cut into
n_steps = ceil(t_final/dt) grid steps rounded up to a multiple of
(n_outputs - 1), so the output times k*stride*dt_eff land exactly on grid
steps and both methods report at identical times.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import SchemaError
from .pjt_model import Mode

__all__ = ["ExperimentConfig", "parse_config", "serialize_config", "output_times"]

_METHODS = ("hopping", "grid", "both", "verify-scattering", "trajectory")

_DEFAULTS = {
    "seed": 0,
    "n_outputs": 41,
    "n_particles": 10000,
    "weight_floor": 1e-8,
    "initial_mode": "plus",
    "grid_half_width": 3.0,
    "grid_points": 512,
    "dt": 2.5e-4,
    "output": "-",
}


@dataclass
class ExperimentConfig:
    """Validated experiment description (one method run, or both)."""

    method: str
    epsilon: float
    q0_scaled: np.ndarray          # packet center in units of sqrt(epsilon)
    p0: np.ndarray
    t_final: float
    seed: int = 0
    n_outputs: int = 41
    n_particles: int = 10000
    weight_floor: float = 1e-8
    initial_mode: str = "plus"
    grid_half_width: float = 3.0
    grid_points: int = 512
    dt: float = 2.5e-4
    output: str = "-"

    @property
    def q0(self) -> np.ndarray:
        return math.sqrt(self.epsilon) * self.q0_scaled

    @property
    def mode(self) -> Mode:
        return Mode.from_name(self.initial_mode)


def output_times(cfg: ExperimentConfig):
    """(times, n_steps, dt_eff, stride): shared output grid for both methods."""
    n_blocks = max(cfg.n_outputs - 1, 1)
    n_steps = int(math.ceil(cfg.t_final / cfg.dt))
    n_steps = ((n_steps + n_blocks - 1) // n_blocks) * n_blocks
    dt_eff = cfg.t_final / n_steps
    stride = n_steps // n_blocks
    times = np.arange(cfg.n_outputs) * (stride * dt_eff)
    times[-1] = cfg.t_final
    return times, n_steps, dt_eff, stride


def _parse_float(raw, key, errors):
    try:
        return float(raw)
    except ValueError:
        errors.append(f"{key}: not a number: {raw!r}")
        return None


def _parse_int(raw, key, errors):
    try:
        return int(raw)
    except ValueError:
        errors.append(f"{key}: not an integer: {raw!r}")
        return None


def _parse_vec2(raw, key, errors):
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 2:
        errors.append(f"{key}: expected two comma-separated numbers, got {raw!r}")
        return None
    try:
        return np.array([float(parts[0]), float(parts[1])])
    except ValueError:
        errors.append(f"{key}: expected two comma-separated numbers, got {raw!r}")
        return None


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate; raises SchemaError listing every offending key."""
    errors = []
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            errors.append(f"line {lineno}: not a key = value pair: {line.strip()!r}")
            continue
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if key in raw:
            errors.append(f"{key}: duplicate key (line {lineno})")
            continue
        raw[key] = value

    known = {"method", "epsilon", "q0_scaled", "p0", "t_final", *_DEFAULTS}
    for key in raw:
        if key not in known:
            errors.append(f"{key}: unknown key")

    for key in ("method", "epsilon", "q0_scaled", "p0", "t_final"):
        if key not in raw:
            errors.append(f"{key}: required key missing")

    values = {}
    if "method" in raw:
        if raw["method"] in _METHODS:
            values["method"] = raw["method"]
        else:
            errors.append(
                f"method: must be one of {', '.join(_METHODS)}, got {raw['method']!r}"
            )
    for key, positive in (("epsilon", True), ("t_final", True)):
        if key in raw:
            v = _parse_float(raw[key], key, errors)
            if v is not None:
                if positive and v <= 0:
                    errors.append(f"{key}: must be positive, got {v}")
                else:
                    values[key] = v
    for key in ("q0_scaled", "p0"):
        if key in raw:
            v = _parse_vec2(raw[key], key, errors)
            if v is not None:
                values[key] = v
    for key, conv, check, what in (
        ("seed", _parse_int, lambda v: v >= 0, "nonnegative"),
        ("n_outputs", _parse_int, lambda v: v >= 2, ">= 2"),
        ("n_particles", _parse_int, lambda v: v >= 1, "positive"),
        ("grid_points", _parse_int, lambda v: v >= 2 and not v & (v - 1), "a power of two >= 2"),
        ("weight_floor", _parse_float, lambda v: 0.0 <= v < 1.0, "in [0, 1)"),
        ("grid_half_width", _parse_float, lambda v: v > 0, "positive"),
        ("dt", _parse_float, lambda v: v > 0, "positive"),
    ):
        if key in raw:
            v = conv(raw[key], key, errors)
            if v is not None:
                if check(v):
                    values[key] = v
                else:
                    errors.append(f"{key}: must be {what}, got {v}")
    if "initial_mode" in raw:
        if raw["initial_mode"] in ("plus", "minus", "zero"):
            values["initial_mode"] = raw["initial_mode"]
        else:
            errors.append(
                f"initial_mode: must be plus, minus or zero, got {raw['initial_mode']!r}"
            )
    if "output" in raw:
        values["output"] = raw["output"]

    if errors:
        raise SchemaError(errors)
    for key, default in _DEFAULTS.items():
        values.setdefault(key, default)
    return ExperimentConfig(**values)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, np.ndarray):
        return ",".join(f"{x:.17g}" for x in v)
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; parse(serialize(parse(text))) is stable."""
    keys = (
        "method", "epsilon", "q0_scaled", "p0", "t_final", "seed",
        "n_outputs", "n_particles", "weight_floor", "initial_mode",
        "grid_half_width", "grid_points", "dt", "output",
    )
    return "".join(f"{k} = {_fmt(getattr(cfg, k))}\n" for k in keys)
