"""Shared fixtures: kernel warm-up and the reference experiment runs.

The heavy fixtures are session-scoped so the figure-1 hopping and grid
series are computed once and shared between the acceptance criteria.
"""
import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pjt_sim.classical_dynamics import PhaseState, detect_crossing, integrate
from pjt_sim.config import output_times
from pjt_sim.grid_solver import Grid2D, SplitStepConfig, evolve, init_gaussian, populations
from pjt_sim.pjt_model import Mode
from pjt_sim.scattering import ScatteringSettings, numerical_s_matrix
from pjt_sim.surface_hopping import HoppingConfig, run as run_hopping

settings.register_profile(
    "artifact", derandomize=True, max_examples=100,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("artifact")


@pytest.fixture(scope="session")
def warm_kernels():
    """Trigger every jit compile before any timed assertion runs."""
    s = PhaseState(q=np.array([1.0, 0.2]), p=np.array([-1.0, 0.0]), t=0.0,
                   mode=Mode.PLUS)
    integrate(s, 0.05)
    detect_crossing(s, 0.05)
    numerical_s_matrix(1.0 + 0.0j, ScatteringSettings(s_max=20.0, tol=1e-8))
    cfg = HoppingConfig(epsilon=0.01, n_particles=8, seed=0,
                        q0=np.array([0.5, 0.05]), p0=np.array([-1.0, 0.0]),
                        t_grid=np.array([0.0, 0.5]))
    run_hopping(cfg)


@pytest.fixture(scope="session")
def figure1_cfg():
    from pjt_sim.cli import _read_config
    return _read_config("figure1")


@pytest.fixture(scope="session")
def figure1_schedule(figure1_cfg):
    return output_times(figure1_cfg)


@pytest.fixture(scope="session")
def figure1_hopping(warm_kernels, figure1_cfg, figure1_schedule):
    """Hopping population series at the reference settings (n = 2e4)."""
    times = figure1_schedule[0]
    cfg = figure1_cfg
    hop_cfg = HoppingConfig(
        epsilon=cfg.epsilon, n_particles=cfg.n_particles, seed=cfg.seed,
        q0=cfg.q0, p0=np.asarray(cfg.p0, dtype=float),
        t_grid=np.asarray(times, dtype=float), initial_mode=cfg.mode,
        weight_floor=cfg.weight_floor,
    )
    series = run_hopping(hop_cfg)
    return {"times": np.asarray(times),
            "values": np.asarray(series.values),
            "pruned": np.asarray(series.pruned_mass)}


@pytest.fixture(scope="session")
def figure1_grid(figure1_cfg, figure1_schedule):
    """Strang reference run on the shared output grid, with norm tracking."""
    cfg = figure1_cfg
    times, n_steps, dt_eff, stride = figure1_schedule
    grid = Grid2D(half_width=cfg.grid_half_width,
                  points_per_axis=cfg.grid_points)
    t0 = time.perf_counter()
    field = init_gaussian(grid, cfg.q0, np.asarray(cfg.p0, dtype=float),
                          cfg.epsilon, cfg.mode)
    values, norms = [], []
    step_cfg = SplitStepConfig(dt=dt_eff, epsilon=cfg.epsilon,
                               n_steps=n_steps, output_stride=stride)
    for _, fld in evolve(field, step_cfg):
        values.append(populations(fld))
        norms.append(fld.norm())
    wall = time.perf_counter() - t0
    norms = np.asarray(norms)
    return {"times": np.asarray(times),
            "values": np.asarray(values),
            "drift": float(np.max(np.abs(norms - norms[0]))),
            "n_steps": n_steps, "dt_eff": dt_eff,
            "wall_seconds": wall}
