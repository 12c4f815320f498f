"""Command line front end: experiment runs, matrix queries, verification.

Subcommands: ``run`` (configured experiment to CSV), ``scattering-matrix``
(closed-form or integrated S(z)), ``trajectory`` (classical flow with
crossing events), ``verify`` (invariant suites with PASS/FAIL lines).
CSV output uses 17-significant-digit floats, ``.`` decimal separator and
LF line endings.
"""

import argparse
import importlib.resources
import math
import re
import sys

import numpy as np

from . import __version__
from .classical_dynamics import (PhaseState, detect_crossing, energy, integrate,
                                 wedge_invariant)
from .config import ExperimentConfig, output_times, parse_config
from .errors import PjtSimError, SchemaError
from .grid_solver import (Grid2D, SplitStepConfig, dump_density, evolve,
                          init_gaussian, populations)
from .pjt_model import (MODE_ORDER, Mode, branching_matrix, eigenvalues,
                        potential_matrix, projector, transition_coefficient)
from .scattering import (ScatteringSettings, analytic_s_matrix,
                         branching_consistency, numerical_s_matrix)
from .surface_hopping import HoppingConfig, run as run_hopping

__all__ = ["main", "run_experiment"]

CSV_HEADER = "method,t,n_plus,n_minus,n_zero,total"


def _g(x: float) -> str:
    return f"{x:.17g}"


def _population_row(method: str, t: float, n) -> str:
    total = n[0] + n[1] + n[2]
    return ",".join([method, _g(t), _g(n[0]), _g(n[1]), _g(n[2]), _g(total)])


def _hopping_series(cfg: ExperimentConfig, times):
    hop_cfg = HoppingConfig(
        epsilon=cfg.epsilon,
        n_particles=cfg.n_particles,
        seed=cfg.seed,
        q0=cfg.q0,
        p0=np.asarray(cfg.p0, dtype=float),
        t_grid=np.asarray(times, dtype=float),
        initial_mode=cfg.mode,
        weight_floor=cfg.weight_floor,
    )
    return run_hopping(hop_cfg).values


def _grid_series(cfg: ExperimentConfig, n_steps, dt_eff, stride, dump_fh=None):
    grid = Grid2D(half_width=cfg.grid_half_width, points_per_axis=cfg.grid_points)
    f0 = init_gaussian(grid, cfg.q0, np.asarray(cfg.p0, dtype=float),
                       cfg.epsilon, cfg.mode)
    step_cfg = SplitStepConfig(dt=dt_eff, epsilon=cfg.epsilon,
                               n_steps=n_steps, output_stride=stride)
    values = []
    for k, fld in evolve(f0, step_cfg):
        values.append(populations(fld))
        if dump_fh is not None:
            dump_density(fld, k * dt_eff, dump_fh)
    return np.array(values)


def run_experiment(cfg: ExperimentConfig, out, dump_fh=None) -> None:
    """Write the population CSV for cfg to the text stream out.

    For method ``both`` the two methods share one output time grid and
    their rows are interleaved per time, hopping first.
    """
    times, n_steps, dt_eff, stride = output_times(cfg)
    series = {}
    if cfg.method in ("hopping", "both"):
        series["hopping"] = _hopping_series(cfg, times)
    if cfg.method in ("grid", "both"):
        series["grid"] = _grid_series(cfg, n_steps, dt_eff, stride, dump_fh)
    out.write(CSV_HEADER + "\n")
    for j, t in enumerate(times):
        for method in ("hopping", "grid"):
            if method in series:
                out.write(_population_row(method, t, series[method][j]) + "\n")


def _trajectory_rows(cfg: ExperimentConfig, out) -> None:
    times, _, _, _ = output_times(cfg)
    out.write("t,q1,q2,p1,p2,energy,wedge\n")
    state = PhaseState(q=cfg.q0, p=np.asarray(cfg.p0, dtype=float),
                       t=0.0, mode=cfg.mode)
    for t in times:
        state = integrate(state, float(t))
        out.write(",".join(_g(x) for x in (
            state.t, state.q[0], state.q[1], state.p[0], state.p[1],
            energy(state), wedge_invariant(state))) + "\n")


def _read_config(name: str) -> ExperimentConfig:
    try:
        with open(name, "r", encoding="utf-8") as fh:
            return parse_config(fh.read())
    except FileNotFoundError:
        ref = importlib.resources.files("pjt_sim") / "presets" / f"{name}.cfg"
        if ref.is_file():
            return parse_config(ref.read_text(encoding="utf-8"))
        raise


def _cmd_run(args) -> int:
    cfg = _read_config(args.config)
    if cfg.method == "verify-scattering":
        return _cmd_verify(argparse.Namespace(suite="scattering", z="1,0"))
    dump_fh = open(args.density_dump, "wb") if args.density_dump else None
    try:
        if cfg.output == "-":
            if cfg.method == "trajectory":
                _trajectory_rows(cfg, sys.stdout)
            else:
                run_experiment(cfg, sys.stdout, dump_fh)
        else:
            with open(cfg.output, "w", encoding="utf-8", newline="\n") as fh:
                if cfg.method == "trajectory":
                    _trajectory_rows(cfg, fh)
                else:
                    run_experiment(cfg, fh, dump_fh)
    finally:
        if dump_fh is not None:
            dump_fh.close()
    return 0


def _parse_pair(raw: str, what: str) -> np.ndarray:
    parts = raw.split(",")
    if len(parts) != 2:
        raise PjtSimError(f"{what}: expected RE,IM style pair, got {raw!r}")
    return np.array([float(parts[0]), float(parts[1])])


def _cmd_scattering_matrix(args) -> int:
    zr, zi = _parse_pair(args.z, "--z")
    z = complex(zr, zi)
    if args.numeric:
        settings = ScatteringSettings()
        if args.s_max is not None:
            settings.s_max = args.s_max
        s = numerical_s_matrix(z, settings)
        label = f"integrated, s_max = {settings.s_max:g}"
    else:
        s = analytic_s_matrix(z)
        label = "closed form"
    print(f"# S(z), {label}, z = {_g(z.real)}{z.imag:+.17g}j, rows/cols (v+, v-, v0)")
    for row in s:
        print(",".join(f"{c.real:.17g}{c.imag:+.17g}j" for c in row))
    return 0


def _cmd_trajectory(args) -> int:
    q0 = _parse_pair(args.q0, "--q0")
    p0 = _parse_pair(args.p0, "--p0")
    state = PhaseState(q=q0, p=p0, t=0.0, mode=Mode.from_name(args.mode))
    print("t,q1,q2,p1,p2,energy,wedge")
    ev = detect_crossing(state, args.t)
    while ev is not None:
        s = ev.state
        print(",".join(_g(x) for x in (
            s.t, s.q[0], s.q[1], s.p[0], s.p[1], energy(s), wedge_invariant(s)))
            + f"  # crossing: eta = {_g(ev.eta)}, p_norm = {_g(ev.p_norm)}")
        ev = detect_crossing(s, args.t)
    state = integrate(state, args.t)
    print(",".join(_g(x) for x in (
        state.t, state.q[0], state.q[1], state.p[0], state.p[1],
        energy(state), wedge_invariant(state))))
    return 0


class _Report:
    def __init__(self):
        self.failed = 0

    def check(self, name: str, value: float, tol: float) -> None:
        ok = value <= tol
        if not ok:
            self.failed += 1
        print(f"{'PASS' if ok else 'FAIL'} {name}: {value:.3e} <= {tol:.1e}")

    @property
    def code(self) -> int:
        return 0 if self.failed == 0 else 1


def _verify_scattering(z: complex) -> int:
    rep = _Report()
    worst = 0.0
    for mag in (1e-3, 0.3, 1.0, 3.0):
        for arg in (0.0, 0.7, 2.2, 4.0):
            s = analytic_s_matrix(mag * complex(math.cos(arg), math.sin(arg)))
            worst = max(worst, np.abs(s @ s.conj().T - np.eye(3)).max())
    rep.check("unitarity of S on magnitude/phase grid", worst, 1e-12)
    s0 = analytic_s_matrix(1e-8 * complex(math.cos(0.5), math.sin(0.5)))
    rep.check("S(z) -> identity as z -> 0", np.abs(s0 - np.eye(3)).max(), 1e-7)
    rep.check(f"branching consistency at z = {z:g}", branching_consistency(z), 1e-12)
    err = np.abs(numerical_s_matrix(z) - analytic_s_matrix(z)).max()
    rep.check("integrated vs closed-form S", err, 1e-2)
    return rep.code


def _verify_projectors() -> int:
    rep = _Report()
    rng = np.random.default_rng(0)
    worst_c = worst_i = worst_o = worst_e = 0.0
    for _ in range(100):
        q = rng.normal(size=2)
        if np.hypot(*q) < 1e-6:
            continue
        ps = [projector(q, m) for m in MODE_ORDER]
        worst_c = max(worst_c, np.abs(sum(ps) - np.eye(3)).max())
        v = potential_matrix(q)
        lam = eigenvalues(q)
        order = (2, 0, 1)  # eigenvalues() sorted ascending; modes (+ - 0)
        for p, m, k in zip(ps, MODE_ORDER, order):
            worst_i = max(worst_i, np.abs(p @ p - p).max())
            worst_e = max(worst_e, np.abs(v @ p - lam[k] * p).max())
        for a in range(3):
            for b in range(a + 1, 3):
                worst_o = max(worst_o, np.abs(ps[a] @ ps[b]).max())
    rep.check("projector completeness", worst_c, 1e-12)
    rep.check("projector idempotence", worst_i, 1e-12)
    rep.check("projector orthogonality", worst_o, 1e-12)
    rep.check("eigenvalue relation V P = lambda P", worst_e, 1e-12)
    return rep.code


def _verify_classical() -> int:
    rep = _Report()
    rng = np.random.default_rng(1)
    worst_e = worst_w = 0.0
    for mode in MODE_ORDER:
        for _ in range(100):
            q = rng.normal(size=2) * 1.5
            if np.hypot(*q) < 0.2:
                q += np.sign(q + 1e-9) * 0.3
            s0 = PhaseState(q=q, p=rng.normal(size=2), t=0.0, mode=mode)
            s1 = integrate(s0, 1.0)
            worst_e = max(worst_e, abs(energy(s1) - energy(s0)))
            worst_w = max(worst_w, abs(wedge_invariant(s1) - wedge_invariant(s0)))
    rep.check("energy conservation over [0, 1]", worst_e, 1e-8)
    rep.check("wedge invariant conservation over [0, 1]", worst_w, 1e-8)
    center = PhaseState(q=np.array([0.5, 0.05]), p=np.array([-1.0, 0.0]),
                        t=0.0, mode=Mode.PLUS)
    ev = detect_crossing(center, math.pi / 4)
    rep.check("center trajectory eta vs 0.05", abs(ev.eta - 0.05), 1e-6)
    rep.check("center trajectory p_norm vs 1.415976", abs(ev.p_norm - 1.415976), 1e-6)
    tstar = transition_coefficient(np.array([ev.p_norm, 0.0]), ev.eta / 0.1)
    rep.check("hop coefficient vs 0.870821", abs(tstar - 0.870821), 1e-5)
    return rep.code


def _cmd_verify(args) -> int:
    if args.suite == "scattering":
        zr, zi = _parse_pair(args.z, "--z")
        return _verify_scattering(complex(zr, zi))
    if args.suite == "projectors":
        return _verify_projectors()
    return _verify_classical()


# lets argparse accept "-1,0" style pair values for --q0/--p0/--z
_NEGATIVE_PAIR = re.compile(r"^-\d[\d.,eE+-]*$")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pjt-sim",
        description="Semiclassical dynamics through a three-fold band crossing.",
    )
    parser._negative_number_matcher = _NEGATIVE_PAIR
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a configured experiment, emit CSV")
    p.add_argument("config", help="config file path or bundled preset name (figure1)")
    p.add_argument("--density-dump", metavar="FILE",
                   help="append binary |psi|^2 snapshots of the grid method")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("scattering-matrix", help="print S(z)")
    p.add_argument("--z", required=True, metavar="RE,IM")
    p.add_argument("--numeric", action="store_true",
                   help="integrate the model system instead of the closed form")
    p.add_argument("--s-max", type=float, default=None)
    p.set_defaults(fn=_cmd_scattering_matrix)

    p = sub.add_parser("trajectory", help="classical flow with crossing events")
    p.add_argument("--mode", required=True, choices=("plus", "minus", "zero"))
    p.add_argument("--q0", required=True, metavar="X,Y")
    p.add_argument("--p0", required=True, metavar="X,Y")
    p.add_argument("--t", required=True, type=float)
    p.set_defaults(fn=_cmd_trajectory)

    p = sub.add_parser("verify", help="run an invariant suite")
    p.add_argument("suite", choices=("scattering", "projectors", "classical"))
    p.add_argument("--z", default="1,0", metavar="RE,IM")
    p.set_defaults(fn=_cmd_verify)

    for sp in sub.choices.values():
        sp._negative_number_matcher = _NEGATIVE_PAIR
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except SchemaError as exc:
        print(f"config error:\n  " + "\n  ".join(exc.violations), file=sys.stderr)
        return 2
    except (PjtSimError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
