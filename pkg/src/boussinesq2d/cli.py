"""Command-line entry point: run / converge / bench.

Exit codes: 0 ok, 2 config error, 3 divergence, 4 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from .adapt import AdaptParams
from .assembly import SolverError
from .config import ConfigError, RunConfig, parse_config, preset
from .mesh import build_periodic_map, build_rect_mesh
from .model import coefficients, family_preset, validate
from .stepper import DivergenceError, SimState, run
from .verify import conserved_quantities, convergence_study, cross_section
from .vtk import write_vtk

SERIES_HEADER = ("t,mass_eta,mass_u,mass_v,min_eta,max_eta,"
                 "nverts,step_seconds")


def resolve_coefficients(cfg: RunConfig):
    if cfg.family == "general":
        if None in (cfg.theta2, cfg.nu, cfg.mu):
            raise ConfigError("family 'general' requires theta2, nu and mu")
        coef = coefficients(cfg.theta2, cfg.nu, cfg.mu)
        validate(coef)      # c+d < 0 is a warning for the general family
        return coef
    if None not in (cfg.theta2, cfg.nu, cfg.mu):
        coef = coefficients(cfg.theta2, cfg.nu, cfg.mu)
        validate(coef, fatal=True)
        return coef
    return family_preset(cfg.family, theta2=cfg.theta2)


def build_state(cfg: RunConfig) -> SimState:
    coef = resolve_coefficients(cfg)
    mesh = build_rect_mesh(cfg.xmin, cfg.xmax, cfg.ymin, cfg.ymax,
                           cfg.nx, cfg.ny)
    if cfg.bc.is_periodic:
        mesh = build_periodic_map(mesh, "both")

    def eta_init(x, y):
        return cfg.amplitude * np.exp(-(x**2 + y**2) / cfg.width)

    if cfg.adapt is not None:
        from .adapt import pre_adapt
        mesh = pre_adapt(mesh, eta_init, cfg.adapt)
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    eta0 = eta_init(x, y)
    return SimState(mesh=mesh, coef=coef, bc=cfg.bc, eta=eta0,
                    u=np.zeros(mesh.n_nodes), v=np.zeros(mesh.n_nodes),
                    t=0.0, dt=cfg.dt)


class _Recorder:
    """Writes series.csv rows and periodic VTK snapshots during a run."""

    def __init__(self, cfg: RunConfig, out_dir: Path):
        self.cfg = cfg
        self.out_dir = out_dir
        self.series = open(out_dir / "series.csv", "w", newline="")
        self.series.write(SERIES_HEADER + "\n")
        self.n_snap = 0
        self.next_snapshot = 0.0
        self.last_snap_t = None

    def record(self, state: SimState, step_seconds: float):
        ops = state.operators()
        m_eta, m_u, m_v, lo, hi = conserved_quantities(
            state.mesh, ops.M, state.eta, state.u, state.v)
        self.series.write(
            f"{state.t:.10g},{m_eta:.12g},{m_u:.12g},{m_v:.12g},"
            f"{lo:.12g},{hi:.12g},{state.mesh.n_nodes},{step_seconds:.6g}\n")
        self.series.flush()
        if (self.cfg.snapshot_every is not None
                and state.t >= self.next_snapshot - 1e-9):
            self.snapshot(state)
            self.next_snapshot += self.cfg.snapshot_every

    def snapshot(self, state: SimState):
        data = {}
        for name in self.cfg.snapshot_fields:
            data[name] = getattr(state, {"eta": "eta", "u": "u",
                                         "v": "v"}[name])
        write_vtk(self.out_dir / f"eta_{self.n_snap:04d}.vtk", state.mesh,
                  data, title=f"t={state.t:g}")
        self.n_snap += 1
        self.last_snap_t = state.t

    def close(self):
        self.series.close()


def run_config(cfg: RunConfig) -> SimState:
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.used").write_text(_render(cfg))
    state = build_state(cfg)
    rec = _Recorder(cfg, out_dir)
    try:
        rec.record(state, 0.0)     # first series row
        if rec.n_snap == 0:
            rec.snapshot(state)    # the initial state is always dumped
        state = run(state, cfg.t_end, algorithm=cfg.algorithm,
                    reuse_operators=cfg.reuse_operators,
                    adapt_params=cfg.adapt, on_step=rec.record)
        if rec.last_snap_t != state.t:
            rec.snapshot(state)    # and so is the final one
        for i, (axis, value) in enumerate(cfg.sections):
            pts = cross_section(state.mesh, state.eta, axis, value)
            with open(out_dir / f"section_{axis}_{i}.csv", "w",
                      newline="") as f:
                wr = csv.writer(f)
                wr.writerow([axis, "eta"])
                wr.writerows(pts)
    finally:
        rec.close()
    return state


def _render(cfg):
    from .config import render_config
    return render_config(cfg)


def _load_config(args) -> RunConfig | list:
    if args.preset:
        cfg = preset(args.preset)
    elif args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {args.config}: {exc}") from exc
        cfg = parse_config(text)
    else:
        raise ConfigError("provide --config FILE or --preset NAME")
    for c in cfg if isinstance(cfg, list) else [cfg]:
        if args.t_end is not None:
            c.t_end = args.t_end
        if args.dx is not None:
            c.nx = round((c.xmax - c.xmin) / args.dx)
            c.ny = round((c.ymax - c.ymin) / args.dx)
        if args.out is not None and not isinstance(cfg, list):
            c.out_dir = args.out
    return cfg


def cmd_run(args) -> int:
    cfg = _load_config(args)
    for c in cfg if isinstance(cfg, list) else [cfg]:
        print(f"running {c.family} to t={c.t_end} "
              f"({c.nx}x{c.ny} cells, dt={c.dt}) -> {c.out_dir}")
        run_config(c)
    return 0


def cmd_converge(args) -> int:
    cfg = _load_config(args) if (args.config or args.preset) \
        else preset("convergence")
    out_dir = Path(args.out or cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = convergence_study(cfg.n_list, t_end=cfg.t_end,
                               algorithm=cfg.algorithm)
    report.write_csv(out_dir / "convergence.csv")
    ords = report.orders()
    print("N      err_eta        err_u          err_v")
    for i, N in enumerate(report.N):
        print(f"{N:<6d} {report.err_eta[i]:<14.6g} "
              f"{report.err_u[i]:<14.6g} {report.err_v[i]:<14.6g}")
    if ords["eta"]:
        print("observed orders (eta):",
              " ".join(f"{o:.2f}" for o in ords["eta"]))
    return 0


BENCH_VARIANTS = [
    # (name, algorithm, reuse, adapt_err)
    ("M1", 1, False, None),
    ("M1init", 1, True, None),
    ("M1A-4", 1, False, 1e-4),
    ("M1A-2", 1, False, 1e-2),
    ("M2", 2, False, None),
    ("M2init", 2, True, None),
    ("M2A-4", 2, False, 1e-4),
    ("M2A-2", 2, False, 1e-2),
    ("M1initA-4", 1, True, 1e-4),
    ("M1initA-2", 1, True, 1e-2),
    ("M2initA-4", 2, True, 1e-4),
    ("M2initA-2", 2, True, 1e-2),
]


def bench_variant(cfg: RunConfig, algorithm: int, reuse: bool,
                  adapt_err: float | None, adapt_cadence: int = 10):
    """One timing run; adaptive variants start from a 4x coarser root mesh
    and refine back down to the uniform spacing where the indicator asks."""
    c = RunConfig(**{**cfg.__dict__, "metadata": {}})
    c.algorithm = algorithm
    c.reuse_operators = reuse
    c.adapt = None
    if adapt_err is not None:
        dx = (cfg.xmax - cfg.xmin) / cfg.nx
        c.nx = max(2, cfg.nx // 4)
        c.ny = max(2, cfg.ny // 4)
        c.adapt = AdaptParams(err=adapt_err, hmin=dx, cadence=adapt_cadence)
    state = build_state(c)
    t0 = time.perf_counter()
    state = run(state, c.t_end, algorithm=c.algorithm,
                reuse_operators=c.reuse_operators, adapt_params=c.adapt)
    elapsed = time.perf_counter() - t0
    from .assembly import integrate_squared_difference
    checksum = np.sqrt(integrate_squared_difference(state.mesh, state.eta,
                                                    None))
    return elapsed, state.mesh.n_nodes, float(checksum)


def cmd_bench(args) -> int:
    if args.config or args.preset:
        cfg = _load_config(args)
    else:
        # the timing-comparison setup: BBM-BBM Gaussian, all-Dirichlet walls
        cfg = RunConfig(family="bbm-bbm", amplitude=0.2, width=5.0,
                        t_end=10.0)
        if args.dx is not None:
            cfg.nx = cfg.ny = round((cfg.xmax - cfg.xmin) / args.dx)
        if args.t_end is not None:
            cfg.t_end = args.t_end
    out_dir = Path(args.out or "out-bench")
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    print(f"benchmarking on {cfg.nx}x{cfg.ny} cells to t={cfg.t_end}")
    for name, algorithm, reuse, adapt_err in BENCH_VARIANTS:
        elapsed, nverts, checksum = bench_variant(cfg, algorithm, reuse,
                                                  adapt_err)
        rows.append((name, algorithm, reuse, adapt_err or "", elapsed,
                     nverts, checksum))
        print(f"{name:<10s} {elapsed:9.3f} s   nverts={nverts:<7d} "
              f"checksum={checksum:.8g}")
    with open(out_dir / "bench.csv", "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["variant", "algorithm", "reuse", "adapt_err",
                     "seconds", "nverts", "checksum"])
        wr.writerows(rows)
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="boussinesq2d",
        description="2D Boussinesq system solver (P1 elements, RK2)")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn in (("run", cmd_run), ("converge", cmd_converge),
                     ("bench", cmd_bench)):
        p = sub.add_parser(name)
        p.add_argument("--config", help="config file path")
        p.add_argument("--preset", help="reflection, kdv-periodic, "
                       "compare or convergence")
        p.add_argument("--out", help="output directory override")
        p.add_argument("--t-end", type=float, dest="t_end")
        p.add_argument("--dx", type=float, help="uniform grid spacing")
        p.set_defaults(fn=fn)
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return 3
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
