"""Simulation driver and CSV artifact writers.

Every output is a comma-separated file with a header row and LF line
endings.  Column order is fixed:

``energy.csv``         m, t, kinetic_ek, potential_ek, total_ek, total_numeric
``snapshots.csv``      m, t, node, x[, y], u
``free_boundary.csv``  m, t, node, x[, y]
``summary.csv``        see ``SUMMARY_COLUMNS``
``droplets.csv``       m, t, id, volume, measured_volume   (droplet runs only)
``sweep_summary.csv``  see ``SWEEP_COLUMNS``
"""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig
from .constraints import Droplet, constrained_advance, detect_merge, project_volume_nonneg
from .energy import (
    EnergyRecord,
    bound_energy,
    default_fb_eps,
    energy_estimate_rhs,
    energy_record,
    free_boundary_set,
)
from .mesh import Mesh, build_uniform_interval, build_uniform_triangulation, dump_mesh, integrate
from .scenarios import SCENARIOS
from .scheme import Operators, SchemeConfig, advance, initialize

log = logging.getLogger(__name__)

SUMMARY_COLUMNS = [
    "scenario",
    "scheme",
    "h",
    "n_steps",
    "first_contact_t",
    "detachment_t",
    "initial_energy",
    "final_energy",
    "energy_ratio",
    "numeric_energy_ratio",
    "bound_rhs",
    "max_bound_energy",
]
SWEEP_COLUMNS = [
    "scheme",
    "h",
    "n",
    "dx",
    "n_steps",
    "initial_energy",
    "final_energy",
    "energy_ratio",
    "status",
    "error",
]


@dataclass
class RunResult:
    config: RunConfig
    mesh: Mesh
    energies: list[EnergyRecord] = field(default_factory=list)
    bound_energies: list[float] = field(default_factory=list)
    bound_rhs: float = math.nan
    snapshots: list[tuple[int, float, np.ndarray]] = field(default_factory=list)
    contact: list[tuple[int, float, np.ndarray]] = field(default_factory=list)
    droplet_log: list[tuple[int, float, int, float, float]] = field(default_factory=list)
    fb_eps: float = math.nan

    @property
    def n_steps(self) -> int:
        return self.energies[-1].m if self.energies else 0

    @property
    def contact_steps(self) -> list[int]:
        return [m for m, _, idx in self.contact if len(idx)]

    def first_contact_t(self) -> float:
        steps = self.contact_steps
        return steps[0] * self.config.h if steps else math.nan

    def detachment_t(self) -> float:
        steps = self.contact_steps
        return steps[-1] * self.config.h if steps else math.nan

    def summary(self) -> dict:
        e0 = self.energies[0]
        e1 = self.energies[-1]
        return {
            "scenario": self.config.scenario,
            "scheme": self.config.scheme,
            "h": self.config.h,
            "n_steps": self.n_steps,
            "first_contact_t": self.first_contact_t(),
            "detachment_t": self.detachment_t(),
            "initial_energy": e0.total_ek,
            "final_energy": e1.total_ek,
            "energy_ratio": _ratio(e1.total_ek, e0.total_ek),
            "numeric_energy_ratio": _ratio(e1.total_numeric, e0.total_numeric),
            "bound_rhs": self.bound_rhs,
            "max_bound_energy": max(self.bound_energies) if self.bound_energies else math.nan,
        }


def _ratio(a: float, b: float) -> float:
    return a / b if b != 0 else math.nan


def n_steps_for(T: float, h: float) -> int:
    """Number of steps with ``m*h <= T`` (a small slack absorbs roundoff in T/h)."""
    return max(1, int(math.floor(T / h + 1e-9)))


def build_mesh(cfg: RunConfig) -> Mesh:
    scen = SCENARIOS[cfg.scenario]
    if scen.dim == 1:
        return build_uniform_interval(0.0, 1.0, max(1, int(round(1.0 / cfg.mesh_dx))))
    return build_uniform_triangulation(cfg.nx, cfg.ny)


def scheme_config(cfg: RunConfig, mesh: Mesh, u0: np.ndarray) -> SchemeConfig:
    return SchemeConfig.for_mesh(
        mesh,
        u0,
        variant=cfg.scheme,
        h=cfg.h,
        cutoff=cfg.cutoff,
        adhesion_Q=cfg.Q,
        adhesion_eps=cfg.adhesion_eps,
        linear_tol=cfg.linear_tol,
        descent_tol=cfg.descent_tol,
        max_iters=cfg.max_iters,
    )


def snapshot_stride(cfg: RunConfig, n_steps: int) -> int:
    return cfg.snapshot_stride or max(1, n_steps // 50)


def simulate(cfg: RunConfig) -> RunResult:
    """Run one configured scenario in memory."""
    scen = SCENARIOS[cfg.scenario]
    if scen.droplets:
        return _simulate_droplets(cfg)
    mesh = build_mesh(cfg)
    params = {"n": cfg.n, "h": cfg.h}
    u0, v0 = scen.initial_data(mesh, params)
    ops = Operators(mesh)
    scfg = scheme_config(cfg, mesh, u0)
    state = initialize(u0, v0, cfg.h, cutoff=cfg.cutoff)
    n_steps = n_steps_for(cfg.T, cfg.h)
    stride = snapshot_stride(cfg, n_steps)
    fb_eps = cfg.fb_eps if cfg.fb_eps is not None else default_fb_eps(u0)
    M, K, h = ops.M, ops.K, cfg.h

    res = RunResult(cfg, mesh, fb_eps=fb_eps)
    res.bound_rhs = energy_estimate_rhs(u0, state.u_prev, v0, M, K)

    def observe(m: int, u: np.ndarray, u_old: np.ndarray | None):
        t = m * h
        res.contact.append((m, t, free_boundary_set(u, fb_eps)))
        if m % stride == 0 or m == n_steps:
            res.snapshots.append((m, t, u.copy()))
        if u_old is not None:
            res.energies.append(energy_record(m, t, u, u_old, h, M, K))
            res.bound_energies.append(bound_energy(u, u_old, h, M, K))

    observe(0, u0, None)
    observe(1, state.u_prev, state.u_prev2)
    for m in range(2, n_steps + 1):
        _, state = advance(state, ops, scfg)
        observe(m, state.u_prev, state.u_prev2)
    if cfg.cutoff:
        excess = max(res.bound_energies) - res.bound_rhs
        if excess > 1e-8 * res.bound_energies[0]:
            log.warning("energy estimate exceeded by %.3e", excess)
    return res


def _simulate_droplets(cfg: RunConfig) -> RunResult:
    scen = SCENARIOS[cfg.scenario]
    mesh = build_mesh(cfg)
    h = cfg.h
    data = scen.initial_data(mesh, {"h": h})
    ops = Operators(mesh)
    zero = np.zeros(mesh.n_nodes)
    scfg = scheme_config(cfg, mesh, zero)
    fixed = scfg.dirichlet_nodes

    drops = []
    for i, (u0, v0) in enumerate(data):
        V = integrate(mesh, u0)
        u1 = project_volume_nonneg(u0 + h * v0, mesh, V, fixed=fixed)
        drops.append(Droplet(i, u1, u0, V))
    n_steps = n_steps_for(cfg.T, h)
    stride = snapshot_stride(cfg, n_steps)
    u_sum0 = np.sum([d.u_prev2 for d in drops], axis=0)
    fb_eps = cfg.fb_eps if cfg.fb_eps is not None else default_fb_eps(u_sum0)
    res = RunResult(cfg, mesh, fb_eps=fb_eps)

    def observe(m, drops, u_old):
        t = m * h
        u = np.sum([d.u_prev for d in drops], axis=0)
        res.contact.append((m, t, free_boundary_set(u, fb_eps)))
        if m % stride == 0 or m == n_steps:
            res.snapshots.append((m, t, u.copy()))
        for d in drops:
            res.droplet_log.append((m, t, d.id, d.volume, integrate(mesh, d.u_prev)))
        if u_old is not None:
            res.energies.append(energy_record(m, t, u, u_old, h, ops.M, ops.K))
            res.bound_energies.append(bound_energy(u, u_old, h, ops.M, ops.K))
        return u

    res.contact.append((0, 0.0, free_boundary_set(u_sum0, fb_eps)))
    u_old = observe(1, drops, u_sum0)
    for m in range(2, n_steps + 1):
        drops = [constrained_advance(d, ops, scfg) for d in drops]
        for d in drops:
            if not d.converged:
                log.warning("droplet %d step %d did not converge", d.id, m)
        drops = detect_merge(drops, mesh)
        u_old = observe(m, drops, u_old)
    return res


def _fmt(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return v


def _writer(path: Path):
    fh = open(path, "w", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def write_outputs(res: RunResult, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    coords = res.mesh.points
    dim = res.mesh.dim
    axes = ["x", "y"][:dim]

    write_energy(res, out / "energy.csv")

    fh, w = _writer(out / "snapshots.csv")
    with fh:
        w.writerow(["m", "t", "node", *axes, "u"])
        for m, t, u in res.snapshots:
            for i in range(len(u)):
                w.writerow([m, repr(t), i, *map(repr, coords[i].tolist()), repr(float(u[i]))])

    fh, w = _writer(out / "free_boundary.csv")
    with fh:
        w.writerow(["m", "t", "node", *axes])
        for m, t, idx in res.contact:
            for i in idx:
                w.writerow([m, repr(t), int(i), *map(repr, coords[i].tolist())])

    fh, w = _writer(out / "summary.csv")
    with fh:
        w.writerow(SUMMARY_COLUMNS)
        s = res.summary()
        w.writerow([_fmt(s[c]) for c in SUMMARY_COLUMNS])

    if res.droplet_log:
        fh, w = _writer(out / "droplets.csv")
        with fh:
            w.writerow(["m", "t", "id", "volume", "measured_volume"])
            for m, t, i, v, mv in res.droplet_log:
                w.writerow([m, repr(t), i, repr(v), repr(mv)])

    if res.config.dump_mesh:
        with open(out / "mesh.txt", "w") as fh:
            dump_mesh(res.mesh, fh)


def write_energy(res: RunResult, path: Path) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(EnergyRecord.header())
        for r in res.energies:
            w.writerow([_fmt(v) for v in r.row()])


def run(cfg: RunConfig) -> int:
    """Simulate and write the artifacts into ``cfg.out``; returns the exit status."""
    res = simulate(cfg)
    write_outputs(res, Path(cfg.out))
    return 0


@dataclass(frozen=True)
class SweepCell:
    scheme: str
    h: float
    n: int

    @property
    def label(self) -> str:
        return f"{self.scheme}_h{self.h!r}_n{self.n}"


def sweep_cells(cfg: RunConfig) -> list[SweepCell]:
    schemes = cfg.sweep_scheme or (cfg.scheme,)
    hs = cfg.sweep_h or (cfg.h,)
    ns = cfg.sweep_n or (cfg.n,)
    return [SweepCell(s, h, n) for s in schemes for h in hs for n in ns]


def cell_config(cfg: RunConfig, cell: SweepCell) -> RunConfig:
    return cfg.with_(scheme=cell.scheme, h=cell.h, n=cell.n, sweep_h=(), sweep_n=(), sweep_scheme=())


def _run_cell(args) -> dict:
    cfg, cell, out = args
    row = {"scheme": cell.scheme, "h": cell.h, "n": cell.n, "dx": math.nan}
    ccfg = cell_config(cfg, cell)
    if SCENARIOS[cfg.scenario].dim == 1:
        row["dx"] = ccfg.mesh_dx
    try:
        res = simulate(ccfg)
        cell_dir = out / cell.label
        cell_dir.mkdir(parents=True, exist_ok=True)
        write_energy(res, cell_dir / "energy.csv")
        e0, e1 = res.energies[0].total_ek, res.energies[-1].total_ek
        row.update(
            n_steps=res.n_steps,
            initial_energy=e0,
            final_energy=e1,
            energy_ratio=_ratio(e1, e0),
            status="ok",
            error="",
        )
    except Exception as exc:  # recorded per cell; the sweep continues
        log.error("sweep cell %s failed: %s", cell.label, exc)
        row.update(
            n_steps=0,
            initial_energy=math.nan,
            final_energy=math.nan,
            energy_ratio=math.nan,
            status="failed",
            error=str(exc).replace("\n", " "),
        )
    return row


def sweep(cfg: RunConfig) -> tuple[int, list[dict]]:
    """Run every (scheme, h, n) cell; returns the exit status and the summary rows."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(cfg, cell, out) for cell in sweep_cells(cfg)]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            rows = list(pool.map(_run_cell, jobs))
    else:
        rows = [_run_cell(j) for j in jobs]
    fh, w = _writer(out / "sweep_summary.csv")
    with fh:
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in SWEEP_COLUMNS])
    status = 0 if all(r["status"] == "ok" for r in rows) else 1
    return status, rows
