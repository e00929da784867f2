"""Experiment loop: mesh construction, stepping, snapshots, diagnostics.

A run is deterministic given its configuration (random initial data comes
from a seeded generator).  Fixed meshes are built up front; the adaptive
controller grows the mesh one step at a time from the rate of change of the
phase.  Diagnostics are recorded every step; snapshots are taken at the
first node at or after each requested time.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .diagnostics import DiagnosticsRecord, initial_record, make_record
from .grids import PeriodicGrid
from .meshes import AdaptiveController, AdaptiveParams, TemporalMesh, build_graded
from .models import (
    ModelParams,
    ModelState,
    SolverConfig,
    SolverFailure,
    advance,
    initial_cosine_mix,
    initial_random,
    mms_exact,
    mms_source,
)

__all__ = ["Snapshot", "RunResult", "run", "params_from_config"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Snapshot:
    requested: float
    actual: float
    step: int
    values: np.ndarray


@dataclass
class RunResult:
    params: ModelParams
    grid: PeriodicGrid
    mesh: TemporalMesh
    records: list[DiagnosticsRecord]
    state: ModelState
    snapshots: list[Snapshot]

    @property
    def complete(self) -> bool:
        return self.state.n == self.mesh.num_steps


def params_from_config(cfg: ExperimentConfig) -> ModelParams:
    return ModelParams(kind=cfg.model, alpha=cfg.alpha, M=cfg.M,
                       epsilon=cfg.epsilon, g=cfg.g, delta=cfg.delta, S=cfg.S)


def _initial_phase(cfg: ExperimentConfig, grid: PeriodicGrid) -> np.ndarray:
    if cfg.init == "random":
        return initial_random(grid, cfg.seed)
    if cfg.init == "cosine_mix":
        return initial_cosine_mix(grid)
    return mms_exact(0.0, grid, cfg.sigma)


def run(cfg: ExperimentConfig) -> RunResult:
    """Execute one configured experiment and return its full trail.

    On a linear-solve failure the partially completed result is attached to
    the raised :class:`~fracphase.models.SolverFailure` as ``exc.result`` so
    callers can flush artifacts before aborting.
    """
    grid = PeriodicGrid(Lx=cfg.Lx, Ly=cfg.Ly, Nx=cfg.grid, Ny=cfg.grid)
    params = params_from_config(cfg)
    phi0 = _initial_phase(cfg, grid)
    state = ModelState.initial(phi0, params.relation())
    solver = SolverConfig(rtol=cfg.tol)
    source_fn = None
    if cfg.init == "mms":
        source_fn = lambda t: mms_source(params, t, grid, cfg.sigma)  # noqa: E731

    records = [initial_record(params, grid, state)]
    snapshots: list[Snapshot] = []
    pending = sorted(cfg.snapshot_times)
    while pending and pending[0] <= 0.0:
        snapshots.append(Snapshot(pending.pop(0), 0.0, 0, phi0.copy()))

    def take_snapshots(t_now: float) -> None:
        slack = 1e-9 * max(1.0, cfg.T)
        while pending and t_now >= pending[0] - slack:
            snapshots.append(Snapshot(pending.pop(0), t_now, state.n,
                                      state.phi.copy()))

    adaptive = cfg.mesh == "adaptive"
    if cfg.T <= 0.0 or (not adaptive and cfg.N == 0):
        if not snapshots:
            snapshots.append(Snapshot(0.0, 0.0, 0, phi0.copy()))
        mesh = TemporalMesh(np.array([0.0]))
        return RunResult(params, grid, mesh, records, state, snapshots)

    if adaptive:
        controller = AdaptiveController(
            cfg.T, AdaptiveParams(lam=cfg.lam, tau_min=cfg.tau_min,
                                  tau_max=cfg.tau_max,
                                  kernel_order=params.nu))
    else:
        mesh = build_graded(cfg.T, cfg.N, cfg.gamma)
        nodes = mesh.nodes

    try:
        while True:
            if adaptive:
                if controller.done:
                    break
                if state.n == 0:
                    grad = 0.0
                else:
                    tau_prev = controller.nodes[-1] - controller.nodes[-2]
                    grad = grid.norm_l2(state.history[-1]) / tau_prev
                controller.next_step(grad)
                nodes = np.asarray(controller.nodes)
            elif state.n >= cfg.N:
                break
            phi_prev = state.phi
            state, _, stats = advance(state, nodes, params, grid, solver,
                                      source_fn)
            records.append(make_record(params, grid, state, phi_prev, nodes,
                                       stats))
            take_snapshots(float(nodes[state.n]))
    except SolverFailure as exc:
        mesh_now = TemporalMesh(np.asarray(nodes[: state.n + 1]))
        exc.result = RunResult(params, grid, mesh_now, records, state,
                               snapshots)
        raise

    if pending:
        log.warning("snapshot times beyond the horizon were skipped: %s",
                    pending)
    final_mesh = (controller.mesh() if adaptive
                  else TemporalMesh(np.asarray(nodes)))
    return RunResult(params, grid, final_mesh, records, state, snapshots)
