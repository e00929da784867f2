"""Energies, conservation metrics, and convergence orders.

Three energies are tracked per step: the original free energy ``E``, the
modified energy ``E_mod`` that replaces the quartic density by its frozen
quadratic relaxation (equal to ``E`` whenever the auxiliary variable sits
exactly on its defining algebra), and the variational energy ``E_var`` that
adds the history norm functional scaled by the inverse mobility and is the
quantity that decays monotonically on ratio-admissible meshes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grids import PeriodicGrid
from .kernels import functional_A, kernel_row
from .models import ModelParams, ModelState, SolveStats
from .potentials import AuxRelation, double_well, pattern_well, shallow_well

__all__ = [
    "DiagnosticsRecord",
    "energy_original",
    "energy_modified",
    "energy_variational",
    "aux_gap",
    "observed_order",
    "make_record",
    "initial_record",
    "write_diagnostics_csv",
    "DIAGNOSTICS_HEADER",
]

DIAGNOSTICS_HEADER = ["n", "t", "tau", "E", "E_mod", "E_var", "mass",
                      "mass_drift", "aux_gap", "iters", "residual"]


@dataclass(frozen=True)
class DiagnosticsRecord:
    """Per-step scalar diagnostics.

    ``aux_gap`` compares ``r^{n-1/2}`` against the closure at the time
    midpoint ``(phi^{n-1} + phi^n)/2``; ``aux_gap_nodal`` is the variant
    against ``phi^{n-1}`` kept for reference (not part of the CSV schema).
    """

    n: int
    t: float
    tau: float
    E: float
    E_mod: float
    E_var: float
    mass: float
    mass_drift: float
    aux_gap: float
    iters: int
    residual: float
    aux_gap_nodal: float = float("nan")

    def row(self) -> list:
        return [self.n, repr(self.t), repr(self.tau), repr(self.E),
                repr(self.E_mod), repr(self.E_var), repr(self.mass),
                repr(self.mass_drift), repr(self.aux_gap), self.iters,
                repr(self.residual)]


def energy_original(params: ModelParams, grid: PeriodicGrid,
                    phi: np.ndarray) -> float:
    """Free energy of the phase alone (gradient part spectral, bulk pointwise)."""
    if params.kind == "tfsh":
        quad = 0.5 * grid.inner(phi, grid.one_plus_lap_sq(phi))
        bulk = grid.inner(pattern_well(params.sh(), phi), np.ones(grid.shape))
        return quad + bulk
    grad = 0.5 * params.epsilon**2 * grid.grad_sq_integral(phi)
    well = double_well(phi) if params.kind == "tfac_vc" else shallow_well(phi)
    return grad + grid.inner(well, np.ones(grid.shape))


def energy_modified(params: ModelParams, grid: PeriodicGrid,
                    phi_np1: np.ndarray, r_half: np.ndarray) -> float:
    """Relaxed energy in ``(phi, r)``; equals the original energy when
    ``r`` satisfies its defining algebra exactly."""
    S = params.S
    one = np.ones(grid.shape)
    if params.kind == "tfsh":
        consts = params.sh()
        quad = 0.5 * grid.inner(phi_np1, grid.one_plus_lap_sq(phi_np1))
        bracket = (0.5 * phi_np1**2 - consts.g / 3.0 * phi_np1 + consts.c1 - S)
        dens = (2.0 * (r_half + S) * bracket - r_half**2 + consts.c2 * phi_np1)
        return (quad + grid.inner(dens, one)
                + (consts.c3 + S**2) * grid.area)
    grad = 0.5 * params.epsilon**2 * grid.grad_sq_integral(phi_np1)
    if params.kind == "tfac_vc":
        bracket = phi_np1**2 - 1.0 - S
    else:
        bracket = phi_np1 * (1.0 - phi_np1) - S
    dens = 0.5 * (r_half + S) * bracket - 0.25 * r_half**2
    return grad + grid.inner(dens, one) + 0.25 * S**2 * grid.area


def energy_variational(params: ModelParams, grid: PeriodicGrid, e_mod: float,
                       history: Sequence[np.ndarray], nodes, n: int) -> float:
    """``E_var = E_mod + (1/M) A_nu(increments)`` at step ``n`` (``nu = 1-alpha``)."""
    if n < 1:
        return e_mod
    a_val = functional_A(history, nodes, n, params.nu, inner=grid.inner)
    return e_mod + a_val / params.M


def _functional_a_from_store(state: ModelState, grid: PeriodicGrid, nodes,
                             nu: float) -> float:
    """Same functional as :func:`fracphase.kernels.functional_A`, using the
    flat trajectory store (the partial increment sums are phase differences)."""
    n = state.n
    if state.store.n != n:
        raise ValueError("trajectory store is ahead of the state cursor")
    bt = kernel_row(nodes, n, nu).modified()
    norms2 = state.store.tail_norms2(grid.cell_area)  # ||phi^n - phi^k||^2
    coeff = np.empty(n)
    coeff[0] = bt[n - 1]
    if n > 1:
        coeff[1:] = bt[n - 2::-1] - bt[n - 1:0:-1]
    return 0.5 * float(coeff @ norms2)


def aux_gap(grid: PeriodicGrid, rel: AuxRelation, r_half: np.ndarray,
            phi_half: np.ndarray) -> float:
    """L2 distance between the carried auxiliary value and its closure."""
    return grid.norm_l2(r_half - rel.closure(phi_half))


def observed_order(errors: Sequence[float], Ns: Sequence[int]) -> list[float]:
    """Orders ``ln(e_i/e_{i+1}) / ln(N_{i+1}/N_i)`` between refinement levels."""
    if len(errors) != len(Ns) or len(errors) < 2:
        raise ValueError("need matching error/level lists of length >= 2")
    if any(e <= 0.0 for e in errors):
        raise ValueError("errors must be positive")
    return [math.log(errors[i] / errors[i + 1]) / math.log(Ns[i + 1] / Ns[i])
            for i in range(len(errors) - 1)]


def _mass_denominator(grid: PeriodicGrid, phi0: np.ndarray) -> float:
    one = np.ones(grid.shape)
    return max(abs(grid.inner(phi0, one)), grid.inner(np.abs(phi0), one),
               1e-300)


def initial_record(params: ModelParams, grid: PeriodicGrid,
                   state: ModelState) -> DiagnosticsRecord:
    """Step-0 record; the modified energy coincides with the original one."""
    e0 = energy_original(params, grid, state.phi)
    e_mod = energy_modified(params, grid, state.phi, state.r_half)
    mass = grid.inner(state.phi, np.ones(grid.shape))
    rel = params.relation()
    gap = aux_gap(grid, rel, state.r_half, state.phi)
    return DiagnosticsRecord(n=0, t=0.0, tau=0.0, E=e0, E_mod=e_mod,
                             E_var=e_mod, mass=mass, mass_drift=0.0,
                             aux_gap=gap, iters=0, residual=0.0,
                             aux_gap_nodal=gap)


def make_record(params: ModelParams, grid: PeriodicGrid, state: ModelState,
                phi_prev: np.ndarray, nodes, stats: SolveStats
                ) -> DiagnosticsRecord:
    """Diagnostics immediately after the step that produced ``state``."""
    nodes = np.asarray(getattr(nodes, "nodes", nodes), dtype=float)
    n = state.n
    t = float(nodes[n])
    tau = float(nodes[n] - nodes[n - 1])
    e = energy_original(params, grid, state.phi)
    e_mod = energy_modified(params, grid, state.phi, state.r_half)
    e_var = e_mod + _functional_a_from_store(state, grid, nodes,
                                             params.nu) / params.M
    one = np.ones(grid.shape)
    mass = grid.inner(state.phi, one)
    mass0 = grid.inner(state.phi0, one)
    drift = (mass - mass0) / _mass_denominator(grid, state.phi0)
    rel = params.relation()
    gap_mid = aux_gap(grid, rel, state.r_half, 0.5 * (phi_prev + state.phi))
    gap_nodal = aux_gap(grid, rel, state.r_half, phi_prev)
    return DiagnosticsRecord(n=n, t=t, tau=tau, E=e, E_mod=e_mod, E_var=e_var,
                             mass=mass, mass_drift=drift, aux_gap=gap_mid,
                             iters=stats.iterations, residual=stats.residual,
                             aux_gap_nodal=gap_nodal)


def write_diagnostics_csv(records: Sequence[DiagnosticsRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DIAGNOSTICS_HEADER)
        for rec in records:
            writer.writerow(rec.row())
