"""Nonuniform temporal meshes and the step-ratio admissibility bound.

A mesh is a strictly increasing sequence of nodes ``0 = t_0 < ... < t_N``.
Uniform and graded constructors are provided, together with the ratio bound
``H_nu`` that admissible meshes must satisfy pairwise, and an adaptive
controller that picks the next step from the rate of change of the solution
while keeping the bound satisfied and landing exactly on the horizon.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TemporalMesh",
    "AdaptiveParams",
    "MeshReport",
    "build_uniform",
    "build_graded",
    "ratio_bound",
    "check_mesh",
    "adaptive_next_step",
    "AdaptiveController",
    "write_mesh_csv",
]

_CONSISTENCY_RTOL = 1e-14


@dataclass(frozen=True)
class TemporalMesh:
    """Immutable nonuniform time mesh.

    Attributes
    ----------
    nodes : ndarray
        Times ``t_0 = 0 < t_1 < ... < t_N``.
    steps : ndarray
        Step sizes ``tau_k = t_k - t_{k-1}`` for ``k = 1..N`` (length N).
    ratios : ndarray
        Adjacent ratios ``rho_k = tau_k / tau_{k-1}`` for ``k = 2..N``
        (length N-1, empty for N <= 1).
    """

    nodes: np.ndarray
    steps: np.ndarray = field(init=False)
    ratios: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 1:
            raise ValueError("mesh needs at least the initial node t_0 = 0")
        if nodes[0] != 0.0:
            raise ValueError(f"t_0 must be 0, got {nodes[0]}")
        steps = np.diff(nodes)
        if np.any(steps <= 0.0):
            raise ValueError("mesh nodes must be strictly increasing")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "steps", steps)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = steps[1:] / steps[:-1] if steps.size > 1 else np.empty(0)
        object.__setattr__(self, "ratios", ratios)

    @property
    def num_steps(self) -> int:
        return self.steps.size

    @property
    def horizon(self) -> float:
        return float(self.nodes[-1])

    def step(self, k: int) -> float:
        """Step size ``tau_k`` for 1-based step index ``k``."""
        if not 1 <= k <= self.num_steps:
            raise IndexError(f"step index {k} out of range 1..{self.num_steps}")
        return float(self.steps[k - 1])


@dataclass(frozen=True)
class AdaptiveParams:
    """Parameters of the step-size controller.

    ``lam`` weights the solution rate of change, ``tau_min``/``tau_max``
    bound the step, and ``kernel_order`` is the convolution-kernel order
    used for the ratio clamp (``nu = 1 - alpha`` in the solvers).
    """

    lam: float
    tau_min: float
    tau_max: float
    kernel_order: float

    def __post_init__(self) -> None:
        if not 0.0 < self.tau_min <= self.tau_max:
            raise ValueError("need 0 < tau_min <= tau_max")
        if self.lam < 0.0:
            raise ValueError("lam must be nonnegative")
        if not 0.0 <= self.kernel_order < 1.0:
            raise ValueError("kernel_order must lie in [0, 1)")


def build_uniform(T: float, N: int) -> TemporalMesh:
    """Uniform mesh ``t_n = n T / N``."""
    if T <= 0.0:
        raise ValueError(f"horizon must be positive, got {T}")
    if N < 1:
        raise ValueError(f"need at least one step, got N={N}")
    return TemporalMesh(np.linspace(0.0, T, N + 1))


def build_graded(T: float, N: int, gamma: float) -> TemporalMesh:
    """Graded mesh ``t_n = (n/N)^gamma * T`` concentrating steps near t=0.

    ``gamma = 1`` reproduces the uniform mesh; ``gamma < 1`` is rejected.
    Nodes are computed as ``T * exp(gamma * log(n/N))`` to avoid pow drift.
    """
    if T <= 0.0:
        raise ValueError(f"horizon must be positive, got {T}")
    if N < 1:
        raise ValueError(f"need at least one step, got N={N}")
    if gamma < 1.0:
        raise ValueError(f"grading exponent must be >= 1, got {gamma}")
    n = np.arange(N + 1, dtype=float)
    nodes = np.zeros(N + 1)
    with np.errstate(divide="ignore"):
        nodes[1:] = T * np.exp(gamma * np.log(n[1:] / N))
    nodes[N] = T  # exact horizon regardless of rounding
    return TemporalMesh(nodes)


def ratio_bound(nu: float, rho: float) -> float:
    """Lower bound ``H_nu(rho)`` on the next admissible step ratio.

    ``H_nu(rho) = [(2 h(rho) - h(2 rho)) / (rho^nu (4 - 2^{1+nu}))]^{1/nu}``
    with ``h(s) = (1+s)^{1+nu} - s^{1+nu} - 1``.  ``H_0`` is defined as 0:
    the integer-order scheme imposes no ratio constraint.
    """
    if not 0.0 <= nu < 1.0:
        raise ValueError(f"kernel order must lie in [0, 1), got {nu}")
    if rho <= 0.0:
        raise ValueError(f"ratio must be positive, got {rho}")
    if nu == 0.0:
        return 0.0

    def h(s: float) -> float:
        return (1.0 + s) ** (1.0 + nu) - s ** (1.0 + nu) - 1.0

    # h is concave with h(0)=0, so the numerator is >= 0 up to roundoff.
    num = max(2.0 * h(rho) - h(2.0 * rho), 0.0)
    den = rho**nu * (4.0 - 2.0 ** (1.0 + nu))
    if num == 0.0:
        return 0.0
    return math.exp(math.log(num / den) / nu)


@dataclass(frozen=True)
class MeshReport:
    """Result of checking a mesh against the ratio bound at one order."""

    kernel_order: float
    # one entry per constrained pair: (k, rho_{k+1}, H_nu(rho_k), satisfied)
    entries: tuple[tuple[int, float, float, bool], ...]

    @property
    def admissible(self) -> bool:
        return all(ok for (_, _, _, ok) in self.entries)

    def failures(self) -> list[int]:
        return [k for (k, _, _, ok) in self.entries if not ok]


def check_mesh(mesh: TemporalMesh, nu: float) -> MeshReport:
    """Check ``rho_{k+1} >= H_nu(rho_k)`` for every k >= 2.

    Vacuously passes for ``nu = 0`` or meshes with fewer than three steps.
    """
    entries = []
    # ratios[i] corresponds to rho_{i+2}; the constraint pairs rho_k, rho_{k+1}
    for i in range(mesh.ratios.size - 1):
        k = i + 2
        bound = ratio_bound(nu, float(mesh.ratios[i]))
        nxt = float(mesh.ratios[i + 1])
        entries.append((k, nxt, bound, nxt >= bound))
    return MeshReport(kernel_order=nu, entries=tuple(entries))


def adaptive_next_step(tau_n: float, rho_n: float, grad_norm: float,
                       p: AdaptiveParams) -> float:
    """Next step size from the rate-weighted formula with the ratio clamp.

    ``tau = max(tilde_tau, H_nu(rho_n) * tau_n)`` where
    ``tilde_tau = max(tau_min, tau_max / sqrt(1 + lam * grad_norm^2))``,
    afterwards capped at ``tau_max``.  Horizon truncation is handled by the
    controller, not here.
    """
    if tau_n <= 0.0 or rho_n <= 0.0:
        raise ValueError("previous step and ratio must be positive")
    if grad_norm < 0.0:
        raise ValueError("grad_norm must be nonnegative")
    tilde = max(p.tau_min, p.tau_max / math.sqrt(1.0 + p.lam * grad_norm**2))
    # tiny headroom so the recomputed ratio clears the bound in floats
    clamp = ratio_bound(p.kernel_order, rho_n) * tau_n * (1.0 + 1e-12)
    return min(max(tilde, clamp), p.tau_max)


class AdaptiveController:
    """Sequential state machine producing an admissible mesh on [0, T].

    The first step is ``tau_min`` (no history exists yet).  Later steps come
    from :func:`adaptive_next_step`; near the horizon the remaining interval
    is split into nearly equal steps no larger than the proposal, so the
    ratio never drops below ``H_nu`` (which is < 1) except in the corner
    where landing exactly on T is incompatible with the bound, in which
    case landing wins.  Not thread-safe; one instance drives one run.
    """

    def __init__(self, T: float, params: AdaptiveParams):
        if T <= 0.0:
            raise ValueError(f"horizon must be positive, got {T}")
        self.T = float(T)
        self.params = params
        self._nodes: list[float] = [0.0]

    @property
    def t(self) -> float:
        return self._nodes[-1]

    @property
    def done(self) -> bool:
        return self.t >= self.T * (1.0 - 1e-14)

    @property
    def nodes(self) -> list[float]:
        return list(self._nodes)

    def mesh(self) -> TemporalMesh:
        return TemporalMesh(np.array(self._nodes))

    def next_step(self, grad_norm: float) -> float:
        """Choose, record, and return the next step size."""
        if self.done:
            raise RuntimeError("controller already reached the horizon")
        p = self.params
        rem = self.T - self.t
        if len(self._nodes) == 1:
            tau = min(p.tau_min, rem)
        else:
            tau_n = self._nodes[-1] - self._nodes[-2]
            if len(self._nodes) == 2:
                rho_n = 1.0
            else:
                rho_n = tau_n / (self._nodes[-2] - self._nodes[-3])
            tau = adaptive_next_step(tau_n, rho_n, grad_norm, p)
            if rem <= tau * (1.0 + 1e-12):
                tau = rem  # final step; the clamp already floored the ratio
            else:
                # Avoid leaving a remainder the following step's ratio bound
                # cannot absorb: stretch to land while within tau_max (safe,
                # since rem > tau >= floor), otherwise shrink toward this
                # step's own floor until the remainder clears the lookahead.
                def leftover_ok(t: float) -> bool:
                    need = ratio_bound(p.kernel_order, t / tau_n) * t
                    return rem - t >= max(need * (1.0 + 1e-9),
                                          1e-12 * self.T)

                if not leftover_ok(tau):
                    if rem <= p.tau_max * (1.0 + 1e-12):
                        tau = rem
                    else:
                        floor = (ratio_bound(p.kernel_order, rho_n) * tau_n
                                 * (1.0 + 1e-12))
                        if leftover_ok(floor):
                            lo, hi = floor, tau
                            for _ in range(60):
                                mid = 0.5 * (lo + hi)
                                lo, hi = (mid, hi) if leftover_ok(mid) \
                                    else (lo, mid)
                            tau = lo
                        else:
                            # infeasible corner: exact landing wins and the
                            # last ratio may undershoot the bound
                            tau = min(floor, rem)
        t_next = self.t + tau
        if t_next > self.T or rem - tau < 1e-12 * self.T:
            t_next = self.T
            tau = t_next - self.t
        self._nodes.append(t_next)
        return tau


def write_mesh_csv(mesh: TemporalMesh, path) -> None:
    """Dump a mesh as CSV with header ``k,t,tau,rho`` (blank where undefined)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "t", "tau", "rho"])
        for k, t in enumerate(mesh.nodes):
            tau = repr(float(mesh.steps[k - 1])) if k >= 1 else ""
            rho = repr(float(mesh.ratios[k - 2])) if k >= 2 else ""
            writer.writerow([k, repr(float(t)), tau, rho])
