"""Self-checks for the kernel machinery: oracle comparison and the
gradient-structure residual sweep."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import dgs_residual, kernel_oracle, kernel_row
from .meshes import TemporalMesh

__all__ = ["KernelVerification", "verify_kernels"]


@dataclass(frozen=True)
class KernelVerification:
    kernel_order: float
    max_kernel_rel_err: float
    max_dgs_residual: float
    kernel_tol: float
    dgs_tol: float
    rows_checked: int
    histories_checked: int

    @property
    def passed(self) -> bool:
        return (self.max_kernel_rel_err <= self.kernel_tol
                and self.max_dgs_residual <= self.dgs_tol)

    def lines(self) -> list[str]:
        status = "PASS" if self.passed else "FAIL"
        return [
            f"kernel rows vs oracle : max relative error "
            f"{self.max_kernel_rel_err:.3e} (tol {self.kernel_tol:.1e}, "
            f"{self.rows_checked} rows)",
            f"gradient structure    : max relative residual "
            f"{self.max_dgs_residual:.3e} (tol {self.dgs_tol:.1e}, "
            f"{self.histories_checked} histories)",
            f"verification          : {status}",
        ]


def verify_kernels(mesh: TemporalMesh, nu: float, *,
                   kernel_tol: float = 1e-10, dgs_tol: float = 1e-12,
                   max_rows: int = 8, histories: int = 20, seed: int = 0,
                   corrupt: bool = False) -> KernelVerification:
    """Compare closed-form rows against the quadrature oracle and sweep the
    gradient-structure identity with random scalar histories.

    ``corrupt`` perturbs one weight before comparison; it exists as a
    negative control so the failure path stays exercised.
    """
    N = mesh.num_steps
    rng = np.random.default_rng(seed)
    if N >= 1:
        steps = sorted(set([1, N]) | set(
            int(v) for v in rng.integers(1, N + 1, size=max_rows - 2)))
    else:
        steps = []

    max_err = 0.0
    rows_checked = 0
    for n in steps:
        row = kernel_row(mesh, n, nu)
        w = row.weights.copy()
        if corrupt:
            w[0] *= 1.0 + 1e-6
        if nu == 0.0:
            # exact degeneration: {1/tau_n, 0, ..., 0}
            expect = np.zeros(n)
            expect[0] = 1.0 / mesh.step(n)
            err = float(np.max(np.abs(w - expect))) / expect[0]
        else:
            err = 0.0
            for k in range(1, n + 1):
                ref = kernel_oracle(mesh, n, k, nu)
                err = max(err, abs(w[n - k] - ref) / max(abs(ref), 1e-300))
        max_err = max(max_err, err)
        rows_checked += 1

    max_dgs = 0.0
    hist_checked = 0
    if N >= 2:
        for _ in range(histories):
            u = list(rng.normal(size=N))
            n = int(rng.integers(2, N + 1))
            max_dgs = max(max_dgs, dgs_residual(u, mesh, n, nu))
            hist_checked += 1

    return KernelVerification(
        kernel_order=nu, max_kernel_rel_err=max_err, max_dgs_residual=max_dgs,
        kernel_tol=kernel_tol, dgs_tol=dgs_tol, rows_checked=rows_checked,
        histories_checked=hist_checked)
