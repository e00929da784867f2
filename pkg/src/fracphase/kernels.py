"""Discrete convolution kernels of the interval-averaged fractional derivative.

The derivative of order ``alpha`` averaged over ``[t_{n-1}, t_n]`` acts on the
increments ``u^k - u^{k-1}`` through a row of positive weights.  This module
evaluates those rows in closed form on arbitrary meshes, provides a slow
double-quadrature oracle for verification, and implements the two norm
functionals whose telescoping reproduces the weighted history sum (the
discrete gradient structure used by the energy dissipation estimates).

Throughout, ``nu`` is the order of the kernel itself; the solvers call these
routines with ``nu = 1 - alpha``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import gamma

from .meshes import TemporalMesh

__all__ = [
    "KernelRow",
    "omega",
    "kernel_row",
    "kernel_oracle",
    "modify_row",
    "lagged_sum",
    "functional_A",
    "functional_R",
    "dgs_residual",
]


def omega(beta: float, t):
    """Power kernel ``omega_beta(t) = t^(beta-1) / Gamma(beta)``."""
    return t ** (beta - 1.0) / gamma(beta)


def _nodes_of(mesh) -> np.ndarray:
    if isinstance(mesh, TemporalMesh):
        return mesh.nodes
    return np.asarray(mesh, dtype=float)


@dataclass(frozen=True)
class KernelRow:
    """Convolution weights for one step.

    ``weights[j] = b_j`` for ``j = 0..n-1``; ``b_{n-k}`` multiplies the
    increment of step ``k``, so ``b_0`` carries the implicit current step.
    """

    order: float
    n: int
    weights: np.ndarray

    @property
    def b0(self) -> float:
        return float(self.weights[0])

    def modified(self) -> np.ndarray:
        """Weights with the leading entry doubled (``2 b_0, b_1, ...``)."""
        w = self.weights.copy()
        w[0] *= 2.0
        return w


def kernel_row(mesh, n: int, nu: float) -> KernelRow:
    """Closed-form kernel row at step ``n`` for order ``nu`` in [0, 1].

    ``b_0 = tau_n^(nu-1) / Gamma(nu+2)`` and, for ``k < n``,

    ``b_{n-k} = [omega_{nu+2}(t_n - t_{k-1}) - omega_{nu+2}(t_{n-1} - t_{k-1})
               - omega_{nu+2}(t_n - t_k) + omega_{nu+2}(t_{n-1} - t_k)]
               / (tau_n tau_k)``.

    At ``nu = 0`` the bracket vanishes identically and the row is exactly
    ``{1/tau_n, 0, ..., 0}`` (handled explicitly, not as a limit).
    """
    nodes = _nodes_of(mesh)
    if not 1 <= n <= nodes.size - 1:
        raise ValueError(f"step index {n} out of range 1..{nodes.size - 1}")
    if not 0.0 <= nu <= 1.0:
        raise ValueError(f"kernel order must lie in [0, 1], got {nu}")
    tau_n = nodes[n] - nodes[n - 1]
    w = np.zeros(n)
    # nu = 0 degenerates to exactly {1/tau_n, 0, ...}; division, not pow
    w[0] = 1.0 / tau_n if nu == 0.0 else tau_n ** (nu - 1.0) / gamma(nu + 2.0)
    if nu > 0.0 and n > 1:
        beta = nu + 2.0
        tk = nodes[1:n]        # t_k for k = 1..n-1
        tkm1 = nodes[0:n - 1]  # t_{k-1}
        taus = tk - tkm1
        bracket = (omega(beta, nodes[n] - tkm1)
                   - omega(beta, nodes[n - 1] - tkm1)
                   - omega(beta, nodes[n] - tk)
                   + omega(beta, np.maximum(nodes[n - 1] - tk, 0.0)))
        w[n - np.arange(1, n)] = bracket / (tau_n * taus)
    return KernelRow(order=nu, n=n, weights=w)


def kernel_oracle(mesh, n: int, k: int, nu: float, *,
                  tol: float = 1e-12) -> float:
    """Weight ``b_{n-k}`` by adaptive double quadrature of its defining
    integral ``(tau_n tau_k)^{-1} int_{t_{n-1}}^{t_n} int_{t_{k-1}}^{min(t_k,t)}
    omega_nu(t-s) ds dt``.  Slow; used to verify :func:`kernel_row`.

    Requires ``nu > 0`` (the weakly singular integrand is integrated in the
    lag variable ``u = t - s``, which quadpack handles by extrapolation).
    """
    nodes = _nodes_of(mesh)
    if not 1 <= k <= n <= nodes.size - 1:
        raise ValueError("need 1 <= k <= n <= N")
    if nu <= 0.0:
        raise ValueError("oracle requires nu > 0")
    tkm1, tk = nodes[k - 1], nodes[k]
    tnm1, tn = nodes[n - 1], nodes[n]
    g = gamma(nu)

    def inner(t: float) -> float:
        hi = min(tk, t)
        val, err = quad(lambda u: u ** (nu - 1.0) / g, t - hi, t - tkm1,
                        epsabs=tol / 10.0, epsrel=1e-13, limit=200)
        if not np.isfinite(val):
            raise ArithmeticError("inner quadrature failed to converge")
        return val

    val, err = quad(inner, tnm1, tn, epsabs=tol, epsrel=1e-13, limit=200)
    if not np.isfinite(val) or err > max(tol, 1e-10 * abs(val)) * 100.0:
        raise ArithmeticError(
            f"outer quadrature failed to converge (err={err:g})")
    return val / ((tn - tnm1) * (tk - tkm1))


def modify_row(row: KernelRow) -> np.ndarray:
    """Modified kernels ``b~_0 = 2 b_0, b~_j = b_j`` for ``j >= 1``."""
    return row.modified()


def _default_inner(u, v) -> float:
    return float(np.sum(np.asarray(u) * np.asarray(v)))


def lagged_sum(row: KernelRow, history: Sequence):
    """History part ``sum_{k=1}^{n-1} b_{n-k} u^k`` of the convolution.

    ``history`` holds the increments ``u^1 .. u^{m}`` with ``m >= n-1``; the
    caller adds the implicit ``b_0 u^n`` term itself.  Returns a zero of the
    right shape for ``n = 1``.
    """
    n = row.n
    if len(history) < n - 1:
        raise ValueError(f"history has {len(history)} entries, need {n - 1}")
    if n == 1:
        return 0.0 if not history else np.zeros_like(history[0])
    acc = np.zeros_like(history[0]) if np.ndim(history[0]) else 0.0
    for k in range(1, n):
        acc = acc + row.weights[n - k] * history[k - 1]
    return acc


def _suffix_norms2(history: Sequence, n: int, start: int,
                   inner: Callable) -> np.ndarray:
    """``||sum_{j=k+1}^{n} u^j||^2`` for ``k = start..n-1``, last-to-first."""
    out = np.zeros(n - start)
    acc = np.zeros_like(history[n - 1]) if np.ndim(history[n - 1]) else 0.0
    for k in range(n - 1, start - 1, -1):
        acc = acc + history[k]  # u^{k+1} in 1-based labels
        out[k - start] = inner(acc, acc)
    return out


def functional_A(history: Sequence, mesh, n: int, nu: float, *,
                 inner: Callable = _default_inner) -> float:
    """First norm functional of the gradient structure at step ``n``.

    ``A = 1/2 sum_{k=1}^{n-1} (b~_{n-k-1} - b~_{n-k}) ||sum_{j=k+1}^n u^j||^2
        + 1/2 b~_{n-1} ||sum_{j=1}^n u^j||^2``

    Nonnegative whenever the mesh satisfies the ratio bound at ``nu``.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if len(history) < n:
        raise ValueError(f"history has {len(history)} entries, need {n}")
    bt = kernel_row(mesh, n, nu).modified()
    norms2 = _suffix_norms2(history, n, 0, inner)  # k = 0..n-1
    total = 0.5 * bt[n - 1] * norms2[0]            # full sum, k = 0
    for k in range(1, n):
        total += 0.5 * (bt[n - k - 1] - bt[n - k]) * norms2[k]
    return float(total)


def functional_R(history: Sequence, mesh, n: int, nu: float, *,
                 inner: Callable = _default_inner) -> float:
    """Second norm functional (the dissipative remainder) at step ``n >= 2``.

    Combines the modified rows of steps ``n-1`` and ``n``; nonnegative on
    meshes passing :func:`fracphase.meshes.check_mesh` at the same order.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    if len(history) < n:
        raise ValueError(f"history has {len(history)} entries, need {n}")
    bn = kernel_row(mesh, n, nu).modified()
    bm = kernel_row(mesh, n - 1, nu).modified()
    norms2 = _suffix_norms2(history, n - 1, 0, inner)  # sums to n-1
    total = 0.5 * (bm[n - 2] - bn[n - 1]) * norms2[0]
    for k in range(1, n - 1):
        coeff = bm[n - 2 - k] - bm[n - 1 - k] - bn[n - 1 - k] + bn[n - k]
        total += 0.5 * coeff * norms2[k]
    return float(total)


def dgs_residual(history: Sequence, mesh, n: int, nu: float, *,
                 inner: Callable = _default_inner) -> float:
    """Relative residual of the gradient-structure identity at step ``n >= 2``.

    The identity ``<sum_k b_{n-k} u^k, u^n> = A^n - A^{n-1} + R^n`` is
    algebraic, so the result is roundoff-sized on any mesh and history.
    Returned as ``|lhs - rhs| / scale`` with scale the sum of term magnitudes.
    """
    row = kernel_row(mesh, n, nu)
    conv = lagged_sum(row, history) + row.b0 * history[n - 1]
    lhs = inner(conv, history[n - 1])
    a_n = functional_A(history, mesh, n, nu, inner=inner)
    a_prev = functional_A(history, mesh, n - 1, nu, inner=inner)
    r_n = functional_R(history, mesh, n, nu, inner=inner)
    scale = abs(lhs) + abs(a_n) + abs(a_prev) + abs(r_n)
    if scale == 0.0:
        return 0.0
    return abs(lhs - (a_n - a_prev + r_n)) / scale
