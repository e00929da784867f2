"""Polynomial free-energy densities and the staggered auxiliary variable.

A quartic density ``F(phi) = (a1/4) phi^4 + (a2/3) phi^3 + (a3/2) phi^2
+ a4 phi + a5`` with ``a1 > 0`` can always be written as a completed square
``(q1 phi^2 + q2 phi + q3)^2 + q4 phi + q5``.  The auxiliary variable is a
quadratic bracket of the phase shifted by a stabilizer,
``r = n1 phi^2 + n2 phi + n3 - S``; it is advanced in time by the pointwise
midpoint relation rather than by a differential equation, which is what
keeps the algebraic link between ``r`` and ``phi`` from drifting.

Each model fixes its own bracket convention:

==============  ============================  =============================
model           closure N(phi)                original density F(phi)
==============  ============================  =============================
conserved well  phi^2 - 1 - S                 (phi^2 - 1)^2 / 4
shallow well    phi (1 - phi) - S             phi^2 (1 - phi)^2 / 4
pattern well    phi^2/2 - g phi/3 + c1 - S    phi^4/4 - g phi^3/3 + d phi^2/2
==============  ============================  =============================
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "QuarticPotential",
    "CompletedSquare",
    "SHConstants",
    "AuxRelation",
    "complete_quartic",
    "sh_constants",
    "aux_init",
    "aux_advance",
    "double_well",
    "double_well_prime",
    "shallow_well",
    "shallow_well_prime",
    "pattern_well",
    "pattern_well_prime",
]


@dataclass(frozen=True)
class QuarticPotential:
    """Coefficients of the quartic density; ``a1 > 0`` is required."""

    a1: float
    a2: float = 0.0
    a3: float = 0.0
    a4: float = 0.0
    a5: float = 0.0

    def __post_init__(self) -> None:
        if self.a1 <= 0.0:
            raise ValueError(f"leading coefficient must be positive, got {self.a1}")

    def __call__(self, phi):
        return (self.a1 / 4.0 * phi**4 + self.a2 / 3.0 * phi**3
                + self.a3 / 2.0 * phi**2 + self.a4 * phi + self.a5)

    def derivative(self, phi):
        return self.a1 * phi**3 + self.a2 * phi**2 + self.a3 * phi + self.a4


@dataclass(frozen=True)
class CompletedSquare:
    """Coefficients with ``F(phi) = (q1 phi^2 + q2 phi + q3)^2 + q4 phi + q5``."""

    q1: float
    q2: float
    q3: float
    q4: float
    q5: float

    def bracket(self, phi):
        return self.q1 * phi**2 + self.q2 * phi + self.q3

    def __call__(self, phi):
        return self.bracket(phi) ** 2 + self.q4 * phi + self.q5

    def expand(self) -> QuarticPotential:
        """Multiply the square back out (used to verify the identity)."""
        q1, q2, q3, q4, q5 = self.q1, self.q2, self.q3, self.q4, self.q5
        return QuarticPotential(
            a1=4.0 * q1**2,
            a2=3.0 * 2.0 * q1 * q2,
            a3=2.0 * (2.0 * q1 * q3 + q2**2),
            a4=2.0 * q2 * q3 + q4,
            a5=q3**2 + q5,
        )


def complete_quartic(p: QuarticPotential) -> CompletedSquare:
    """Rewrite a quartic density as a completed square plus a linear part.

    Coefficients follow from matching powers of phi:
    ``q1 = sqrt(a1)/2``, ``q2 = a2/(3 sqrt(a1))``,
    ``q3 = (a3/2 - q2^2)/(2 q1)``, ``q4 = a4 - 2 q2 q3``, ``q5 = a5 - q3^2``.
    The result is verified by expansion before being returned.
    """
    q1 = math.sqrt(p.a1) / 2.0
    q2 = p.a2 / (3.0 * math.sqrt(p.a1))
    q3 = (p.a3 / 2.0 - q2**2) / (2.0 * q1)
    q4 = p.a4 - 2.0 * q2 * q3
    q5 = p.a5 - q3**2
    sq = CompletedSquare(q1, q2, q3, q4, q5)
    back = sq.expand()
    scale = max(abs(p.a1), abs(p.a2), abs(p.a3), abs(p.a4), abs(p.a5), 1.0)
    for got, want in zip(
            (back.a1, back.a2, back.a3, back.a4, back.a5),
            (p.a1, p.a2, p.a3, p.a4, p.a5)):
        if abs(got - want) > 1e-12 * scale:
            raise ArithmeticError(
                f"completed-square expansion mismatch: {got!r} != {want!r}")
    return sq


@dataclass(frozen=True)
class SHConstants:
    """Constants of the cubic-quartic well ``phi^4/4 - g phi^3/3 + d phi^2/2``.

    ``c1 = d/2 - g^2/9``, ``c2 = g d/3 - 2 g^3/27``, ``c3 = -c1^2`` make
    ``(phi^2/2 - g phi/3 + c1)^2 + c2 phi + c3`` reproduce the well.
    """

    g: float
    delta: float
    c1: float
    c2: float
    c3: float


def sh_constants(g: float, delta: float) -> SHConstants:
    c1 = delta / 2.0 - g**2 / 9.0
    c2 = g * delta / 3.0 - 2.0 * g**3 / 27.0
    c3 = -(c1**2)
    # expansion identity: coefficient residuals must vanish
    resid = max(abs((c1 + g**2 / 9.0) - delta / 2.0),
                abs((c2 + 2.0 * g**3 / 27.0) - g * delta / 3.0),
                abs(c1**2 + c3))
    if resid > 1e-14 * max(1.0, abs(delta), abs(g) ** 3):
        raise ArithmeticError(f"constant identity residual {resid:g}")
    return SHConstants(g=g, delta=delta, c1=c1, c2=c2, c3=c3)


# -- original densities, used by the energy and the manufactured sources ----

def double_well(phi):
    """``(phi^2 - 1)^2 / 4``."""
    return 0.25 * (phi**2 - 1.0) ** 2


def double_well_prime(phi):
    return phi**3 - phi


def shallow_well(phi):
    """``phi^2 (1 - phi)^2 / 4``."""
    return 0.25 * phi**2 * (1.0 - phi) ** 2


def shallow_well_prime(phi):
    return 0.5 * phi * (1.0 - phi) * (1.0 - 2.0 * phi)


def pattern_well(consts: SHConstants, phi):
    """``phi^4/4 - g phi^3/3 + delta phi^2/2``."""
    return (0.25 * phi**4 - consts.g / 3.0 * phi**3
            + consts.delta / 2.0 * phi**2)


def pattern_well_prime(consts: SHConstants, phi):
    return phi**3 - consts.g * phi**2 + consts.delta * phi


@dataclass(frozen=True)
class AuxRelation:
    """Closure ``N(phi) = n1 phi^2 + n2 phi + n3 - S`` defining ``r``."""

    kind: str
    S: float
    n1: float
    n2: float
    n3: float

    def closure(self, phi):
        return self.n1 * phi**2 + self.n2 * phi + self.n3 - self.S

    __call__ = closure

    @classmethod
    def conserved_well(cls, S: float) -> "AuxRelation":
        return cls("ac", S, 1.0, 0.0, -1.0)

    @classmethod
    def shallow_well(cls, S: float) -> "AuxRelation":
        return cls("ch", S, -1.0, 1.0, 0.0)

    @classmethod
    def pattern_well(cls, S: float, consts: SHConstants) -> "AuxRelation":
        return cls("sh", S, 0.5, -consts.g / 3.0, consts.c1)

    @classmethod
    def generic(cls, S: float, square: CompletedSquare) -> "AuxRelation":
        return cls("generic", S, square.q1, square.q2, square.q3)


def aux_init(phi0: np.ndarray, rel: AuxRelation) -> tuple[np.ndarray, np.ndarray]:
    """Both staggered values start at ``N(phi^0)``: returns
    ``(r^{1/2}, r^{-1/2})``, making the modified energy coincide with the
    original one at t = 0."""
    r = np.asarray(rel.closure(phi0), dtype=float)
    return r.copy(), r.copy()


def aux_advance(r_prev_half: np.ndarray, phi_n: np.ndarray,
                rel: AuxRelation) -> np.ndarray:
    """Midpoint update solved for the new half-step value:
    ``r^{n+1/2} = 2 N(phi^n) - r^{n-1/2}`` (pointwise algebra, no solve)."""
    r_prev_half = np.asarray(r_prev_half, dtype=float)
    phi_n = np.asarray(phi_n, dtype=float)
    if r_prev_half.shape != phi_n.shape:
        raise ValueError(
            f"shape mismatch: r {r_prev_half.shape} vs phi {phi_n.shape}")
    return 2.0 * rel.closure(phi_n) - r_prev_half
