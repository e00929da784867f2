"""Periodic 2-D grid with Fourier-diagonal operators and quadrature.

Fields are plain ``(Nx, Ny)`` float arrays in physical space, row-major with
x along the first axis; the grid object owns the geometry, the wavenumber
symbols, and the discrete inner product (uniform cell weights, exact for
resolved trigonometric integrands).  Only squared symbols are applied, so
the real transforms stay symmetric at the Nyquist modes.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = ["PeriodicGrid", "SingularModeError", "write_fpf1", "read_fpf1",
           "write_field_csv"]

FPF1_MAGIC = b"FPF1"


class SingularModeError(ValueError):
    """Raised when a diagonal solve hits a vanishing symbol."""

    def __init__(self, kx: float, ky: float, value: float):
        self.wavenumber = (kx, ky)
        super().__init__(
            f"singular mode at (kx, ky) = ({kx:g}, {ky:g}): symbol = {value:g}")


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform periodic rectangle ``[0, Lx) x [0, Ly)`` with even node counts."""

    Lx: float
    Ly: float
    Nx: int
    Ny: int
    kx: np.ndarray = field(init=False, repr=False)
    ky: np.ndarray = field(init=False, repr=False)
    k2: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.Nx < 4 or self.Ny < 4 or self.Nx % 2 or self.Ny % 2:
            raise ValueError("grid counts must be even and >= 4")
        if self.Lx <= 0.0 or self.Ly <= 0.0:
            raise ValueError("domain lengths must be positive")
        kx = 2.0 * np.pi * np.fft.fftfreq(self.Nx, d=self.Lx / self.Nx)
        ky = 2.0 * np.pi * np.fft.rfftfreq(self.Ny, d=self.Ly / self.Ny)
        object.__setattr__(self, "kx", kx.reshape(-1, 1))
        object.__setattr__(self, "ky", ky.reshape(1, -1))
        object.__setattr__(self, "k2", self.kx**2 + self.ky**2)

    # -- geometry ---------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return (self.Nx, self.Ny)

    @property
    def cell_area(self) -> float:
        return self.Lx * self.Ly / (self.Nx * self.Ny)

    @property
    def area(self) -> float:
        return self.Lx * self.Ly

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.arange(self.Nx) * (self.Lx / self.Nx)
        y = np.arange(self.Ny) * (self.Ly / self.Ny)
        return np.meshgrid(x, y, indexing="ij")

    def field(self, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
        X, Y = self.coords()
        return np.asarray(fn(X, Y), dtype=float)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    # -- transforms and multipliers ---------------------------------------

    def _check(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u)
        if u.shape != self.shape:
            raise ValueError(f"field shape {u.shape} != grid shape {self.shape}")
        return u

    def apply_symbol(self, symbol: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Apply a real Fourier multiplier given on the half-spectrum."""
        return np.fft.irfft2(symbol * np.fft.rfft2(self._check(u)), s=self.shape)

    def solve_symbol(self, symbol: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        """Invert a real Fourier multiplier; raises on vanishing modes."""
        scale = float(np.max(np.abs(symbol)))
        bad = np.abs(symbol) <= 1e-14 * scale
        if np.any(bad):
            i, j = np.argwhere(bad)[0]
            raise SingularModeError(float(self.kx[i, 0]), float(self.ky[0, j]),
                                    float(symbol[i, j]))
        return np.fft.irfft2(np.fft.rfft2(self._check(rhs)) / symbol, s=self.shape)

    def lap_symbol(self) -> np.ndarray:
        return -self.k2

    def one_plus_lap_sq_symbol(self) -> np.ndarray:
        return (1.0 - self.k2) ** 2

    def laplacian(self, u: np.ndarray) -> np.ndarray:
        return self.apply_symbol(-self.k2, u)

    def one_plus_lap_sq(self, u: np.ndarray) -> np.ndarray:
        """Biharmonic-type operator ``(1 + Lap)^2 u``."""
        return self.apply_symbol((1.0 - self.k2) ** 2, u)

    def diagonal_solve(self, a: float, multiplier: np.ndarray,
                       rhs: np.ndarray) -> np.ndarray:
        """Solve ``(a I + Op) u = rhs`` exactly for a Fourier-diagonal Op."""
        return self.solve_symbol(a + multiplier, rhs)

    # -- quadrature and norms ----------------------------------------------

    def mean(self, u: np.ndarray) -> float:
        return float(np.mean(self._check(u)))

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(np.sum(self._check(u) * self._check(v)) * self.cell_area)

    def norm_l2(self, u: np.ndarray) -> float:
        return float(np.sqrt(np.sum(self._check(u) ** 2) * self.cell_area))

    def norm_linf(self, u: np.ndarray) -> float:
        return float(np.max(np.abs(self._check(u))))

    def grad_sq_integral(self, u: np.ndarray) -> float:
        """``int |grad u|^2 dx``, evaluated as ``-<u, Lap u>`` (exact for
        resolved modes, avoids odd-derivative Nyquist asymmetry)."""
        return -self.inner(u, self.laplacian(u))


# -- snapshot formats -------------------------------------------------------

def write_fpf1(path, u: np.ndarray) -> None:
    """Binary field snapshot: magic ``FPF1``, Nx, Ny as u32 LE, row-major f64 LE."""
    u = np.ascontiguousarray(u, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(FPF1_MAGIC)
        fh.write(struct.pack("<II", u.shape[0], u.shape[1]))
        fh.write(u.tobytes(order="C"))


def read_fpf1(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != FPF1_MAGIC:
            raise ValueError(f"not an FPF1 file (magic {magic!r})")
        nx, ny = struct.unpack("<II", fh.read(8))
        data = np.frombuffer(fh.read(8 * nx * ny), dtype="<f8")
        if data.size != nx * ny:
            raise ValueError("truncated FPF1 payload")
        return data.reshape(nx, ny).copy()


def write_field_csv(path, grid: PeriodicGrid, u: np.ndarray) -> None:
    """CSV alternative to FPF1 with header ``x,y,value``."""
    X, Y = grid.coords()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "value"])
        for i in range(grid.Nx):
            for j in range(grid.Ny):
                writer.writerow([repr(float(X[i, j])), repr(float(Y[i, j])),
                                 repr(float(u[i, j]))])
