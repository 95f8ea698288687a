"""Periodic grids on [-L, L)^N, Fourier transforms, multipliers and the
Littlewood-Paley filter bank.

Transform convention: coefficients are those of the Fourier series
f(x) = sum_k c_k exp(i xi_k . x) with xi_k = pi k / L, so a constant field c
has c_0 = c and cos(pi x / L) puts 1/2 on k = +1 and k = -1.  Parseval then
reads (2L)^N sum |c_k|^2 = h^N sum |f_j|^2.
"""

from __future__ import annotations

import csv
import math
import os
import struct
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.fft as sfft

from .errors import DomainError, EstimatorWarning, UsageError

__all__ = [
    "Grid",
    "Field",
    "SpectralField",
    "FilterBank",
    "dft",
    "idft",
    "apply_multiplier",
    "build_zeta",
    "filter_bank",
    "partition_check",
    "heat_semigroup",
    "boundary_mass_fraction",
    "check_boundary",
    "write_field",
    "read_field",
    "write_field_csv",
    "workers",
]

ZETA_FLAT = 1.5
ZETA_SUPPORT = 5.0 / 3.0


def workers() -> int:
    """Worker count for FFTs, capped by the FRACHEAT_THREADS environment variable."""
    env = os.environ.get("FRACHEAT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"FRACHEAT_THREADS={env!r} is not an integer", "FRACHEAT_THREADS")
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# Grid and fields


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with ``n`` points per axis on [-L, L)^dim."""

    dim: int
    n: int
    L: float = 32.0

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise DomainError(f"dim must be 1 or 2, got {self.dim}")
        if self.n < 16 or self.n & (self.n - 1):
            raise DomainError(f"points per axis must be a power of two >= 16, got {self.n}")
        if not (self.L > 0 and math.isfinite(self.L)):
            raise DomainError(f"half width L must be positive, got {self.L}")
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @cached_property
    def x(self) -> np.ndarray:
        """1-D coordinates -L, -L + h, ..., L - h."""
        return -self.L + self.h * np.arange(self.n)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.x] * self.dim), indexing="ij"))

    @cached_property
    def radius(self) -> np.ndarray:
        """|x| at every grid point."""
        return np.sqrt(sum(c * c for c in self.coords))

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Integer k in FFT order."""
        return sfft.fftfreq(self.n, d=1.0 / self.n)

    @cached_property
    def xi_abs(self) -> np.ndarray:
        """|xi| on the full FFT layout."""
        k = self.wavenumbers * (math.pi / self.L)
        mesh = np.meshgrid(*([k] * self.dim), indexing="ij")
        return np.sqrt(sum(m * m for m in mesh))

    @cached_property
    def xi_abs_half(self) -> np.ndarray:
        """|xi| on the real-FFT (half-spectrum) layout."""
        k = self.wavenumbers * (math.pi / self.L)
        kr = sfft.rfftfreq(self.n, d=1.0 / self.n) * (math.pi / self.L)
        axes = [k] * (self.dim - 1) + [kr]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.sqrt(sum(m * m for m in mesh))

    @cached_property
    def phase(self) -> np.ndarray:
        """(-1)^(k_1+...+k_N) on the full layout; shifts the FFT origin to x = -L."""
        s = np.where(self.wavenumbers.astype(int) % 2 == 0, 1.0, -1.0)
        out = s
        for _ in range(self.dim - 1):
            out = np.multiply.outer(out, s)
        return out

    @cached_property
    def phase_half(self) -> np.ndarray:
        s = np.where(self.wavenumbers.astype(int) % 2 == 0, 1.0, -1.0)
        kr = np.arange(self.n // 2 + 1)
        sr = np.where(kr % 2 == 0, 1.0, -1.0)
        out = sr
        for _ in range(self.dim - 1):
            out = np.multiply.outer(s, out)
        return out

    @property
    def xi_max(self) -> float:
        return float(self.xi_abs.max())

    @property
    def xi_min(self) -> float:
        """Fundamental frequency pi/L."""
        return math.pi / self.L


@dataclass(frozen=True, eq=False)
class Field:
    """Real samples on a grid.  Values are copied and made read-only."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        if v.shape != self.grid.shape:
            raise DomainError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("field values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def _like(self, values) -> "Field":
        return Field(self.grid, values)

    def __add__(self, other: "Field") -> "Field":
        _same_grid(self, other)
        return self._like(self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        _same_grid(self, other)
        return self._like(self.values - other.values)

    def __neg__(self) -> "Field":
        return self._like(-self.values)

    def __mul__(self, c: float) -> "Field":
        return self._like(self.values * float(c))

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def integral(self) -> float:
        return float(self.values.sum() * self.grid.cell_volume)

    def lp_norm(self, p: float) -> float:
        """Riemann-sum L^p norm."""
        if math.isinf(p):
            return self.max_abs()
        return float((np.sum(np.abs(self.values) ** p) * self.grid.cell_volume) ** (1.0 / p))


def _same_grid(a, b):
    if a.grid != b.grid:
        raise UsageError("fields live on different grids")


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier-series coefficients c_k in FFT order."""

    grid: Grid
    coefficients: np.ndarray

    @property
    def xi_abs(self) -> np.ndarray:
        return self.grid.xi_abs


def dft(field: Field) -> SpectralField:
    coef = sfft.fftn(field.values, norm="forward", workers=workers()) * field.grid.phase
    return SpectralField(field.grid, coef)


def idft(sf: SpectralField, *, tol: float = 1e-9) -> Field:
    vals = sfft.ifftn(sf.coefficients * sf.grid.phase, norm="forward", workers=workers())
    scale = max(float(np.max(np.abs(vals.real), initial=0.0)), 1e-300)
    if np.max(np.abs(vals.imag), initial=0.0) > tol * scale + 1e-300:
        raise DomainError("coefficients are not Hermitian; inverse transform is not real")
    return Field(sf.grid, vals.real)


def rfft_field(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Half-spectrum coefficients (same normalisation as :func:`dft`)."""
    axes = tuple(range(-grid.dim, 0))
    return sfft.rfftn(values, axes=axes, norm="forward", workers=workers()) * grid.phase_half


def irfft_field(coef: np.ndarray, grid: Grid) -> np.ndarray:
    axes = tuple(range(-grid.dim, 0))
    return sfft.irfftn(coef * grid.phase_half, s=grid.shape, axes=axes, norm="forward", workers=workers())


def apply_multiplier(field: Field, m: Callable | np.ndarray) -> Field:
    """Return F^{-1}[m(|xi|) F field] for a radial multiplier.

    ``m`` is a callable of |xi| or an array on the half-spectrum layout.
    """
    grid = field.grid
    mult = m(grid.xi_abs_half) if callable(m) else np.asarray(m)
    mult = np.broadcast_to(mult, grid.xi_abs_half.shape)
    if not np.all(np.isfinite(mult)):
        raise DomainError("multiplier is not finite at every grid frequency")
    return Field(grid, irfft_field(rfft_field(field.values, grid) * mult, grid))


def heat_semigroup(t: float, field: Field) -> Field:
    """e^{t Delta} on the torus."""
    if t < 0:
        raise DomainError("heat semigroup needs t >= 0")
    if t == 0:
        return field
    return apply_multiplier(field, lambda xi: np.exp(-t * xi * xi))


# ---------------------------------------------------------------------------
# Littlewood-Paley construction


def _psi(x):
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def build_zeta() -> Callable[[np.ndarray], np.ndarray]:
    """Smooth radial cutoff: 1 on [0, 3/2], 0 on [5/3, inf), monotone between."""

    def zeta(t):
        t = np.asarray(t, dtype=float)
        u = (t - ZETA_FLAT) / (ZETA_SUPPORT - ZETA_FLAT)
        a = _psi(np.atleast_1d(1.0 - u))
        b = _psi(np.atleast_1d(u))
        out = a / (a + b)
        return out.reshape(t.shape) if t.ndim else float(out[0])

    return zeta


@dataclass(frozen=True, eq=False)
class FilterBank:
    """Dyadic multipliers on the half-spectrum layout of ``grid``.

    ``low`` is phi_(0) for the inhomogeneous bank and None for the
    homogeneous one; ``blocks`` maps j to phi_j.
    """

    grid: Grid
    homogeneous: bool
    j_min: int
    j_max: int
    low: np.ndarray | None
    blocks: dict
    dropped: tuple = ()

    @property
    def indices(self) -> list[int]:
        return sorted(self.blocks)

    def pieces(self, field: Field) -> tuple[np.ndarray | None, dict]:
        """Real-space blocks of ``field``: (low part or None, {j: block values})."""
        if field.grid != self.grid:
            raise UsageError("filter bank and field are on different grids")
        coef = rfft_field(field.values, self.grid)
        low = None if self.low is None else irfft_field(coef * self.low, self.grid)
        return low, {j: irfft_field(coef * b, self.grid) for j, b in self.blocks.items()}


def default_j_range(grid: Grid, homogeneous: bool) -> tuple[int, int]:
    """Blocks needed so the bank covers every grid frequency.

    j_max is the smallest J with 2^-J xi_max <= 3/2 (then the partial sum of
    the bank equals 1 everywhere); for the homogeneous bank j_min is the
    lowest block whose support reaches the fundamental frequency pi/L.
    """
    j_max = max(1, int(math.ceil(math.log2(grid.xi_max / ZETA_FLAT))))
    if homogeneous:
        j_min = int(math.floor(math.log2(ZETA_SUPPORT ** -1 * grid.xi_min))) + 1
    else:
        j_min = 1
    return j_min, j_max


def filter_bank(
    grid: Grid,
    homogeneous: bool = False,
    j_min: int | None = None,
    j_max: int | None = None,
) -> FilterBank:
    """Littlewood-Paley bank phi_j(xi) = zeta(2^-j |xi|) - zeta(2^{1-j} |xi|).

    Blocks whose support misses every grid frequency are dropped with an
    EstimatorWarning.  For the inhomogeneous bank j_min is always 1 (the
    low-frequency lump phi_(0) = zeta(|xi|) covers the rest).
    """
    d_min, d_max = default_j_range(grid, homogeneous)
    if not homogeneous:
        if j_min is not None and j_min != 1:
            warnings.warn("inhomogeneous bank starts at j=1; j_min ignored", EstimatorWarning, stacklevel=2)
        j_min = 1
    j_min = d_min if j_min is None else int(j_min)
    j_max = d_max if j_max is None else int(j_max)
    if j_min > j_max:
        raise UsageError(f"j_min={j_min} exceeds j_max={j_max}")
    zeta = build_zeta()
    xi = grid.xi_abs_half
    blocks = {}
    dropped = []
    for j in range(j_min, j_max + 1):
        phi = zeta(xi * 2.0**-j) - zeta(xi * 2.0 ** (1 - j))
        if homogeneous:
            phi = np.where(xi == 0, 0.0, phi)
        if not np.any(phi != 0):
            dropped.append(j)
            continue
        phi.flags.writeable = False
        blocks[j] = phi
    if dropped:
        warnings.warn(
            f"Littlewood-Paley blocks {dropped} have no grid frequency in their support and were dropped",
            EstimatorWarning,
            stacklevel=2,
        )
    if not blocks:
        raise UsageError("filter bank is empty on this grid")
    if j_max < d_max:
        warnings.warn(
            f"bank stops at j={j_max} below {d_max}; frequencies above 5/3*2^{j_max} are not covered",
            EstimatorWarning,
            stacklevel=2,
        )
    low = None
    if not homogeneous:
        low = zeta(xi)
        low.flags.writeable = False
    return FilterBank(grid, homogeneous, min(blocks), max(blocks), low, blocks, tuple(dropped))


def partition_check(bank: FilterBank) -> float:
    """max |sum of bank - 1| over the nonzero grid frequencies it should cover."""
    xi = bank.grid.xi_abs_half
    total = np.zeros_like(xi)
    if bank.low is not None:
        total += bank.low
    for b in bank.blocks.values():
        total += b
    mask = xi > 0
    if bank.homogeneous:
        lo = ZETA_SUPPORT * 2.0 ** (bank.j_min - 1)
        hi = ZETA_FLAT * 2.0**bank.j_max
        mask &= (xi >= lo) & (xi <= hi)
    else:
        mask |= xi == 0
    return float(np.max(np.abs(total[mask] - 1.0), initial=0.0))


# ---------------------------------------------------------------------------
# Diagnostics and serialization


def boundary_mass_fraction(field: Field) -> float:
    """Share of int |u| carried by points within 10% of the boundary."""
    near = np.zeros(field.grid.shape, dtype=bool)
    for c in field.grid.coords:
        near |= np.abs(c) >= 0.9 * field.grid.L
    a = np.abs(field.values)
    total = a.sum()
    return float(a[near].sum() / total) if total > 0 else 0.0


def check_boundary(field: Field, threshold: float = 1e-6, label: str = "field") -> float:
    frac = boundary_mass_fraction(field)
    if frac > threshold:
        warnings.warn(
            f"{label}: {frac:.2e} of the mass lies within 10% of the torus boundary",
            EstimatorWarning,
            stacklevel=2,
        )
    return frac


_HEADER = struct.Struct("<IId")


def write_field(path, field: Field) -> None:
    """Little-endian binary: uint32 dim, uint32 n, float64 L, then float64 samples (C order)."""
    g = field.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(g.dim, g.n, g.L))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_field(path) -> Field:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise UsageError(f"{path}: truncated header")
        dim, n, L = _HEADER.unpack(head)
        grid = Grid(dim, n, L)
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n**dim:
        raise UsageError(f"{path}: expected {n**dim} samples, found {data.size}")
    return Field(grid, data.reshape(grid.shape).astype(float))


def write_field_csv(path, field: Field) -> None:
    g = field.grid
    names = ["x", "y"][: g.dim]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", *names, "value"])
        flat = field.values.ravel()
        cols = [c.ravel() for c in g.coords]
        for i in range(flat.size):
            w.writerow([i, *(repr(float(c[i])) for c in cols), repr(float(flat[i]))])
