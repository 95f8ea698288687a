"""Discrete estimators of Morrey, measure-Morrey, Besov and Besov-Morrey norms.

Balls are open, B(x0, R) = {|x - x0| < R} in the periodic distance of the
torus, and contain the grid cells whose centres fall inside.  Centres are
grid points (every ``centers_stride``-th along each axis) and radii are
dyadic multiples of the spacing, so every estimate is the maximum over a
finite sample and hence a lower bound of the continuum supremum.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .errors import DomainError, EstimatorWarning, UsageError
from .spectral import Field, FilterBank, Grid, workers

__all__ = [
    "MorreyParams",
    "SpaceParams",
    "DiscreteMeasure",
    "MorreyResult",
    "BesovMorreyResult",
    "dyadic_radii",
    "ball_sums",
    "morrey_norm",
    "measure_morrey_norm",
    "besov_morrey_norm",
    "besov_l1_norm",
    "highfreq_limsup",
    "block_norms",
]

INF = math.inf


@dataclass(frozen=True)
class MorreyParams:
    p: float
    q: float
    local: bool = False

    def __post_init__(self):
        if not (1.0 <= self.q <= self.p < INF):
            raise DomainError(f"Morrey indices need 1 <= q <= p < inf, got p={self.p}, q={self.q}")

    @property
    def exponent(self) -> float:
        """N-free part of R^{N/p - N/q}: multiply by N."""
        return 1.0 / self.p - 1.0 / self.q


@dataclass(frozen=True)
class SpaceParams:
    """Besov-Morrey indices; ``r`` may be math.inf."""

    s: float
    p: float
    q: float
    r: float = INF
    homogeneous: bool = False

    def __post_init__(self):
        if not (1.0 <= self.q <= self.p < INF):
            raise DomainError(f"Besov-Morrey indices need 1 <= q <= p < inf, got p={self.p}, q={self.q}")
        if not (self.r >= 1.0):
            raise DomainError(f"r must lie in [1, inf], got {self.r}")

    def morrey(self) -> MorreyParams:
        # the inhomogeneous space is built on the local Morrey norm, the homogeneous one on the global
        return MorreyParams(self.p, self.q, local=not self.homogeneous)


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted atoms sitting on grid points (integer indices, one row per atom)."""

    grid: Grid
    indices: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        idx = np.atleast_2d(np.asarray(self.indices, dtype=int))
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if idx.shape != (w.size, self.grid.dim):
            raise DomainError("atom indices must have shape (atoms, dim)")
        if not np.all(np.isfinite(w)):
            raise DomainError("atom weights must be finite")
        idx = idx % self.grid.n
        idx.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "weights", w)

    @classmethod
    def dirac(cls, grid: Grid, mass: float = 1.0) -> "DiscreteMeasure":
        """Unit atom at the grid point x = 0."""
        return cls(grid, [[grid.n // 2] * grid.dim], [mass])

    @property
    def positions(self) -> np.ndarray:
        return self.grid.x[self.indices]

    def total_variation(self) -> float:
        return float(np.abs(self.weights).sum())

    def bin(self) -> Field:
        """Density field: atom weight divided by the cell volume."""
        vals = np.zeros(self.grid.shape)
        np.add.at(vals, tuple(self.indices.T), self.weights / self.grid.cell_volume)
        return Field(self.grid, vals)

    def pair(self, values: np.ndarray) -> float:
        """<mu, psi> for psi sampled on the grid."""
        return float(np.sum(self.weights * np.asarray(values)[tuple(self.indices.T)]))


def as_field(obj) -> Field:
    if isinstance(obj, DiscreteMeasure):
        return obj.bin()
    if isinstance(obj, Field):
        return obj
    raise UsageError(f"expected a Field or DiscreteMeasure, got {type(obj).__name__}")


# ---------------------------------------------------------------------------
# Morrey norms


def dyadic_radii(grid: Grid, local: bool) -> tuple[float, ...]:
    """h * 2^k up to 1 (local) or L (global)."""
    top = 1.0 if local else grid.L
    out = []
    r = grid.h
    while r <= top * (1 + 1e-12):
        out.append(r)
        r *= 2.0
    if not out:
        out.append(top)
    return tuple(out)


def _periodic_offsets(grid: Grid) -> np.ndarray:
    # distance from the origin cell with wrap-around, in FFT (index) layout
    k = np.arange(grid.n)
    d = np.minimum(k, grid.n - k) * grid.h
    mesh = np.meshgrid(*([d] * grid.dim), indexing="ij")
    return np.sqrt(sum(m * m for m in mesh))


@lru_cache(maxsize=64)
def _ball_kernels(grid: Grid, radii: tuple[float, ...]):
    dist = _periodic_offsets(grid)
    out = []
    for r in radii:
        ker = (dist < r).astype(float)
        out.append((sfft.rfftn(ker), int(ker.sum())))
    return out


def ball_sums(values: np.ndarray, grid: Grid, radii) -> np.ndarray:
    """sum of ``values`` over the open ball around every grid point, for each radius.

    Circular convolution by FFT; results are clamped at zero because the
    input is assumed nonnegative.  Shape (len(radii), *grid.shape).
    """
    radii = tuple(float(r) for r in radii)
    fv = sfft.rfftn(values, workers=workers())
    out = np.empty((len(radii),) + grid.shape)
    for i, (fk, _) in enumerate(_ball_kernels(grid, radii)):
        out[i] = sfft.irfftn(fv * fk, s=grid.shape, workers=workers())
    np.maximum(out, 0.0, out=out)
    return out


@dataclass(frozen=True)
class MorreyResult:
    value: float
    center: tuple[float, ...]
    radius: float
    radii: tuple[float, ...]
    profile: tuple[float, ...]  # max over centres, per radius
    resolution_limited: bool = False


def _warn_resolution(label, exponent):
    warnings.warn(
        f"{label}: maximum attained at the smallest radius with negative exponent {exponent:.3g}; "
        "the estimate is set by the grid spacing and need not converge",
        EstimatorWarning,
        stacklevel=3,
    )


def morrey_norm(
    field: Field,
    params: MorreyParams,
    centers_stride: int = 1,
    radii=None,
    *,
    full_output: bool = False,
    warn: bool = True,
):
    """max over sampled (x0, R) of R^{N/p - N/q} (h^N sum_{B(x0,R)} |u|^q)^{1/q}."""
    grid = field.grid
    if centers_stride < 1:
        raise DomainError("centers_stride must be >= 1")
    if radii is None:
        radii = dyadic_radii(grid, params.local)
    radii = tuple(sorted(float(r) for r in radii))
    top = 1.0 if params.local else grid.L
    if any(r <= 0 or r > top * (1 + 1e-12) for r in radii):
        raise DomainError(f"radii must lie in ]0, {top:g}]")
    kernels = _ball_kernels(grid, radii)
    keep = [i for i, (_, count) in enumerate(kernels) if count > 0]
    if len(keep) < len(radii):
        warnings.warn("empty balls at the smallest radii were skipped", EstimatorWarning, stacklevel=2)
        radii = tuple(radii[i] for i in keep)
    if not radii:
        raise DomainError("no radius produces a nonempty ball")

    sums = ball_sums(np.abs(field.values) ** params.q, grid, radii)
    sl = (slice(None),) + (slice(None, None, centers_stride),) * grid.dim
    sums = sums[sl]
    n_exp = grid.dim * params.exponent
    flat = sums.reshape(len(radii), -1)
    best_per_r = flat.max(axis=1)
    scores = np.array([r**n_exp for r in radii]) * (grid.cell_volume * best_per_r) ** (1.0 / params.q)
    i = int(np.argmax(scores))
    value = float(scores[i])
    limited = bool(n_exp < 0 and i == 0 and value > 0 and len(radii) > 1)
    if limited and warn:
        _warn_resolution("morrey_norm", n_exp)
    if not full_output:
        return value
    j = int(np.argmax(flat[i]))
    idx = np.unravel_index(j, sums.shape[1:])
    center = tuple(float(grid.x[k * centers_stride]) for k in idx)
    return MorreyResult(value, center, radii[i], radii, tuple(float(s) for s in scores), limited)


def measure_morrey_norm(
    mu: DiscreteMeasure,
    p: float,
    local: bool = False,
    *,
    centers_stride: int = 1,
    radii=None,
    full_output: bool = False,
    warn: bool = True,
):
    """max over sampled (x0, R) of R^{N/p - N} |mu|(B(x0, R)), by exact atom counting."""
    if not p >= 1:
        raise DomainError("p must be >= 1")
    grid = mu.grid
    if radii is None:
        radii = dyadic_radii(grid, local)
    radii = tuple(sorted(float(r) for r in radii))
    # periodic distance between every sampled centre and every atom (index space)
    sub = np.arange(0, grid.n, centers_stride)
    cmesh = np.meshgrid(*([sub] * grid.dim), indexing="ij")
    centres = np.stack([c.ravel() for c in cmesh], axis=1)
    dist2 = np.zeros((centres.shape[0], mu.indices.shape[0]))
    for d in range(grid.dim):
        diff = np.abs(centres[:, d, None] - mu.indices[None, :, d])
        diff = np.minimum(diff, grid.n - diff) * grid.h
        dist2 += diff * diff
    dist = np.sqrt(dist2)
    absw = np.abs(mu.weights)
    n_exp = grid.dim / p - grid.dim
    scores = []
    where = []
    for r in radii:
        mass = (dist < r) @ absw
        k = int(np.argmax(mass))
        scores.append(r**n_exp * float(mass[k]))
        where.append(k)
    i = int(np.argmax(scores))
    value = scores[i]
    limited = bool(n_exp < 0 and i == 0 and value > 0 and len(radii) > 1)
    if limited and warn:
        _warn_resolution("measure_morrey_norm", n_exp)
    if not full_output:
        return value
    center = tuple(float(grid.x[c]) for c in centres[where[i]])
    return MorreyResult(value, center, radii[i], radii, tuple(scores), limited)


# ---------------------------------------------------------------------------
# Besov and Besov-Morrey norms


def _aggregate(values, r: float) -> float:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return 0.0
    if math.isinf(r):
        return float(values.max())
    return float(np.sum(values**r) ** (1.0 / r))


@dataclass(frozen=True)
class BesovMorreyResult:
    value: float
    low: float | None
    blocks: dict = field(default_factory=dict)  # j -> Morrey norm of the block (unweighted)
    weighted: dict = field(default_factory=dict)  # j -> 2^{sj} * block norm


def block_norms(obj, space: SpaceParams, bank: FilterBank, *, centers_stride: int = 1, radii=None):
    """Morrey norms of the low part and of every block of ``obj``."""
    f = as_field(obj)
    if bank.homogeneous != space.homogeneous:
        raise UsageError("filter bank and space disagree on homogeneity")
    mp = space.morrey()
    low, pieces = bank.pieces(f)
    kw = dict(centers_stride=centers_stride, radii=radii, warn=False)
    low_norm = None if low is None else morrey_norm(Field(f.grid, low), mp, **kw)
    blocks = {j: morrey_norm(Field(f.grid, v), mp, **kw) for j, v in pieces.items()}
    return low_norm, blocks


def besov_morrey_norm(
    obj,
    space: SpaceParams,
    bank: FilterBank,
    *,
    centers_stride: int = 1,
    radii=None,
    full_output: bool = False,
):
    """||{2^{sj} ||phi_j u | Morrey||}|l^r|| (+ the low part when inhomogeneous)."""
    low, blocks = block_norms(obj, space, bank, centers_stride=centers_stride, radii=radii)
    weighted = {j: 2.0 ** (space.s * j) * v for j, v in blocks.items()}
    value = _aggregate(list(weighted.values()), space.r) + (low or 0.0)
    if full_output:
        return BesovMorreyResult(value, low, blocks, weighted)
    return value


def besov_l1_norm(field: Field, s: float, bank: FilterBank) -> float:
    """Inhomogeneous B^s_{1,1}: ||phi_(0) u||_1 + sum_j 2^{sj} ||phi_j u||_1 (grid L^1)."""
    if bank.homogeneous:
        raise UsageError("B^s_{1,1} is computed with the inhomogeneous bank")
    low, pieces = bank.pieces(field)
    h = field.grid.cell_volume
    total = float(np.abs(low).sum() * h)
    for j, v in pieces.items():
        total += 2.0 ** (s * j) * float(np.abs(v).sum() * h)
    return total


def highfreq_limsup(
    obj,
    s: float,
    p: float,
    q: float,
    j0: int,
    bank: FilterBank,
    *,
    centers_stride: int = 1,
):
    """max_{j >= j0} 2^{sj} ||phi_j mu | M^p_q||, the finite-grid stand-in for the limsup."""
    if j0 > bank.j_max:
        raise DomainError(f"j0={j0} lies beyond the highest block {bank.j_max}")
    space = SpaceParams(s, p, q, INF, bank.homogeneous)
    f = as_field(obj)
    _, pieces = bank.pieces(f)
    mp = space.morrey()
    best = 0.0
    for j, v in pieces.items():
        if j >= j0:
            best = max(best, 2.0 ** (s * j) * morrey_norm(Field(f.grid, v), mp, centers_stride, warn=False))
    return best
