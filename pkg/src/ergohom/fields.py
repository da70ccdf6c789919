"""Grid-sampled coefficient fields and pointwise elliptic maps.

Cells are stored in row-major axis order and every cell carries the
``d(d+1)/2`` upper-triangle entries of a symmetric matrix, so symmetry
holds by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SYMMETRY_RTOL = 1e-12
EIG_SLACK = 1e-12


class EllipticityError(ValueError):
    """A cell matrix falls outside the declared ellipticity bounds."""


@dataclass(frozen=True)
class GridSpec:
    dim: int
    cells: tuple[int, ...]
    h: float
    periodic: bool = True

    def __post_init__(self):
        cells = tuple(int(c) for c in np.atleast_1d(self.cells))
        if len(cells) == 1 and self.dim > 1:
            cells = cells * self.dim
        object.__setattr__(self, "cells", cells)
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if len(cells) != self.dim:
            raise ValueError(f"expected {self.dim} cell counts, got {len(cells)}")
        if min(cells) < 2:
            raise ValueError(f"every axis needs at least 2 cells, got {cells}")
        if not self.h > 0:
            raise ValueError(f"cell size must be positive, got {self.h}")

    @classmethod
    def unit_torus(cls, dim: int, n: int) -> "GridSpec":
        return cls(dim, (n,) * dim, 1.0 / n, True)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def size(self) -> int:
        return int(np.prod(self.cells))

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(n * self.h for n in self.cells)

    def cell_centers(self) -> np.ndarray:
        """Cell-center coordinates, shape ``cells + (dim,)``."""
        axes = [(np.arange(n) + 0.5) * self.h for n in self.cells]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


@dataclass(frozen=True)
class EllipticityBounds:
    lam: float
    Lam: float

    def __post_init__(self):
        if not (0 < self.lam <= self.Lam):
            raise ValueError(f"need 0 < lambda <= Lambda, got ({self.lam}, {self.Lam})")


def n_entries(dim: int) -> int:
    return dim * (dim + 1) // 2


def to_triangle(mats: np.ndarray) -> np.ndarray:
    """Full ``(..., d, d)`` matrices -> ``(..., d(d+1)/2)`` upper-triangle entries."""
    d = mats.shape[-1]
    iu = np.triu_indices(d)
    return mats[..., iu[0], iu[1]]


def from_triangle(tri: np.ndarray, dim: int) -> np.ndarray:
    iu = np.triu_indices(dim)
    out = np.empty(tri.shape[:-1] + (dim, dim), dtype=float)
    out[..., iu[0], iu[1]] = tri
    out[..., iu[1], iu[0]] = tri
    return out


def _format_cell(grid: GridSpec, flat_index: int) -> str:
    return str(tuple(int(i) for i in np.unravel_index(flat_index, grid.shape)))


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """Symmetric elliptic matrix field, piecewise constant on the cells of ``grid``."""

    grid: GridSpec
    values: np.ndarray
    bounds: EllipticityBounds
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        d = self.grid.dim
        values = np.array(self.values, dtype=float)
        expected = self.grid.shape + (n_entries(d),)
        if values.shape != expected:
            raise ValueError(f"values have shape {values.shape}, expected {expected}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        _enforce_bounds(self.grid, from_triangle(values, d), self.bounds)

    @classmethod
    def from_matrices(cls, grid, mats, bounds, meta=None) -> "CoefficientField":
        mats = np.asarray(mats, dtype=float)
        asym = np.abs(mats - np.swapaxes(mats, -1, -2)).max(initial=0.0)
        if asym > SYMMETRY_RTOL * bounds.Lam:
            raise ValueError(f"cell matrices are not symmetric (max asymmetry {asym:.3e})")
        return cls(grid, to_triangle(mats), bounds, dict(meta or {}))

    @classmethod
    def isotropic(cls, grid, scalars, bounds, meta=None) -> "CoefficientField":
        scalars = np.broadcast_to(np.asarray(scalars, dtype=float), grid.shape)
        d = grid.dim
        tri = np.zeros(grid.shape + (n_entries(d),))
        tri[..., _diag_slots(d)] = scalars[..., None]
        return cls(grid, tri, bounds, dict(meta or {}))

    @classmethod
    def constant(cls, grid, matrix, bounds, meta=None) -> "CoefficientField":
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim == 0:
            matrix = matrix * np.eye(grid.dim)
        mats = np.broadcast_to(matrix, grid.shape + matrix.shape)
        return cls.from_matrices(grid, mats, bounds, meta)

    def matrices(self) -> np.ndarray:
        return from_triangle(self.values, self.grid.dim)

    def is_isotropic(self) -> bool:
        d = self.grid.dim
        diag = self.values[..., _diag_slots(d)]
        off = np.delete(self.values, _diag_slots(d), axis=-1)
        return bool(np.all(off == 0.0) and np.all(diag == diag[..., :1]))

    def scalar_values(self) -> np.ndarray:
        """Cell scalars of an isotropic field."""
        if not self.is_isotropic():
            raise ValueError("field is not isotropic")
        return self.values[..., 0]

    def shifted(self, offset: Sequence[int]) -> "CoefficientField":
        rolled = np.roll(self.values, tuple(int(k) for k in offset), axis=tuple(range(self.grid.dim)))
        return CoefficientField(self.grid, rolled, self.bounds, dict(self.meta))


def _diag_slots(d: int) -> list[int]:
    iu = np.triu_indices(d)
    return [k for k, (i, j) in enumerate(zip(*iu)) if i == j]


def _enforce_bounds(grid: GridSpec, mats: np.ndarray, bounds: EllipticityBounds) -> None:
    eig = np.linalg.eigvalsh(mats.reshape(-1, grid.dim, grid.dim))
    bad = ~np.isfinite(eig).all(axis=1)
    bad |= eig[:, 0] < bounds.lam - EIG_SLACK
    bad |= eig[:, -1] > bounds.Lam + EIG_SLACK
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise EllipticityError(
            f"cell {_format_cell(grid, k)} has eigenvalues {eig[k]} outside "
            f"[{bounds.lam}, {bounds.Lam}]"
        )


@dataclass(frozen=True)
class EllipticityReport:
    min_eig: float
    max_eig: float
    symmetric: bool


def check_ellipticity(field, Lam: float | None = None) -> EllipticityReport:
    """Extremal eigenvalues over all cells and a symmetry flag.

    Accepts a :class:`CoefficientField` or a raw ``(..., d, d)`` array of
    cell matrices; the latter may be non-symmetric, in which case the
    eigenvalues of the symmetric part are reported.
    """
    if isinstance(field, CoefficientField):
        mats = field.matrices()
        Lam = field.bounds.Lam
    else:
        mats = np.asarray(field, dtype=float)
    d = mats.shape[-1]
    mats = mats.reshape(-1, d, d)
    asym = float(np.abs(mats - np.swapaxes(mats, -1, -2)).max(initial=0.0))
    eig = np.linalg.eigvalsh(0.5 * (mats + np.swapaxes(mats, -1, -2)))
    if Lam is None:
        Lam = float(np.abs(eig).max())
    return EllipticityReport(float(eig.min()), float(eig.max()), asym < SYMMETRY_RTOL * Lam)


@dataclass(frozen=True)
class EllipticMap:
    """Pointwise map ``F`` from channel values to elliptic matrices.

    One channel gives an isotropic matrix ``F(x) Id``; ``d`` channels give
    ``diag(F(x_1), ..., F(x_d))``.
    """

    kind: str
    params: tuple[float, ...]
    channels: int = 1

    def __post_init__(self):
        if self.kind not in ("affine_clamped", "logistic", "two_phase"):
            raise ValueError(f"unknown elliptic map {self.kind!r}")
        if self.channels < 1:
            raise ValueError("channel count must be >= 1")
        EllipticityBounds(*self._bounds())

    @classmethod
    def affine_clamped(cls, mu, s, lam, Lam, channels=1):
        return cls("affine_clamped", (float(mu), float(s), float(lam), float(Lam)), channels)

    @classmethod
    def logistic(cls, lam, Lam, channels=1):
        return cls("logistic", (float(lam), float(Lam)), channels)

    @classmethod
    def two_phase(cls, a1, a2, threshold=0.0, channels=1):
        return cls("two_phase", (float(a1), float(a2), float(threshold)), channels)

    @property
    def continuous(self) -> bool:
        return self.kind != "two_phase"

    @property
    def test_only(self) -> bool:
        # two_phase is discontinuous; kept for its closed-form oracles
        return not self.continuous

    def _bounds(self) -> tuple[float, float]:
        if self.kind == "two_phase":
            a1, a2, _ = self.params
            return min(a1, a2), max(a1, a2)
        return self.params[-2], self.params[-1]

    @property
    def bounds(self) -> EllipticityBounds:
        return EllipticityBounds(*self._bounds())

    def scalar(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "affine_clamped":
            mu, s, lam, Lam = self.params
            return np.clip(mu + s * x, lam, Lam)
        if self.kind == "logistic":
            lam, Lam = self.params
            return lam + (Lam - lam) / (1.0 + np.exp(-x))
        a1, a2, t = self.params
        return np.where(x < t, a1, a2)


def map_field(x, F: EllipticMap, grid: GridSpec, meta=None) -> CoefficientField:
    """Apply ``F`` cellwise to channel values ``x``.

    ``x`` has shape ``grid.shape`` for one channel or
    ``(channels,) + grid.shape`` in general.
    """
    x = np.asarray(x, dtype=float)
    if x.shape == grid.shape:
        x = x[None]
    if x.shape != (F.channels,) + grid.shape:
        raise ValueError(f"channel field has shape {x.shape}, expected {(F.channels,) + grid.shape}")
    d = grid.dim
    vals = F.scalar(x)
    bounds = F.bounds
    meta = dict(meta or {})
    meta.setdefault("map", F.kind)
    meta.setdefault("continuous_map", F.continuous)
    if F.channels == 1:
        _check_scalar(grid, vals[0], bounds)
        return CoefficientField.isotropic(grid, vals[0], bounds, meta)
    if F.channels != d:
        raise ValueError(f"a {F.channels}-channel map needs dim == channels, got dim {d}")
    tri = np.zeros(grid.shape + (n_entries(d),))
    tri[..., _diag_slots(d)] = np.moveaxis(vals, 0, -1)
    for c in range(d):
        _check_scalar(grid, vals[c], bounds)
    return CoefficientField(grid, tri, bounds, meta)


def _check_scalar(grid, vals, bounds):
    bad = ~np.isfinite(vals) | (vals < bounds.lam - EIG_SLACK) | (vals > bounds.Lam + EIG_SLACK)
    if bad.any():
        k = int(np.flatnonzero(bad.ravel())[0])
        raise EllipticityError(
            f"map output {vals.ravel()[k]} at cell {_format_cell(grid, k)} "
            f"violates bounds [{bounds.lam}, {bounds.Lam}]"
        )


def checkerboard(grid: GridSpec, a1: float, a2: float, blocks: int = 2) -> CoefficientField:
    """Two-phase checkerboard with ``blocks`` squares per axis, starting with ``a1``."""
    if any(n % blocks for n in grid.cells):
        raise ValueError(f"{blocks} blocks do not divide the grid {grid.cells}")
    parity = sum(np.indices(grid.shape)[a] // (grid.cells[a] // blocks) for a in range(grid.dim)) % 2
    return CoefficientField.isotropic(
        grid, np.where(parity == 0, a1, a2), EllipticityBounds(min(a1, a2), max(a1, a2)),
        {"pattern": "checkerboard"},
    )
