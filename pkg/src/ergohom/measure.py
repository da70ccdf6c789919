"""Stationary measures, their ergodic components and the law of the homogenized matrix.

A stationary measure is either a finite mixture of ergodic components or a
Gaussian-related measure ``a = F(X)``.  Sampling a component (the
disintegration) returns a label identifying it together with a generator
that draws realizations from that component only.  Estimating the law of
``A_h`` then means homogenizing one large-torus realization per component.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from . import gaussian
from .corrector import DEFAULT_MAX_ITER, DEFAULT_TOL, HomogenizedMatrix, SolverError, homogenize
from .fields import CoefficientField, EllipticityBounds, EllipticityError, EllipticMap, GridSpec, map_field
from .gaussian import ComponentCoordinates, GaussianFieldModel
from .resonance import ResonanceLattice
from .streams import stream

log = logging.getLogger(__name__)

WEIGHT_TOL = 1e-12
MAX_ABORT_FRACTION = 0.01
LABEL_ATOL = 1e-9


class LawEstimationError(RuntimeError):
    pass


def _pattern_matrices(pattern, dim):
    pattern = np.asarray(pattern, dtype=float)
    if pattern.ndim == dim:
        return pattern[..., None, None] * np.eye(dim)
    if pattern.ndim == dim + 2 and pattern.shape[-2:] == (dim, dim):
        return pattern
    raise ValueError(f"pattern of shape {pattern.shape} does not fit a {dim}D grid")


def _bounds_of(mats) -> EllipticityBounds:
    eig = np.linalg.eigvalsh(mats.reshape((-1,) + mats.shape[-2:]))
    return EllipticityBounds(float(eig.min()), float(eig.max()))


@dataclass(frozen=True)
class ConstantComponent:
    matrix: object

    def generate(self, grid: GridSpec, rng=None) -> CoefficientField:
        m = np.asarray(self.matrix, dtype=float)
        m = m * np.eye(grid.dim) if m.ndim == 0 else m
        return CoefficientField.constant(grid, m, _bounds_of(m), {"component": "constant"})


@dataclass(frozen=True)
class PeriodicComponent:
    """Pattern stretched over one period (in length units) and tiled over the torus."""

    pattern: object
    period: float = 1.0

    def _tile(self, grid: GridSpec, offset=None) -> CoefficientField:
        mats = _pattern_matrices(self.pattern, grid.dim)
        pshape = mats.shape[:grid.dim]
        cells_per_period = self.period / grid.h
        reps = []
        for a, p in enumerate(pshape):
            block = cells_per_period / p
            if abs(block - round(block)) > 1e-9 or grid.cells[a] % round(cells_per_period):
                raise ValueError(
                    f"axis {a}: {grid.cells[a]} cells of size {grid.h} do not fit "
                    f"whole periods of {self.period} with {p} pattern entries"
                )
            reps.append(int(round(block)))
        for a, b in enumerate(reps):
            mats = np.repeat(mats, b, axis=a)
        tiles = tuple(grid.cells[a] // mats.shape[a] for a in range(grid.dim))
        mats = np.tile(mats, tiles + (1, 1))
        if offset is not None:
            mats = np.roll(mats, tuple(offset), axis=tuple(range(grid.dim)))
        return CoefficientField.from_matrices(grid, mats, _bounds_of(mats), {"component": "periodic"})

    def generate(self, grid: GridSpec, rng=None) -> CoefficientField:
        return self._tile(grid)


@dataclass(frozen=True)
class ShiftedPeriodicComponent(PeriodicComponent):
    """Periodic pattern translated by a uniform random phase (whole cells)."""

    random_phase: bool = True

    def generate(self, grid: GridSpec, rng=None) -> CoefficientField:
        if not self.random_phase or rng is None:
            return self._tile(grid)
        per = int(round(self.period / grid.h))
        return self._tile(grid, offset=rng.integers(0, per, size=grid.dim))


@dataclass(frozen=True)
class GaussianComponent:
    """Component ``xi = (x0, r, eta)`` of a Gaussian-related measure.

    Realizations translate the frozen atomic part by a uniform random shift
    and add fresh continuous-part noise.
    """

    model: GaussianFieldModel
    F: EllipticMap
    coords: ComponentCoordinates
    lattice: ResonanceLattice

    def generate(self, grid: GridSpec, rng: np.random.Generator) -> CoefficientField:
        coords = self.coords
        if self.model.atomic.N:
            y = rng.uniform(0.0, 1.0, size=grid.dim) * np.array(grid.lengths)
            coords = coords.shifted(y, self.model.atomic.omegas, self.lattice)
        x, _ = gaussian.sample_field(self.model, self.lattice, grid, rng, coords=coords)
        return map_field(x, self.F, grid, {"component": "gaussian"})


ErgodicComponentSpec = Union[ConstantComponent, PeriodicComponent, ShiftedPeriodicComponent, GaussianComponent]


@dataclass(frozen=True)
class Mixture:
    components: tuple[tuple[float, object], ...]

    def __post_init__(self):
        comps = tuple((float(w), c) for w, c in self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise ValueError("a mixture needs at least one component")
        weights = np.array([w for w, _ in comps])
        if np.any(weights < 0) or np.any(weights > 1):
            raise ValueError("mixture weights must lie in [0, 1]")
        if abs(weights.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError(f"mixture weights sum to {weights.sum():.12g}, not 1")

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.components])


@dataclass(frozen=True)
class GaussianRelated:
    model: GaussianFieldModel
    F: EllipticMap
    lattice: ResonanceLattice | None = None

    def __post_init__(self):
        if self.F.channels != self.model.channels:
            raise ValueError(f"map expects {self.F.channels} channels, model has {self.model.channels}")
        if self.lattice is None:
            if self.model.atomic.N > 1:
                raise ValueError("a resonance lattice is required for more than one atom")
            object.__setattr__(self, "lattice", ResonanceLattice.trivial(self.model.atomic.N))


StationaryMeasureSpec = Union[Mixture, GaussianRelated]


@dataclass(frozen=True, eq=False)
class ComponentLabel:
    index: int | None = None
    coords: ComponentCoordinates | None = None

    def same_component(self, other: "ComponentLabel", atol: float = LABEL_ATOL) -> bool:
        if self.index is not None or other.index is not None:
            return self.index == other.index
        return self.coords.same_component(other.coords, atol)

    def columns(self) -> list[float]:
        if self.index is not None:
            return [float(self.index)]
        return [float(v) for v in self.coords.invariants()]


def sample_component(spec, rng: np.random.Generator):
    """Draw a component and return ``(label, generator)``.

    ``generator(grid, rng)`` yields coefficient fields from that component only.
    """
    if isinstance(spec, Mixture):
        if len(spec.components) == 1:
            k = 0
        else:
            k = int(rng.choice(len(spec.components), p=spec.weights))
        comp = spec.components[k][1]
        return ComponentLabel(index=k), comp.generate
    if isinstance(spec, GaussianRelated):
        coords = gaussian.sample_component(spec.model, spec.lattice, rng)
        comp = GaussianComponent(spec.model, spec.F, coords, spec.lattice)
        return ComponentLabel(coords=coords), comp.generate
    raise TypeError(f"unsupported measure {type(spec).__name__}")


def condition(spec: Mixture, k: int) -> Mixture:
    """The mixture conditioned on component ``k``."""
    return Mixture(((1.0, spec.components[k][1]),))


@dataclass
class EmpiricalLaw:
    """Weighted sample of homogenized matrices, one per sampled component."""

    matrices: list[HomogenizedMatrix]
    weights: np.ndarray
    seed_indices: list[int]
    labels: list[ComponentLabel]
    metadata: dict = field(default_factory=dict)
    aborted: list[tuple[int, str]] = field(default_factory=list)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if len(self.weights) and (np.any(self.weights <= 0) or abs(self.weights.sum() - 1) > 1e-12):
            raise ValueError("law weights must be positive and sum to 1")

    def __len__(self):
        return len(self.matrices)

    def entries(self) -> np.ndarray:
        """Upper-triangle entries, one row per sample."""
        return np.array([m.triangle() for m in self.matrices])

    def support(self, decimals: int = 12) -> list[tuple[np.ndarray, float]]:
        """Distinct matrices (after rounding) with their total weight."""
        groups: dict[tuple, list] = {}
        for m, w in zip(self.matrices, self.weights):
            key = tuple(np.round(m.triangle(), decimals))
            if key in groups:
                groups[key][1] += w
            else:
                groups[key] = [m.entries, w]
        return [(m, w) for m, w in groups.values()]


def _law_sample(spec, grid, tol, max_iter, master_seed, i):
    rng = stream(master_seed, i)
    label, gen = sample_component(spec, rng)
    try:
        fld = gen(grid, rng)
        A = homogenize(fld, tol, max_iter)
    except (SolverError, EllipticityError, gaussian.EmbeddingError) as exc:
        return i, label, None, str(exc)
    return i, label, A, None


def estimate_law(spec, M: int, grid: GridSpec, master_seed: int, tol: float = DEFAULT_TOL,
                 max_iter: int = DEFAULT_MAX_ITER, threads: int = 1) -> EmpiricalLaw:
    """Monte Carlo law of ``A_h``: one homogenized torus realization per sampled component.

    Sample ``i`` uses the stream keyed by ``(master_seed, i)`` for both the
    component and its realization, so results do not depend on ``threads``.

    Raises:
        LawEstimationError: more than 1% of the samples aborted.
    """
    if M < 1:
        raise ValueError("M must be >= 1")

    def task(i):
        return _law_sample(spec, grid, tol, max_iter, master_seed, i)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(task, range(M)))
    else:
        results = [task(i) for i in range(M)]

    matrices, labels, indices, aborted = [], [], [], []
    for i, label, A, err in results:
        if A is None:
            log.warning("sample %d aborted: %s", i, err)
            aborted.append((i, err))
            continue
        matrices.append(A)
        labels.append(label)
        indices.append(i)
    if len(aborted) > MAX_ABORT_FRACTION * M or not matrices:
        detail = f"; first failure: sample {aborted[0][0]}: {aborted[0][1]}" if aborted else ""
        raise LawEstimationError(f"{len(aborted)} of {M} samples aborted{detail}")
    meta = {"master_seed": master_seed, "M": M, "grid": grid, "tol": tol, "max_iter": max_iter}
    return EmpiricalLaw(matrices, np.full(len(matrices), 1.0 / len(matrices)), indices, labels, meta, aborted)


def trace_mean(mats: np.ndarray) -> np.ndarray:
    """Cellwise ``trace(a) / d``."""
    return np.trace(mats, axis1=-2, axis2=-1) / mats.shape[-1]


def _statistic_values(realization, statistic):
    if isinstance(realization, CoefficientField):
        data = realization.matrices()
        ndim = realization.grid.dim
        if statistic is None:
            statistic = trace_mean
    else:
        data = np.asarray(realization, dtype=float)
        ndim = data.ndim
    values = np.asarray(statistic(data) if statistic is not None else data, dtype=float)
    return values, ndim


def birkhoff_average(realization, radii: Sequence[int], statistic: Callable | None = None,
                     center=None) -> np.ndarray:
    """Box averages of a cellwise statistic for each radius in ``radii``.

    The box of radius ``R`` holds the cells with index offset in ``[-R, R)``
    from ``center`` (default: the middle cell) on every axis.  Coefficient
    fields default to the ``trace / d`` statistic.
    """
    values, ndim = _statistic_values(realization, statistic)
    shape = values.shape[:ndim]
    center = tuple(n // 2 for n in shape) if center is None else tuple(int(c) for c in center)
    out = []
    for R in radii:
        R = int(R)
        if R < 1:
            raise ValueError(f"radius must be positive, got {R}")
        box = []
        for a, n in enumerate(shape):
            lo, hi = center[a] - R, center[a] + R
            if lo < 0 or hi > n:
                raise ValueError(f"radius {R} exceeds the sampled domain on axis {a} ({n} cells)")
            box.append(slice(lo, hi))
        out.append(float(np.mean(values[tuple(box)])))
    return np.array(out)


def classify_component(realization, references: Sequence[float], radii: Sequence[int],
                       statistic: Callable | None = None, tol: float | None = None):
    """Index of the reference nearest to the Birkhoff average at the largest radius.

    Returns ``None`` (unclassified) on ties or when the nearest reference is
    farther than ``tol``; the default ``tol`` is a quarter of the smallest
    gap between references.
    """
    refs = np.asarray(references, dtype=float)
    value = birkhoff_average(realization, [max(radii)], statistic)[0]
    if tol is None:
        gaps = np.abs(refs[:, None] - refs[None, :])[~np.eye(len(refs), dtype=bool)]
        tol = gaps.min() / 4 if gaps.size else np.inf
    dist = np.abs(refs - value)
    order = np.argsort(dist, kind="stable")
    best = int(order[0])
    if dist[best] > tol:
        return None
    if len(refs) > 1 and dist[order[1]] - dist[best] <= 1e-12 * max(1.0, abs(value)):
        return None
    return best
