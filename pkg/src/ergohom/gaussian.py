"""Stationary Gaussian fields with a finite atomic spectrum.

A field ``X = X_c + X_a`` is the sum of an ergodic part ``X_c`` (atom-free
spectrum, synthesized by circulant embedding on the torus) and an almost
periodic part

    X_a(x) = x0 + sum_j r_j cos(w_j . x + phi_j)

whose coordinates ``(x0, r, phi)`` pin down the ergodic component.  An atom of
weight ``c_j`` contributes ``c_j cos(w_j . x)`` to the covariance, so
``x0 ~ N(0, c0)`` (variance ``c0``) and ``r_j`` is Rayleigh with scale
``sqrt(c_j)``, i.e. ``E[r_j^2] = 2 c_j``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fields import GridSpec
from .resonance import ResonanceLattice, invariant_phases

CLIP_RTOL = 1e-10


class EmbeddingError(ValueError):
    """Circulant embedding produced a significantly negative eigenvalue."""


@dataclass(frozen=True)
class Atom:
    omega: tuple[float, ...]
    c: float


@dataclass(frozen=True)
class AtomicSpectrum:
    c0: float = 0.0
    atoms: tuple[Atom, ...] = ()

    def __post_init__(self):
        atoms = tuple(a if isinstance(a, Atom) else Atom(tuple(map(float, a[0])), float(a[1]))
                      for a in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if self.c0 < 0:
            raise ValueError(f"c0 must be nonnegative, got {self.c0}")
        for j, a in enumerate(atoms):
            w = np.asarray(a.omega, dtype=float)
            if a.c <= 0:
                raise ValueError(f"atom {j}: weight must be positive, got {a.c}")
            if np.any(w < 0) or not np.any(w > 0):
                raise ValueError(f"atom {j}: frequency needs nonnegative entries, not all zero")
        omegas = [a.omega for a in atoms]
        if len(set(omegas)) != len(omegas):
            raise ValueError("atom frequencies must be pairwise distinct")
        if len({len(w) for w in omegas}) > 1:
            raise ValueError("atom frequencies must share one dimension")

    @property
    def N(self) -> int:
        return len(self.atoms)

    @property
    def omegas(self) -> np.ndarray:
        if not self.atoms:
            return np.zeros((0, 0))
        return np.array([a.omega for a in self.atoms], dtype=float)

    @property
    def weights(self) -> np.ndarray:
        return np.array([a.c for a in self.atoms], dtype=float)

    def covariance(self, lag) -> np.ndarray:
        """``C_a(x) = c0 + sum_j c_j cos(w_j . x)`` at lags of shape ``(..., d)``."""
        lag = np.asarray(lag, dtype=float)
        out = np.full(lag.shape[:-1], self.c0)
        for a in self.atoms:
            out = out + a.c * np.cos(lag @ np.asarray(a.omega))
        return out


@dataclass(frozen=True)
class ContinuousCovariance:
    kind: str = "none"
    sigma2: float = 0.0
    ell: float = 1.0

    def __post_init__(self):
        if self.kind not in ("none", "squared_exponential", "exponential"):
            raise ValueError(f"unknown covariance kind {self.kind!r}")
        if self.kind != "none" and not (self.sigma2 > 0 and self.ell > 0):
            raise ValueError("sigma2 and ell must be positive")

    @property
    def variance(self) -> float:
        return 0.0 if self.kind == "none" else self.sigma2

    def __call__(self, dist) -> np.ndarray:
        dist = np.asarray(dist, dtype=float)
        if self.kind == "none":
            return np.zeros_like(dist)
        if self.kind == "squared_exponential":
            return self.sigma2 * np.exp(-0.5 * (dist / self.ell) ** 2)
        return self.sigma2 * np.exp(-dist / self.ell)


@dataclass(frozen=True)
class GaussianFieldModel:
    continuous: ContinuousCovariance = field(default_factory=ContinuousCovariance)
    atomic: AtomicSpectrum = field(default_factory=AtomicSpectrum)
    channels: int = 1

    def __post_init__(self):
        if self.channels < 1:
            raise ValueError("channels must be >= 1")
        if self.total_variance <= 0:
            raise ValueError("total variance c0 + sum c_j + sigma2 must be positive")

    @property
    def total_variance(self) -> float:
        return self.atomic.c0 + float(self.atomic.weights.sum()) + self.continuous.variance


@dataclass(frozen=True, eq=False)
class ComponentCoordinates:
    """Point ``(x0, r, phi, eta)`` of the component space, one row per channel."""

    x0: np.ndarray   # (n,)
    r: np.ndarray    # (n, N)
    phi: np.ndarray  # (n, N)
    eta: np.ndarray  # (n, rank)

    def invariants(self) -> np.ndarray:
        return np.concatenate([np.atleast_1d(self.x0), self.r.ravel(), self.eta.ravel()])

    def same_component(self, other: "ComponentCoordinates", atol: float = 1e-9) -> bool:
        """Compare ``(x0, r, eta)``; phases ``eta`` are compared on the circle."""
        if self.r.shape != other.r.shape or self.eta.shape != other.eta.shape:
            return False
        if not np.allclose(self.x0, other.x0, rtol=0, atol=atol):
            return False
        if not np.allclose(self.r, other.r, rtol=0, atol=atol):
            return False
        gap = np.abs(np.angle(np.exp(1j * (self.eta - other.eta))))
        return bool(np.all(gap <= atol))

    def shifted(self, y, omegas: np.ndarray, lattice: ResonanceLattice) -> "ComponentCoordinates":
        """Coordinates of the field translated by ``y``: ``phi_j -> phi_j + w_j . y``."""
        if self.phi.shape[-1] == 0:
            return self
        phi = np.mod(self.phi + omegas @ np.asarray(y, dtype=float), 2 * np.pi)
        return ComponentCoordinates(self.x0, self.r, phi, invariant_phases(lattice, phi))


def _check_lattice(model: GaussianFieldModel, lattice: ResonanceLattice | None) -> ResonanceLattice:
    N = model.atomic.N
    if lattice is None:
        if N > 1:
            raise ValueError("a resonance lattice is required for more than one atom")
        return ResonanceLattice.trivial(N)
    if lattice.N != N:
        raise ValueError(f"lattice has {lattice.N} atoms, model has {N}")
    return lattice


def sample_component(model: GaussianFieldModel, lattice: ResonanceLattice | None,
                     rng: np.random.Generator) -> ComponentCoordinates:
    lattice = _check_lattice(model, lattice)
    n, N = model.channels, model.atomic.N
    c0 = model.atomic.c0
    x0 = rng.normal(0.0, np.sqrt(c0), size=n) if c0 > 0 else np.zeros(n)
    r = rng.rayleigh(np.sqrt(model.atomic.weights), size=(n, N)) if N else np.zeros((n, 0))
    phi = rng.uniform(0.0, 2 * np.pi, size=(n, N))
    return ComponentCoordinates(x0, r, phi, invariant_phases(lattice, phi))


def evaluate_atomic(coords: ComponentCoordinates, atoms: AtomicSpectrum, points) -> np.ndarray:
    """``x0 + sum_j r_j cos(w_j . x + phi_j)`` at ``points`` of shape ``(..., d)``.

    Returns shape ``(n,) + points.shape[:-1]``.
    """
    points = np.asarray(points, dtype=float)
    n = len(coords.x0)
    if coords.r.shape[-1] != atoms.N:
        raise ValueError(f"coordinates carry {coords.r.shape[-1]} atoms, spectrum has {atoms.N}")
    out = np.empty((n,) + points.shape[:-1])
    for c in range(n):
        acc = np.full(points.shape[:-1], float(coords.x0[c]))
        for j, a in enumerate(atoms.atoms):
            acc += coords.r[c, j] * np.cos(points @ np.asarray(a.omega) + coords.phi[c, j])
        out[c] = acc
    return out


def synth_atomic(coords: ComponentCoordinates, atoms: AtomicSpectrum, grid: GridSpec) -> np.ndarray:
    """Atomic part at the cell centers; shape ``(n,) + grid.shape``."""
    if atoms.N and atoms.omegas.shape[1] != grid.dim:
        raise ValueError(f"atom frequencies are {atoms.omegas.shape[1]}-dimensional, grid is {grid.dim}D")
    return evaluate_atomic(coords, atoms, grid.cell_centers())


def periodized_covariance(cov: ContinuousCovariance, grid: GridSpec, images: int | None = None) -> np.ndarray:
    """First row of the torus covariance, ``sum_m C(x + m L)`` over periodic images."""
    shape = grid.shape
    # minimum-image lags keep the truncated image sum exactly even
    lags = [np.minimum(np.arange(n), n - np.arange(n)) * grid.h for n in shape]
    L = np.array(grid.lengths)
    # tail below double precision: exp(-40) and exp(-50) respectively
    reach = 40.0 if cov.kind == "exponential" else 10.0
    explicit = images
    if images is None:
        images = int(np.ceil(reach * cov.ell / L.min())) + 1
    out = np.zeros(shape)
    for m in np.ndindex(*(2 * images + 1,) * grid.dim):
        m = np.array(m) - images
        gap = np.maximum(np.abs(m) - 0.5, 0.0) * L
        if explicit is None and np.sqrt(np.sum(gap**2)) > reach * cov.ell:
            continue
        shift = m * L
        sq = sum(np.meshgrid(*[(lags[a] + shift[a]) ** 2 for a in range(grid.dim)], indexing="ij"))
        out += cov(np.sqrt(sq))
    return out


@functools.lru_cache(maxsize=32)
def circulant_sqrt_eigs(cov: ContinuousCovariance, grid: GridSpec) -> np.ndarray:
    """Square roots of the circulant eigenvalues (cached; returned read-only)."""
    row = periodized_covariance(cov, grid)
    eig = np.fft.fftn(row).real
    worst = eig.min() / grid.size
    if worst < -CLIP_RTOL * cov.sigma2:
        raise EmbeddingError(
            f"circulant embedding has a negative eigenvalue ({worst:.3e} relative); "
            "enlarge the torus relative to the correlation length"
        )
    out = np.sqrt(np.clip(eig, 0.0, None))
    out.setflags(write=False)
    return out


def synth_continuous(cov: ContinuousCovariance, grid: GridSpec, rng: np.random.Generator,
                     channels: int = 1, size: int | None = None) -> np.ndarray:
    """Centered Gaussian field with the periodized covariance of ``cov``.

    Shape ``(channels,) + grid.shape``, with a leading ``size`` axis if given.
    """
    if not grid.periodic:
        raise ValueError("continuous synthesis needs a periodic grid")
    lead = (channels,) if size is None else (size, channels)
    if cov.kind == "none":
        return np.zeros(lead + grid.shape)
    sq = circulant_sqrt_eigs(cov, grid)
    axes = tuple(range(-grid.dim, 0))
    white = rng.standard_normal(lead + grid.shape)
    return np.fft.ifftn(np.fft.fftn(white, axes=axes) * sq, axes=axes).real


def sample_field(model: GaussianFieldModel, lattice: ResonanceLattice | None, grid: GridSpec,
                 rng: np.random.Generator, coords: ComponentCoordinates | None = None):
    """One realization ``X_c + X_a`` and the component coordinates it used.

    With ``coords`` given, only the continuous part is random (conditional
    sampling within a component).
    """
    if coords is None:
        coords = sample_component(model, lattice, rng)
    x = synth_atomic(coords, model.atomic, grid)
    if model.continuous.kind != "none":
        x = x + synth_continuous(model.continuous, grid, rng, model.channels)
    return x, coords


def empirical_autocovariance(samples: Sequence[np.ndarray], lags: Sequence) -> np.ndarray:
    """Space-and-sample average of ``X(x + lag) X(x)`` for centered fields.

    Fields are treated as periodic; ``lags`` are integer cell offsets.
    """
    samples = [np.asarray(s, dtype=float) for s in samples]
    if len(samples) < 2:
        raise ValueError("need at least two samples")
    stack = np.stack(samples)
    axes = tuple(range(1, stack.ndim))
    out = []
    for lag in lags:
        lag = tuple(int(k) for k in np.atleast_1d(lag))
        shifted = np.roll(stack, tuple(-k for k in lag), axis=axes[-len(lag):])
        out.append(float(np.mean(shifted * stack)))
    return np.array(out)
