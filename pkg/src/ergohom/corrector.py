"""Periodic corrector problems and homogenized matrices on a torus RVE.

The cell problem ``-div a (grad phi_i + e_i) = 0`` is discretized with Q1
elements on the periodic grid (nodes at cell corners, coefficient constant per
cell) and solved by conjugate gradients, preconditioned with the exact inverse
of the constant-coefficient operator at ``(lambda + Lambda) / 2``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ._q1 import PeriodicQ1
from .fields import CoefficientField

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 10_000
ASYMMETRY_TOL = 1e-8


class SolverError(RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True, eq=False)
class CorrectorSolution:
    phi: np.ndarray  # (d,) + grid shape, zero mean
    residual: float
    iterations: int
    residuals: tuple[float, ...] = ()
    history: tuple[tuple[float, ...], ...] = field(default=(), repr=False)
    grid: object = None


@dataclass(frozen=True)
class HomogenizedMatrix:
    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim == 0:
            a = a.reshape(1, 1)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def triangle(self) -> np.ndarray:
        return self.entries[np.triu_indices(self.dim)]


def _dot(x, y) -> float:
    # numpy pairwise summation: fixed reduction order, independent of BLAS threading
    return float(np.sum(x * y))


def _operator(field: CoefficientField) -> PeriodicQ1:
    grid = field.grid
    if field.is_isotropic():
        return PeriodicQ1(grid.shape, grid.h, field.scalar_values())
    return PeriodicQ1(grid.shape, grid.h, field.matrices())


def _pcg(op: PeriodicQ1, b, inv_symbol, tol, max_iter):
    shape = op.shape
    axes = tuple(range(len(shape)))

    def precond(r):
        return np.fft.irfftn(np.fft.rfftn(r) * inv_symbol, s=shape, axes=axes)

    x = np.zeros(shape)
    bnorm = np.sqrt(_dot(b, b))
    if bnorm == 0.0:
        return x, 0.0, 0, [0.0]
    r = b.copy()
    z = precond(r)
    p = z.copy()
    rz = _dot(r, z)
    history = [1.0]
    for it in range(1, max_iter + 1):
        Ap = op.apply(p)
        alpha = rz / _dot(p, Ap)
        x += alpha * p
        r -= alpha * Ap
        rel = np.sqrt(_dot(r, r)) / bnorm
        history.append(rel)
        if rel <= tol:
            return x, rel, it, history
        z = precond(r)
        rz_new = _dot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(
        f"corrector CG did not reach tol {tol:g} in {max_iter} iterations "
        f"(final relative residual {history[-1]:.3e})",
        residual=history[-1],
    )


def solve_correctors(field: CoefficientField, tol: float = DEFAULT_TOL,
                     max_iter: int = DEFAULT_MAX_ITER) -> CorrectorSolution:
    """Solve the ``d`` periodic cell problems for ``field``.

    Raises:
        ValueError: non-periodic grid or ``tol`` outside ``(0, 1)``.
        SolverError: ``max_iter`` reached; carries the final residual.
    """
    grid = field.grid
    if not grid.periodic:
        raise ValueError("corrector problems need a periodic grid")
    if not 0 < tol < 1:
        raise ValueError(f"tol must lie in (0, 1), got {tol}")
    op = _operator(field)
    a0 = 0.5 * (field.bounds.lam + field.bounds.Lam)
    sym = op.symbol(a0)
    inv = np.zeros_like(sym)
    nz = np.abs(sym) > 1e-12 * np.abs(sym).max()
    inv[nz] = 1.0 / sym[nz]
    inv.flat[0] = 0.0

    phis, residuals, iters, histories = [], [], [], []
    for i in range(grid.dim):
        e = np.zeros(grid.dim)
        e[i] = 1.0
        b = op.load(e)
        phi, res, it, hist = _pcg(op, b, inv, tol, max_iter)
        phi -= phi.mean()
        log.info("corrector dir=%d iterations=%d residual=%.3e", i, it, res)
        phis.append(phi)
        residuals.append(res)
        iters.append(it)
        histories.append(tuple(hist))
    return CorrectorSolution(
        phi=np.stack(phis),
        residual=max(residuals),
        iterations=max(iters),
        residuals=tuple(residuals),
        history=tuple(histories),
        grid=grid,
    )


def _unit_gradients(field, corr):
    op = _operator(field)
    d = field.grid.dim
    E = []
    for i in range(d):
        G = op.gradients(corr.phi[i])
        G[..., i] += 1.0
        E.append(G)
    return op, E


def homogenized_matrix(field: CoefficientField, corr: CorrectorSolution,
                       form: str = "energy") -> HomogenizedMatrix:
    """Volume average of ``(e_i + grad phi_i) . a (e_j + grad phi_j)``.

    ``form="flux"`` averages ``e_i . a (e_j + grad phi_j)`` instead; both
    agree once the cell problems are solved.
    """
    if corr.grid is not None and corr.grid != field.grid:
        raise ValueError(f"corrector grid {corr.grid} does not match field grid {field.grid}")
    if corr.phi.shape != (field.grid.dim,) + field.grid.shape:
        raise ValueError("corrector shape does not match the field grid")
    op, E = _unit_gradients(field, corr)
    d = field.grid.dim
    A = np.empty((d, d))
    fluxes = [op.flux(E[j]) for j in range(d)]
    for i in range(d):
        for j in range(d):
            if form == "energy":
                A[i, j] = np.mean(np.sum(E[i] * fluxes[j], axis=-1))
            elif form == "flux":
                A[i, j] = np.mean(fluxes[j][..., i])
            else:
                raise ValueError(f"unknown form {form!r}")
    norm = np.linalg.norm(A)
    asym = np.linalg.norm(A - A.T) / norm if norm else 0.0
    if form == "energy" and asym > ASYMMETRY_TOL:
        raise SolverError(f"homogenized matrix asymmetry {asym:.3e} exceeds {ASYMMETRY_TOL}")
    return HomogenizedMatrix(0.5 * (A + A.T) if form == "energy" else A)


def homogenize(field: CoefficientField, tol: float = DEFAULT_TOL,
               max_iter: int = DEFAULT_MAX_ITER) -> HomogenizedMatrix:
    return homogenized_matrix(field, solve_correctors(field, tol, max_iter))


def voigt_reuss_bounds(field: CoefficientField) -> tuple[np.ndarray, np.ndarray]:
    """Harmonic (lower) and arithmetic (upper) means of the cell matrices."""
    mats = field.matrices().reshape(-1, field.grid.dim, field.grid.dim)
    upper = mats.mean(axis=0)
    try:
        inv = np.linalg.inv(mats)
    except np.linalg.LinAlgError as exc:
        raise ValueError("singular cell matrix") from exc
    lower = np.linalg.inv(inv.mean(axis=0))
    return 0.5 * (lower + lower.T), 0.5 * (upper + upper.T)
