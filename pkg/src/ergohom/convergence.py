"""Dirichlet problems at scale eps against their homogenized limit.

Both ``-div a(x/eps) grad u = f`` and ``-div A_h grad u = f`` are solved with
Q1 elements on a regular mesh of the box ``D`` with zero boundary values.
The oscillating coefficient is read off a torus realization, unrolled
periodically, at the mesh cell centers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _q1
from .corrector import DEFAULT_MAX_ITER, DEFAULT_TOL, HomogenizedMatrix, SolverError, homogenize
from .fields import CoefficientField, GridSpec

log = logging.getLogger(__name__)

MIN_CELLS_PER_EPS = 8
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class DirichletProblem:
    """Homogeneous Dirichlet problem on the box ``lower + [0, lengths]``.

    ``f`` is a constant, a callable on points of shape ``(..., d)``, or an
    array of per-cell values on the mesh.
    """

    lengths: tuple[float, ...] = (1.0,)
    f: object = 1.0
    lower: tuple[float, ...] | None = None

    @property
    def dim(self) -> int:
        return len(self.lengths)

    def mesh(self, cells_per_unit: int) -> GridSpec:
        h = 1.0 / cells_per_unit
        cells = []
        for L in self.lengths:
            n = L / h
            if abs(n - round(n)) > 1e-9:
                raise ValueError(f"domain length {L} is not a multiple of the mesh size {h}")
            cells.append(int(round(n)))
        return GridSpec(self.dim, tuple(cells), h, periodic=False)

    def origin(self) -> np.ndarray:
        return np.zeros(self.dim) if self.lower is None else np.asarray(self.lower, dtype=float)


@dataclass
class ConvergenceReport:
    epsilons: list[float]
    errors: list[float]
    h1_seminorms: list[float]
    homogenized: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def rows(self):
        return list(zip(self.epsilons, self.errors, self.h1_seminorms))


class _DirichletQ1:
    """Assembled Q1 system on a non-periodic mesh; boundary nodes eliminated."""

    def __init__(self, mesh: GridSpec, origin):
        self.mesh = mesh
        self.d = mesh.dim
        self.origin = np.asarray(origin, dtype=float)
        self.node_shape = tuple(n + 1 for n in mesh.cells)
        self.B = _q1.shape_gradients(self.d, mesh.h)
        self.N = _q1.shape_values(self.d)
        self.vol = mesh.h ** self.d
        ks = _q1.corners(self.d)
        cell_idx = np.indices(mesh.shape).reshape(self.d, -1).T
        self.conn = np.stack(
            [np.ravel_multi_index(tuple((cell_idx + k).T), self.node_shape) for k in ks], axis=1
        )
        interior = np.zeros(self.node_shape, dtype=bool)
        interior[tuple(slice(1, -1) for _ in range(self.d))] = True
        self.interior = np.flatnonzero(interior.ravel())
        corner0 = cell_idx * mesh.h + self.origin
        self.gauss = corner0[:, None, :] + _q1.gauss_points(self.d)[None, :, :] * mesh.h

    def stiffness(self, mats: np.ndarray) -> sp.csr_matrix:
        """``mats`` has shape ``(cells, d, d)``."""
        Q = self.B.shape[0]
        Ke = np.einsum("qbk,cbe,qel->ckl", self.B, mats, self.B) * (self.vol / Q)
        K = self.conn.shape[1]
        rows = np.repeat(self.conn, K, axis=1).ravel()
        cols = np.tile(self.conn, (1, K)).ravel()
        n = int(np.prod(self.node_shape))
        return sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()

    def load(self, f) -> np.ndarray:
        Q = self.N.shape[0]
        if callable(f):
            fq = np.asarray(f(self.gauss), dtype=float)
        else:
            f = np.asarray(f, dtype=float)
            fq = np.broadcast_to(f.reshape(-1, 1) if f.ndim else f, self.gauss.shape[:2])
        Fe = (fq @ self.N) * (self.vol / Q)
        out = np.zeros(int(np.prod(self.node_shape)))
        np.add.at(out, self.conn.ravel(), Fe.ravel())
        return out

    def solve(self, mats, f) -> np.ndarray:
        K = self.stiffness(mats)
        b = self.load(f)
        I = self.interior
        Kii = K[I][:, I].tocsc()
        bi = b[I]
        u = np.zeros(K.shape[0])
        if np.any(bi):
            u[I] = spla.spsolve(Kii, bi)
            res = np.linalg.norm(Kii @ u[I] - bi) / np.linalg.norm(bi)
            if not res <= RESIDUAL_TOL:
                raise SolverError(f"Dirichlet solve residual {res:.3e} exceeds {RESIDUAL_TOL}", res)
        return u.reshape(self.node_shape)

    def at_gauss(self, u) -> tuple[np.ndarray, np.ndarray]:
        U = u.ravel()[self.conn]
        vals = U @ self.N.T
        grads = np.einsum("ck,qbk->cqb", U, self.B)
        return vals, grads

    def l2(self, u) -> float:
        vals, _ = self.at_gauss(u)
        return float(np.sqrt(np.sum(vals**2) * self.vol / vals.shape[1]))

    def h1_seminorm(self, u) -> float:
        _, grads = self.at_gauss(u)
        return float(np.sqrt(np.sum(grads**2) * self.vol / grads.shape[1]))


def _mesh_coefficient(realization: CoefficientField, mesh: GridSpec, origin, eps: float) -> np.ndarray:
    grid = realization.grid
    centers = mesh.cell_centers().reshape(-1, mesh.dim) + origin
    idx = np.floor(centers / (eps * grid.h)).astype(np.int64) % np.array(grid.cells)
    mats = realization.matrices()
    return mats[tuple(idx.T)]


def _check_mesh(problem, mesh):
    if mesh.dim != problem.dim:
        raise ValueError(f"mesh is {mesh.dim}D, problem is {problem.dim}D")
    for L, n in zip(problem.lengths, mesh.cells):
        if abs(n * mesh.h - L) > 1e-9 * L:
            raise ValueError("mesh does not cover the problem domain")


def solve_eps(problem: DirichletProblem, realization: CoefficientField, eps: float,
              mesh: GridSpec) -> np.ndarray:
    """Nodal solution of ``-div a(x/eps) grad u = f`` with ``u = 0`` on the boundary."""
    if not 0 < eps <= 1:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    _check_mesh(problem, mesh)
    if eps / mesh.h < MIN_CELLS_PER_EPS - 1e-9:
        raise ValueError(
            f"mesh size {mesh.h} under-resolves eps = {eps}: need at least "
            f"{MIN_CELLS_PER_EPS} cells per eps"
        )
    sys = _DirichletQ1(mesh, problem.origin())
    mats = _mesh_coefficient(realization, mesh, problem.origin(), eps)
    return sys.solve(mats, problem.f)


def solve_hom(problem: DirichletProblem, A, mesh: GridSpec) -> np.ndarray:
    """Nodal solution of ``-div A grad u = f`` with constant ``A``."""
    _check_mesh(problem, mesh)
    A = np.asarray(A.entries if isinstance(A, HomogenizedMatrix) else A, dtype=float)
    A = A * np.eye(problem.dim) if A.ndim == 0 else A
    if np.linalg.eigvalsh(0.5 * (A + A.T)).min() <= 0:
        raise ValueError("homogenized matrix is not elliptic")
    sys = _DirichletQ1(mesh, problem.origin())
    mats = np.broadcast_to(A, (mesh.size, problem.dim, problem.dim))
    return sys.solve(mats, problem.f)


def default_mesh(problem: DirichletProblem, eps_list: Sequence[float],
                 realization: CoefficientField, cells_per_eps: int = 16) -> GridSpec:
    """Smallest power-of-two mesh that gives ``cells_per_eps`` cells per eps and
    aligns the mesh with the realization cells at every eps."""
    n = 1
    need = cells_per_eps / min(eps_list)
    while n < need or any(abs(e * realization.grid.h * n - round(e * realization.grid.h * n)) > 1e-9
                          for e in eps_list):
        n *= 2
        if n > 2**16:
            raise ValueError("no aligned mesh found; pass mesh explicitly")
    return problem.mesh(n)


def convergence_study(source, problem: DirichletProblem, eps_list: Sequence[float],
                      mesh: GridSpec | None = None, rng: np.random.Generator | None = None,
                      rve_grid: GridSpec | None = None, homogenized=None,
                      tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> ConvergenceReport:
    """Relative L2 errors ``|u_eps - u_h| / |u_h|`` along a decreasing eps ladder.

    ``source`` is a fixed torus realization or a stationary measure; for a
    measure one component and one realization are drawn from ``rng`` on
    ``rve_grid`` and reused at every eps.  ``homogenized`` overrides the
    matrix computed by the corrector solve on the same realization.
    """
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps list must be strictly decreasing")
    if isinstance(source, CoefficientField):
        realization = source
    else:
        from .measure import sample_component

        if rng is None or rve_grid is None:
            raise ValueError("sampling a measure needs rng and rve_grid")
        _, gen = sample_component(source, rng)
        realization = gen(rve_grid, rng)
    if homogenized is None:
        A = homogenize(realization, tol, max_iter).entries
    else:
        A = np.asarray(homogenized.entries if isinstance(homogenized, HomogenizedMatrix) else homogenized,
                       dtype=float)
    if mesh is None:
        mesh = default_mesh(problem, eps_list, realization)
    sys = _DirichletQ1(mesh, problem.origin())
    u_h = solve_hom(problem, A, mesh)
    norm_h = sys.l2(u_h)
    errors, h1 = [], []
    for eps in eps_list:
        u = solve_eps(problem, realization, eps, mesh)
        err = sys.l2(u - u_h) / norm_h if norm_h else sys.l2(u)
        errors.append(err)
        h1.append(sys.h1_seminorm(u))
        log.info("eps=%.6g l2_error=%.6e h1_seminorm=%.6e", eps, err, h1[-1])
    return ConvergenceReport(eps_list, errors, h1, np.array(A), {"mesh": mesh})


def l2_norm(problem: DirichletProblem, mesh: GridSpec, u) -> float:
    return _DirichletQ1(mesh, problem.origin()).l2(u)


def f_l2_norm(problem: DirichletProblem, mesh: GridSpec) -> float:
    sys = _DirichletQ1(mesh, problem.origin())
    f = problem.f
    if callable(f):
        fq = np.asarray(f(sys.gauss), dtype=float)
    else:
        fq = np.broadcast_to(np.asarray(f, dtype=float).reshape(-1, 1) if np.ndim(f) else f,
                             sys.gauss.shape[:2])
    return float(np.sqrt(np.sum(fq**2) * sys.vol / fq.shape[1]))
