"""Multilinear (Q1) elements on regular grids.

Nodes sit at cell corners; corner ``k`` of cell ``c`` is node ``c + k`` with
``k`` in ``{0, 1}^d`` enumerated lexicographically.  Coefficients are constant
per cell and element integrals use the tensor 2-point Gauss rule, which is
exact for every product of Q1 gradients.
"""

from __future__ import annotations

import itertools

import numpy as np


def corners(d: int) -> np.ndarray:
    return np.array(list(itertools.product((0, 1), repeat=d)), dtype=int)


def gauss_points(d: int) -> np.ndarray:
    g = 0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)
    return np.array(list(itertools.product(g, repeat=d)))


def shape_values(d: int) -> np.ndarray:
    """``N[q, k]``: shape function ``k`` at Gauss point ``q`` of the unit cell."""
    xi = gauss_points(d)
    ks = corners(d)
    return np.prod(np.where(ks[None, :, :] == 1, xi[:, None, :], 1.0 - xi[:, None, :]), axis=-1)


def shape_gradients(d: int, h: float) -> np.ndarray:
    """``B[q, b, k]``: derivative along axis ``b`` of shape function ``k`` at Gauss point ``q``."""
    xi = gauss_points(d)
    ks = corners(d)
    Q, K = len(xi), len(ks)
    B = np.empty((Q, d, K))
    for b in range(d):
        factors = np.where(ks[None, :, :] == 1, xi[:, None, :], 1.0 - xi[:, None, :])
        factors[:, :, b] = np.where(ks[None, :, b] == 1, 1.0, -1.0)
        B[:, b, :] = np.prod(factors, axis=-1) / h
    return B


def mean_gradients(d: int, h: float) -> np.ndarray:
    """Cell-averaged shape gradients ``D[b, k] = (2 k_b - 1) / (h 2^(d-1))``, exact in floating point."""
    ks = corners(d)
    return ((2 * ks - 1).T / (h * 2 ** (d - 1))).astype(float)


class PeriodicQ1:
    """Matrix-free stiffness operator on a periodic grid.

    ``apply`` returns the cell sum of ``int_cell grad(v) . a grad(u)`` for all
    nodal test functions, with the cell volume factor dropped.
    """

    def __init__(self, shape, h, coeff):
        self.shape = tuple(shape)
        self.d = len(self.shape)
        self.h = float(h)
        self.B = shape_gradients(self.d, self.h)
        self.Q = self.B.shape[0]
        self.K = self.B.shape[2]
        self.corners = [tuple(k) for k in corners(self.d)]
        self.axes = tuple(range(self.d))
        # (K, Q*d) so that nodal values @ Bt gives gradients at all Gauss points
        self.Bt = self.B.transpose(2, 0, 1).reshape(self.K, self.Q * self.d)
        self.Bw = self.Bt.T / self.Q
        coeff = np.asarray(coeff, dtype=float)
        if coeff.ndim == 0 or coeff.shape == self.shape:
            self.scalar = np.broadcast_to(coeff, self.shape).reshape(-1, 1, 1)
            self.mats = None
        else:
            self.scalar = None
            self.mats = np.broadcast_to(coeff, self.shape + (self.d, self.d)).reshape(-1, self.d, self.d)

    def gather(self, u):
        n = int(np.prod(self.shape))
        U = np.empty((n, self.K))
        for j, k in enumerate(self.corners):
            U[:, j] = np.roll(u, tuple(-c for c in k), axis=self.axes).ravel()
        return U

    def scatter(self, R):
        out = np.zeros(self.shape)
        for j, k in enumerate(self.corners):
            out += np.roll(R[:, j].reshape(self.shape), k, axis=self.axes)
        return out

    def gradients(self, u) -> np.ndarray:
        """Gradients at Gauss points, shape ``(cells, Q, d)``."""
        return (self.gather(u) @ self.Bt).reshape(-1, self.Q, self.d)

    def flux(self, G):
        if self.mats is None:
            return self.scalar * G
        return G @ np.swapaxes(self.mats, -1, -2)

    def apply(self, u):
        S = self.flux(self.gradients(u)).reshape(-1, self.Q * self.d)
        return self.scatter(S @ self.Bw)

    def load(self, vec):
        """Nodal right-hand side ``-sum_cells D^T (a vec)`` for a constant vector ``vec``."""
        D = mean_gradients(self.d, self.h)
        if self.mats is None:
            flux = self.scalar[:, :, 0] * np.asarray(vec, dtype=float)[None, :]
        else:
            flux = self.mats @ np.asarray(vec, dtype=float)
        return -self.scatter(flux @ D)

    def symbol(self, a0=1.0):
        """Fourier symbol of the operator with constant isotropic coefficient ``a0``."""
        ref = PeriodicQ1(self.shape, self.h, a0)
        delta = np.zeros(self.shape)
        delta[(0,) * self.d] = 1.0
        return np.fft.rfftn(ref.apply(delta)).real
