import math
import random

import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from _freqgen import random_frequency_set
from ergohom import io
from ergohom.corrector import homogenize, voigt_reuss_bounds
from ergohom.fields import CoefficientField, EllipticityBounds, GridSpec, from_triangle, to_triangle
from ergohom.resonance import hermite_basis, invariant_phases, kernel_basis

FAST = settings(max_examples=25, deadline=None)

coeffs = st.floats(0.5, 5.0, allow_nan=False)


def iso_field(vals, dim):
    vals = np.asarray(vals)
    n = vals.shape[0]
    return CoefficientField.isotropic(GridSpec.unit_torus(dim, n), vals, EllipticityBounds(vals.min(), vals.max()))


@FAST
@given(arrays(float, (3, 3), elements=st.floats(-10, 10)))
def test_triangle_roundtrip(m):
    sym = m + m.T
    np.testing.assert_array_equal(from_triangle(to_triangle(sym), 3), sym)


@FAST
@given(arrays(float, (6, 6), elements=coeffs))
def test_homogenized_is_symmetric_and_sandwiched(a):
    f = iso_field(a, 2)
    A = homogenize(f, tol=1e-10).entries
    lo, hi = voigt_reuss_bounds(f)
    assert np.allclose(A, A.T, atol=1e-12)
    assert np.linalg.eigvalsh(A - lo).min() > -1e-8
    assert np.linalg.eigvalsh(hi - A).min() > -1e-8


@FAST
@given(arrays(float, (6, 6), elements=coeffs), st.integers(0, 5), st.integers(0, 5))
def test_translation_invariance(a, s0, s1):
    f = iso_field(a, 2)
    A = homogenize(f, tol=1e-11).entries
    B = homogenize(f.shifted((s0, s1)), tol=1e-11).entries
    np.testing.assert_allclose(A, B, atol=1e-8)


@FAST
@given(arrays(float, (8,), elements=coeffs), st.floats(0.1, 10.0))
def test_1d_scaling_and_harmonic_mean(a, c):
    A = homogenize(iso_field(a, 1)).entries[0, 0]
    assert math.isclose(A, 1 / np.mean(1 / a), rel_tol=1e-12)
    B = homogenize(iso_field(c * a, 1)).entries[0, 0]
    assert math.isclose(B, c * A, rel_tol=1e-10)


@FAST
@given(arrays(float, (6, 6), elements=coeffs))
def test_transpose_swaps_axes(a):
    A = homogenize(iso_field(a, 2), tol=1e-11).entries
    B = homogenize(iso_field(a.T.copy(), 2), tol=1e-11).entries
    np.testing.assert_allclose(A[::-1, ::-1], B, atol=1e-8)


@FAST
@given(st.integers(0, 2**32))
def test_kernel_basis_properties(seed):
    F = random_frequency_set(random.Random(seed))
    L = kernel_basis(F)
    assert all(F.vanishes(row) for row in L.basis)
    assert hermite_basis(L.basis, L.N) == L.basis
    # pivots strictly increase and are positive
    pivots = [next(j for j, x in enumerate(row) if x) for row in L.basis]
    assert pivots == sorted(set(pivots))
    assert all(row[p] > 0 for row, p in zip(L.basis, pivots))


@FAST
@given(st.integers(0, 2**32), st.floats(-50, 50))
def test_eta_invariant_under_translation(seed, y):
    rnd = random.Random(seed)
    F = random_frequency_set(rnd)
    L = kernel_basis(F)
    omegas = F.evaluate([1.0 + rnd.random(), math.sqrt(2) + rnd.random()][: len(F.generators)])
    phi = np.array([rnd.uniform(0, 2 * math.pi) for _ in range(F.N)])
    shift = np.full(F.dim, y)
    gap = invariant_phases(L, phi + omegas @ shift) - invariant_phases(L, phi)
    assert np.all(np.abs(np.angle(np.exp(1j * gap))) < 1e-9)


@FAST
@given(st.integers(1, 3), st.integers(2, 4), st.integers(0, 2**32))
def test_container_roundtrip(dim, n, seed):
    import tempfile
    from pathlib import Path

    rng = np.random.default_rng(seed)
    f = iso_field(rng.uniform(1, 2, (n,) * dim), dim)
    with tempfile.TemporaryDirectory() as d:
        io.write_field(Path(d) / "f", f)
        assert np.array_equal(io.read_field(Path(d) / "f").values, f.values)
