import math

import numpy as np
import pytest

from ergohom import gaussian
from ergohom.fields import GridSpec
from ergohom.gaussian import (
    Atom, AtomicSpectrum, ComponentCoordinates, ContinuousCovariance, EmbeddingError, GaussianFieldModel,
    empirical_autocovariance, evaluate_atomic, periodized_covariance, sample_component, sample_field,
    synth_continuous,
)
from ergohom.resonance import FrequencySet, kernel_basis
from ergohom.streams import stream

TWO_PI = 2 * math.pi


def one_atom(c0=0.5, c=1.0):
    return GaussianFieldModel(atomic=AtomicSpectrum(c0, (Atom((TWO_PI,), c),)))


def test_spectrum_validation():
    with pytest.raises(ValueError):
        AtomicSpectrum(-1.0)
    with pytest.raises(ValueError):
        AtomicSpectrum(0.0, (Atom((1.0,), 0.0),))
    with pytest.raises(ValueError):
        AtomicSpectrum(0.0, (Atom((1.0,), 1.0), Atom((1.0,), 2.0)))
    with pytest.raises(ValueError):
        AtomicSpectrum(0.0, (Atom((0.0, 0.0), 1.0),))
    with pytest.raises(ValueError):
        GaussianFieldModel()


def test_atomic_covariance_formula():
    spec = AtomicSpectrum(0.3, (Atom((1.0, 0.0), 2.0), Atom((0.0, 2.0), 0.5)))
    lag = np.array([[0.0, 0.0], [math.pi, math.pi / 4]])
    np.testing.assert_allclose(spec.covariance(lag), [2.8, 0.3 - 2.0 + 0.0])


def test_continuous_kernels():
    se = ContinuousCovariance("squared_exponential", 2.0, 0.5)
    ex = ContinuousCovariance("exponential", 2.0, 0.5)
    assert se(0.5) == pytest.approx(2.0 * math.exp(-0.5))
    assert ex(0.5) == pytest.approx(2.0 * math.exp(-1.0))
    with pytest.raises(ValueError):
        ContinuousCovariance("matern", 1.0, 1.0)


def test_component_moments():
    model = GaussianFieldModel(atomic=AtomicSpectrum(0.5, (Atom((1.0,), 1.0), Atom((math.sqrt(2),), 3.0))))
    L = kernel_basis(FrequencySet(("b1", "b2"), ((("1", "0"),), (("0", "1"),))))
    rng = stream(11)
    n = 20000
    draws = [sample_component(model, L, rng) for _ in range(n)]
    x0 = np.array([d.x0[0] for d in draws])
    r2 = np.array([d.r[0] ** 2 for d in draws])
    phi = np.array([d.phi[0] for d in draws])
    # E x0^2 = c0 (sd sqrt(2) c0); E r^2 = 2 c (sd 2 c)
    assert abs(np.mean(x0**2) - 0.5) < 5 * math.sqrt(2) * 0.5 / math.sqrt(n)
    assert np.all(np.abs(r2.mean(axis=0) - [2.0, 6.0]) < 5 * np.array([2.0, 6.0]) / math.sqrt(n))
    assert np.all((phi >= 0) & (phi < TWO_PI))
    assert draws[0].eta.shape == (1, 0)


def test_lattice_required_for_several_atoms():
    model = GaussianFieldModel(atomic=AtomicSpectrum(0.0, (Atom((1.0,), 1.0), Atom((2.0,), 1.0))))
    with pytest.raises(ValueError):
        sample_component(model, None, stream(1))


def test_evaluate_atomic_by_hand():
    spec = AtomicSpectrum(0.0, (Atom((TWO_PI,), 1.0),))
    c = ComponentCoordinates(np.array([0.2]), np.array([[1.5]]), np.array([[0.3]]), np.zeros((1, 0)))
    v = evaluate_atomic(c, spec, np.array([[0.25]]))
    assert v[0, 0] == pytest.approx(0.2 + 1.5 * math.cos(TWO_PI * 0.25 + 0.3))


def test_shift_moves_phases_and_keeps_component():
    F = FrequencySet.scalar(["1", "2"])
    L = kernel_basis(F)
    model = GaussianFieldModel(atomic=AtomicSpectrum(0.1, (Atom((TWO_PI,), 1.0), Atom((2 * TWO_PI,), 1.0))))
    c = sample_component(model, L, stream(3))
    s = c.shifted([0.37], model.atomic.omegas, L)
    assert not np.allclose(s.phi, c.phi)
    assert s.same_component(c, 1e-12)
    pts = np.array([[0.1], [0.6]])
    np.testing.assert_allclose(evaluate_atomic(s, model.atomic, pts),
                               evaluate_atomic(c, model.atomic, pts + 0.37), atol=1e-12)


def test_same_component_is_circular():
    a = ComponentCoordinates(np.zeros(1), np.ones((1, 1)), np.zeros((1, 1)), np.array([[1e-13]]))
    b = ComponentCoordinates(np.zeros(1), np.ones((1, 1)), np.zeros((1, 1)), np.array([[TWO_PI - 1e-13]]))
    assert a.same_component(b, 1e-12)


def test_periodized_row_is_symmetric_and_psd():
    g = GridSpec.unit_torus(2, 16)
    for kind in ("squared_exponential", "exponential"):
        row = periodized_covariance(ContinuousCovariance(kind, 1.0, 0.3), g)
        np.testing.assert_allclose(row[1:, :], row[:0:-1, :], atol=1e-14)
        assert np.fft.fftn(row).real.min() > -1e-10 * row.size


def test_periodized_converges_to_kernel_on_large_torus():
    g = GridSpec(1, 256, 0.1)
    cov = ContinuousCovariance("exponential", 1.0, 0.5)
    row = periodized_covariance(cov, g)
    np.testing.assert_allclose(row[:10], cov(np.arange(10) * 0.1), atol=1e-12)


def test_continuous_covariance_matches_circulant():
    g = GridSpec.unit_torus(1, 32)
    cov = ContinuousCovariance("squared_exponential", 1.0, 0.1)
    row = periodized_covariance(cov, g)
    x = synth_continuous(cov, g, stream(5), size=4000)[:, 0]
    lags = [0, 3, 8]
    est = empirical_autocovariance(list(x), lags)
    # bound from the per-sample variance of the spatial average (<= 2 row[0]^2)
    assert np.all(np.abs(est - row[lags]) < 5 * math.sqrt(2) * row[0] / math.sqrt(4000))


def test_embedding_error(monkeypatch):
    g = GridSpec.unit_torus(1, 8)
    bad = np.zeros(8)
    bad[0], bad[1], bad[-1] = 1.0, 1.0, 1.0
    monkeypatch.setattr(gaussian, "periodized_covariance", lambda cov, grid: bad)
    gaussian.circulant_sqrt_eigs.cache_clear()
    with pytest.raises(EmbeddingError):
        synth_continuous(ContinuousCovariance("exponential", 1.0, 0.1), g, stream(1))


def test_sample_field_with_frozen_coords():
    model = GaussianFieldModel(ContinuousCovariance("exponential", 0.2, 0.1), AtomicSpectrum(0.3, (Atom((TWO_PI,), 1.0),)))
    g = GridSpec.unit_torus(1, 64)
    x, c = sample_field(model, None, g, stream(1))
    x2, c2 = sample_field(model, None, g, stream(2), coords=c)
    assert c2 is c
    assert x.shape == (1, 64)
    assert not np.allclose(x, x2)


def test_autocovariance_needs_two_samples():
    with pytest.raises(ValueError):
        empirical_autocovariance([np.zeros(4)], [0])


def test_degenerate_spectrum():
    model = GaussianFieldModel(ContinuousCovariance("exponential", 1.0, 0.1))
    c = sample_component(model, None, stream(1))
    assert c.x0[0] == 0.0 and c.r.shape == (1, 0) and c.phi.shape == (1, 0) and c.eta.shape == (1, 0)


def test_x0_and_r_moments_at_1e5():
    rng = stream(12)
    m0 = GaussianFieldModel(atomic=AtomicSpectrum(1.0))
    x0 = np.array([sample_component(m0, None, rng).x0[0] for _ in range(100_000)])
    assert -0.02 < x0.mean() < 0.02 and 0.97 < x0.var() < 1.03
    m1 = GaussianFieldModel(atomic=AtomicSpectrum(0.0, (Atom((1.0,), 2.0),)))
    r2 = np.array([sample_component(m1, None, rng).r[0, 0] ** 2 for _ in range(100_000)])
    assert 3.92 < r2.mean() < 4.08


def test_atomic_synthesis_examples():
    g = GridSpec.unit_torus(2, 4)
    flat = ComponentCoordinates(np.array([5.0]), np.zeros((1, 0)), np.zeros((1, 0)), np.zeros((1, 0)))
    assert np.all(gaussian.synth_atomic(flat, AtomicSpectrum(1.0), g) == 5.0)
    spec = AtomicSpectrum(0.0, (Atom((TWO_PI, 0.0), 1.0),))
    c = ComponentCoordinates(np.zeros(1), np.ones((1, 1)), np.zeros((1, 1)), np.zeros((1, 0)))
    assert evaluate_atomic(c, spec, np.array([[0.5, 0.123]]))[0, 0] == pytest.approx(-1.0)
    spec2 = AtomicSpectrum(0.0, (Atom((1.0, 0.0), 1.0), Atom((2.0, 0.0), 1.0)))
    c2 = ComponentCoordinates(np.ones(1), np.ones((1, 2)), np.zeros((1, 2)), np.zeros((1, 1)))
    assert evaluate_atomic(c2, spec2, np.zeros((1, 2)))[0, 0] == 3.0


def test_squared_exponential_moments():
    g = GridSpec.unit_torus(1, 100)
    cov = ContinuousCovariance("squared_exponential", 1.0, 0.1)
    assert np.all(synth_continuous(ContinuousCovariance(), g, stream(1)) == 0.0)
    x = synth_continuous(cov, g, stream(2), size=10_000)[:, 0]
    assert abs(x[:, 17].var() - 1.0) < 0.05
    corr = np.mean(x[:, 17] * x[:, 27]) / np.sqrt(x[:, 17].var() * x[:, 27].var())
    assert abs(corr - math.exp(-0.5)) < 0.05


def test_sample_field_examples():
    g = GridSpec.unit_torus(2, 8)
    m = GaussianFieldModel(atomic=AtomicSpectrum(1.0))
    x, c = sample_field(m, None, g, stream(3))
    assert np.all(x == c.x0[0])
    m1 = GaussianFieldModel(ContinuousCovariance("exponential", 0.5, 0.2), AtomicSpectrum(0.0, (Atom((TWO_PI, 0.0), 1.0),)))
    c = sample_component(m1, None, stream(4))
    a, _ = sample_field(m1, None, g, stream(5), coords=c)
    b, _ = sample_field(m1, None, g, stream(5), coords=c)
    assert np.array_equal(a, b)


def test_unconditional_point_variance():
    g = GridSpec.unit_torus(1, 16)
    m = GaussianFieldModel(ContinuousCovariance("squared_exponential", 0.5, 0.1),
                           AtomicSpectrum(0.3, (Atom((TWO_PI,), 1.0), Atom((2 * TWO_PI,), 0.4))))
    L = kernel_basis(FrequencySet.scalar(["1", "2"]))
    rng = stream(6)
    vals = np.array([sample_field(m, L, g, rng)[0][0, 5] for _ in range(100_000)])
    total = 0.3 + 1.0 + 0.4 + periodized_covariance(m.continuous, g)[0]
    assert abs(np.mean(vals**2) / total - 1.0) < 0.05


def test_autocovariance_examples():
    g = GridSpec.unit_torus(1, 32)
    assert np.all(empirical_autocovariance([np.zeros(32)] * 3, [0, 5]) == 0.0)
    m = GaussianFieldModel(atomic=AtomicSpectrum(0.0, (Atom((TWO_PI,), 2.0),)))
    S = 5000
    samples = [sample_field(m, None, g, stream(7, i))[0][0] for i in range(S)]
    est = empirical_autocovariance(samples, [0, 16])
    band = 3 * 2.0 / math.sqrt(S)
    assert abs(est[0] - 2.0) < band and abs(est[1] + 2.0) < band


def test_atomic_field_stationary_in_law():
    g = GridSpec.unit_torus(1, 32)
    m = GaussianFieldModel(atomic=AtomicSpectrum(0.2, (Atom((TWO_PI,), 1.0), Atom((3 * TWO_PI,), 0.5))))
    L = kernel_basis(FrequencySet.scalar(["1", "3"]))
    S = 4000
    xs = np.array([sample_field(m, L, g, stream(8, i))[0][0] for i in range(S)])
    # covariance between fixed points depends only on the lag
    a = np.mean(xs[:, 0] * xs[:, 4])
    b = np.mean(xs[:, 13] * xs[:, 17])
    sd = math.sqrt(2 * 0.2**2 + 1.0 + 0.25) * 2 / math.sqrt(S)
    assert abs(a - b) < 3 * sd
