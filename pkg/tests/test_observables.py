import numpy as np
import pytest
from scipy import integrate

from cavmix import observables
from cavmix.model import ConfigError, SimState
from cavmix.observables import (
    Histogram,
    fit_qgaussian,
    histogram,
    ks_distance,
    qgaussian_density,
    sample_qgaussian,
)
from conftest import species


def crafted_state():
    x = np.array([np.pi / 2, np.pi / 2, np.pi / 6])
    p = np.array([2.0, -2.0, 4.0])
    return SimState(positions=[x], momenta=[p], alpha=1.0 - 2.0j, time=0.0)


def test_scalar_observables():
    st = crafted_state()
    s = species(n=3, mass=2.0)
    assert observables.order_parameter(st, 0) == pytest.approx(2.5 / 3.0)
    assert observables.bunching(st, 0) == pytest.approx((1 + 1 + 0.25) / 3.0)
    assert observables.kinetic_temperature(st, 0, s) == pytest.approx(
        (4 + 4 + 16) / 3.0 / 2.0)
    assert observables.photon_number(st) == pytest.approx(5.0)


def test_histogram_basics(rng):
    samples = rng.normal(0.0, 2.0, 20000)
    h = histogram(samples, bins=50)
    assert h.centers.size == 50
    assert h.bin_width == pytest.approx(np.diff(h.edges)[0])
    # density integrates to the captured fraction of samples (~1)
    assert np.sum(h.density()) * h.bin_width == pytest.approx(
        np.sum(h.counts) / h.total_weight)
    cdf = h.cdf()
    assert np.all(np.diff(cdf) >= 0)
    assert cdf[-1] <= 1.0
    h2 = histogram(samples, bins=10, half_width=1.0)
    assert h2.edges[0] == -1.0 and h2.edges[-1] == 1.0


def test_histogram_rejects_nonuniform():
    with pytest.raises(ConfigError):
        Histogram(edges=np.array([0.0, 1.0, 3.0]),
                  counts=np.array([1.0, 1.0]), total_weight=2.0)
    with pytest.raises(ConfigError):
        Histogram(edges=np.array([0.0, 1.0, 2.0]),
                  counts=np.array([1.0, -1.0]), total_weight=2.0)


@pytest.mark.parametrize("q", [1.0, 1.2, 1.4, 1.9, 2.5])
def test_qgaussian_density_normalised(q):
    val, _ = integrate.quad(
        lambda p: qgaussian_density(p, q, 3.0, 0.5), -np.inf, np.inf)
    assert val == pytest.approx(1.0, rel=1e-8)


def test_qgaussian_reduces_to_maxwellian():
    p = np.linspace(-5, 5, 101)
    gauss = np.exp(-p**2 / (2 * 0.5 * 2.0)) / np.sqrt(2 * np.pi * 0.5 * 2.0)
    np.testing.assert_allclose(qgaussian_density(p, 1.0, 2.0, 0.5), gauss,
                               rtol=1e-12)
    np.testing.assert_allclose(qgaussian_density(p, 1.0 + 1e-9, 2.0, 0.5),
                               gauss, rtol=1e-6)


@pytest.mark.parametrize("q", [1.1, 1.3, 1.5])
def test_qgaussian_sampler_second_moment(q, rng):
    mass, temp = 2.0, 7.0
    p = sample_qgaussian(400_000, q, temp, mass, rng)
    expect = 2.0 * mass * temp / (5.0 - 3.0 * q)
    assert np.mean(p**2) == pytest.approx(expect, rel=0.03)


def test_qgaussian_sampler_rejects_q3(rng):
    with pytest.raises(ConfigError):
        sample_qgaussian(10, 3.0, 1.0, 1.0, rng)


@pytest.mark.parametrize("q_true", [1.05, 1.4])
def test_fit_recovers_known_qgaussian(q_true, rng):
    mass, temp = 0.5, 1000.0
    p = sample_qgaussian(2_000_000, q_true, temp, mass, rng)
    fit = fit_qgaussian(histogram(p, bins=96), mass)
    assert fit.q == pytest.approx(q_true, abs=0.05)
    assert fit.temperature == pytest.approx(temp, rel=0.1)
    assert fit.q_halfwidth < 0.05


def test_fit_needs_enough_bins():
    h = Histogram(edges=np.linspace(-1, 1, 11), counts=np.ones(10),
                  total_weight=10.0)
    with pytest.raises(ConfigError, match="nonzero bins"):
        fit_qgaussian(h, 0.5)


def test_ks_distance_limits(rng):
    a = histogram(rng.normal(0, 1, 50_000), bins=64)
    b = histogram(rng.normal(0, 1, 50_000), bins=64)
    assert ks_distance(a, a) == 0.0
    assert ks_distance(a, b) < 0.02
    far = histogram(rng.normal(100, 1, 50_000), bins=64)
    assert ks_distance(a, far) == pytest.approx(1.0)
    # symmetric
    assert ks_distance(a, far) == ks_distance(far, a)
