import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from abcdp.noise import NoiseDiffDistribution, cdf_z, pdf_z, sample_laplace, tail_g
from conftest import convolved_density

scales = st.floats(min_value=1e-3, max_value=1e3)
points = st.floats(min_value=-1e3, max_value=1e3)


def test_zero_scale_is_exactly_zero_and_consumes_nothing():
    a = np.random.Generator(np.random.Philox(3))
    b = np.random.Generator(np.random.Philox(3))
    assert sample_laplace(0.0, a) == 0.0
    assert np.all(sample_laplace(0.0, a, size=4) == 0.0)
    assert a.random() == b.random()


@pytest.mark.parametrize("scale", [-1.0, math.inf, math.nan])
def test_bad_scale_rejected(rng, scale):
    with pytest.raises(ValueError):
        sample_laplace(scale, rng)


def test_unit_laplace_moments(rng):
    x = sample_laplace(1.0, rng, size=1_000_000)
    assert abs(x.mean()) < 0.01
    assert abs(x.var() - 2.0) < 0.05


def test_laplace_tail_at_one_scale(rng):
    x = sample_laplace(0.4, rng, size=1_000_000)
    assert abs(np.mean(x > 0.4) - 0.5 * math.exp(-1.0)) < 0.005


def test_pdf_values():
    assert pdf_z(1.0, 0.0) == pytest.approx(1.0 / 6.0, abs=1e-12)
    expected = convolved_density(0.5, 0.5)
    assert expected == pytest.approx(0.2817273, abs=1e-6)
    assert pdf_z(0.5, 0.5) == pytest.approx(expected, abs=1e-9)
    assert pdf_z(1.0, 3.0) == pdf_z(1.0, -3.0)


@pytest.mark.parametrize("b, z", [(0.4, 0.0), (0.4, 0.3), (1.0, -2.5), (2.0, 7.0)])
def test_pdf_matches_numerical_convolution(b, z):
    assert pdf_z(b, z) == pytest.approx(convolved_density(z, b), rel=1e-7, abs=1e-12)


def test_tail_values():
    assert tail_g(0.4, 0.0) == 0.5
    quad, _ = integrate.quad(lambda z: convolved_density(z, 0.4), 0.1, 50 * 0.4, limit=400)
    assert quad == pytest.approx(0.4585311, abs=1e-6)
    assert tail_g(0.4, 0.1) == pytest.approx(quad, abs=1e-8)
    assert tail_g(0.4, 100.0) < 1e-10


def test_cdf_values():
    assert cdf_z(1.0, 0.0) == 0.5
    assert cdf_z(0.4, 0.1) == pytest.approx(1 - 0.4585311379, abs=1e-9)
    assert cdf_z(0.4, -0.1) == pytest.approx(0.4585311379, abs=1e-9)


def test_invalid_arguments():
    with pytest.raises(ValueError):
        NoiseDiffDistribution(0.0)
    with pytest.raises(ValueError):
        pdf_z(0.0, 1.0)
    with pytest.raises(ValueError):
        tail_g(1.0, -0.1)


def test_vectorized_shapes():
    a = np.array([0.0, 0.5, 1.0])
    assert tail_g(1.0, a).shape == (3,)
    assert isinstance(tail_g(1.0, 0.5), float)


@settings(max_examples=200, deadline=None)
@given(b=scales, z=points)
def test_pdf_is_even_and_positive(b, z):
    assert pdf_z(b, z) == pytest.approx(pdf_z(b, -z), rel=1e-12, abs=0)
    assert pdf_z(b, z) >= 0.0


@settings(max_examples=200, deadline=None)
@given(b=scales, a=st.floats(min_value=0, max_value=1e3))
def test_tail_in_range_and_cdf_consistent(b, a):
    g = tail_g(b, a)
    assert 0.0 <= g <= 0.5
    assert cdf_z(b, a) == pytest.approx(1.0 - g, abs=1e-12)
    assert cdf_z(b, -a) == pytest.approx(g, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(b=scales, a1=st.floats(min_value=0, max_value=100), a2=st.floats(min_value=0, max_value=100))
def test_tail_monotone(b, a1, a2):
    lo, hi = sorted((a1, a2))
    assert tail_g(b, hi) <= tail_g(b, lo)


@settings(max_examples=100, deadline=None)
@given(a=st.floats(min_value=1e-3, max_value=10), b1=scales, b2=scales)
def test_tail_increasing_in_scale(a, b1, b2):
    lo, hi = sorted((b1, b2))
    assert tail_g(lo, a) <= tail_g(hi, a) + 1e-15


def test_pdf_integrates_to_one():
    total, _ = integrate.quad(lambda z: pdf_z(0.7, z), -60 * 0.7, 60 * 0.7, points=[0.0], limit=400)
    assert total == pytest.approx(1.0, abs=1e-9)
