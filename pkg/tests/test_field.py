import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import conv_brute
from splitseg.errors import InvalidParameterError
from splitseg.field import (
    ConvKernel,
    as_field,
    convolve_periodic,
    gaussian_kernel,
    gaussian_std,
    integrate,
    laplacian_periodic,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def test_conv_matches_brute_force():
    rng = np.random.default_rng(1)
    u = rng.normal(size=(9, 11))
    w = rng.normal(size=(3, 5))
    assert np.allclose(convolve_periodic(u, ConvKernel(w)), conv_brute(u, w), rtol=0, atol=1e-12)


def test_separable_matches_dense():
    rng = np.random.default_rng(2)
    u = rng.normal(size=(20, 17))
    g = gaussian_kernel(1.5)
    dense = ConvKernel(g.weights, normalized=True)
    assert np.allclose(convolve_periodic(u, g), convolve_periodic(u, dense), atol=1e-13)
    assert np.allclose(convolve_periodic(u, g), conv_brute(u, g.weights), atol=1e-13)


def test_identity_kernel_is_exact():
    u = np.random.default_rng(3).normal(size=(5, 6))
    assert np.array_equal(convolve_periodic(u, ConvKernel.identity()), u)


def test_laplacian_eigenfunction():
    H, W = 16, 24
    i, j = np.meshgrid(np.arange(H), np.arange(W), indexing="ij")
    a, b = 3, 5
    u = np.cos(2 * np.pi * a * i / H) * np.cos(2 * np.pi * b * j / W)
    lam = 2 * math.cos(2 * math.pi * a / H) + 2 * math.cos(2 * math.pi * b / W) - 4
    assert np.allclose(laplacian_periodic(u), lam * u, atol=1e-12)


def test_laplacian_of_constant_is_zero():
    assert np.array_equal(laplacian_periodic(np.full((4, 4), 0.7)), np.zeros((4, 4)))


@given(arrays(float, (6, 7), elements=finite), st.integers(0, 5), st.integers(0, 6))
def test_translation_equivariance_bitwise(u, di, dj):
    k = gaussian_kernel(0.5, radius=2)
    shifted = np.roll(u, (di, dj), axis=(0, 1))
    assert np.array_equal(convolve_periodic(shifted, k), np.roll(convolve_periodic(u, k), (di, dj), axis=(0, 1)))
    assert np.array_equal(laplacian_periodic(shifted), np.roll(laplacian_periodic(u), (di, dj), axis=(0, 1)))


@given(arrays(float, (5, 5), elements=finite))
def test_normalized_kernel_preserves_mass(u):
    k = gaussian_kernel(0.8, radius=2)
    assert math.isclose(integrate(convolve_periodic(u, k)), integrate(u), rel_tol=1e-12, abs_tol=1e-11)


def test_gaussian_kernel_properties():
    g = gaussian_kernel(2.0)
    assert g.normalized and abs(g.weights.sum() - 1) < 1e-14
    assert g.shape == (17, 17)  # ceil(4*sqrt(4)) = 8
    assert np.array_equal(g.weights, g.weights.T)
    assert np.array_equal(g.weights, g.weights[::-1, ::-1])
    # second moment of one axis ~ std^2 = 2*delta, less a little from truncation
    x = np.arange(-8, 9)
    var = float((g.factors[0] * x**2).sum())
    assert 3.99 < var < 4.0
    assert gaussian_kernel(2.0, "paper-std").shape == (17, 17)
    assert gaussian_std(2.0, "paper-std") == 2.0


@pytest.mark.parametrize(
    "w, kw",
    [
        (np.ones((2, 3)), {}),
        (np.ones(3), {}),
        (np.array([[np.nan]]), {}),
        (np.ones((3, 3)), {"normalized": True}),
    ],
)
def test_kernel_validation(w, kw):
    with pytest.raises(InvalidParameterError):
        ConvKernel(w, **kw)


def test_kernel_must_fit_field():
    with pytest.raises(InvalidParameterError):
        convolve_periodic(np.zeros((4, 4)), gaussian_kernel(2.0))
    with pytest.raises(InvalidParameterError):
        laplacian_periodic(np.zeros((2, 5)))


def test_bad_gaussian_parameters():
    with pytest.raises(InvalidParameterError):
        gaussian_kernel(0.0)
    with pytest.raises(InvalidParameterError):
        gaussian_kernel(1.0, "bogus")
    with pytest.raises(InvalidParameterError):
        gaussian_kernel(1.0, radius=0)


def test_as_field_validation():
    f = as_field([[1, 2], [3, 4]])
    assert f.dtype == float and not f.flags.writeable
    for bad in ([1, 2], [[np.inf]], np.zeros((0, 3))):
        with pytest.raises(InvalidParameterError):
            as_field(bad)


def test_integrate_is_sequential_sum():
    u = np.array([[1e16, 1.0], [-1e16, 1.0]])
    # left to right: ((1e16 + 1) - 1e16) + 1 = 1
    assert integrate(u) == 1.0
