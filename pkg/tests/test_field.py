import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import brute_gaussian
from mbeseg.errors import GridError, ParameterError
from mbeseg.field import (
    biharmonic, check_field, convolve_gaussian, convolve_gaussian_many, diff_backward,
    diff_central, diff_forward, divergence_central, gaussian_weights, gradient_central,
    gradient_magnitude, laplacian,
)


def test_differences_on_linear_ramp():
    # x index runs along axis 1
    f = np.tile(np.arange(6.0), (4, 1))
    assert np.allclose(diff_forward(f, "x")[:, :-1], 1.0)
    assert np.allclose(diff_backward(f, "x")[:, 1:], 1.0)
    assert np.allclose(diff_central(f, "x")[:, 1:-1], 1.0)
    assert np.allclose(diff_forward(f, "y"), 0.0)
    # wrap-around
    assert diff_forward(f, "x")[0, -1] == -5.0


def test_bad_axis_and_shapes():
    with pytest.raises(ValueError):
        diff_forward(np.zeros((3, 3)), "z")
    with pytest.raises(GridError):
        check_field(np.zeros(5))
    with pytest.raises(GridError):
        check_field(np.zeros((1, 5)))
    with pytest.raises(GridError):
        divergence_central((np.zeros((3, 3)), np.zeros((3, 4))))


def test_forward_backward_adjoint(rng):
    f, g = rng.standard_normal((2, 9, 7))
    for ax in ("x", "y"):
        assert np.isclose(np.sum(diff_forward(f, ax) * g), -np.sum(f * diff_backward(g, ax)))
        # central difference is skew-adjoint
        assert np.isclose(np.sum(diff_central(f, ax) * g), -np.sum(f * diff_central(g, ax)))


def test_laplacian_is_div_of_one_sided_gradients(rng):
    f = rng.standard_normal((8, 11))
    lap = diff_forward(diff_backward(f, "x"), "x") + diff_forward(diff_backward(f, "y"), "y")
    assert np.allclose(laplacian(f), lap, atol=1e-12)
    assert np.allclose(biharmonic(f), laplacian(laplacian(f)))


def test_laplacian_of_quadratic():
    jj, ii = np.mgrid[0:10, 0:10].astype(float)
    f = ii ** 2 + 3 * jj ** 2
    assert np.allclose(laplacian(f)[1:-1, 1:-1], 8.0)


def test_gradient_magnitude_floor(rng):
    f = np.zeros((5, 5))
    assert gradient_magnitude(f).max() == 0.0
    assert gradient_magnitude(f, floor=1e-8).min() == 1e-8
    g = rng.standard_normal((6, 6))
    u, v = gradient_central(g)
    assert np.allclose(gradient_magnitude(g), np.hypot(u, v))


def test_gaussian_weights_normalised():
    offsets, w = gaussian_weights(1.3)
    assert offsets[-1] == 6  # ceil(4 * 1.3)
    assert np.isclose(w.sum(), 1.0)
    assert np.allclose(w, w.T) and np.allclose(w, w[::-1])
    with pytest.raises(ParameterError):
        gaussian_weights(0.0)


@pytest.mark.parametrize("shape,sigma", [((12, 12), 1.0), ((9, 13), 2.5), ((6, 7), 3.0)])
def test_gaussian_matches_double_sum(rng, shape, sigma):
    # kernel wider than the grid folds onto the torus in both evaluations
    f = rng.standard_normal(shape)
    assert np.allclose(convolve_gaussian(f, sigma), brute_gaussian(f, sigma), atol=1e-12)


def test_gaussian_preserves_constants_and_mean(rng):
    assert np.allclose(convolve_gaussian(np.full((10, 8), 3.5), 2.0), 3.5)
    f = rng.standard_normal((10, 8))
    assert np.isclose(convolve_gaussian(f, 1.5).sum(), f.sum())


def test_gaussian_batch_equals_single(rng):
    stack = rng.standard_normal((3, 10, 12))
    many = convolve_gaussian_many(stack, 2.0)
    for k in range(3):
        assert np.allclose(many[k], convolve_gaussian(stack[k], 2.0), atol=1e-13)


fields = arrays(np.float64, (6, 7), elements=st.floats(-10, 10, allow_nan=False))


@settings(max_examples=30, deadline=None)
@given(fields, st.integers(0, 5), st.integers(0, 6))
def test_operators_commute_with_shifts(f, dy, dx):
    shift = lambda a: np.roll(a, (dy, dx), axis=(0, 1))  # noqa: E731
    assert np.allclose(laplacian(shift(f)), shift(laplacian(f)))
    assert np.allclose(convolve_gaussian(shift(f), 1.2), shift(convolve_gaussian(f, 1.2)), atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(fields)
def test_laplacian_sums_to_zero_and_is_negative(f):
    lap = laplacian(f)
    assert abs(lap.sum()) < 1e-9
    assert np.sum(f * lap) <= 1e-9
