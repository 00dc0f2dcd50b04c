import math

import numpy as np
import pytest

from algebra.symtensor import sym_power
from errors import InvalidInputError, UnsupportedDimensionError
from geometry.curves import Ball, PlaneCoords
from geometry.frames import canonical_frame
from harness.phantoms import PhantomSpec, phantom_field
from transforms.fields import AnalyticField, AnalyticTensorField
from transforms.quadrature import sphere_grid
from transforms.xforms import (
    Sinogram,
    clip_rays,
    frame_tensor,
    line_integrals,
    parity_sign,
    radon_constant,
    radon_forward,
    radon_invert_odd,
    radon_sinogram,
    ray_integral,
    trt_batch,
    trt_extended,
    trt_tensor,
    trt_vector,
    uniform_p_grid,
    vector_parity_sign,
)


def _gaussian(extent=3.0):
    return AnalyticField(lambda x: np.exp(-np.sum(x * x, axis=1)), [-extent] * 3, [extent] * 3)


def _constant_tensor_field(coeffs, m):
    coeffs = np.asarray(coeffs, dtype=float)
    return AnalyticTensorField(lambda x: np.tile(coeffs, (len(x), 1)), m, [-1.25] * 3, [1.25] * 3,
                               Ball(np.zeros(3), 1.0))


def test_clip_rays_half_lines():
    t0, t1 = clip_rays(np.full(3, -1.0), np.full(3, 1.0), [[-2.0, 0.0, 0.0]] * 3,
                       [[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    np.testing.assert_allclose(t0, [1.0, 0.0, 0.0])
    np.testing.assert_allclose(t1, [3.0, 0.0, 0.0])
    t0, t1 = clip_rays(np.full(3, -1.0), np.full(3, 1.0), [[0.0, 0.0, 0.0]], [[0.0, 0.0, 1.0]], half="minus")
    assert (t0[0], t1[0]) == (-1.0, 0.0)
    with pytest.raises(InvalidInputError):
        clip_rays(np.full(3, -1.0), np.full(3, 1.0), [[0.0, 0.0, 0.0]], [[0.0, 0.0, 1.0]], half="both")


def test_line_integral_of_constant_is_chord_length():
    ones = AnalyticField(lambda x: np.ones(len(x)), [-1.0] * 3, [1.0] * 3)
    value = ray_integral(ones, [-3.0, 0.2, 0.1], [1.0, 0.0, 0.0], step=0.01)
    assert value == pytest.approx(2.0, rel=1e-12)


def test_gaussian_line_integral():
    value = ray_integral(_gaussian(), [-3.0, 0.3, 0.0], [1.0, 0.0, 0.0], step=0.005)
    assert value == pytest.approx(math.sqrt(math.pi) * math.exp(-0.09), rel=1e-4)


@pytest.mark.parametrize("m,i,expected_dot", [(1, 0, -2.0), (1, 1, -3.0), (2, 1, 6.0), (2, 0, 4.0)])
def test_constant_direction_bump_gives_chord_times_frame_dot(m, i, expected_dot):
    f = _constant_tensor_field(sym_power([1.0, 2.0, 3.0], m).coeffs, m)
    chord = 2.0 * math.sqrt(1.0 - 0.09)
    value = trt_tensor(f, [-2.0, 0.3, 0.0], [1.0, 0.0, 0.0], i, step=0.002)
    assert value == pytest.approx(chord * expected_dot, rel=2e-2)


def test_frame_tensor_of_pole_direction():
    np.testing.assert_allclose(frame_tensor([1.0, 0.0, 0.0], 1, 1).coeffs, [0.0, 0.0, -1.0], atol=1e-15)
    np.testing.assert_allclose(frame_tensor([1.0, 0.0, 0.0], 0, 1).coeffs, [0.0, -1.0, 0.0], atol=1e-15)


def test_minus_half_line_parity(rng):
    f = phantom_field(PhantomSpec(kind="multi-bump", order=2, seed=11))
    origins = rng.normal(size=(100, 3))
    origins = 2.0 * origins / np.linalg.norm(origins, axis=1)[:, None]
    directions = rng.normal(size=(100, 3))
    directions /= np.linalg.norm(directions, axis=1)[:, None]
    minus = trt_batch(f, origins, directions, (0, 1, 2), step=0.01, half="minus")
    plus = trt_batch(f, origins, -directions, (0, 1, 2), step=0.01, half="plus")
    signs = np.array([parity_sign(2, i) for i in range(3)])
    np.testing.assert_allclose(minus, plus * signs, atol=1e-6)


def test_full_line_parity():
    f = phantom_field(PhantomSpec(kind="gaussian-bump", order=1, seed=2))
    a = np.array([-1.5, 0.2, 0.1])
    xi = np.array([0.9, 0.1, -0.2])
    xi /= np.linalg.norm(xi)
    for i in (0, 1):
        forward = trt_tensor(f, a, xi, i, step=0.01, half="full")
        backward = trt_tensor(f, a, -xi, i, step=0.01, half="full")
        assert backward == pytest.approx(parity_sign(1, i) * forward, abs=1e-9)
    assert parity_sign(3, 1, flipped=True) == -1
    assert vector_parity_sign(3, 2) == -1 and vector_parity_sign(3, 1) == 1


def test_extended_transform_is_homogeneous():
    f = phantom_field(PhantomSpec(kind="gaussian-bump", order=2, seed=4))
    a = np.array([0.0, -2.0, 0.0])
    xi = np.array([0.1, 1.0, 0.2])
    unit = xi / np.linalg.norm(xi)
    base = trt_tensor(f, a, unit, 1, step=0.01)
    assert trt_extended(f, a, 2.0 * unit, 1, step=0.01) == pytest.approx(2.0 * base, rel=1e-12)
    with pytest.raises(InvalidInputError):
        trt_extended(f, a, np.zeros(3), 1)


def test_vector_channels_match_frame_axes():
    v = np.array([0.5, -1.0, 2.0])
    f = _constant_tensor_field(v, 1)
    xi = np.array([0.0, 0.6, 0.8])
    a = -2.0 * xi
    chord = line_integrals(_constant_tensor_field(np.ones(3), 1), a, xi, step=0.002)[0, 0]
    frame = canonical_frame(xi)
    for k in (1, 2):
        assert trt_vector(f, a, xi, k, step=0.002) == pytest.approx(chord * float(v @ frame.eta_axis(k)), rel=1e-12)
    with pytest.raises(InvalidInputError):
        trt_vector(f, a, xi, 3)


def test_tensor_family_needs_three_dimensions():
    f = AnalyticTensorField(lambda x: np.ones((len(x), 4)), 1, [-1.25] * 4, [1.25] * 4, Ball(np.zeros(4), 1.0))
    with pytest.raises(InvalidInputError):
        trt_batch(f, np.zeros(4), [1.0, 0.0, 0.0, 0.0], (0,))


@pytest.mark.parametrize("omega,p", [((0.0, 0.0, 1.0), 0.0), ((0.6, 0.0, 0.8), 0.5), ((1.0, 0.0, 0.0), -1.0)])
def test_radon_of_gaussian(omega, p):
    value = radon_forward(_gaussian(), PlaneCoords(omega, p), resolution=128)
    assert value == pytest.approx(math.pi * math.exp(-p * p), rel=2e-3)


def test_radon_derivative_property():
    omega = np.array([0.48, 0.6, 0.64])
    dg = AnalyticField(lambda x: -2.0 * x[:, 2] * np.exp(-np.sum(x * x, axis=1)), [-4.0] * 3, [4.0] * 3)
    for p in (-0.7, 0.3, 1.1):
        expected = omega[2] * (-2.0 * p * math.pi * math.exp(-p * p))
        assert radon_forward(dg, PlaneCoords(omega, p), resolution=160) == pytest.approx(expected, abs=1e-3)


def test_sinogram_rows_match_closed_form():
    sphere = sphere_grid(3, 2, 4)
    p_grid = uniform_p_grid(1.0, 5)
    sinogram = radon_sinogram(_gaussian(), sphere, p_grid, resolution=96)
    assert sinogram.values.shape == (8, 5)
    np.testing.assert_allclose(sinogram.values, np.tile(math.pi * np.exp(-p_grid ** 2), (8, 1)), rtol=2e-3)


def test_odd_inversion_of_gaussian_sinogram():
    sphere = sphere_grid(3, 32, 64)
    p_grid = uniform_p_grid(3.0, 128)
    values = np.tile(math.pi * np.exp(-p_grid ** 2), (sphere.size, 1))
    sinogram = Sinogram(sphere, p_grid, values)
    points = np.array([[0.0, 0.0, 0.0], [0.3, 0.2, -0.1], [0.5, 0.0, 0.5], [-0.4, 0.6, 0.1]])
    recovered = radon_invert_odd(sinogram, points)
    truth = np.exp(-np.sum(points ** 2, axis=1))
    assert np.linalg.norm(recovered - truth) / np.linalg.norm(truth) < 1e-2
    assert radon_invert_odd(sinogram, points[0]) == pytest.approx(recovered[0])


def test_radon_constant():
    assert radon_constant(3) == pytest.approx(-1.0 / (8.0 * math.pi ** 2))
    assert radon_constant(5) == pytest.approx(1.0 / (32.0 * math.pi ** 4))
    with pytest.raises(UnsupportedDimensionError):
        radon_constant(4)


@pytest.mark.slow
def test_gaussian_forward_inverse_round_trip():
    sphere = sphere_grid(3, 32, 64)
    p_grid = uniform_p_grid(3.0, 128)
    sinogram = radon_sinogram(_gaussian(), sphere, p_grid, resolution=64)
    points = np.array([[0.0, 0.0, 0.0], [0.3, 0.2, -0.1], [0.5, 0.0, 0.5]])
    recovered = radon_invert_odd(sinogram, points)
    truth = np.exp(-np.sum(points ** 2, axis=1))
    assert np.linalg.norm(recovered - truth) / np.linalg.norm(truth) < 1e-2


def test_ray_integral_converges_on_halving():
    # exp(x1) does not vanish on the box faces, so the trapezoid rule is second order
    field = AnalyticField(lambda x: np.exp(x[:, 0]), [-1.0] * 3, [1.0] * 3)
    exact = math.e - 1.0 / math.e
    errors = [abs(ray_integral(field, [-3.0, 0.2, 0.1], [1.0, 0.0, 0.0], step=step) - exact)
              for step in (0.1, 0.05)]
    assert errors[1] > 0.0
    assert errors[0] >= 3.0 * errors[1]


def test_plane_integral_converges_on_refinement():
    g = _gaussian(extent=5.0)
    plane = PlaneCoords([0.48, 0.6, 0.64], 0.3)
    reference = radon_forward(g, plane, resolution=129)
    coarse, fine = (abs(radon_forward(g, plane, resolution=r) - reference) for r in (17, 33))
    assert coarse > 0.0
    assert coarse >= 3.0 * fine


def test_transforms_are_linear(rng):
    f = phantom_field(PhantomSpec(kind="multi-bump", order=2, seed=1))
    g = phantom_field(PhantomSpec(kind="multi-bump", order=2, seed=2))
    a, b = 1.7, -0.4
    combined = AnalyticTensorField(lambda x: a * f.fn(x) + b * g.fn(x), 2, f.lower, f.upper, f.support)
    origins = rng.normal(size=(20, 3))
    origins *= (2.0 / np.linalg.norm(origins, axis=1))[:, None]
    directions = -origins + 0.3 * rng.normal(size=(20, 3))
    channels = (0, 1, 2)
    lhs = trt_batch(combined, origins, directions, channels, step=0.02)
    rhs = (a * trt_batch(f, origins, directions, channels, step=0.02)
           + b * trt_batch(g, origins, directions, channels, step=0.02))
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-13 * np.abs(rhs).max())

    s, t = _gaussian(), AnalyticField(lambda x: np.cos(x[:, 0]) * np.exp(-np.sum(x * x, axis=1)),
                                      [-3.0] * 3, [3.0] * 3)
    mix = AnalyticField(lambda x: a * s.fn(x) + b * t.fn(x), [-3.0] * 3, [3.0] * 3)
    plane = PlaneCoords([0.0, 0.6, 0.8], 0.25)
    assert radon_forward(mix, plane, 64) == pytest.approx(
        a * radon_forward(s, plane, 64) + b * radon_forward(t, plane, 64), rel=1e-12)
