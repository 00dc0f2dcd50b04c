import math

import numpy as np
import pytest

from algebra.symtensor import basis_system, contract, sym_power
from errors import (
    CoverageError,
    DegenerateSystemError,
    IncompleteInputError,
    OutOfDomainError,
    UnsupportedDimensionError,
)
from geometry.curves import Ball, coordinate_circles_curve
from geometry.frames import canonical_frame
from harness.phantoms import BumpSpec, PhantomSpec, phantom_field
from recon.dataset import forward_dataset
from recon.inversion import (
    ExactAProvider,
    GeometryContext,
    WFieldAProvider,
    choose_independent_axis,
    frame_components,
    recover_A_component,
    recover_power,
    recover_tensor_components,
    recover_vector,
    reconstruct_probes,
)
from recon.operators import WField, WParams, build_wfield
from transforms.fields import AnalyticTensorField
from transforms.quadrature import sphere_grid
from transforms.xforms import uniform_p_grid


def _probes(rng, count, radius=0.6):
    directions = rng.normal(size=(count, 3))
    directions /= np.linalg.norm(directions, axis=1)[:, None]
    return radius * rng.uniform(size=count)[:, None] ** (1 / 3) * directions


def _gaussian_wfield(invalid_rows=()):
    """W = second p-derivative of pi * exp(-p^2) on every sphere node."""
    sphere = sphere_grid(3, 32, 64)
    p_grid = uniform_p_grid(3.0, 241)
    second = math.pi * (4 * p_grid ** 2 - 2) * np.exp(-p_grid ** 2)
    values = np.tile(second, (sphere.size, 1))[:, :, None, None]
    valid = np.ones((sphere.size, p_grid.size, 1), dtype=bool)
    valid[list(invalid_rows)] = False
    return WField(sphere, p_grid, (0,), values, valid, WParams(), "tensor", 0, np.full(3, -1.0), np.full(3, 1.0))


def test_choose_independent_axis():
    e3, e1 = canonical_frame([0.0, 0.0, 1.0]), canonical_frame([1.0, 0.0, 0.0])
    assert choose_independent_axis(e3, e1) == 1
    with pytest.raises(DegenerateSystemError) as info:
        choose_independent_axis(e3, canonical_frame([0.0, 0.0, -1.0]))
    assert info.value.pair == (1, 2)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_independent_axis_on_random_pairs(rng, n):
    for _ in range(10_000):
        frame1 = canonical_frame(rng.normal(size=n))
        frame2 = canonical_frame(rng.normal(size=n))
        l = choose_independent_axis(frame1, frame2)
        det = np.linalg.det(np.column_stack([*frame1.eta, frame2.eta_axis(l)]))
        assert abs(det) > 1e-8


@pytest.mark.parametrize("m", [1, 2, 3])
def test_recover_power_from_exact_components(rng, m):
    f = phantom_field(PhantomSpec(kind="multi-bump", order=m, seed=20 + m))
    x = np.array([0.1, -0.2, 0.05])
    directions = np.array([[0.6, 0.0, 0.8], [0.0, 0.6, 0.8], [-0.48, -0.6, 0.64], [0.8, -0.6, 0.0]])[: m + 1]
    system = basis_system(directions)
    A_values = frame_components(x, ExactAProvider(f), system)
    value = f.at(x)
    for _ in range(20):
        theta = rng.normal(size=3)
        expected = contract(value, sym_power(theta, m))
        assert recover_power(x, theta, A_values, system) == pytest.approx(expected, rel=1e-10, abs=1e-10)
        assert recover_power(x, 2.0 * theta, A_values, system) == pytest.approx(2.0 ** m * expected, rel=1e-9, abs=1e-9)


def test_recover_power_reports_missing_components(vector_bump):
    system = basis_system([[0.6, 0.0, 0.8], [0.0, 0.6, 0.8]])
    A_values = frame_components(np.zeros(3), ExactAProvider(vector_bump), system)
    del A_values[(1, 2)]
    with pytest.raises(IncompleteInputError) as info:
        recover_power(np.zeros(3), [1.0, 0.0, 0.0], A_values, system)
    assert info.value.missing == ((1, 2),)


@pytest.mark.parametrize("m", [0, 1, 2, 3])
def test_exact_components_reproduce_field(rng, three_circles, m):
    f = phantom_field(PhantomSpec(kind="multi-bump", order=m, seed=30 + m))
    ctx = GeometryContext(three_circles, f.support, m)
    for x in _probes(rng, 30):
        got = recover_tensor_components(x, ExactAProvider(f), ctx).coeffs
        truth = f.sample(x)[0]
        np.testing.assert_allclose(got, truth, atol=1e-8 * max(1.0, np.abs(truth).max()))


def test_zero_field_reconstructs_to_zero(zero_field, three_circles):
    ctx = GeometryContext(three_circles, zero_field.support, 1)
    np.testing.assert_array_equal(recover_tensor_components([0.2, 0.1, -0.3], ExactAProvider(zero_field), ctx).coeffs,
                                  np.zeros(3))


def test_directions_point_from_curve_to_probe(three_circles, unit_ball):
    ctx = GeometryContext(three_circles, unit_ball, 2)
    x = np.array([0.2, -0.1, 0.3])
    crossings, directions = ctx.directions_at(x)
    assert len(crossings) == 3
    for crossing, direction in zip(crossings, directions):
        expected = (x - crossing.point) / np.linalg.norm(x - crossing.point)
        np.testing.assert_allclose(direction, expected, atol=1e-15)
    with pytest.raises(OutOfDomainError):
        ctx.check_domain(np.array([1.5, 0.0, 0.0]))


@pytest.mark.parametrize("n", [3, 5])
def test_vector_reconstruction_is_exact(rng, n):
    spec = PhantomSpec(kind="gaussian-bump", order=1, dimension=n, center=(0.0,) * n,
                       bumps=(BumpSpec((0.1,) * n, 0.5, tuple(rng.normal(size=n))),))
    f = phantom_field(spec)
    ctx = GeometryContext(coordinate_circles_curve(1.2 * math.sqrt(n), n), f.support, 1, family="vector")
    for _ in range(10):
        x = 0.5 * rng.uniform(-1, 1, size=n) / math.sqrt(n)
        np.testing.assert_allclose(recover_vector(x, ExactAProvider(f, family="vector"), ctx), f.sample(x)[0],
                                   atol=1e-10)


def test_even_dimension_vector_reconstruction_is_unsupported():
    ctx = GeometryContext(coordinate_circles_curve(3.0, 4), Ball(np.zeros(4), 1.0), 1, family="vector")
    with pytest.raises(UnsupportedDimensionError):
        recover_vector(np.zeros(4), None, ctx)


def test_radon_inversion_of_synthetic_W():
    wfield = _gaussian_wfield()
    for x in ([0.0, 0.0, 0.0], [0.3, 0.2, -0.1], [0.5, 0.0, 0.5]):
        expected = math.exp(-float(np.dot(x, x)))
        assert recover_A_component(x, 0, 1, wfield) == pytest.approx(expected, rel=1e-2)


def test_excluded_nodes_are_renormalized():
    full = _gaussian_wfield()
    partial = _gaussian_wfield(invalid_rows=range(0, 2048, 2))
    assert recover_A_component(np.zeros(3), 0, 1, partial) == pytest.approx(
        recover_A_component(np.zeros(3), 0, 1, full), rel=1e-12)
    empty = _gaussian_wfield(invalid_rows=range(2048))
    with pytest.raises(CoverageError):
        recover_A_component(np.zeros(3), 0, 1, empty)


def test_probes_outside_box_come_back_as_nan(vector_bump, three_circles):
    ctx = GeometryContext(three_circles, vector_bump.support, 1)
    out = reconstruct_probes([[0.1, 0.0, 0.0], [1.5, 0.0, 0.0]], ExactAProvider(vector_bump), ctx)
    assert out.shape == (2, 3)
    np.testing.assert_allclose(out[0], vector_bump.sample([0.1, 0.0, 0.0])[0], atol=1e-9)
    assert np.all(np.isnan(out[1]))


def test_vector_and_tensor_pipelines_agree(vector_bump, three_circles):
    sphere = sphere_grid(3, 4, 8)
    p_grid = uniform_p_grid(1.3, 17)
    params = WParams(circle_nodes=8, transport="omit")
    tensor_field = build_wfield(forward_dataset(vector_bump, three_circles, step=0.05), sphere, p_grid, params)
    vector_field = build_wfield(forward_dataset(vector_bump, three_circles, family="vector", step=0.05),
                                sphere, p_grid, params)
    w_scale = float(np.abs(tensor_field.values).max())
    np.testing.assert_allclose(vector_field.values[..., 0], tensor_field.values[..., 1], rtol=1e-9,
                               atol=1e-12 * w_scale)
    np.testing.assert_allclose(vector_field.values[..., 1], tensor_field.values[..., 0], rtol=1e-9,
                               atol=1e-12 * w_scale)

    probes = np.array([[0.1, 0.0, 0.0], [0.0, -0.2, 0.1], [0.2, 0.2, -0.1]])
    tensor = reconstruct_probes(probes, WFieldAProvider(tensor_field),
                                GeometryContext(three_circles, vector_bump.support, 1))
    vector = reconstruct_probes(probes, WFieldAProvider(vector_field),
                                GeometryContext(three_circles, vector_bump.support, 1, family="vector"))
    scale = max(1.0, float(np.nanmax(np.abs(tensor))))
    np.testing.assert_allclose(vector, tensor, rtol=1e-6, atol=1e-9 * scale)


def test_reconstruction_is_linear_in_the_field(vector_bump, three_circles):
    other = phantom_field(PhantomSpec(kind="gaussian-bump", order=1,
                                      bumps=(BumpSpec((-0.1, 0.1, 0.05), 0.5, (0.2, 0.9, -0.4)),)))
    combined = AnalyticTensorField(lambda x: vector_bump.fn(x) - 0.5 * other.fn(x), 1,
                                   vector_bump.lower, vector_bump.upper, vector_bump.support)
    sphere = sphere_grid(3, 4, 8)
    p_grid = uniform_p_grid(1.3, 17)
    ctx = GeometryContext(three_circles, vector_bump.support, 1)
    probes = np.array([[0.1, 0.0, 0.0], [0.0, -0.2, 0.1], [0.2, 0.2, -0.1]])

    def estimate(field):
        wfield = build_wfield(forward_dataset(field, three_circles, step=0.05), sphere, p_grid,
                              WParams(circle_nodes=8))
        return reconstruct_probes(probes, WFieldAProvider(wfield), ctx)

    expected = estimate(vector_bump) - 0.5 * estimate(other)
    scale = max(1.0, float(np.nanmax(np.abs(expected))))
    np.testing.assert_allclose(estimate(combined), expected, rtol=1e-6, atol=1e-9 * scale)


def _estimates_at_two_resolutions(field, curve, order, probes, circle_nodes):
    data = forward_dataset(field, curve, step=0.04)
    ctx = GeometryContext(curve, field.support, order)
    estimates = []
    for polar, azimuth, p_count in ((6, 12, 14), (12, 24, 27)):
        wfield = build_wfield(data, sphere_grid(3, polar, azimuth), uniform_p_grid(1.3, p_count),
                              WParams(circle_nodes=circle_nodes, h_p=2e-2))
        estimates.append(reconstruct_probes(probes, WFieldAProvider(wfield), ctx))
    return estimates


@pytest.mark.slow
def test_scalar_reconstruction_error_falls_with_refinement(scalar_bump, three_circles):
    probes = np.array([[0.25, 0.1, -0.15], [-0.2, 0.3, 0.1], [0.1, -0.35, 0.2]])
    truth = scalar_bump.sample(probes)
    coarse, fine = _estimates_at_two_resolutions(scalar_bump, three_circles, 0, probes, 64)
    errors = [float(np.linalg.norm(e - truth) / np.linalg.norm(truth)) for e in (coarse, fine)]
    assert all(math.isfinite(e) for e in errors)
    assert errors[1] < 0.7 * errors[0]
    assert errors[1] < 0.25


@pytest.mark.slow
def test_vector_reconstruction_settles_under_refinement(vector_bump, three_circles):
    probes = np.array([[0.1, 0.0, 0.0], [0.0, -0.2, 0.1], [0.2, 0.2, -0.1]])
    coarse, fine = _estimates_at_two_resolutions(vector_bump, three_circles, 1, probes, 32)
    rows = np.all(np.isfinite(coarse), axis=1) & np.all(np.isfinite(fine), axis=1)
    assert rows.sum() >= 2
    truth = vector_bump.sample(probes[rows])
    errors = [float(np.linalg.norm(e[rows] - truth) / np.linalg.norm(truth)) for e in (coarse, fine)]
    assert all(math.isfinite(e) for e in errors)
    # the remaining m=1 error is the W bias, so the estimate itself stops moving
    assert np.linalg.norm(fine[rows] - coarse[rows]) <= 0.5 * np.linalg.norm(coarse[rows])
