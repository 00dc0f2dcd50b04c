import math

import numpy as np
import pytest

from errors import InvalidInputError
from geometry.frames import (
    angles_from_direction,
    angles_from_directions,
    canonical_frame,
    canonical_frames,
    flip_signs,
    frame_from_angles,
    frames_from_angles,
)


def _random_angles(rng, n, count, margin=0.0):
    polar = rng.uniform(margin, math.pi - margin, size=(count, n - 2))
    azimuth = rng.uniform(margin, 2 * math.pi - margin, size=(count, 1))
    return np.hstack([polar, azimuth])


def test_closed_form_in_three_dimensions():
    phi1, phi2 = 0.7, 2.1
    s1, c1, s2, c2 = math.sin(phi1), math.cos(phi1), math.sin(phi2), math.cos(phi2)
    frame = frame_from_angles(3, [phi1, phi2])
    np.testing.assert_allclose(frame.xi, [s1 * s2, s1 * c2, c1], atol=1e-15)
    np.testing.assert_allclose(frame.alpha, [c1 * s2, c1 * c2, -s1], atol=1e-15)
    np.testing.assert_allclose(frame.beta, [c2, -s2, 0.0], atol=1e-15)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_frames_are_orthonormal(rng, n):
    xi, eta = frames_from_angles(_random_angles(rng, n, 10_000))
    basis = np.concatenate([xi[:, None, :], eta], axis=1)
    gram = np.einsum("kij,klj->kil", basis, basis)
    assert np.max(np.abs(gram - np.eye(n))) <= 1e-12


@pytest.mark.parametrize("n", [3, 4, 5])
def test_angles_round_trip_away_from_poles(rng, n):
    angles = _random_angles(rng, n, 2000, margin=0.05)
    xi, _ = frames_from_angles(angles)
    np.testing.assert_allclose(angles_from_directions(xi), angles, atol=1e-10)


def test_frame_object_gram():
    frame = frame_from_angles(4, [0.3, 2.0, 5.5])
    np.testing.assert_allclose(frame.gram(), np.eye(4), atol=1e-12)
    np.testing.assert_array_equal(frame.eta_axis(3), frame.eta[2])
    with pytest.raises(InvalidInputError):
        frame.eta_axis(4)


def test_pole_frames_use_zero_angles():
    north = canonical_frame([0.0, 0.0, 1.0])
    np.testing.assert_array_equal(north.angles, [0.0, 0.0])
    np.testing.assert_allclose(north.alpha, [0.0, 1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(north.beta, [1.0, 0.0, 0.0], atol=1e-15)

    east = canonical_frame([1.0, 0.0, 0.0])
    np.testing.assert_allclose(east.alpha, [0.0, 0.0, -1.0], atol=1e-15)
    np.testing.assert_allclose(east.beta, [0.0, -1.0, 0.0], atol=1e-15)


def test_canonical_frame_normalizes_direction():
    frame = canonical_frame([0.0, 3.0, 4.0])
    np.testing.assert_allclose(frame.xi, [0.0, 0.6, 0.8], atol=1e-15)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_flipped_direction_negates_last_axis(rng, n):
    directions = rng.normal(size=(200, n))
    _, eta = canonical_frames(directions)
    _, flipped = canonical_frames(-directions)
    np.testing.assert_allclose(flipped, eta * flip_signs(n)[None, :, None], atol=1e-12)


def test_invalid_angles_are_rejected():
    with pytest.raises(InvalidInputError):
        frame_from_angles(3, [math.pi + 0.1, 0.0])
    with pytest.raises(InvalidInputError):
        frame_from_angles(3, [0.5, 2 * math.pi])
    with pytest.raises(InvalidInputError):
        frame_from_angles(3, [0.5])


def test_angles_need_unit_vectors():
    with pytest.raises(InvalidInputError):
        angles_from_direction([0.0, 0.0, 2.0])
    with pytest.raises(InvalidInputError):
        angles_from_direction([0.0, 0.0, 0.0])
    with pytest.raises(InvalidInputError):
        canonical_frame([0.0, 0.0, 0.0])
