import numpy as np
import pytest

from geometry.certify import encompasses, kirillov_tuy_report, ray_hits_ball
from geometry.curves import great_circles_curve, planar_circle_curve


def test_ray_hits_ball(unit_ball):
    origins = np.array([[-2.0, 0.0, 0.0], [-2.0, 0.0, 0.0], [-2.0, 1.5, 0.0]])
    directions = np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    np.testing.assert_array_equal(ray_hits_ball(origins, directions, unit_ball), [True, False, False])


def test_exterior_circles_encompass(three_circles, unit_ball):
    ok, witness = encompasses(three_circles, unit_ball)
    assert ok and witness is None


def test_curve_through_ball_is_rejected(unit_ball):
    ok, witness = encompasses(great_circles_curve(0.9), unit_ball)
    assert not ok
    assert witness.reason == "curve meets the ball"
    assert np.linalg.norm(witness.point) == pytest.approx(0.9)


def test_three_circles_pass_modified_condition(three_circles, unit_ball):
    report = kirillov_tuy_report(three_circles, unit_ball, 1, plane_samples=16, modified=True)
    assert report.passed
    assert report.planes_sampled == 16 * 7
    assert report.min_margin > 0.0
    assert "passed: true" in report.to_text()


def test_single_circle_fails(unit_ball):
    circle = planar_circle_curve(2.0, [0.0, 0.0, 0.0], [0.0, 0.0, 1.0])
    report = kirillov_tuy_report(circle, unit_ball, 1, plane_samples=16)
    assert not report.passed
    assert report.failures
    text = report.to_text()
    assert "passed: false" in text
    assert "failure: omega=" in text
