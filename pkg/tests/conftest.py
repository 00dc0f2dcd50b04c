import json

import numpy as np
import pytest

from geometry.curves import Ball, great_circles_curve
from harness.phantoms import BumpSpec, PhantomSpec, phantom_field
from transforms.fields import AnalyticTensorField


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def unit_ball():
    return Ball(np.zeros(3), 1.0)


@pytest.fixture
def three_circles():
    return great_circles_curve(2.0)


@pytest.fixture
def scalar_bump():
    """m = 0 Gaussian bump of width 0.5 at the origin."""
    return phantom_field(PhantomSpec(kind="gaussian-bump", order=0, width=0.5))


@pytest.fixture
def vector_bump():
    """m = 1 bump with a fixed, generic direction tensor."""
    spec = PhantomSpec(kind="gaussian-bump", order=1,
                       bumps=(BumpSpec((0.1, -0.05, 0.0), 0.45, (0.6, -0.3, 0.8)),))
    return phantom_field(spec)


@pytest.fixture
def zero_field():
    def fn(points):
        return np.zeros((len(points), 3))
    return AnalyticTensorField(fn, 1, [-1.25] * 3, [1.25] * 3, Ball(np.zeros(3), 1.0))


@pytest.fixture
def tiny_config(tmp_path):
    """A small run config file and its directory."""
    config = {
        "phantom": {"kind": "gaussian-bump", "order": 1, "radius": 1.0, "seed": 3},
        "curve": {"kind": "three-circles", "radius": 2.0},
        "grids": {"field": 12, "sphere_polar": 4, "sphere_azimuth": 8, "p_count": 17, "lam_count": 16,
                  "circle_nodes": 8, "direction_polar": 6, "direction_azimuth": 12, "probes": 3, "output": 3},
        "steps": {"ray": 0.1, "h_xi": 1e-3, "h_p": 5e-2},
        "output_dir": "out",
        "seed": 5,
    }
    path = tmp_path / "run.json"
    path.write_text(json.dumps(config))
    return path
