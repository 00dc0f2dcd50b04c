"""
Quadrature on spheres: product Gauss-Jacobi rules in the polar angles times a
trapezoid rule in the azimuth, and the orthogonal sphere S(omega).
"""
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.special import gamma, roots_jacobi, roots_legendre

from errors import InvalidInputError
from geometry.frames import canonical_frame, frames_from_angles


@dataclass(frozen=True)
class SphereGrid:
    """Nodes and weights on S^{n-1}."""

    n: int
    n_polar: int
    n_azimuth: int
    angles: np.ndarray  # (N, n-1)
    directions: np.ndarray  # (N, n)
    weights: np.ndarray  # (N,)

    @property
    def size(self) -> int:
        return self.weights.size

    def to_dict(self) -> dict:
        return {"n": self.n, "n_polar": self.n_polar, "n_azimuth": self.n_azimuth}


def sphere_area(n: int) -> float:
    """Surface measure of S^{n-1}."""
    return 2.0 * math.pi ** (n / 2.0) / gamma(n / 2.0)


def _polar_rule(count: int, power: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes/weights for the integral of g(phi) sin^power(phi) over [0, pi]."""
    a = (power - 1) / 2.0
    t, w = roots_legendre(count) if power == 1 else roots_jacobi(count, a, a)
    return np.arccos(t)[::-1], w[::-1]


def sphere_grid(n: int, n_polar: int, n_azimuth: int, azimuth_offset: float = 0.0) -> SphereGrid:
    """
    Product rule on S^{n-1}; polar angle k (0-based) carries the Jacobian
    sin^{n-2-k}, integrated exactly by Gauss-Jacobi in cos(phi).
    """
    if n < 2:
        raise InvalidInputError(f"Sphere grids need n >= 2, got {n}")
    if n_azimuth < 1 or (n > 2 and n_polar < 1):
        raise InvalidInputError("Node counts must be positive")
    axes = []
    axis_weights = []
    for k in range(n - 2):
        nodes, weights = _polar_rule(n_polar, n - 2 - k)
        axes.append(nodes)
        axis_weights.append(weights)
    azimuth = 2.0 * math.pi * (np.arange(n_azimuth) + azimuth_offset) / n_azimuth
    axes.append(np.mod(azimuth, 2.0 * math.pi))
    axis_weights.append(np.full(n_azimuth, 2.0 * math.pi / n_azimuth))

    mesh = np.meshgrid(*axes, indexing="ij")
    wmesh = np.meshgrid(*axis_weights, indexing="ij")
    angles = np.stack([m.reshape(-1) for m in mesh], axis=1)
    weights = np.prod(np.stack([w.reshape(-1) for w in wmesh], axis=1), axis=1)
    directions, _ = frames_from_angles(angles)
    return SphereGrid(n, n_polar if n > 2 else 0, n_azimuth, angles, directions, weights)


def circle_grid(omega, count: int, offset: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Unit directions orthogonal to omega with quadrature weights.

    In R^3 this is the trapezoid rule on the great circle of omega-perp with
    nodes shifted by `offset` node spacings; in R^n it is the product rule on
    S^{n-2} mapped into omega-perp.
    """
    basis = canonical_frame(omega).eta
    n = basis.shape[1]
    if n == 3:
        theta = 2.0 * math.pi * (np.arange(count) + offset) / count
        local = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        weights = np.full(count, 2.0 * math.pi / count)
    else:
        grid = sphere_grid(n - 1, max(2, count // 2), count, azimuth_offset=offset)
        local = grid.directions
        weights = grid.weights
    return local @ basis, weights
