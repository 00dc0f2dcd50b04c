"""
Hyperspherical frames: a unit direction xi together with the orthonormal
complement eta_1 ... eta_{n-1} obtained by differentiating xi along its
spherical angles.

Component convention (0-based array positions): for angle index a = 0..n-2,
``xi[n-1-a] = s_0 ... s_{a-1} c_a`` and ``xi[0] = s_0 ... s_{n-2}``. For n = 3
this is xi = (s1 s2, s1 c2, c1), eta_1 = xi_alpha = (c1 s2, c1 c2, -s1) and
eta_2 = xi_beta = (c2, -s2, 0).
"""
import logging
import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from errors import InvalidInputError

TWO_PI = 2.0 * math.pi
ANGLE_TOL = 1e-12
UNIT_TOL = 1e-9
POLE_EPS = 1e-300

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Frame:
    """Orthonormal frame {xi, eta_1, ..., eta_{n-1}} of R^n."""

    n: int
    angles: np.ndarray
    xi: np.ndarray
    eta: np.ndarray  # (n-1, n), row j-1 holds eta_j

    @property
    def alpha(self) -> np.ndarray:
        """xi_alpha (= eta_1) in R^3."""
        return self.eta[0]

    @property
    def beta(self) -> np.ndarray:
        """xi_beta (= eta_2) in R^3."""
        return self.eta[1]

    def eta_axis(self, j: int) -> np.ndarray:
        """eta_j with the 1-based axis index used by the vector channels."""
        if not 1 <= j <= self.n - 1:
            raise InvalidInputError(f"Axis index {j} outside 1..{self.n - 1}")
        return self.eta[j - 1]

    def gram(self) -> np.ndarray:
        basis = np.vstack([self.xi[None, :], self.eta])
        return basis @ basis.T


def frames_from_angles(angles) -> Tuple[np.ndarray, np.ndarray]:
    """
    Vectorized frame construction.

    Args:
        angles: (K, n-1) array of angle tuples (ranges are not checked here)

    Returns:
        (xi, eta) with shapes (K, n) and (K, n-1, n)
    """
    phi = np.atleast_2d(np.asarray(angles, dtype=float))
    count, q = phi.shape
    n = q + 1
    s, c = np.sin(phi), np.cos(phi)

    prefix = np.ones((count, q + 1))
    prefix[:, 1:] = np.cumprod(s, axis=1)

    xi = np.empty((count, n))
    for a in range(q):
        xi[:, n - 1 - a] = prefix[:, a] * c[:, a]
    xi[:, 0] = prefix[:, q]

    eta = np.zeros((count, q, n))
    for b in range(q):
        eta[:, b, n - 1 - b] = -s[:, b]
        running = np.ones(count)
        for a in range(b + 1, q):
            eta[:, b, n - 1 - a] = running * c[:, b] * c[:, a]
            running = running * s[:, a]
        eta[:, b, 0] = running * c[:, b]
    return xi, eta


def _check_angles(n: int, phi: np.ndarray) -> None:
    if n < 2:
        raise InvalidInputError(f"Frames need n >= 2, got {n}")
    if phi.shape != (n - 1,):
        raise InvalidInputError(f"Expected {n - 1} angles for n={n}, got {phi.shape[0] if phi.ndim else 0}")
    if not np.all(np.isfinite(phi)):
        raise InvalidInputError("Angles must be finite")
    polar = phi[:-1]
    if np.any(polar < -ANGLE_TOL) or np.any(polar > math.pi + ANGLE_TOL):
        raise InvalidInputError(f"Polar angles must lie in [0, pi], got {polar.tolist()}")
    if phi[-1] < -ANGLE_TOL or phi[-1] >= TWO_PI:
        raise InvalidInputError(f"Azimuth must lie in [0, 2pi), got {phi[-1]}")


def frame_from_angles(n: int, angles: Sequence[float]) -> Frame:
    """Closed-form frame for the angle tuple (phi_1, ..., phi_{n-1})."""
    phi = np.asarray(angles, dtype=float).reshape(-1)
    _check_angles(n, phi)
    xi, eta = frames_from_angles(phi[None, :])
    return Frame(n=n, angles=phi.copy(), xi=xi[0], eta=eta[0])


def angles_from_directions(directions) -> np.ndarray:
    """
    Vectorized inverse of the parametrization for unit rows.

    Angles left undefined at a coordinate pole are set to zero.
    """
    u = np.atleast_2d(np.asarray(directions, dtype=float))
    count, n = u.shape
    q = n - 1
    angles = np.zeros((count, q))
    for a in range(q - 1):
        tail = np.linalg.norm(u[:, : n - 1 - a], axis=1)
        angles[:, a] = np.arctan2(tail, u[:, n - 1 - a])
    last = np.mod(np.arctan2(u[:, 0], u[:, 1]), TWO_PI)
    angles[:, q - 1] = np.where(last >= TWO_PI, last - TWO_PI, last)

    for a in range(q):
        remaining = np.linalg.norm(u[:, : n - a], axis=1)
        angles[remaining <= POLE_EPS, a] = 0.0
    return angles


def angles_from_direction(xi) -> np.ndarray:
    """Angle tuple of a unit vector (canonical branch at the poles)."""
    v = np.asarray(xi, dtype=float).reshape(-1)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise InvalidInputError("Cannot take the angles of the zero vector")
    if abs(norm - 1.0) > UNIT_TOL:
        raise InvalidInputError(f"Direction must be a unit vector, |xi| = {norm:.12g}")
    return angles_from_directions(v[None, :])[0]


def canonical_frame(direction) -> Frame:
    """Frame of the normalized direction, built through its canonical angles."""
    v = np.asarray(direction, dtype=float).reshape(-1)
    norm = float(np.linalg.norm(v))
    if norm == 0.0 or not np.isfinite(norm):
        raise InvalidInputError("Cannot build a frame for a zero or non-finite direction")
    angles = angles_from_directions((v / norm)[None, :])[0]
    xi, eta = frames_from_angles(angles[None, :])
    return Frame(n=v.size, angles=angles, xi=xi[0], eta=eta[0])


def canonical_frames(directions) -> Tuple[np.ndarray, np.ndarray]:
    """Batched canonical frames of (K, n) directions of any nonzero length."""
    d = np.atleast_2d(np.asarray(directions, dtype=float))
    norms = np.linalg.norm(d, axis=1)
    if np.any(norms == 0.0):
        raise InvalidInputError("Cannot build a frame for a zero direction")
    return frames_from_angles(angles_from_directions(d / norms[:, None]))


def flip_signs(n: int) -> np.ndarray:
    """
    Signs s_j with eta_j(-xi) = s_j eta_j(xi) for canonical frames.

    Flipping xi maps polar angles phi -> pi - phi and shifts the azimuth by pi,
    which leaves eta_1 ... eta_{n-2} unchanged and negates eta_{n-1}.
    """
    signs = np.ones(n - 1)
    signs[-1] = -1.0
    return signs
