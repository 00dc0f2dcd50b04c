"""
Sampled certification of acquisition curves: the encompassing condition and
the (modified) Kirillov-Tuy condition over a deterministic set of planes.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from algebra.symtensor import generic_margin, sym_dim
from geometry.curves import (
    Ball,
    Curve,
    PlaneCoords,
    disk_samples,
    plane_curve_intersections,
    select_branches,
    view_directions,
)
from utils import sphere_directions
from worker_pool import parallel_map

GENERIC_TOL = 1e-6
TANGENCY_TOL = 1e-6

logger = logging.getLogger(__name__)


# === Encompassing ===

@dataclass(frozen=True)
class EncompassWitness:
    reason: str
    point: np.ndarray
    direction: Optional[np.ndarray] = None


def ray_hits_ball(origins, directions, ball: Ball) -> np.ndarray:
    """Whether each half-line {a + t xi, t >= 0} meets the open ball."""
    a = np.atleast_2d(origins)
    d = np.atleast_2d(directions)
    to_center = ball.center - a
    along = np.clip(np.sum(to_center * d, axis=1), 0.0, None)
    closest = a + along[:, None] * d
    return np.linalg.norm(closest - ball.center, axis=1) < ball.radius


def encompasses(curve: Curve, ball: Ball, samples: int = 256,
                direction_samples: int = 512) -> Tuple[bool, Optional[EncompassWitness]]:
    """
    Sampled check that the curve misses the ball and that no line through a
    curve point meets the ball on both of its half-lines.

    Returns (passed, witness of the first failure or None).
    """
    points = curve.sample(samples)
    inside = ball.contains(points, strict=False)
    if np.any(inside):
        first = points[np.flatnonzero(inside)[0]]
        return False, EncompassWitness("curve meets the ball", first)

    directions = sphere_directions(curve.n, direction_samples)
    for point in points:
        origins = np.broadcast_to(point, directions.shape)
        both = ray_hits_ball(origins, directions, ball) & ray_hits_ball(origins, -directions, ball)
        if np.any(both):
            return False, EncompassWitness("both half-lines meet the ball", point,
                                           directions[np.flatnonzero(both)[0]])
    return True, None


# === Kirillov-Tuy ===

@dataclass(frozen=True)
class KTFailure:
    omega: np.ndarray
    p: float
    reason: str


@dataclass
class KTReport:
    order: int
    modified: bool
    planes_sampled: int
    failures: List[KTFailure] = field(default_factory=list)
    min_margin: float = math.inf
    max_jump: float = 0.0
    tangential_planes: int = 0

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_text(self) -> str:
        lines = [
            f"condition: {'modified Kirillov-Tuy' if self.modified else 'Kirillov-Tuy'}",
            f"order: {self.order}",
            f"planes_sampled: {self.planes_sampled}",
            f"failures: {len(self.failures)}",
            f"tangential_planes: {self.tangential_planes}",
            f"min_margin: {self.min_margin:.6e}",
            f"max_jump: {self.max_jump:.6e}",
            f"passed: {str(self.passed).lower()}",
        ]
        for failure in self.failures:
            omega = ", ".join(f"{w:.6f}" for w in failure.omega)
            lines.append(f"failure: omega=({omega}) p={failure.p:.6f} {failure.reason}")
        return "\n".join(lines) + "\n"


def _direction_task(curve: Curve, ball: Ball, m: int, modified: bool, need: int,
                    offsets: np.ndarray, point_samples: int):
    def run(omega):
        failures = []
        margin = math.inf
        jump = 0.0
        tangential = 0
        previous = None
        center_p = float(omega @ ball.center)
        for frac in offsets:
            plane = PlaneCoords(omega, center_p + frac * ball.radius)
            found = plane_curve_intersections(curve, plane)
            usable = [c for c in found.crossings if abs(c.slope) > TANGENCY_TOL]
            if found.tangencies or len(usable) < len(found.crossings):
                tangential += 1
            xs = disk_samples(plane, ball, point_samples)
            selected, pair_margin = select_branches(usable, xs, need, margin=GENERIC_TOL)

            if len(selected) < need:
                failures.append(KTFailure(omega, plane.p,
                                          f"{len(found.crossings)} intersection points, "
                                          f"{len(selected)} usable, need {need}"))
                previous = None
                continue

            if modified or curve.n == 3:
                plane_margin = pair_margin if len(selected) > 1 else 1.0
            else:
                plane_margin = min(
                    generic_margin(np.array([view_directions(x[None, :], c.point)[0] for c in selected]), m)
                    for x in xs
                )
                if plane_margin <= GENERIC_TOL:
                    failures.append(KTFailure(omega, plane.p, f"directions not generic (margin {plane_margin:.3e})"))
            margin = min(margin, plane_margin)

            points = np.array([c.point for c in selected])
            if previous is not None:
                jump = max(jump, float(np.max(np.linalg.norm(points - previous, axis=1))))
            previous = points
        return failures, margin, jump, tangential

    return run


def kirillov_tuy_report(curve: Curve, ball: Ball, m: int, plane_samples: int = 64,
                        point_samples: int = 16, modified: bool = False,
                        offsets: int = 7) -> KTReport:
    """
    Certify the Kirillov-Tuy condition of order m (or the modified order-1
    condition) on plane_samples normals times `offsets` parallel planes.
    """
    need = 2 if modified else sym_dim(m, curve.n - 1)
    fractions = np.linspace(-0.9, 0.9, offsets)
    normals = sphere_directions(curve.n, plane_samples)
    task = _direction_task(curve, ball, m, modified, need, fractions, point_samples)
    results = parallel_map(task, list(normals), tag="kt-planes")

    report = KTReport(order=m, modified=modified, planes_sampled=len(normals) * offsets)
    for failures, margin, jump, tangential in results:
        report.failures.extend(failures)
        report.min_margin = min(report.min_margin, margin)
        report.max_jump = max(report.max_jump, jump)
        report.tangential_planes += tangential

    logger.info(
        f"[CERTIFY] {report.planes_sampled} planes, {len(report.failures)} failures, "
        f"min margin {report.min_margin:.3e}, max jump {report.max_jump:.3e}"
    )
    return report
