"""
Acquisition curves, planes, balls, and plane-curve intersection solving.

Curves are unions of analytic circle pieces. Roots of h(lambda) =
<omega, gamma(lambda)> - p are bracketed on a uniform lambda grid and refined
by vectorized bisection; even-multiplicity contacts are reported separately.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar, newton
from scipy.stats import qmc

from errors import InvalidInputError
from geometry.frames import canonical_frame
from utils import as_points, sunflower_disk, unit

TWO_PI = 2.0 * math.pi
DEFAULT_SAMPLES = 2048
BISECTION_STEPS = 60
BRANCH_MARGIN = 1e-6

logger = logging.getLogger(__name__)


# === Primitives ===

@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(-1))
        if not self.radius > 0:
            raise InvalidInputError(f"Ball radius must be positive, got {self.radius}")

    @property
    def n(self) -> int:
        return self.center.size

    def contains(self, points, strict: bool = True) -> np.ndarray:
        pts, _ = as_points(points, self.n)
        dist = np.linalg.norm(pts - self.center, axis=1)
        return dist < self.radius if strict else dist <= self.radius

    def meets_plane(self, plane: "PlaneCoords") -> bool:
        return abs(float(plane.omega @ self.center) - plane.p) < self.radius

    def reach(self) -> float:
        """Largest |p| of a plane through the ball."""
        return float(np.linalg.norm(self.center)) + self.radius


@dataclass(frozen=True)
class PlaneCoords:
    """Hyperplane H = {x : <omega, x> = p}."""

    omega: np.ndarray
    p: float

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=float).reshape(-1)
        norm = float(np.linalg.norm(w))
        if abs(norm - 1.0) > 1e-9:
            raise InvalidInputError(f"Plane normal must be a unit vector, |omega| = {norm:.12g}")
        object.__setattr__(self, "omega", w / norm)
        object.__setattr__(self, "p", float(self.p))

    @property
    def n(self) -> int:
        return self.omega.size

    def shifted(self, dp: float) -> "PlaneCoords":
        return PlaneCoords(self.omega, self.p + dp)

    def basis(self) -> np.ndarray:
        """Orthonormal basis of omega-perp (rows), taken from the canonical frame of omega."""
        return canonical_frame(self.omega).eta

    def foot(self) -> np.ndarray:
        return self.p * self.omega

    def to_dict(self) -> dict:
        return {"omega": self.omega.tolist(), "p": self.p}


# === Curves ===

@dataclass(frozen=True)
class CirclePiece:
    """gamma(lambda) = center + R (cos(lambda) u + sin(lambda) v), lambda in [0, 2pi)."""

    name: str
    center: np.ndarray
    u: np.ndarray
    v: np.ndarray
    radius: float

    interval: Tuple[float, float] = (0.0, TWO_PI)
    periodic: bool = True

    def position(self, lam) -> np.ndarray:
        t = np.atleast_1d(np.asarray(lam, dtype=float))
        return self.center + self.radius * (np.cos(t)[:, None] * self.u + np.sin(t)[:, None] * self.v)

    def derivative(self, lam) -> np.ndarray:
        t = np.atleast_1d(np.asarray(lam, dtype=float))
        return self.radius * (-np.sin(t)[:, None] * self.u + np.cos(t)[:, None] * self.v)

    def wrap(self, lam: float) -> float:
        return float(np.mod(lam, TWO_PI))


@dataclass(frozen=True)
class Curve:
    kind: str
    pieces: Tuple[CirclePiece, ...]
    params: Dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.pieces[0].center.size

    def position(self, piece: int, lam) -> np.ndarray:
        return self.pieces[piece].position(lam)

    def derivative(self, piece: int, lam) -> np.ndarray:
        return self.pieces[piece].derivative(lam)

    def lambda_grid(self, count: int) -> np.ndarray:
        """Uniform periodic grid shared by every piece."""
        return TWO_PI * np.arange(count) / count

    def sample(self, count: int) -> np.ndarray:
        """(pieces * count, n) points on the curve."""
        lam = self.lambda_grid(count)
        return np.vstack([piece.position(lam) for piece in self.pieces])

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}


def circle_piece(name: str, center, u, v, radius: float) -> CirclePiece:
    return CirclePiece(
        name=name,
        center=np.asarray(center, dtype=float),
        u=unit(u),
        v=unit(v),
        radius=float(radius),
    )


def great_circles_curve(R: float) -> Curve:
    """Circles of radius R in the xy, yz and zx coordinate planes."""
    if not R > 0:
        raise InvalidInputError(f"Curve radius must be positive, got {R}")
    e = np.eye(3)
    origin = np.zeros(3)
    pieces = (
        circle_piece("xy", origin, e[0], e[1], R),
        circle_piece("yz", origin, e[1], e[2], R),
        circle_piece("zx", origin, e[2], e[0], R),
    )
    return Curve(kind="three-circles", pieces=pieces, params={"radius": float(R)})


def coordinate_circles_curve(R: float, n: int) -> Curve:
    """Union of the radius-R circles in every coordinate 2-plane of R^n."""
    if n == 3:
        return great_circles_curve(R)
    if not R > 0:
        raise InvalidInputError(f"Curve radius must be positive, got {R}")
    if n < 3:
        raise InvalidInputError(f"Coordinate circles need n >= 3, got {n}")
    e = np.eye(n)
    origin = np.zeros(n)
    pieces = tuple(
        circle_piece(f"e{i + 1}e{j + 1}", origin, e[i], e[j], R)
        for i in range(n) for j in range(i + 1, n)
    )
    return Curve(kind="coordinate-circles", pieces=pieces, params={"radius": float(R), "dimension": n})


def planar_circle_curve(R: float, center, normal) -> Curve:
    """A single circle of radius R around center, in the plane orthogonal to normal."""
    if not R > 0:
        raise InvalidInputError(f"Curve radius must be positive, got {R}")
    eta = canonical_frame(normal).eta
    piece = circle_piece("circle", center, eta[0], eta[1], R)
    return Curve(
        kind="planar-circle",
        pieces=(piece,),
        params={"radius": float(R), "center": np.asarray(center, float).tolist(),
                "normal": unit(normal).tolist()},
    )


# === Plane intersections ===

@dataclass(frozen=True)
class Crossing:
    piece: int
    lam: float
    point: np.ndarray
    slope: float  # <omega, gamma'(lam)>


@dataclass(frozen=True)
class PlaneIntersections:
    plane: PlaneCoords
    crossings: Tuple[Crossing, ...]
    tangencies: Tuple[Crossing, ...]
    contained: Tuple[int, ...]

    def as_pairs(self) -> List[Tuple[float, np.ndarray]]:
        return [(c.lam, c.point) for c in self.crossings]

    @property
    def points(self) -> np.ndarray:
        if not self.crossings:
            return np.zeros((0, self.plane.n))
        return np.array([c.point for c in self.crossings])


def _h(piece: CirclePiece, plane: PlaneCoords, lam) -> np.ndarray:
    return piece.position(lam) @ plane.omega - plane.p


def _bisect(piece: CirclePiece, plane: PlaneCoords, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    lo = lo.copy()
    hi = hi.copy()
    sign_lo = np.sign(_h(piece, plane, lo))
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        same = np.sign(_h(piece, plane, mid)) == sign_lo
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    return 0.5 * (lo + hi)


def _piece_roots(piece: CirclePiece, plane: PlaneCoords, samples: int, tol: float):
    """Returns (crossing lambdas, tangency lambdas, contained flag) of one piece."""
    lam = piece.interval[0] + (piece.interval[1] - piece.interval[0]) * np.arange(samples) / samples
    step = lam[1] - lam[0]
    h = _h(piece, plane, lam)
    scale = float(np.max(np.abs(piece.position(lam)))) + abs(plane.p) + 1.0
    if np.max(np.abs(h)) <= tol * scale:
        return [], [], True

    s = np.sign(h)
    nxt = np.roll(np.arange(samples), -1)
    prv = np.roll(np.arange(samples), 1)
    crossings: List[float] = []
    tangencies: List[float] = []

    bracket = s * s[nxt] < 0
    if np.any(bracket):
        lo = lam[bracket]
        crossings.extend(_bisect(piece, plane, lo, lo + step).tolist())

    for k in np.flatnonzero(s == 0):
        if s[prv[k]] * s[nxt[k]] < 0:
            crossings.append(float(lam[k]))
        else:
            tangencies.append(float(lam[k]))

    extremum = (s == s[prv]) & (s == s[nxt]) & (s != 0) & ((h - h[prv]) * (h[nxt] - h) <= 0)
    local_var = np.maximum(np.abs(h[nxt] - h), np.abs(h - h[prv]))
    candidates = np.flatnonzero(extremum & (np.abs(h) <= 2.0 * local_var))
    tangency_tol = max(1e-9 * scale, tol)
    for k in candidates:
        a, b = lam[k] - step, lam[k] + step
        sign_k = s[k]
        res = minimize_scalar(lambda t: sign_k * float(_h(piece, plane, t)[0]),
                              bounds=(a, b), method="bounded", options={"xatol": 1e-13})
        t_star = float(res.x)
        h_star = float(_h(piece, plane, t_star)[0])
        if abs(h_star) <= tangency_tol:
            tangencies.append(t_star)
        elif np.sign(h_star) != sign_k:
            roots = _bisect(piece, plane, np.array([a, t_star]), np.array([t_star, b]))
            crossings.extend(roots.tolist())

    crossings = [piece.wrap(t) for t in crossings]
    tangencies = [piece.wrap(t) for t in tangencies]
    return sorted(crossings), sorted(tangencies), False


def plane_curve_intersections(curve: Curve, plane: PlaneCoords, tol: float = 1e-10,
                              samples: int = DEFAULT_SAMPLES) -> PlaneIntersections:
    """
    Simple roots of <omega, gamma> = p on every piece, sorted by (piece, lambda).

    Pieces lying inside the plane are listed in ``contained``; tangential
    contacts are listed in ``tangencies``. Points closer than tol are merged.
    """
    crossings: List[Crossing] = []
    tangencies: List[Crossing] = []
    contained: List[int] = []
    merge_tol = max(tol, 1e-9)

    def _is_new(point, existing):
        return all(np.linalg.norm(point - c.point) > merge_tol for c in existing)

    for index, piece in enumerate(curve.pieces):
        roots, touches, inside = _piece_roots(piece, plane, samples, tol)
        if inside:
            contained.append(index)
            continue
        for lam in roots:
            point = piece.position(lam)[0]
            if abs(point @ plane.omega - plane.p) > tol * (1.0 + abs(plane.p)):
                logger.debug(f"[CURVE] Dropping unresolved root on piece {piece.name} at lambda={lam:.6f}")
                continue
            if _is_new(point, crossings):
                slope = float(piece.derivative(lam)[0] @ plane.omega)
                crossings.append(Crossing(index, lam, point, slope))
        for lam in touches:
            point = piece.position(lam)[0]
            if _is_new(point, [t for t in tangencies if t.piece == index]):
                tangencies.append(Crossing(index, lam, point, float(piece.derivative(lam)[0] @ plane.omega)))

    return PlaneIntersections(plane, tuple(crossings), tuple(tangencies), tuple(contained))


def track_crossing(curve: Curve, crossing: Crossing, plane: PlaneCoords,
                   tol: float = 1e-10, max_jump: float = 0.5) -> Optional[Crossing]:
    """
    Follow a crossing to a nearby parallel plane.

    Newton's method on the same piece first; if it fails or jumps by more than
    max_jump in lambda, the nearest crossing of the new plane is used instead.
    """
    piece = curve.pieces[crossing.piece]
    try:
        lam = newton(
            lambda t: float(_h(piece, plane, t)[0]),
            crossing.lam,
            fprime=lambda t: float(piece.derivative(t)[0] @ plane.omega),
            tol=1e-14,
            maxiter=50,
        )
        lam = float(lam)
        ok = abs(lam - crossing.lam) <= max_jump and abs(float(_h(piece, plane, lam)[0])) <= tol * (1.0 + abs(plane.p))
    except (RuntimeError, ZeroDivisionError):
        ok = False

    if ok:
        lam = piece.wrap(lam)
        return Crossing(crossing.piece, lam, piece.position(lam)[0], float(piece.derivative(lam)[0] @ plane.omega))

    fallback = plane_curve_intersections(curve, plane, tol=tol).crossings
    if not fallback:
        return None
    nearest = min(fallback, key=lambda c: float(np.linalg.norm(c.point - crossing.point)))
    logger.debug(f"[CURVE] Newton tracking failed on piece {piece.name}, using nearest crossing")
    return nearest


# === Branch selection ===

def disk_samples(plane: PlaneCoords, ball: Ball, count: int, shrink: float = 0.95) -> np.ndarray:
    """Deterministic points of H ∩ B (empty when the plane misses the ball)."""
    offset = float(plane.omega @ ball.center) - plane.p
    if abs(offset) >= ball.radius:
        return np.zeros((0, plane.n))
    foot = ball.center - offset * plane.omega
    rho = shrink * math.sqrt(ball.radius ** 2 - offset ** 2)
    basis = plane.basis()
    if plane.n == 3:
        local = sunflower_disk(count)
    else:
        cube = 2.0 * qmc.Halton(d=plane.n - 1, scramble=False).random(8 * count + 8) - 1.0
        local = cube[np.linalg.norm(cube, axis=1) <= 1.0][:count]
    return foot + rho * local @ basis


def _pair_margin(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Smallest singular value of [u, w] for unit rows: sqrt(1 - |u.w|)."""
    cos = np.abs(np.sum(u * w, axis=1))
    return np.sqrt(np.clip(1.0 - cos, 0.0, None))


def view_directions(points: np.ndarray, source: np.ndarray) -> np.ndarray:
    """Unit vectors from a curve point towards each of the points."""
    diff = np.atleast_2d(points) - source
    norms = np.linalg.norm(diff, axis=1)
    return diff / np.where(norms > 0, norms, 1.0)[:, None]


def select_branches(crossings: Sequence[Crossing], x_samples, count: int,
                    margin: float = BRANCH_MARGIN) -> Tuple[List[Crossing], float]:
    """
    Greedy sorted-(piece, lambda) selection of up to count crossings whose view
    directions are pairwise independent at every sample point.

    Returns (selected, smallest pairwise margin among the selected).
    """
    xs = np.atleast_2d(np.asarray(x_samples, dtype=float))
    ordered = sorted(crossings, key=lambda c: (c.piece, c.lam))
    selected: List[Crossing] = []
    directions: List[np.ndarray] = []
    worst = math.inf
    for candidate in ordered:
        diff = xs - candidate.point
        if np.any(np.linalg.norm(diff, axis=1) <= margin):
            continue
        u = view_directions(xs, candidate.point)
        margins = [float(np.min(_pair_margin(u, w))) for w in directions]
        if margins and min(margins) <= margin:
            continue
        selected.append(candidate)
        directions.append(u)
        if margins:
            worst = min(worst, min(margins))
        if len(selected) == count:
            break
    return selected, worst
