"""
Data-side operators on restricted TRT data.

The angular derivative L = omega_k d/dxi_k acts on the extended transform,
its circle average over S(omega) is transported along the curve as the plane
moves, and the resulting functional W is tabulated on a (omega, p) lattice
for Radon inversion.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from algebra.symtensor import multiplicities
from errors import CoverageError, InvalidInputError, OutOfDomainError, TangencyError
from geometry.curves import (
    Ball,
    Crossing,
    PlaneCoords,
    disk_samples,
    plane_curve_intersections,
    select_branches,
    track_crossing,
)
from geometry.frames import canonical_frames
from recon.dataset import TRTDataset
from transforms.quadrature import SphereGrid, circle_grid
from transforms.xforms import frame_tensors, interp_rows, patch_half_width, plane_patch
from worker_pool import parallel_map

TRANSPORT_MODES = ("omit", "subtract")
ORTHOGONALITY_TOL = 1e-8
MAX_LAMBDA_JUMP = 0.5

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WParams:
    h_xi: float = 1e-3
    h_p: float = 1e-2
    h_lambda: Optional[float] = None  # defaults to h_p / |gamma'|
    circle_nodes: int = 64
    circle_offset: float = 0.0
    transport: str = "omit"
    tangency_tol: float = 1e-6

    def __post_init__(self):
        if self.transport not in TRANSPORT_MODES:
            raise InvalidInputError(f"Unknown transport mode {self.transport!r}; expected one of {TRANSPORT_MODES}")
        if not (self.h_xi > 0 and self.h_p > 0):
            raise InvalidInputError("Finite-difference steps must be positive")
        if self.h_lambda is not None and not self.h_lambda > 0:
            raise InvalidInputError("h_lambda must be positive")
        if self.circle_nodes < 3:
            raise InvalidInputError(f"S(omega) needs at least 3 nodes, got {self.circle_nodes}")

    def to_dict(self) -> dict:
        return {
            "h_xi": self.h_xi,
            "h_p": self.h_p,
            "h_lambda": self.h_lambda,
            "circle_nodes": self.circle_nodes,
            "circle_offset": self.circle_offset,
            "transport": self.transport,
            "tangency_tol": self.tangency_tol,
        }


# === Angular derivative ===

def _stencil(order: int, h: float) -> Tuple[np.ndarray, np.ndarray]:
    """Shifts and weights of the central difference for the order-th derivative."""
    j = np.arange(order + 1)
    shifts = (order - 2 * j) * h
    weights = np.array([(-1) ** k * math.comb(order, k) for k in j], dtype=float) / (2.0 * h) ** order
    return shifts, weights


def derivative_order(n: int) -> int:
    return max(1, n - 2)


def angular_derivatives(data: TRTDataset, omega: np.ndarray, piece: int, lam: float,
                        directions: np.ndarray, h_xi: float, order: int = 1) -> np.ndarray:
    """L^order of every channel at (gamma_piece(lam), xi) for each xi row; shape (K, C)."""
    shifts, weights = _stencil(order, h_xi)
    xis = np.atleast_2d(directions)
    stacked = np.concatenate([xis + s * omega for s in shifts], axis=0)
    values = data.measure(piece, lam, stacked).reshape(len(shifts), len(xis), -1)
    return np.tensordot(weights, values, axes=(0, 0))


def apply_L(data: TRTDataset, omega, source: Crossing, xi, i: int, h_xi: float = 1e-3,
            order: int = 1) -> float:
    """omega_k d/dxi_k of channel i at the curve point of `source`, for xi in S(omega)."""
    w = np.asarray(omega, dtype=float).reshape(-1)
    x = np.asarray(xi, dtype=float).reshape(-1)
    if abs(float(w @ x)) > ORTHOGONALITY_TOL:
        raise InvalidInputError(f"xi must be orthogonal to omega, <omega, xi> = {float(w @ x):.3e}")
    if i not in data.channels:
        raise InvalidInputError(f"Channel {i} not in dataset channels {data.channels}")
    col = data.channels.index(i)
    return float(angular_derivatives(data, w, source.piece, source.lam, x[None, :], h_xi, order)[0, col])


# === W functional ===

def _circle_average(data: TRTDataset, omega: np.ndarray, piece: int, lam: float,
                    nodes: np.ndarray, weights: np.ndarray, params: WParams) -> np.ndarray:
    values = angular_derivatives(data, omega, piece, lam, nodes, params.h_xi, derivative_order(data.n))
    return np.sum(values * weights[:, None], axis=0)


def _lambda_gap(a: float, b: float) -> float:
    d = math.fmod(b - a, 2.0 * math.pi)
    if d > math.pi:
        d -= 2.0 * math.pi
    elif d < -math.pi:
        d += 2.0 * math.pi
    return abs(d)


def w_values(data: TRTDataset, plane: PlaneCoords, crossing: Crossing,
             params: WParams = WParams()) -> np.ndarray:
    """
    W of every channel for one curve branch of the plane; shape (C,).

    Raises TangencyError when the branch is tangential or cannot be followed
    to the neighboring planes.
    """
    if abs(crossing.slope) < params.tangency_tol:
        raise TangencyError(
            f"Tangential intersection on piece {crossing.piece} at lambda={crossing.lam:.6f}", plane=plane
        )
    curve = data.curve
    nodes, weights = circle_grid(plane.omega, params.circle_nodes, params.circle_offset)

    tracked = []
    for sign in (1.0, -1.0):
        moved = track_crossing(curve, crossing, plane.shifted(sign * params.h_p))
        if moved is None or moved.piece != crossing.piece or _lambda_gap(crossing.lam, moved.lam) > MAX_LAMBDA_JUMP:
            raise TangencyError(f"Branch on piece {crossing.piece} lost at p={plane.p:+.6f}", plane=plane)
        tracked.append(moved)
    psi_plus = _circle_average(data, plane.omega, tracked[0].piece, tracked[0].lam, nodes, weights, params)
    psi_minus = _circle_average(data, plane.omega, tracked[1].piece, tracked[1].lam, nodes, weights, params)
    total = (psi_plus - psi_minus) / (2.0 * params.h_p)
    if params.transport == "omit":
        return total

    speed = float(np.linalg.norm(curve.derivative(crossing.piece, crossing.lam)[0]))
    h_lam = params.h_lambda or params.h_p / speed
    up = _circle_average(data, plane.omega, crossing.piece, crossing.lam + h_lam, nodes, weights, params)
    down = _circle_average(data, plane.omega, crossing.piece, crossing.lam - h_lam, nodes, weights, params)
    transported = (up - down) / (2.0 * h_lam) / crossing.slope
    return total - transported


def plane_branches(data: TRTDataset, plane: PlaneCoords, ball: Ball, count: int,
                   x_count: int = 16, tol: float = 1e-6) -> List[Crossing]:
    """Transversal crossings of the plane assigned to branches 1..count by the sorted-lambda policy."""
    found = plane_curve_intersections(data.curve, plane)
    usable = [c for c in found.crossings if abs(c.slope) > tol]
    selected, _ = select_branches(usable, disk_samples(plane, ball, x_count), count)
    return selected


def weighted_data_W(data: TRTDataset, plane: PlaneCoords, channel: int, branch: int,
                    params: WParams = WParams(), ball: Optional[Ball] = None, x_count: int = 16) -> float:
    """W of channel `channel` on the plane for the 1-based curve branch `branch`."""
    ball = ball or data.support
    if channel not in data.channels:
        raise InvalidInputError(f"Channel {channel} not in dataset channels {data.channels}")
    if not ball.meets_plane(plane):
        return 0.0
    crossings = plane_branches(data, plane, ball, branch, x_count, params.tangency_tol)
    if len(crossings) < branch:
        raise CoverageError(f"Plane has {len(crossings)} usable branches, need branch {branch}", planes=[plane])
    return float(w_values(data, plane, crossings[branch - 1], params)[data.channels.index(channel)])


# === Tabulated W ===

@dataclass(frozen=True)
class WField:
    """W on sphere nodes x p offsets; values (n_omega, n_p, branches, channels)."""

    sphere: SphereGrid
    p_grid: np.ndarray
    channels: Tuple[int, ...]
    values: np.ndarray
    valid: np.ndarray  # (n_omega, n_p, branches)
    params: WParams
    family: str
    order: int
    lower: np.ndarray
    upper: np.ndarray

    @property
    def n(self) -> int:
        return self.sphere.n

    @property
    def branch_count(self) -> int:
        return self.values.shape[2]

    def excluded_fraction(self) -> float:
        return float(1.0 - np.mean(self.valid))

    def lookup(self, x, channel: int, branch: int) -> Tuple[np.ndarray, np.ndarray]:
        """
        W at p = <x, omega> for every sphere node, linear in p, with the mask
        of nodes whose bracketing lattice entries are both valid.
        """
        pts = np.asarray(x, dtype=float).reshape(-1)
        if np.any(pts < self.lower) or np.any(pts > self.upper):
            raise OutOfDomainError(f"Point {np.round(pts, 6).tolist()} is outside the reconstruction box")
        if channel not in self.channels:
            raise InvalidInputError(f"Channel {channel} not in W field channels {self.channels}")
        if not 1 <= branch <= self.branch_count:
            raise InvalidInputError(f"Branch {branch} outside 1..{self.branch_count}")
        p = self.sphere.directions @ pts
        if np.any(p < self.p_grid[0]) or np.any(p > self.p_grid[-1]):
            raise OutOfDomainError(f"Offsets of {np.round(pts, 6).tolist()} leave the p grid")
        table = self.values[:, :, branch - 1, self.channels.index(channel)]
        dp = self.p_grid[1] - self.p_grid[0]
        k = np.clip(np.floor((p - self.p_grid[0]) / dp).astype(int), 0, self.p_grid.size - 2)
        rows = np.arange(len(p))
        mask = self.valid[rows, k, branch - 1] & self.valid[rows, k + 1, branch - 1]
        return interp_rows(table, self.p_grid, p), mask

    def header(self) -> dict:
        return {
            "sphere": self.sphere.to_dict(),
            "p_min": float(self.p_grid[0]),
            "p_max": float(self.p_grid[-1]),
            "p_count": int(self.p_grid.size),
            "channels": list(self.channels),
            "branches": self.branch_count,
            "params": self.params.to_dict(),
            "family": self.family,
            "order": self.order,
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
        }


def default_branch_count(family: str, m: int) -> int:
    return m + 1 if family == "tensor" else 2


def build_wfield(data: TRTDataset, sphere: SphereGrid, p_grid, params: WParams = WParams(),
                 branch_count: Optional[int] = None, ball: Optional[Ball] = None,
                 x_count: int = 16, box: Optional[Tuple[Sequence[float], Sequence[float]]] = None) -> WField:
    """
    Tabulate W for every channel and branch on the (omega, p) lattice.

    Planes missing the ball carry W = 0. Tangential branches, lost tracking
    and missing branches are excluded through the validity mask.
    """
    ball = ball or data.support
    branches = branch_count or default_branch_count(data.family, data.order)
    p_grid = np.asarray(p_grid, dtype=float)
    channels = len(data.channels)
    if box is None:
        lower, upper = ball.center - ball.radius, ball.center + ball.radius
    else:
        lower, upper = (np.asarray(b, dtype=float) for b in box)

    def row(omega):
        values = np.zeros((p_grid.size, branches, channels))
        valid = np.ones((p_grid.size, branches), dtype=bool)
        for k, p in enumerate(p_grid):
            plane = PlaneCoords(omega, p)
            if not ball.meets_plane(plane):
                continue
            crossings = plane_branches(data, plane, ball, branches, x_count, params.tangency_tol)
            for j in range(branches):
                if j >= len(crossings):
                    valid[k, j] = False
                    continue
                try:
                    values[k, j] = w_values(data, plane, crossings[j], params)
                except TangencyError:
                    valid[k, j] = False
        return values, valid

    rows = parallel_map(row, list(sphere.directions), tag="wfield")
    wfield = WField(
        sphere=sphere,
        p_grid=p_grid,
        channels=tuple(data.channels),
        values=np.stack([r[0] for r in rows]),
        valid=np.stack([r[1] for r in rows]),
        params=params,
        family=data.family,
        order=data.order,
        lower=np.asarray(lower, dtype=float),
        upper=np.asarray(upper, dtype=float),
    )
    excluded = wfield.excluded_fraction()
    logger.info(
        f"[WFIELD] {sphere.size} directions x {p_grid.size} offsets x {branches} branches, "
        f"transport={params.transport}, excluded {excluded:.2%}"
    )
    if excluded > 0.01:
        logger.warning(f"[WFIELD] Excluded lattice fraction {excluded:.2%} exceeds 1%")
    return wfield


# === Forward oracle ===

def weighted_plane_integral(field, plane: PlaneCoords, source: np.ndarray, channel: int,
                            family: str = "tensor", resolution: int = 128) -> float:
    """Plane integral of <f(x), frame tensor of (x - source)/|x - source|>."""
    foot = plane.foot()
    local, weights = plane_patch(field.n, patch_half_width(field, foot), resolution)
    points = foot + local @ plane.basis()
    samples = field.sample(points)
    diff = points - source
    norms = np.linalg.norm(diff, axis=1)
    diff = diff / np.where(norms > 0, norms, 1.0)[:, None]
    m = field.tensor_order
    if family == "tensor":
        frame = frame_tensors(diff, channel, m) * multiplicities(m, field.n)
    else:
        _, eta = canonical_frames(diff)
        frame = eta[:, channel - 1, :]
    return float(np.sum(np.sum(samples * frame, axis=1) * weights))


def weighted_radon_oracle(field, plane: PlaneCoords, crossing: Crossing, channel: int,
                          h: float = 1e-2, family: str = "tensor", resolution: int = 128) -> float:
    """
    Second p-derivative of the weighted plane integral with the view point
    frozen at the crossing of the central plane.
    """
    values = [
        weighted_plane_integral(field, plane.shifted(s * h), crossing.point, channel, family, resolution)
        for s in (-1.0, 0.0, 1.0)
    ]
    return (values[0] - 2.0 * values[1] + values[2]) / (h * h)


def w_discrepancy(data: TRTDataset, field, planes: Sequence[PlaneCoords], channel: int, branch: int = 1,
                  params: WParams = WParams(), h: float = 1e-2, resolution: int = 96,
                  ball: Optional[Ball] = None) -> Tuple[float, int]:
    """
    Relative L2 gap between data W and the weighted Radon oracle over a set
    of planes, with the number of planes that entered the comparison.

    Planes that miss the ball, lack the branch or are tangential are skipped.
    """
    ball = ball or data.support
    if channel not in data.channels:
        raise InvalidInputError(f"Channel {channel} not in dataset channels {data.channels}")
    col = data.channels.index(channel)

    def pair(plane):
        if not ball.meets_plane(plane):
            return None
        crossings = plane_branches(data, plane, ball, branch, tol=params.tangency_tol)
        if len(crossings) < branch:
            return None
        crossing = crossings[branch - 1]
        try:
            got = float(w_values(data, plane, crossing, params)[col])
        except TangencyError:
            return None
        return got, weighted_radon_oracle(field, plane, crossing, channel, h, data.family, resolution)

    pairs = [r for r in parallel_map(pair, list(planes), tag="w-discrepancy") if r is not None]
    if not pairs:
        raise CoverageError("No plane of the set carries the requested branch", planes=list(planes))
    got, expected = np.array(pairs).T
    scale = float(np.linalg.norm(expected))
    gap = float(np.linalg.norm(got - expected)) / (scale if scale > 0 else 1.0)
    logger.info(f"[WFIELD] W against oracle on {len(pairs)}/{len(planes)} planes: relative gap {gap:.3e} "
                f"(transport={params.transport})")
    return gap, len(pairs)
