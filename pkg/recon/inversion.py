"""
Pointwise reconstruction from frame components.

Frame components <f(x), A_ij> come from a provider (exact contraction or the
Radon inversion of a tabulated W field). They are recombined by Cramer's rule
into pure powers <f(x), theta^m> and polarized into tensor components; the
vector pipeline solves the n x n frame system instead.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from algebra.symtensor import (
    BasisSystem,
    SymTensor,
    basis_system,
    contract,
    cramer_coefficients,
    multi_indices,
    polarization_plan,
    polarize,
    subset_sums,
    sym_dim,
    vector_cramer,
)
from errors import (
    CoverageError,
    DegenerateSystemError,
    IncompleteInputError,
    InvalidInputError,
    OutOfDomainError,
    UnsupportedDimensionError,
)
from geometry.curves import Ball, Crossing, Curve, PlaneCoords, plane_curve_intersections, select_branches
from geometry.frames import Frame, canonical_frame
from recon.operators import WField, default_branch_count
from transforms.xforms import frame_tensor, radon_constant
from utils import sphere_directions
from worker_pool import parallel_map

AXIS_TOL = 1e-8

logger = logging.getLogger(__name__)


# === Geometry at a probe point ===

@dataclass(frozen=True)
class GeometryContext:
    """Curve, support and the candidate reference planes used to pick view directions at x."""

    curve: Curve
    ball: Ball
    order: int
    family: str = "tensor"
    candidates: int = 32
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    tangency_tol: float = 1e-6

    @property
    def n(self) -> int:
        return self.curve.n

    @property
    def branch_count(self) -> int:
        return default_branch_count(self.family, self.order)

    def box(self) -> Tuple[np.ndarray, np.ndarray]:
        lower = self.ball.center - self.ball.radius if self.lower is None else np.asarray(self.lower, float)
        upper = self.ball.center + self.ball.radius if self.upper is None else np.asarray(self.upper, float)
        return lower, upper

    def check_domain(self, x: np.ndarray) -> None:
        lower, upper = self.box()
        if np.any(x < lower) or np.any(x > upper):
            raise OutOfDomainError(f"Point {np.round(x, 6).tolist()} is outside the reconstruction box")

    def directions_at(self, x) -> Tuple[List[Crossing], np.ndarray]:
        """
        Branch crossings and unit view directions (x - gamma_j)/|x - gamma_j|
        from the first candidate plane through x with enough usable branches.
        """
        point = np.asarray(x, dtype=float).reshape(-1)
        need = self.branch_count
        tried = []
        for omega in sphere_directions(self.n, self.candidates):
            plane = PlaneCoords(omega, float(omega @ point))
            found = plane_curve_intersections(self.curve, plane)
            usable = [c for c in found.crossings if abs(c.slope) > self.tangency_tol]
            selected, _ = select_branches(usable, point[None, :], need)
            tried.append(plane)
            if len(selected) < need:
                continue
            diff = point - np.array([c.point for c in selected])
            directions = diff / np.linalg.norm(diff, axis=1)[:, None]
            if self.family == "tensor" and self.order > 0:
                try:
                    basis_system(directions)
                except DegenerateSystemError:
                    continue
            return selected, directions
        raise CoverageError(
            f"No candidate plane through {np.round(point, 6).tolist()} has {need} usable branches "
            f"({len(tried)} planes tried)",
            planes=tried,
        )


# === Frame-component providers ===

class ExactAProvider:
    """Frame components by direct contraction of a known field."""

    def __init__(self, field, family: str = "tensor"):
        self.field = field
        self.family = family

    def component(self, x, channel: int, branch: int, direction) -> float:
        value = self.field.at(x)
        if self.family == "tensor":
            return contract(value, frame_tensor(direction, channel, value.order))
        frame = canonical_frame(direction)
        return float(value.coeffs @ frame.eta_axis(channel))


class WFieldAProvider:
    """Frame components by Radon inversion of a tabulated W field."""

    def __init__(self, wfield: WField):
        self.wfield = wfield

    def component(self, x, channel: int, branch: int, direction=None) -> float:
        return recover_A_component(x, channel, branch, self.wfield)


def recover_A_component(x, i: int, branch: int, W: WField) -> float:
    """
    <f(x), A_ij> = c_n * sum over sphere nodes of W(omega, <x, omega>).

    Lattice entries flagged invalid are dropped and the remaining quadrature
    weights are rescaled to the full sphere measure.
    """
    constant = radon_constant(W.n)
    values, mask = W.lookup(x, i, branch)
    weights = W.sphere.weights
    kept = float(np.sum(weights[mask]))
    if kept == 0.0:
        raise CoverageError(f"No valid W samples for channel {i}, branch {branch}")
    scale = float(np.sum(weights)) / kept
    return constant * scale * float(np.sum(np.where(mask, values, 0.0) * weights))


# === Algebraic recombination ===

def recover_power(x, theta, A_values: Mapping[Tuple[int, int], float], system: BasisSystem) -> float:
    """<f(x), theta^m> = sum_ij (Delta_ij(theta) / Delta) <f(x), A_ij>."""
    coefficients = cramer_coefficients(system, theta)
    missing = [key for key in coefficients if key not in A_values]
    if missing:
        raise IncompleteInputError(f"Missing frame components {missing}", missing=missing)
    return float(sum(c * A_values[key] for key, c in coefficients.items()))


def frame_components(x, provider, system: BasisSystem) -> Dict[Tuple[int, int], float]:
    return {
        (i, branch): provider.component(x, i, branch, system.directions[branch - 1])
        for i, branch in system.columns
    }


def recover_tensor_components(x, provider, ctx: GeometryContext) -> SymTensor:
    """All components f_I(x) by recover_power on subset sums of unit vectors, then polarization."""
    point = np.asarray(x, dtype=float).reshape(-1)
    ctx.check_domain(point)
    m, n = ctx.order, ctx.n
    _, directions = ctx.directions_at(point)
    if m == 0:
        return SymTensor(0, n, np.array([provider.component(point, 0, 1, directions[0])]))

    system = basis_system(directions)
    A_values = frame_components(point, provider, system)
    plan = polarization_plan(m)
    identity = np.eye(n)
    powers: Dict[bytes, float] = {}
    coeffs = np.empty(sym_dim(m, n))
    for k, index in enumerate(multi_indices(m, n)):
        sums = subset_sums([identity[a] for a in index], plan)
        values = {}
        for subset, theta in sums.items():
            key = theta.tobytes()
            if key not in powers:
                powers[key] = recover_power(point, theta, A_values, system)
            values[subset] = powers[key]
        coeffs[k] = polarize(m, values)
    return SymTensor(m, n, coeffs)


def choose_independent_axis(frame1: Frame, frame2: Frame, tol: float = AXIS_TOL) -> int:
    """Smallest l with det(eta_1(xi_1), ..., eta_{n-1}(xi_1), eta_l(xi_2)) away from zero."""
    if frame1.n != frame2.n:
        raise InvalidInputError(f"Frames live in different dimensions ({frame1.n} vs {frame2.n})")
    for l in range(1, frame1.n):
        det = float(np.linalg.det(np.column_stack([*frame1.eta, frame2.eta_axis(l)])))
        if abs(det) > tol:
            return l
    raise DegenerateSystemError("View directions are parallel: no frame axis completes a basis", pair=(1, 2))


def recover_vector(x, provider, ctx: GeometryContext) -> np.ndarray:
    """f(x) in R^n from n-1 frame components at xi_1 and one at xi_2."""
    n = ctx.n
    if n % 2 == 0:
        raise UnsupportedDimensionError(f"Vector reconstruction needs odd n, got n={n}")
    point = np.asarray(x, dtype=float).reshape(-1)
    ctx.check_domain(point)
    _, directions = ctx.directions_at(point)
    frame1, frame2 = canonical_frame(directions[0]), canonical_frame(directions[1])
    l = choose_independent_axis(frame1, frame2)
    components = np.array(
        [provider.component(point, k, 1, directions[0]) for k in range(1, n)]
        + [provider.component(point, l, 2, directions[1])]
    )
    identity = np.eye(n)
    return np.array([vector_cramer(frame1, frame2, l, identity[i]) @ components for i in range(n)])


# === Batch reconstruction ===

def reconstruct_probes(points, provider, ctx: GeometryContext) -> np.ndarray:
    """
    Reconstruct at each probe point; rows are tensor coefficients (or vector
    components). Points without coverage come back as NaN rows.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    width = ctx.n if ctx.family == "vector" else sym_dim(ctx.order, ctx.n)

    def solve(point):
        try:
            if ctx.family == "vector":
                return recover_vector(point, provider, ctx)
            return recover_tensor_components(point, provider, ctx).coeffs
        except (CoverageError, OutOfDomainError) as exc:
            logger.warning(f"[RECON] Probe {np.round(point, 6).tolist()} not reconstructed: {exc}")
            return np.full(width, np.nan)

    rows = parallel_map(solve, list(pts), tag="probes")
    out = np.array(rows).reshape(len(pts), width)
    missing = int(np.sum(np.any(np.isnan(out), axis=1)))
    logger.info(f"[RECON] Reconstructed {len(pts) - missing}/{len(pts)} probe points ({ctx.family}, m={ctx.order})")
    return out
