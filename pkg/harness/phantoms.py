"""
Smooth tensor phantoms supported in a ball.

Every phantom is a sum of Gaussian bumps times a constant symmetric tensor,
multiplied by the cutoff chi(s) = exp(1 - 1/(1 - s^2)), s = |x - c| / r,
which vanishes with all derivatives on the ball boundary.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from algebra.symtensor import sym_dim, sym_power
from errors import InvalidInputError
from geometry.curves import Ball
from harness.registry import get_registry
from transforms.fields import AnalyticTensorField, TensorGrid

BOX_MARGIN = 1.25

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BumpSpec:
    center: Tuple[float, ...]
    width: float
    tensor: Optional[Tuple[float, ...]] = None  # sorted-index coefficients
    slope: Optional[Tuple[float, ...]] = None  # linear amplitude term (polynomial-bump)


@dataclass(frozen=True)
class PhantomSpec:
    kind: str = "gaussian-bump"
    order: int = 1
    dimension: int = 3
    center: Tuple[float, ...] = (0.0, 0.0, 0.0)
    radius: float = 1.0
    bumps: Tuple[BumpSpec, ...] = field(default_factory=tuple)
    bump_count: int = 3
    width: float = 0.4
    seed: int = 0

    @property
    def ball(self) -> Ball:
        return Ball(np.asarray(self.center, dtype=float), self.radius)

    def box(self) -> Tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center, dtype=float)
        half = BOX_MARGIN * self.radius
        return c - half, c + half


def cutoff(points: np.ndarray, ball: Ball) -> np.ndarray:
    s2 = np.sum((points - ball.center) ** 2, axis=1) / ball.radius ** 2
    out = np.zeros(len(points))
    inside = s2 < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s2[inside]))
    return out


def _default_tensor(rng: np.random.Generator, m: int, n: int) -> np.ndarray:
    if m == 0:
        return np.ones(1)
    return sym_power(rng.normal(size=n), m).coeffs + 0.25 * rng.normal(size=sym_dim(m, n))


def resolve_bumps(spec: PhantomSpec) -> List[BumpSpec]:
    """Explicit bumps from the phantom config, or the seeded defaults of its kind."""
    rng = np.random.default_rng(spec.seed)
    n, m = spec.dimension, spec.order
    if spec.bumps:
        bumps = list(spec.bumps)
    elif spec.kind == "multi-bump":
        bumps = []
        for _ in range(spec.bump_count):
            direction = rng.normal(size=n)
            offset = 0.5 * spec.radius * rng.uniform() * direction / np.linalg.norm(direction)
            bumps.append(BumpSpec(tuple(np.asarray(spec.center) + offset),
                                  float(spec.radius * rng.uniform(0.25, 0.45))))
    else:
        bumps = [BumpSpec(tuple(spec.center), spec.width * spec.radius)]

    resolved = []
    for bump in bumps:
        tensor = bump.tensor if bump.tensor is not None else tuple(_default_tensor(rng, m, n))
        slope = bump.slope
        if spec.kind == "polynomial-bump" and slope is None:
            slope = tuple(0.5 * rng.normal(size=n) / spec.radius)
        resolved.append(BumpSpec(tuple(float(c) for c in bump.center), float(bump.width), tuple(tensor),
                                 None if slope is None else tuple(float(s) for s in slope)))
    return resolved


def validate_phantom(spec: PhantomSpec) -> None:
    if spec.order < 0:
        raise InvalidInputError(f"Phantom order must be non-negative, got {spec.order}")
    if len(spec.center) != spec.dimension:
        raise InvalidInputError(f"Phantom center has {len(spec.center)} coordinates, dimension is {spec.dimension}")
    if not spec.radius > 0:
        raise InvalidInputError(f"Phantom radius must be positive, got {spec.radius}")
    get_registry().require("phantom", spec.kind)
    nu = sym_dim(spec.order, spec.dimension)
    for k, bump in enumerate(spec.bumps):
        offset = np.linalg.norm(np.asarray(bump.center, dtype=float) - np.asarray(spec.center, dtype=float))
        if len(bump.center) != spec.dimension or offset >= spec.radius:
            raise InvalidInputError(f"Bump {k + 1} center {list(bump.center)} lies outside the support ball")
        if not bump.width > 0:
            raise InvalidInputError(f"Bump {k + 1} width must be positive, got {bump.width}")
        if bump.tensor is not None and len(bump.tensor) != nu:
            raise InvalidInputError(f"Bump {k + 1} tensor needs {nu} coefficients, got {len(bump.tensor)}")


def _bump_sum(bumps: Sequence[BumpSpec], ball: Ball, nu: int):
    centers = np.array([b.center for b in bumps])
    widths = np.array([b.width for b in bumps])
    tensors = np.array([b.tensor for b in bumps]).reshape(len(bumps), nu)

    def fn(points):
        out = np.zeros((len(points), nu))
        for k, bump in enumerate(bumps):
            diff = points - centers[k]
            amplitude = np.exp(-np.sum(diff ** 2, axis=1) / widths[k] ** 2)
            if bump.slope is not None:
                amplitude = amplitude * (1.0 + diff @ np.asarray(bump.slope))
            out += amplitude[:, None] * tensors[k]
        return out * cutoff(points, ball)[:, None]

    return fn


def phantom_field(spec: PhantomSpec) -> AnalyticTensorField:
    """Closed-form phantom on the box around its support ball."""
    validate_phantom(spec)
    lower, upper = spec.box()
    return get_registry().require("phantom", spec.kind)(spec, lower, upper)


def make_phantom(spec: PhantomSpec, shape: Sequence[int], order: int = 1) -> TensorGrid:
    """Rasterize the phantom on a regular grid of the given shape."""
    grid = phantom_field(spec).rasterize(shape, order)
    logger.info(f"[PHANTOM] {spec.kind} m={spec.order} on {tuple(shape)} nodes, seed={spec.seed}")
    return grid


def _bump_phantom(spec: PhantomSpec, lower, upper) -> AnalyticTensorField:
    ball = spec.ball
    fn = _bump_sum(resolve_bumps(spec), ball, sym_dim(spec.order, spec.dimension))
    return AnalyticTensorField(fn, spec.order, lower, upper, ball)


for _kind in ("gaussian-bump", "polynomial-bump", "multi-bump"):
    get_registry().register("phantom", _kind, _bump_phantom)
