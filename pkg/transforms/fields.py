"""
Sampled and closed-form fields on an axis-aligned box.

Every field exposes ``sample(points)``: scalar fields return (K,), tensor
fields return (K, nu) sorted-index coefficients. Points outside the box
evaluate to zero.
"""
import logging
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.ndimage import map_coordinates, spline_filter

from algebra.symtensor import SymTensor, multi_indices, multiplicities, sym_dim
from errors import InvalidInputError
from geometry.curves import Ball
from utils import as_points

SUPPORT_TOL = 1e-12

logger = logging.getLogger(__name__)


class BoxField:
    """Common box bookkeeping."""

    def __init__(self, lower, upper, support: Optional[Ball] = None):
        self.lower = np.asarray(lower, dtype=float).reshape(-1)
        self.upper = np.asarray(upper, dtype=float).reshape(-1)
        if self.lower.shape != self.upper.shape or np.any(self.upper <= self.lower):
            raise InvalidInputError(f"Invalid box bounds {self.lower.tolist()} .. {self.upper.tolist()}")
        self.support = support
        if support is not None:
            if support.n != self.n:
                raise InvalidInputError(f"Support ball lives in R^{support.n}, box in R^{self.n}")
            if np.any(support.center - support.radius <= self.lower) or np.any(support.center + support.radius >= self.upper):
                raise InvalidInputError("The box must strictly contain the support ball")

    @property
    def n(self) -> int:
        return self.lower.size

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def inside_box(self, pts: np.ndarray) -> np.ndarray:
        return np.all((pts >= self.lower) & (pts <= self.upper), axis=1)

    def default_step(self) -> float:
        return self.diagonal / 256.0


class ScalarGrid(BoxField):
    """Regular raster of scalar samples with linear or cubic interpolation."""

    def __init__(self, lower, upper, values, order: int = 1, support: Optional[Ball] = None):
        super().__init__(lower, upper, support)
        self.values = np.ascontiguousarray(values, dtype=float)
        if self.values.ndim != self.n:
            raise InvalidInputError(f"Grid values must have {self.n} axes, got {self.values.ndim}")
        if any(s < 2 for s in self.values.shape):
            raise InvalidInputError(f"Every axis needs at least 2 samples, got shape {self.values.shape}")
        if order not in (1, 3):
            raise InvalidInputError(f"Interpolation order must be 1 or 3, got {order}")
        self.order = order
        self.spacing = (self.upper - self.lower) / (np.array(self.values.shape) - 1)
        self._data = spline_filter(self.values, order=3, mode="mirror") if order == 3 else self.values

    @classmethod
    def from_function(cls, fn: Callable, lower, upper, shape: Sequence[int], order: int = 1,
                      support: Optional[Ball] = None) -> "ScalarGrid":
        nodes = grid_nodes(lower, upper, shape)
        return cls(lower, upper, fn(nodes).reshape(tuple(shape)), order, support)

    @property
    def shape(self):
        return self.values.shape

    def nodes(self) -> np.ndarray:
        return grid_nodes(self.lower, self.upper, self.shape)

    def default_step(self) -> float:
        return 0.5 * float(np.min(self.spacing))

    def sample(self, points) -> np.ndarray:
        pts, _ = as_points(points, self.n)
        coords = ((pts - self.lower) / self.spacing).T
        out = map_coordinates(self._data, coords, order=self.order, mode="mirror", prefilter=False)
        out[~self.inside_box(pts)] = 0.0
        return out


class TensorGrid(BoxField):
    """Regular raster of symmetric m-tensor samples, supported in a ball."""

    def __init__(self, lower, upper, values, tensor_order: int, support: Ball, order: int = 1):
        super().__init__(lower, upper, support)
        self.values = np.ascontiguousarray(values, dtype=float)
        self.tensor_order = tensor_order
        nu = sym_dim(tensor_order, self.n)
        if self.values.ndim != self.n + 1 or self.values.shape[-1] != nu:
            raise InvalidInputError(
                f"Tensor grid values must have shape (*shape, {nu}) for order {tensor_order}, got {self.values.shape}"
            )
        outside = ~support.contains(self.nodes(), strict=False)
        flat = self.values.reshape(-1, nu)
        if np.any(outside) and np.max(np.abs(flat[outside])) > SUPPORT_TOL:
            raise InvalidInputError("Tensor samples must vanish outside the support ball")
        self.order = order
        self._components = [
            ScalarGrid(lower, upper, self.values[..., k], order) for k in range(nu)
        ]

    @classmethod
    def from_function(cls, fn: Callable, lower, upper, shape: Sequence[int], tensor_order: int,
                      support: Ball, order: int = 1) -> "TensorGrid":
        nodes = grid_nodes(lower, upper, shape)
        values = fn(nodes).reshape(tuple(shape) + (-1,))
        return cls(lower, upper, values, tensor_order, support, order)

    @property
    def shape(self):
        return self.values.shape[:-1]

    @property
    def spacing(self) -> np.ndarray:
        return self._components[0].spacing

    def nodes(self) -> np.ndarray:
        return grid_nodes(self.lower, self.upper, self.shape)

    def default_step(self) -> float:
        return 0.5 * float(np.min(self.spacing))

    def component(self, index: Sequence[int]) -> ScalarGrid:
        key = tuple(sorted(index))
        return self._components[multi_indices(self.tensor_order, self.n).index(key)]

    def sample(self, points) -> np.ndarray:
        pts, _ = as_points(points, self.n)
        return np.stack([c.sample(pts) for c in self._components], axis=1)

    def at(self, point) -> SymTensor:
        return SymTensor(self.tensor_order, self.n, self.sample(point)[0])

    def contracted(self, tensor: SymTensor) -> ScalarGrid:
        """Scalar grid of <f(x), tensor>."""
        weights = multiplicities(self.tensor_order, self.n) * tensor.coeffs
        return ScalarGrid(self.lower, self.upper, self.values @ weights, self.order, self.support)


class AnalyticField(BoxField):
    """Closed-form scalar field ``fn(points) -> (K,)`` restricted to a box."""

    def __init__(self, fn: Callable, lower, upper, support: Optional[Ball] = None):
        super().__init__(lower, upper, support)
        self.fn = fn

    def sample(self, points) -> np.ndarray:
        pts, _ = as_points(points, self.n)
        out = np.zeros(len(pts))
        inside = self.inside_box(pts)
        if np.any(inside):
            out[inside] = self.fn(pts[inside])
        return out


class AnalyticTensorField(BoxField):
    """Closed-form tensor field ``fn(points) -> (K, nu)`` supported in a ball."""

    def __init__(self, fn: Callable, tensor_order: int, lower, upper, support: Ball):
        super().__init__(lower, upper, support)
        self.fn = fn
        self.tensor_order = tensor_order

    def sample(self, points) -> np.ndarray:
        pts, _ = as_points(points, self.n)
        out = np.zeros((len(pts), sym_dim(self.tensor_order, self.n)))
        inside = self.inside_box(pts) & self.support.contains(pts, strict=True)
        if np.any(inside):
            out[inside] = self.fn(pts[inside])
        return out

    def at(self, point) -> SymTensor:
        return SymTensor(self.tensor_order, self.n, self.sample(point)[0])

    def contracted(self, tensor: SymTensor) -> AnalyticField:
        weights = multiplicities(self.tensor_order, self.n) * tensor.coeffs
        return AnalyticField(lambda pts: np.sum(self.sample(pts) * weights, axis=1),
                             self.lower, self.upper, self.support)

    def rasterize(self, shape: Sequence[int], order: int = 1) -> TensorGrid:
        return TensorGrid.from_function(self.sample, self.lower, self.upper, shape,
                                        self.tensor_order, self.support, order)


def grid_nodes(lower, upper, shape: Sequence[int]) -> np.ndarray:
    """(prod(shape), n) node coordinates in row-major order."""
    axes = [np.linspace(lo, hi, s) for lo, hi, s in zip(lower, upper, shape)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)
