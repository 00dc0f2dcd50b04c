"""
Forward integral transforms on sampled fields: ray integrals, transverse ray
transform channels, plane (Radon) integrals and the odd-dimensional Radon
inversion.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.ndimage import gaussian_filter1d

from algebra.symtensor import SymTensor, multiplicities, sym_dim, sym_products
from errors import InvalidInputError, UnsupportedDimensionError
from geometry.curves import Ball, PlaneCoords
from geometry.frames import canonical_frames
from transforms.quadrature import SphereGrid
from utils import as_points
from worker_pool import parallel_map

HALF_LINES = ("plus", "minus", "full")
RAY_CHUNK = 200_000
UNIT_TOL = 1e-12

logger = logging.getLogger(__name__)


# === Ray integrals ===

def clip_rays(lower, upper, origins, directions, half: str = "plus"):
    """
    Parameter interval [t0, t1] of each line inside the box, intersected with
    t >= 0 ("plus"), t <= 0 ("minus") or left whole ("full").
    Empty intersections come back with t1 == t0.
    """
    o = np.atleast_2d(origins)
    d = np.atleast_2d(directions)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        ta = (lower - o) * inv
        tb = (upper - o) * inv
    lo = np.minimum(ta, tb)
    hi = np.maximum(ta, tb)
    parallel = d == 0.0
    inside_slab = (o >= lower) & (o <= upper)
    lo = np.where(parallel, np.where(inside_slab, -np.inf, np.inf), lo)
    hi = np.where(parallel, np.where(inside_slab, np.inf, -np.inf), hi)
    t0 = np.max(lo, axis=1)
    t1 = np.min(hi, axis=1)
    if half == "plus":
        t0 = np.maximum(t0, 0.0)
    elif half == "minus":
        t1 = np.minimum(t1, 0.0)
    elif half != "full":
        raise InvalidInputError(f"Unknown half-line selector {half!r}; expected one of {HALF_LINES}")
    empty = ~(t1 > t0)
    t0 = np.where(empty, 0.0, t0)
    t1 = np.where(empty, 0.0, t1)
    return t0, t1


def sample_count(field, step: float) -> int:
    """Trapezoid intervals per ray; fixed per field so every ray is treated alike."""
    if not step > 0:
        raise InvalidInputError(f"Ray step must be positive, got {step}")
    return max(2, int(math.ceil(field.diagonal / step)))


def line_integrals(field, origins, directions, step: Optional[float] = None, half: str = "plus") -> np.ndarray:
    """
    Composite trapezoid integrals of field samples along each ray.

    Returns (K,) for scalar fields and (K, nu) for tensor fields.
    """
    o, _ = as_points(origins, field.n)
    d, _ = as_points(directions, field.n)
    step = field.default_step() if step is None else step
    intervals = sample_count(field, step)
    s = np.linspace(0.0, 1.0, intervals + 1)
    trap = np.ones(intervals + 1)
    trap[0] = trap[-1] = 0.5

    t0, t1 = clip_rays(field.lower, field.upper, o, d, half)
    rows = max(1, RAY_CHUNK // (intervals + 1))
    results = []
    for start in range(0, len(o), rows):
        sl = slice(start, start + rows)
        t = t0[sl, None] + (t1[sl] - t0[sl])[:, None] * s
        pts = o[sl, None, :] + t[:, :, None] * d[sl, None, :]
        vals = field.sample(pts.reshape(-1, field.n))
        weights = ((t1[sl] - t0[sl]) / intervals)[:, None] * trap
        if vals.ndim == 1:
            vals = vals.reshape(len(t), intervals + 1)
            results.append(np.sum(vals * weights, axis=1))
        else:
            vals = np.ascontiguousarray(vals.reshape(len(t), intervals + 1, -1).transpose(0, 2, 1))
            results.append(np.sum(vals * weights[:, None, :], axis=2))
    return np.concatenate(results, axis=0)


def ray_integral(g, a, xi, step: Optional[float] = None, support: Optional[Ball] = None,
                 half: str = "plus") -> float:
    """Half-line integral of a scalar field from a along xi, clipped to the box."""
    if support is not None and bool(support.contains(a)[0]):
        logger.warning(f"[XFORM] Ray origin {np.round(np.asarray(a, float), 6).tolist()} lies inside the support ball")
    return float(line_integrals(g, a, xi, step, half)[0])


# === Frame tensors and TRT channels ===

def frame_tensors(directions, i: int, m: int) -> np.ndarray:
    """Coefficients of xi_alpha^i ⊙ xi_beta^(m-i) for each direction row (n = 3)."""
    if not 0 <= i <= m:
        raise InvalidInputError(f"Tensor channel {i} outside 0..{m}")
    _, eta = canonical_frames(directions)
    if m == 0:
        return np.ones((len(eta), 1))
    vectors = np.concatenate([np.repeat(eta[:, 0:1, :], i, axis=1),
                              np.repeat(eta[:, 1:2, :], m - i, axis=1)], axis=1)
    return sym_products(vectors)


def frame_tensor(xi, i: int, m: int) -> SymTensor:
    xi = np.asarray(xi, dtype=float).reshape(-1)
    return SymTensor(m, xi.size, frame_tensors(xi[None, :], i, m)[0])


def channels_for(family: str, m: int, n: int) -> tuple:
    if family == "tensor":
        return tuple(range(m + 1))
    if family == "vector":
        return tuple(range(1, n))
    raise InvalidInputError(f"Unknown transform family {family!r}")


def parity_sign(m: int, i: int, flipped: bool = False) -> int:
    """
    Sign relating channel i at xi and -xi for full-line integrals.

    Canonical frames at -xi keep xi_alpha and negate xi_beta, giving
    (-1)^(m-i); with both frame vectors negated the sign is (-1)^m.
    """
    return (-1) ** m if flipped else (-1) ** (m - i)


def vector_parity_sign(n: int, k: int) -> int:
    return -1 if k == n - 1 else 1


def trt_batch(field, origins, directions, channels: Sequence[int], family: str = "tensor",
              step: Optional[float] = None, half: str = "plus") -> np.ndarray:
    """
    TRT channels for many rays, shape (K, len(channels)).

    Directions may have any nonzero length; the extended transform scales the
    unit-direction value by |xi|^(m-1) (m = 1 for the vector family).
    """
    d, _ = as_points(directions, field.n)
    norms = np.linalg.norm(d, axis=1)
    if np.any(norms == 0.0):
        raise InvalidInputError("TRT direction must be nonzero")
    unit_dirs = d / norms[:, None]
    m = field.tensor_order
    comps = line_integrals(field, origins, unit_dirs, step, half)
    out = np.empty((len(d), len(channels)))

    if family == "tensor":
        if field.n != 3:
            raise InvalidInputError(f"The tensor family is defined in R^3, got n={field.n}")
        weights = multiplicities(m, field.n)
        for col, i in enumerate(channels):
            out[:, col] = np.sum(comps * weights * frame_tensors(unit_dirs, i, m), axis=1)
    elif family == "vector":
        if m != 1:
            raise InvalidInputError(f"The vector family needs a 1-tensor field, got order {m}")
        _, eta = canonical_frames(unit_dirs)
        for col, k in enumerate(channels):
            if not 1 <= k <= field.n - 1:
                raise InvalidInputError(f"Vector channel {k} outside 1..{field.n - 1}")
            out[:, col] = np.sum(comps * eta[:, k - 1, :], axis=1)
    else:
        raise InvalidInputError(f"Unknown transform family {family!r}")

    exponent = (m if family == "tensor" else 1) - 1
    if exponent != 0:
        out *= (norms ** exponent)[:, None]
    return out


def _unit_direction(xi) -> np.ndarray:
    """Unit directions pass through unchanged so single rays match batched ones."""
    d = np.asarray(xi, dtype=float)
    norm = float(np.linalg.norm(d))
    if norm == 0.0:
        raise InvalidInputError("TRT direction must be nonzero")
    return d if abs(norm - 1.0) <= UNIT_TOL else d / norm


def trt_tensor(f, a, xi, i: int, step: Optional[float] = None, half: str = "plus") -> float:
    """Channel i of the transverse ray transform of a symmetric m-tensor field in R^3."""
    if not 0 <= i <= f.tensor_order:
        raise InvalidInputError(f"Tensor channel {i} outside 0..{f.tensor_order}")
    return float(trt_batch(f, a, _unit_direction(xi), (i,), "tensor", step, half)[0, 0])


def trt_vector(f, a, xi, i: int, step: Optional[float] = None, half: str = "plus") -> float:
    """Channel i (1..n-1) of the vectorial transform: integral of <f, eta_i>."""
    if not 1 <= i <= f.n - 1:
        raise InvalidInputError(f"Vector channel {i} outside 1..{f.n - 1}")
    return float(trt_batch(f, a, _unit_direction(xi), (i,), "vector", step, half)[0, 0])


def trt_extended(f, x, xi, i: int, step: Optional[float] = None, family: str = "tensor") -> float:
    """|xi|^(m-1) times the transform at xi/|xi|, for any nonzero xi."""
    xi = np.asarray(xi, dtype=float)
    if not np.any(xi):
        raise InvalidInputError("The extended transform is undefined at xi = 0")
    return float(trt_batch(f, x, xi, (i,), family, step)[0, 0])


# === Radon transform ===

def plane_patch(n: int, half_width: float, resolution: int):
    axis = np.linspace(-half_width, half_width, resolution)
    trap = np.full(resolution, axis[1] - axis[0])
    trap[0] *= 0.5
    trap[-1] *= 0.5
    mesh = np.meshgrid(*([axis] * (n - 1)), indexing="ij")
    wmesh = np.meshgrid(*([trap] * (n - 1)), indexing="ij")
    local = np.stack([m.reshape(-1) for m in mesh], axis=1)
    weights = np.prod(np.stack([w.reshape(-1) for w in wmesh], axis=1), axis=1)
    return local, weights


def patch_half_width(g, foot: np.ndarray) -> float:
    corners = np.array(np.meshgrid(*zip(g.lower, g.upper), indexing="ij")).reshape(g.n, -1).T
    return float(np.max(np.linalg.norm(corners - foot, axis=1)))


def radon_forward(g, plane: PlaneCoords, resolution: int = 128) -> float:
    """Trapezoid quadrature of g over the patch of the plane covering the box."""
    foot = plane.foot()
    local, weights = plane_patch(g.n, patch_half_width(g, foot), resolution)
    points = foot + local @ plane.basis()
    return float(np.sum(g.sample(points) * weights))


@dataclass(frozen=True)
class Sinogram:
    """Plane integrals on a sphere grid times a uniform p grid."""

    sphere: SphereGrid
    p_grid: np.ndarray
    values: np.ndarray  # (n_omega, n_p)
    smoothing: bool = False

    @property
    def dp(self) -> float:
        return float(self.p_grid[1] - self.p_grid[0])

    def derivative(self, order: int) -> np.ndarray:
        """p-derivative by central differences (one-sided at the ends)."""
        out = gaussian_filter1d(self.values, sigma=1.0, axis=1) if self.smoothing else self.values
        for _ in range(order):
            out = np.gradient(out, self.dp, axis=1, edge_order=2)
        return out

    def to_dict(self) -> dict:
        return {"sphere": self.sphere.to_dict(), "p_min": float(self.p_grid[0]),
                "p_max": float(self.p_grid[-1]), "p_count": int(self.p_grid.size)}


def uniform_p_grid(extent: float, count: int) -> np.ndarray:
    return np.linspace(-extent, extent, count)


def interp_rows(values: np.ndarray, p_grid: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Row-wise linear interpolation on a uniform p grid; zero outside it."""
    dp = p_grid[1] - p_grid[0]
    pos = (queries - p_grid[0]) / dp
    k = np.floor(pos).astype(int)
    valid = (k >= 0) & (k < p_grid.size - 1)
    k = np.clip(k, 0, p_grid.size - 2)
    frac = pos - k
    rows = np.arange(values.shape[0])[:, None] if queries.ndim == 2 else np.arange(values.shape[0])
    lo = values[rows, k]
    hi = values[rows, k + 1]
    out = (1.0 - frac) * lo + frac * hi
    return np.where(valid, out, 0.0)


def radon_sinogram(g, sphere: SphereGrid, p_grid: np.ndarray, resolution: int = 64,
                   smoothing: bool = False) -> Sinogram:
    """Forward Radon transform on every (omega, p) lattice node."""
    origin_foot = np.zeros(g.n)
    local, weights = plane_patch(g.n, patch_half_width(g, origin_foot) + float(np.max(np.abs(p_grid))), resolution)

    def row(omega):
        basis = PlaneCoords(omega, 0.0).basis()
        patch = local @ basis
        values = np.empty(p_grid.size)
        for k, p in enumerate(p_grid):
            values[k] = np.sum(g.sample(p * omega + patch) * weights)
        return values

    rows = parallel_map(row, list(sphere.directions), tag="radon-sinogram")
    logger.info(f"[XFORM] Sinogram on {sphere.size} directions x {p_grid.size} offsets")
    return Sinogram(sphere, np.asarray(p_grid, dtype=float), np.array(rows), smoothing)


def radon_constant(n: int) -> float:
    """Constant of the odd-dimensional inversion; -1/(8 pi^2) for n = 3."""
    if n % 2 == 0:
        raise UnsupportedDimensionError(f"Radon inversion is implemented for odd n only, got n={n}")
    return 0.5 * (-1) ** ((n - 1) // 2) / (2.0 * math.pi) ** (n - 1)


def radon_invert_odd(s: Sinogram, x):
    """Backprojection of the (n-1)-th p-derivative at p = <x, omega>."""
    n = s.sphere.n
    constant = radon_constant(n)
    pts, single = as_points(x, n)
    derivative = s.derivative(n - 1)
    queries = s.sphere.directions @ pts.T  # (n_omega, K)
    values = interp_rows(derivative, s.p_grid, queries)
    result = constant * (s.sphere.weights @ values)
    return float(result[0]) if single else result
