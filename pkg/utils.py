import logging
import math

import numpy as np
from scipy.stats import norm, qmc

from errors import InvalidInputError

logger = logging.getLogger(__name__)

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


def make_json_serializable(obj):
    """
    Recursively convert objects to JSON-serializable types.
    - NumPy int/float/bool → Python int/float/bool
    - NumPy arrays → lists
    - tuples → lists, dict keys → str
    """
    if isinstance(obj, (np.integer,)):
        return int(obj)
    elif isinstance(obj, (np.floating,)):
        return float(obj)
    elif isinstance(obj, (np.bool_,)):
        return bool(obj)
    elif isinstance(obj, (np.ndarray,)):
        return obj.tolist()
    elif isinstance(obj, (list, tuple)):
        return [make_json_serializable(x) for x in obj]
    elif isinstance(obj, dict):
        return {str(k): make_json_serializable(v) for k, v in obj.items()}
    else:
        return obj  # assume already serializable


def as_points(points, dim=None):
    """
    Coerce a single point or a batch of points to a float (K, n) array.
    Returns (array, was_single).
    """
    arr = np.asarray(points, dtype=float)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise InvalidInputError(f"Expected a point or a (K, n) batch, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise InvalidInputError(f"Expected points in R^{dim}, got dimension {arr.shape[1]}")
    return arr, single


def unit(vector):
    """Normalize a nonzero vector."""
    v = np.asarray(vector, dtype=float)
    norm = float(np.linalg.norm(v))
    if norm == 0.0 or not np.isfinite(norm):
        raise InvalidInputError("Cannot normalize a zero or non-finite vector")
    return v / norm


def fibonacci_sphere(count):
    """Deterministic, nearly uniform unit vectors on S^2 (count >= 1)."""
    k = np.arange(count, dtype=float)
    z = 1.0 - 2.0 * (k + 0.5) / count
    rho = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = GOLDEN_ANGLE * k
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


def sunflower_disk(count):
    """Deterministic points filling the closed unit disk, returned as (count, 2)."""
    k = np.arange(count, dtype=float)
    radius = np.sqrt((k + 0.5) / count)
    phi = GOLDEN_ANGLE * k
    return np.stack([radius * np.cos(phi), radius * np.sin(phi)], axis=1)


def sphere_directions(n, count):
    """Deterministic unit vectors on S^{n-1}: Fibonacci for n = 3, Halton otherwise."""
    if n == 3:
        return fibonacci_sphere(count)
    cube = qmc.Halton(d=n, scramble=False).random(count + 1)[1:]
    gauss = norm.ppf(np.clip(cube, 1e-12, 1.0 - 1e-12))
    return gauss / np.linalg.norm(gauss, axis=1)[:, None]
