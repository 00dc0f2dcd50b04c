"""
Restricted TRT data: rays from curve points on a (lambda, direction) lattice.

Values are read back either from the stored lattice (interpolated in lambda
and the direction angles) or from a live forward model.
"""
import logging
import math
from dataclasses import dataclass, field as dc_field, replace
from threading import Lock
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from errors import ContractViolationError, InvalidInputError
from geometry.certify import encompasses
from geometry.curves import Ball, Curve
from geometry.frames import angles_from_directions, frames_from_angles
from transforms.xforms import channels_for, trt_batch
from worker_pool import parallel_map

TWO_PI = 2.0 * math.pi
ACCESS_MODES = ("lattice", "forward")

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DirectionGrid:
    """Product angle grid: cell-centered polar angles, uniform azimuth."""

    n: int
    n_polar: int
    n_azimuth: int

    def axes(self):
        polar = math.pi * (np.arange(self.n_polar) + 0.5) / self.n_polar
        azimuth = TWO_PI * np.arange(self.n_azimuth) / self.n_azimuth
        return [polar] * (self.n - 2) + [azimuth]

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.n_polar,) * (self.n - 2) + (self.n_azimuth,)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def angles(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def directions(self) -> np.ndarray:
        xi, _ = frames_from_angles(self.angles())
        return xi

    def to_dict(self) -> dict:
        return {"n": self.n, "n_polar": self.n_polar, "n_azimuth": self.n_azimuth}


def _periodic_axis(axis: np.ndarray) -> np.ndarray:
    step = axis[1] - axis[0] if axis.size > 1 else TWO_PI
    return np.concatenate([[axis[0] - step], axis, [axis[-1] + step]])


def _periodic_values(values: np.ndarray, axis: int) -> np.ndarray:
    first = np.take(values, [0], axis=axis)
    last = np.take(values, [-1], axis=axis)
    return np.concatenate([last, values, first], axis=axis)


@dataclass(frozen=True)
class TRTDataset:
    """
    Channel data T_i f(gamma(lambda), xi).

    ``values`` has shape (pieces, lam_count, *direction_grid.shape, channels)
    when a lattice was acquired; ``field`` is set for forward access.
    """

    curve: Curve
    family: str
    order: int
    channels: Tuple[int, ...]
    step: float
    support: Ball
    lam_count: int = 0
    direction_grid: Optional[DirectionGrid] = None
    values: Optional[np.ndarray] = None
    field: Optional[object] = None
    access: str = "lattice"
    interpolation: str = "linear"
    seed: Optional[int] = None
    _interpolators: Dict[int, RegularGridInterpolator] = dc_field(default_factory=dict, repr=False, compare=False)
    _lock: Lock = dc_field(default_factory=Lock, repr=False, compare=False)

    def __post_init__(self):
        if self.access not in ACCESS_MODES:
            raise InvalidInputError(f"Unknown access mode {self.access!r}; expected one of {ACCESS_MODES}")
        if self.access == "forward" and self.field is None:
            raise InvalidInputError("Forward access needs the field")
        if self.access == "lattice" and self.values is None:
            raise InvalidInputError("Lattice access needs acquired values")

    @property
    def n(self) -> int:
        return self.curve.n

    def lambda_grid(self) -> np.ndarray:
        return self.curve.lambda_grid(self.lam_count)

    def origin(self, piece: int, k: int) -> np.ndarray:
        return self.curve.position(piece, self.lambda_grid()[k])[0]

    def with_access(self, access: str, field_model=None) -> "TRTDataset":
        return replace(self, access=access, field=field_model if field_model is not None else self.field,
                       _interpolators={}, _lock=Lock())

    def _interpolator(self, piece: int) -> RegularGridInterpolator:
        with self._lock:
            if piece not in self._interpolators:
                values = self.values[piece]
                axes = [self.lambda_grid()] + self.direction_grid.axes()
                values = _periodic_values(values, axis=0)
                values = _periodic_values(values, axis=len(axes) - 1)
                axes[0] = _periodic_axis(axes[0])
                axes[-1] = _periodic_axis(axes[-1])
                self._interpolators[piece] = RegularGridInterpolator(
                    axes, values, method=self.interpolation, bounds_error=False, fill_value=None
                )
                logger.debug(f"[DATASET] Built {self.interpolation} interpolator for piece {piece}")
            return self._interpolators[piece]

    def measure(self, piece: int, lams, directions) -> np.ndarray:
        """
        Extended channel values at curve points gamma_piece(lams) along
        (possibly non-unit) directions; shape (K, channels).
        """
        lam = np.atleast_1d(np.asarray(lams, dtype=float))
        xi = np.atleast_2d(np.asarray(directions, dtype=float))
        if lam.size == 1 and len(xi) > 1:
            lam = np.full(len(xi), lam[0])
        norms = np.linalg.norm(xi, axis=1)
        if np.any(norms == 0.0):
            raise InvalidInputError("Data requested along a zero direction")

        if self.access == "forward":
            origins = self.curve.position(piece, lam)
            return trt_batch(self.field, origins, xi, self.channels, self.family, self.step)

        unit_dirs = xi / norms[:, None]
        angles = angles_from_directions(unit_dirs)
        query = np.column_stack([np.mod(lam, TWO_PI), angles])
        values = self._interpolator(piece)(query)
        exponent = (self.order if self.family == "tensor" else 1) - 1
        if exponent != 0:
            values = values * (norms ** exponent)[:, None]
        return values

    def header(self) -> dict:
        return {
            "curve": self.curve.to_dict(),
            "family": self.family,
            "order": self.order,
            "channels": list(self.channels),
            "step": self.step,
            "support": {"center": self.support.center.tolist(), "radius": self.support.radius},
            "lam_count": self.lam_count,
            "direction_grid": self.direction_grid.to_dict() if self.direction_grid else None,
            "interpolation": self.interpolation,
            "seed": self.seed,
        }


def _check_contract(curve: Curve, support: Ball) -> None:
    ok, witness = encompasses(curve, support)
    if not ok:
        raise ContractViolationError(
            f"Curve does not encompass the support ball: {witness.reason} at "
            f"{np.round(witness.point, 6).tolist()}",
            witness=witness,
        )


def forward_dataset(f, curve: Curve, family: str = "tensor", step: Optional[float] = None,
                    support: Optional[Ball] = None) -> TRTDataset:
    """Dataset that evaluates the forward model on demand."""
    support = support or f.support
    _check_contract(curve, support)
    m = f.tensor_order
    return TRTDataset(curve=curve, family=family, order=m, channels=channels_for(family, m, curve.n),
                      step=step or f.default_step(), support=support, field=f, access="forward")


def acquire_dataset(f, curve: Curve, lam_count: int, direction_grid: DirectionGrid,
                    step: Optional[float] = None, family: str = "tensor",
                    support: Optional[Ball] = None, access: str = "lattice",
                    interpolation: str = "linear", seed: Optional[int] = None) -> TRTDataset:
    """
    Half-line TRT values on every (piece, lambda, direction) lattice node.

    Raises ContractViolationError when the curve does not encompass the support.
    """
    support = support or f.support
    _check_contract(curve, support)
    m = f.tensor_order
    channels = channels_for(family, m, curve.n)
    step = step or f.default_step()
    lam = curve.lambda_grid(lam_count)
    directions = direction_grid.directions()

    def row(task):
        piece, k = task
        origins = curve.position(piece, np.full(len(directions), lam[k]))
        return trt_batch(f, origins, directions, channels, family, step)

    tasks = [(piece, k) for piece in range(len(curve.pieces)) for k in range(lam_count)]
    rows = parallel_map(row, tasks, tag="acquire")
    values = np.array(rows).reshape((len(curve.pieces), lam_count) + direction_grid.shape + (len(channels),))
    logger.info(
        f"[DATASET] Acquired {len(tasks) * direction_grid.size} rays x {len(channels)} channels "
        f"({family}, m={m}) on {len(curve.pieces)} curve pieces"
    )
    return TRTDataset(curve=curve, family=family, order=m, channels=channels, step=step, support=support,
                      lam_count=lam_count, direction_grid=direction_grid, values=values,
                      field=f if access == "forward" else None, access=access,
                      interpolation=interpolation, seed=seed)
