"""
Grid container files: one line of sorted-key JSON header, a newline, then the
raw little-endian float64 payload in row-major order.
"""
import json
import logging
import os
from typing import Optional, Tuple

import numpy as np

from errors import ContainerFormatError
from geometry.curves import Ball, Curve
from recon.dataset import DirectionGrid, TRTDataset
from recon.operators import WField, WParams
from transforms.fields import ScalarGrid, TensorGrid
from transforms.quadrature import sphere_grid
from transforms.xforms import Sinogram
from utils import make_json_serializable

FORMAT_NAME = "trt-grid"
FORMAT_VERSION = 1
KINDS = ("scalar", "tensor", "sinogram", "dataset", "wfield", "probes")
PAYLOAD_DTYPE = np.dtype("<f8")

logger = logging.getLogger(__name__)


# === Raw container ===

def write_grid(path: str, kind: str, payload: np.ndarray, metadata: dict) -> None:
    """Write a container; identical inputs give byte-identical files."""
    if kind not in KINDS:
        raise ContainerFormatError(f"Unknown container kind {kind!r}; expected one of {KINDS}")
    data = np.ascontiguousarray(payload, dtype=PAYLOAD_DTYPE)
    header = dict(metadata)
    header.update({
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "kind": kind,
        "payload_shape": list(data.shape),
        "byte_order": "little",
        "dtype": "float64",
    })
    line = json.dumps(make_json_serializable(header), sort_keys=True)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(line.encode("utf-8"))
        fh.write(b"\n")
        fh.write(data.tobytes(order="C"))
    logger.info(f"[STORAGE] Wrote {kind} container {path} ({data.size} values)")


def read_grid(path: str, kind: Optional[str] = None) -> Tuple[dict, np.ndarray]:
    """Read a container, checking the header against the payload."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as e:
        raise ContainerFormatError(f"Cannot read container {path}: {e}") from e

    newline = raw.find(b"\n")
    if newline < 0:
        raise ContainerFormatError(f"{path}: missing header line")
    try:
        header = json.loads(raw[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ContainerFormatError(f"{path}: header is not valid JSON ({e})") from e

    if header.get("format") != FORMAT_NAME or header.get("version") != FORMAT_VERSION:
        raise ContainerFormatError(f"{path}: not a {FORMAT_NAME} v{FORMAT_VERSION} file")
    if header.get("byte_order") != "little" or header.get("dtype") != "float64":
        raise ContainerFormatError(f"{path}: unsupported payload encoding")
    if kind is not None and header.get("kind") != kind:
        raise ContainerFormatError(f"{path}: expected a {kind} container, found {header.get('kind')!r}")

    shape = tuple(int(s) for s in header.get("payload_shape", ()))
    body = raw[newline + 1:]
    expected = int(np.prod(shape)) * PAYLOAD_DTYPE.itemsize
    if len(body) != expected:
        raise ContainerFormatError(f"{path}: payload has {len(body)} bytes, header implies {expected}")
    payload = np.frombuffer(body, dtype=PAYLOAD_DTYPE).reshape(shape).copy()
    logger.debug(f"[STORAGE] Read {header['kind']} container {path}")
    return header, payload


def _ball_dict(ball: Optional[Ball]) -> Optional[dict]:
    return None if ball is None else {"center": ball.center.tolist(), "radius": ball.radius}


def _ball_from(entry: Optional[dict]) -> Optional[Ball]:
    return None if entry is None else Ball(np.array(entry["center"], dtype=float), float(entry["radius"]))


# === Fields ===

def save_tensor_grid(path: str, grid: TensorGrid) -> None:
    write_grid(path, "tensor", grid.values, {
        "dimension": grid.n,
        "order": grid.tensor_order,
        "lower": grid.lower,
        "upper": grid.upper,
        "shape": list(grid.shape),
        "interpolation": grid.order,
        "support": _ball_dict(grid.support),
    })


def load_tensor_grid(path: str) -> TensorGrid:
    header, values = read_grid(path, "tensor")
    support = _ball_from(header.get("support"))
    if support is None:
        raise ContainerFormatError(f"{path}: tensor grid without a support ball")
    return TensorGrid(header["lower"], header["upper"], values, int(header["order"]), support,
                      int(header.get("interpolation", 1)))


def save_scalar_grid(path: str, grid: ScalarGrid) -> None:
    write_grid(path, "scalar", grid.values, {
        "dimension": grid.n,
        "order": 0,
        "lower": grid.lower,
        "upper": grid.upper,
        "shape": list(grid.shape),
        "interpolation": grid.order,
        "support": _ball_dict(grid.support),
    })


def load_scalar_grid(path: str) -> ScalarGrid:
    header, values = read_grid(path, "scalar")
    return ScalarGrid(header["lower"], header["upper"], values, int(header.get("interpolation", 1)),
                      _ball_from(header.get("support")))


# === Sinograms ===

def save_sinogram(path: str, sinogram: Sinogram) -> None:
    write_grid(path, "sinogram", sinogram.values, {
        "dimension": sinogram.sphere.n,
        "smoothing": sinogram.smoothing,
        **sinogram.to_dict(),
    })


def load_sinogram(path: str) -> Sinogram:
    header, values = read_grid(path, "sinogram")
    sphere = sphere_grid(**header["sphere"])
    p_grid = np.linspace(header["p_min"], header["p_max"], int(header["p_count"]))
    return Sinogram(sphere, p_grid, values, bool(header.get("smoothing", False)))


# === Datasets ===

def save_dataset(path: str, data: TRTDataset) -> None:
    if data.values is None:
        raise ContainerFormatError("Only lattice datasets can be stored")
    write_grid(path, "dataset", data.values, {"dimension": data.n, **data.header()})


def load_dataset(path: str, curve: Curve) -> TRTDataset:
    """Load a lattice dataset; the curve must match the one recorded in the header."""
    header, values = read_grid(path, "dataset")
    if header["curve"] != make_json_serializable(curve.to_dict()):
        raise ContainerFormatError(f"{path}: dataset was acquired on {header['curve']}, not {curve.to_dict()}")
    grid = header["direction_grid"]
    return TRTDataset(
        curve=curve,
        family=header["family"],
        order=int(header["order"]),
        channels=tuple(int(c) for c in header["channels"]),
        step=float(header["step"]),
        support=_ball_from(header["support"]),
        lam_count=int(header["lam_count"]),
        direction_grid=DirectionGrid(**grid),
        values=values,
        interpolation=header.get("interpolation", "linear"),
        seed=header.get("seed"),
    )


# === W fields ===

def save_wfield(path: str, wfield: WField) -> None:
    excluded = np.flatnonzero(~wfield.valid.reshape(-1))
    write_grid(path, "wfield", wfield.values, {
        "dimension": wfield.n,
        "excluded": excluded.tolist(),
        **wfield.header(),
    })


def load_wfield(path: str) -> WField:
    header, values = read_grid(path, "wfield")
    valid = np.ones(values.shape[:3], dtype=bool)
    valid.reshape(-1)[np.asarray(header["excluded"], dtype=int)] = False
    return WField(
        sphere=sphere_grid(**header["sphere"]),
        p_grid=np.linspace(header["p_min"], header["p_max"], int(header["p_count"])),
        channels=tuple(int(c) for c in header["channels"]),
        values=values,
        valid=valid,
        params=WParams(**header["params"]),
        family=header["family"],
        order=int(header["order"]),
        lower=np.asarray(header["lower"], dtype=float),
        upper=np.asarray(header["upper"], dtype=float),
    )


# === Probes ===

def save_probes(path: str, points: np.ndarray, values: np.ndarray, family: str, order: int) -> None:
    pts = np.atleast_2d(points)
    write_grid(path, "probes", np.hstack([pts, np.atleast_2d(values)]), {
        "dimension": pts.shape[1],
        "order": order,
        "family": family,
    })


def load_probes(path: str) -> Tuple[dict, np.ndarray, np.ndarray]:
    header, payload = read_grid(path, "probes")
    n = int(header["dimension"])
    return header, payload[:, :n], payload[:, n:]
