"""
Run configuration: one JSON document parsed into frozen dataclasses.

Relative paths are resolved against the config file's directory and unknown
keys are rejected.
"""
import dataclasses
import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from errors import GeometryGuardError, InvalidInputError
from harness.phantoms import BumpSpec, PhantomSpec, validate_phantom
from harness.registry import get_registry
from recon.dataset import ACCESS_MODES
from recon.operators import TRANSPORT_MODES
from utils import make_json_serializable

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CurveSpec:
    kind: str = "three-circles"
    radius: float = 2.0
    center: Optional[Tuple[float, ...]] = None
    normal: Optional[Tuple[float, ...]] = None


@dataclass(frozen=True)
class GridSpec:
    field: int = 64
    sphere_polar: int = 32
    sphere_azimuth: int = 64
    p_count: int = 128
    lam_count: int = 512
    circle_nodes: int = 64
    direction_polar: int = 32
    direction_azimuth: int = 64
    probes: int = 50
    output: int = 16


@dataclass(frozen=True)
class StepSpec:
    ray: Optional[float] = None  # defaults to half the field spacing
    h_xi: float = 1e-3
    h_p: float = 1e-2
    h_lambda: Optional[float] = None
    transport: str = "omit"


@dataclass(frozen=True)
class RunConfig:
    phantom: PhantomSpec = field(default_factory=PhantomSpec)
    curve: CurveSpec = field(default_factory=CurveSpec)
    grids: GridSpec = field(default_factory=GridSpec)
    steps: StepSpec = field(default_factory=StepSpec)
    family: str = "tensor"
    access: str = "lattice"
    probe_points: Optional[Tuple[Tuple[float, ...], ...]] = None
    output_dir: Optional[str] = None
    seed: int = 0
    base_dir: str = "."

    @property
    def dimension(self) -> int:
        return self.phantom.dimension

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data.pop("base_dir")
        return make_json_serializable(data)


# === Parsing ===

def _tupled(value):
    if isinstance(value, list):
        return tuple(_tupled(v) for v in value)
    return value


def _build(cls, data, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise InvalidInputError(f"Config section '{where}' must be an object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise InvalidInputError(f"Unknown keys in config section '{where}': {', '.join(unknown)}")
    return cls(**{key: _tupled(value) for key, value in data.items()})


def parse_config(data: dict, base_dir: str = ".") -> RunConfig:
    if not isinstance(data, dict):
        raise InvalidInputError("Config must be a JSON object")
    top = {f.name for f in dataclasses.fields(RunConfig)} - {"base_dir"}
    unknown = sorted(set(data) - top)
    if unknown:
        raise InvalidInputError(f"Unknown top-level config keys: {', '.join(unknown)}")

    phantom_data = dict(data.get("phantom") or {})
    bumps = tuple(_build(BumpSpec, b, "phantom.bumps") for b in phantom_data.pop("bumps", []) or [])
    phantom = _build(PhantomSpec, phantom_data, "phantom")
    phantom = dataclasses.replace(phantom, bumps=bumps)

    output_dir = data.get("output_dir")
    if output_dir is not None and not os.path.isabs(output_dir):
        output_dir = os.path.normpath(os.path.join(base_dir, output_dir))

    return RunConfig(
        phantom=phantom,
        curve=_build(CurveSpec, data.get("curve"), "curve"),
        grids=_build(GridSpec, data.get("grids"), "grids"),
        steps=_build(StepSpec, data.get("steps"), "steps"),
        family=data.get("family", "tensor"),
        access=data.get("access", "lattice"),
        probe_points=_tupled(data.get("probe_points")),
        output_dir=output_dir,
        seed=int(data.get("seed", 0)),
        base_dir=base_dir,
    )


def load_config(path: str) -> RunConfig:
    """Parse a JSON config file; relative paths are taken relative to it."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as e:
        raise InvalidInputError(f"Cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise InvalidInputError(f"Config {path} is not valid JSON: {e}") from e
    config = parse_config(data, os.path.dirname(os.path.abspath(path)))
    logger.info(f"[CONFIG] Loaded {path} (digest {config_digest(config)})")
    return config


# === Validation ===

def curve_params(config: RunConfig) -> dict:
    params = {"radius": config.curve.radius, "dimension": config.dimension}
    if config.curve.center is not None:
        params["center"] = list(config.curve.center)
    if config.curve.normal is not None:
        params["normal"] = list(config.curve.normal)
    return params


def check_geometry_guard(config: RunConfig) -> None:
    """Coordinate-circle curves need R > sqrt(n) * r for a ball centered at the origin."""
    entry = get_registry().get("curve", config.curve.kind)
    if entry is None or not entry.get("guard"):
        return
    n = config.dimension
    reach = float(np.linalg.norm(config.phantom.center)) + config.phantom.radius
    bound = math.sqrt(n) * reach
    if not config.curve.radius > bound:
        raise GeometryGuardError(
            f"Curve '{config.curve.kind}' violates R > sqrt({n})·r: R = {config.curve.radius:g}, "
            f"sqrt({n})·r = {bound:.6g} (r = {reach:g} including the ball offset)"
        )


def validate_config(config: RunConfig) -> None:
    """Fail fast, before any computation, with an actionable message."""
    validate_phantom(config.phantom)
    get_registry().require("curve", config.curve.kind)
    if not config.curve.radius > 0:
        raise InvalidInputError(f"curve.radius must be positive, got {config.curve.radius}")
    n, m = config.dimension, config.phantom.order

    if config.family == "tensor":
        if n != 3:
            raise InvalidInputError(f"The tensor family needs dimension 3, got {n}")
    elif config.family == "vector":
        if m != 1:
            raise InvalidInputError(f"The vector family needs phantom.order = 1, got {m}")
        if n % 2 == 0:
            raise InvalidInputError(f"Vector reconstruction needs an odd dimension, got {n}")
    else:
        raise InvalidInputError(f"family must be 'tensor' or 'vector', got {config.family!r}")

    if config.access not in ACCESS_MODES:
        raise InvalidInputError(f"access must be one of {ACCESS_MODES}, got {config.access!r}")
    if config.steps.transport not in TRANSPORT_MODES:
        raise InvalidInputError(f"steps.transport must be one of {TRANSPORT_MODES}, got {config.steps.transport!r}")
    for name in ("h_xi", "h_p"):
        if not getattr(config.steps, name) > 0:
            raise InvalidInputError(f"steps.{name} must be positive")
    if config.steps.ray is not None and not config.steps.ray > 0:
        raise InvalidInputError("steps.ray must be positive")

    g = config.grids
    minimums = {"field": 2, "sphere_polar": 1, "sphere_azimuth": 3, "p_count": 3, "lam_count": 4,
                "circle_nodes": 3, "direction_polar": 2, "direction_azimuth": 3, "probes": 0, "output": 2}
    for name, low in minimums.items():
        if getattr(g, name) < low:
            raise InvalidInputError(f"grids.{name} must be at least {low}, got {getattr(g, name)}")

    if config.probe_points is not None:
        for k, point in enumerate(config.probe_points):
            if len(point) != n:
                raise InvalidInputError(f"probe_points[{k}] has {len(point)} coordinates, dimension is {n}")

    check_geometry_guard(config)


def config_digest(config: RunConfig) -> str:
    payload = json.dumps(config.to_dict(), sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]
