"""
Run orchestration: simulate -> reconstruct -> validate, plus curve checks.

Every stage returns (success, message, payload) and converts toolkit errors
into failures instead of raising.
"""
import logging
import os
import time
from typing import Dict, Optional, Tuple

import numpy as np

from algebra.symtensor import index_label, multi_indices, sym_dim
from errors import InvalidInputError, TRTError
from geometry.certify import encompasses, kirillov_tuy_report
from geometry.curves import Curve
from harness.config import RunConfig, curve_params, validate_config
from harness.metrics import error_metrics
from harness.phantoms import make_phantom
from harness.registry import get_registry
from recon.dataset import DirectionGrid, acquire_dataset
from recon.inversion import GeometryContext, WFieldAProvider, reconstruct_probes
from recon.operators import WParams, build_wfield
from storage.grid_container import (
    load_dataset,
    load_probes,
    load_tensor_grid,
    read_grid,
    save_dataset,
    save_probes,
    save_tensor_grid,
    save_wfield,
)
from storage.reports import summary_text, write_probe_csv, write_report
from transforms.fields import TensorGrid, grid_nodes
from transforms.quadrature import sphere_grid
from transforms.xforms import uniform_p_grid

TRUTH_FILE = "truth.grid"
DATASET_FILE = "dataset.grid"
WFIELD_FILE = "wfield.grid"
PROBES_FILE = "probes.grid"
ESTIMATE_FILE = "estimate.grid"
PROBE_CSV = "probes.csv"
PROBE_SHRINK = 0.8

logger = logging.getLogger(__name__)

Result = Tuple[bool, str, Optional[dict]]


def build_curve(config: RunConfig) -> Curve:
    return get_registry().require("curve", config.curve.kind)(**curve_params(config))


def probe_points(config: RunConfig) -> np.ndarray:
    """Explicit probe points, or seeded uniform samples of the inner ball."""
    if config.probe_points is not None:
        return np.array(config.probe_points, dtype=float).reshape(-1, config.dimension)
    rng = np.random.default_rng(config.seed)
    n, count = config.dimension, config.grids.probes
    directions = rng.normal(size=(count, n))
    directions /= np.linalg.norm(directions, axis=1)[:, None]
    radii = PROBE_SHRINK * config.phantom.radius * rng.uniform(size=count) ** (1.0 / n)
    return np.asarray(config.phantom.center, dtype=float) + radii[:, None] * directions


def component_labels(config: RunConfig):
    if config.family == "vector":
        return [f"f{k + 1}" for k in range(config.dimension)]
    return [index_label(index) for index in multi_indices(config.phantom.order, config.dimension)]


class RunPipeline:
    """Runs the stages of one configuration."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.timings: Dict[str, float] = {}

    def _timed(self, stage: str, start: float) -> None:
        self.timings[stage] = time.perf_counter() - start
        logger.info(f"[PIPELINE] Stage '{stage}' finished in {self.timings[stage]:.2f}s")

    # === Simulation ===

    def simulate(self, out_dir: str) -> Result:
        """Rasterize the phantom and acquire the curve dataset."""
        config = self.config
        try:
            validate_config(config)
            start = time.perf_counter()
            n = config.dimension
            truth = make_phantom(config.phantom, (config.grids.field,) * n)
            self._timed("phantom", start)

            start = time.perf_counter()
            curve = build_curve(config)
            directions = DirectionGrid(n, config.grids.direction_polar, config.grids.direction_azimuth)
            dataset = acquire_dataset(truth, curve, config.grids.lam_count, directions, step=config.steps.ray,
                                      family=config.family, support=config.phantom.ball, seed=config.seed)
            self._timed("acquire", start)

            paths = {"truth": os.path.join(out_dir, TRUTH_FILE), "dataset": os.path.join(out_dir, DATASET_FILE)}
            save_tensor_grid(paths["truth"], truth)
            save_dataset(paths["dataset"], dataset)
        except (TRTError, InvalidInputError, OSError) as e:
            logger.error(f"[PIPELINE] Simulation failed: {e}")
            return False, f"Simulation failed: {e}", None
        return True, f"Simulated {dataset.values.size} samples into {out_dir}", paths

    # === Reconstruction ===

    def wparams(self) -> WParams:
        steps = self.config.steps
        return WParams(h_xi=steps.h_xi, h_p=steps.h_p, h_lambda=steps.h_lambda,
                       circle_nodes=self.config.grids.circle_nodes, transport=steps.transport)

    def reconstruct(self, data_dir: str, out_dir: str, truth_path: Optional[str] = None) -> Result:
        """Build W from the stored dataset and reconstruct at probes and on the output grid."""
        config = self.config
        n = config.dimension
        ball = config.phantom.ball
        lower, upper = config.phantom.box()
        try:
            validate_config(config)
            if config.steps.transport == "subtract":
                logger.warning("[PIPELINE] transport=subtract cancels the p-derivative along the curve; "
                               "W and the estimate will be near zero")
            curve = build_curve(config)
            dataset = load_dataset(os.path.join(data_dir, DATASET_FILE), curve)
            if config.access == "forward":
                dataset = dataset.with_access("forward", load_tensor_grid(os.path.join(data_dir, TRUTH_FILE)))

            start = time.perf_counter()
            sphere = sphere_grid(n, config.grids.sphere_polar, config.grids.sphere_azimuth)
            extent = float(np.max(np.linalg.norm(np.stack([lower, upper]), axis=1))) + config.steps.h_p
            p_grid = uniform_p_grid(extent, config.grids.p_count)
            wfield = build_wfield(dataset, sphere, p_grid, self.wparams(), ball=ball, box=(lower, upper))
            self._timed("wfield", start)

            start = time.perf_counter()
            ctx = GeometryContext(curve, ball, config.phantom.order, config.family, lower=lower, upper=upper)
            provider = WFieldAProvider(wfield)
            probes = probe_points(config)
            probe_values = reconstruct_probes(probes, provider, ctx)
            estimate = self._estimate_grid(provider, ctx, lower, upper)
            self._timed("reconstruct", start)
            truth = load_tensor_grid(truth_path) if truth_path else None

            paths = {
                "wfield": os.path.join(out_dir, WFIELD_FILE),
                "probes": os.path.join(out_dir, PROBES_FILE),
                "estimate": os.path.join(out_dir, ESTIMATE_FILE),
                "csv": os.path.join(out_dir, PROBE_CSV),
            }
            order = 1 if config.family == "vector" else config.phantom.order
            save_wfield(paths["wfield"], wfield)
            save_probes(paths["probes"], probes, probe_values, config.family, order)
            save_tensor_grid(paths["estimate"], estimate)
            write_probe_csv(paths["csv"], probes, probe_values, component_labels(config),
                            truth.sample(probes) if truth is not None else None)
            if truth is not None:
                report = error_metrics(truth, points=probes, values=probe_values)
                paths["report"] = os.path.join(out_dir, "errors.txt")
                write_report(paths["report"], report.to_text())
        except (TRTError, InvalidInputError, OSError) as e:
            logger.error(f"[PIPELINE] Reconstruction failed: {e}")
            return False, f"Reconstruction failed: {e}", None
        return True, f"Reconstructed {len(probes)} probes into {out_dir}", paths

    def _estimate_grid(self, provider, ctx: GeometryContext, lower, upper) -> TensorGrid:
        config = self.config
        n = config.dimension
        shape = (config.grids.output,) * n
        nodes = grid_nodes(lower, upper, shape)
        inside = config.phantom.ball.contains(nodes, strict=True)
        order = 1 if config.family == "vector" else config.phantom.order
        width = sym_dim(order, n)
        values = reconstruct_probes(nodes[inside], provider, ctx)
        missing = np.any(np.isnan(values), axis=1)
        if np.any(missing):
            logger.warning(f"[PIPELINE] {int(np.sum(missing))} grid nodes without coverage set to zero")
            values[missing] = 0.0
        full = np.zeros((len(nodes), width))
        full[inside] = values
        return TensorGrid(lower, upper, full.reshape(shape + (width,)), order, config.phantom.ball)

    # === Validation ===

    def validate(self, truth_path: str, estimate_path: str, report_path: str) -> Result:
        return validate_files(truth_path, estimate_path, report_path)

    # === Curve certification ===

    def check_curve(self, report_path: Optional[str] = None) -> Result:
        """Encompassing and (modified) Kirillov-Tuy certification of the configured curve."""
        config = self.config
        try:
            validate_config(config)
            curve = build_curve(config)
            ok, witness = encompasses(curve, config.phantom.ball)
            modified = config.family == "vector"
            kt = kirillov_tuy_report(curve, config.phantom.ball, config.phantom.order, modified=modified)

            lines = [("curve", config.curve.kind), ("encompassing", str(ok).lower())]
            if witness is not None:
                lines.append(("encompassing_witness", witness.reason))
            text = summary_text(lines) + kt.to_text()
            if report_path:
                write_report(report_path, text)
        except (TRTError, InvalidInputError, OSError) as e:
            return False, f"Curve check failed: {e}", None
        passed = ok and kt.passed
        message = "Curve passes certification" if passed else "Curve fails certification"
        return passed, message, {"text": text, "report": kt}


def validate_files(truth_path: str, estimate_path: str, report_path: str) -> Result:
    """Compare an estimate (tensor grid or probe table) against a truth grid."""
    try:
        truth = load_tensor_grid(truth_path)
        header, _ = read_grid(estimate_path)
        if header["kind"] == "tensor":
            report = error_metrics(truth, load_tensor_grid(estimate_path))
        elif header["kind"] == "probes":
            _, points, values = load_probes(estimate_path)
            report = error_metrics(truth, points=points, values=values)
        else:
            return False, f"Cannot validate a {header['kind']} container", None
        write_report(report_path, report.to_text())
    except (TRTError, InvalidInputError, OSError) as e:
        return False, f"Validation failed: {e}", None

    if not report.finite:
        return False, "Error report contains non-finite entries", {"report": report}
    return True, f"Relative L2 error {report.aggregate_l2:.4e}", {"report": report}
