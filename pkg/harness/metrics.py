"""
Reconstruction error metrics over the support ball.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from algebra.symtensor import index_label, multi_indices, multiplicities
from errors import InvalidInputError
from storage.reports import summary_text
from transforms.fields import TensorGrid

GRID_TOL = 1e-12

logger = logging.getLogger(__name__)


@dataclass
class ErrorReport:
    """
    Relative L2 errors per component and overall. When the truth has zero
    norm the absolute L2 error is reported instead.
    """

    relative_l2: Dict[str, float]
    aggregate_l2: float
    max_abs: float
    samples: int
    skipped: int = 0
    provenance: Dict[str, object] = field(default_factory=dict)
    stage_seconds: Dict[str, float] = field(default_factory=dict)

    @property
    def finite(self) -> bool:
        values = list(self.relative_l2.values()) + [self.aggregate_l2, self.max_abs]
        return all(math.isfinite(v) for v in values)

    def findings(self) -> List[Tuple[str, object]]:
        rows: List[Tuple[str, object]] = [
            ("aggregate_relative_l2", self.aggregate_l2),
            ("max_abs_error", self.max_abs),
            ("samples", self.samples),
            ("skipped", self.skipped),
        ]
        rows += [(f"relative_l2_{label}", value) for label, value in self.relative_l2.items()]
        rows += [(f"provenance_{key}", value) for key, value in sorted(self.provenance.items())]
        return rows

    def to_text(self) -> str:
        return summary_text(self.findings())


def _relative(err: float, ref: float) -> float:
    return err / ref if ref > 0.0 else err


def _compare(truth: np.ndarray, estimate: np.ndarray, m: int, n: int,
             provenance: Dict[str, object], skipped: int = 0) -> ErrorReport:
    weights = multiplicities(m, n)
    diff = estimate - truth
    per_component = {}
    for k, index in enumerate(multi_indices(m, n)):
        per_component[index_label(index)] = _relative(float(np.linalg.norm(diff[:, k])),
                                                       float(np.linalg.norm(truth[:, k])))
    aggregate = _relative(float(np.sqrt(np.sum(weights * diff ** 2))),
                          float(np.sqrt(np.sum(weights * truth ** 2))))
    max_abs = float(np.max(np.abs(diff))) if diff.size else 0.0
    report = ErrorReport(per_component, aggregate, max_abs, len(truth), skipped, provenance)
    logger.info(f"[METRICS] Relative L2 {aggregate:.4e}, max abs {max_abs:.4e} over {len(truth)} samples")
    return report


def error_metrics(truth, estimate: Optional[TensorGrid] = None, points: Optional[np.ndarray] = None,
                  values: Optional[np.ndarray] = None) -> ErrorReport:
    """
    Compare against the truth either on a matching tensor grid (nodes inside
    the support ball) or at probe points; NaN probe rows are skipped.
    """
    m, n = truth.tensor_order, truth.n
    ball = truth.support
    if estimate is not None:
        if not isinstance(truth, TensorGrid):
            raise InvalidInputError("Grid comparison needs the truth as a tensor grid")
        same = (
            estimate.tensor_order == m and estimate.n == n and tuple(estimate.shape) == tuple(truth.shape)
            and np.allclose(estimate.lower, truth.lower, atol=GRID_TOL)
            and np.allclose(estimate.upper, truth.upper, atol=GRID_TOL)
        )
        if not same:
            raise InvalidInputError(
                f"Grid geometry mismatch: truth m={m}, shape {tuple(truth.shape)}, "
                f"estimate m={estimate.tensor_order}, shape {tuple(estimate.shape)}"
            )
        inside = ball.contains(truth.nodes(), strict=False)
        nu = truth.values.shape[-1]
        return _compare(truth.values.reshape(-1, nu)[inside], estimate.values.reshape(-1, nu)[inside], m, n,
                        {"mode": "grid", "shape": "x".join(str(s) for s in truth.shape)})

    if points is None or values is None:
        raise InvalidInputError("error_metrics needs an estimate grid or probe points with values")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    est = np.atleast_2d(np.asarray(values, dtype=float))
    if pts.shape[1] != n or est.shape != (len(pts), truth.sample(pts[:1]).shape[1]):
        raise InvalidInputError(f"Probe table shape {est.shape} does not match {len(pts)} points of order {m}")
    keep = ~np.any(np.isnan(est), axis=1)
    return _compare(truth.sample(pts[keep]), est[keep], m, n, {"mode": "probes"}, int(np.sum(~keep)))
