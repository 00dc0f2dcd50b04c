"""
Seeded identity checks runnable from the CLI.

Checks are registered in the component registry with a level; the quick
level runs the algebraic and transform identities, the full level adds a
small end-to-end reconstruction and the m=1 W gap study.
"""
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, List

import numpy as np

from algebra import symtensor
from algebra.symtensor import SymTensor, basis_system, cramer_coefficients, polarize, sym_dim
from errors import InvalidInputError, TRTError
from geometry.curves import PlaneCoords, coordinate_circles_curve, great_circles_curve, plane_curve_intersections
from geometry.frames import frames_from_angles
from harness.phantoms import BumpSpec, PhantomSpec, phantom_field
from harness.registry import get_registry
from recon.dataset import forward_dataset
from recon.inversion import (
    ExactAProvider,
    GeometryContext,
    WFieldAProvider,
    recover_tensor_components,
    recover_vector,
    reconstruct_probes,
)
from recon.operators import WParams, build_wfield, w_discrepancy, w_values, weighted_radon_oracle
from transforms.fields import AnalyticField, AnalyticTensorField
from transforms.quadrature import sphere_grid
from transforms.xforms import radon_forward, uniform_p_grid

LEVELS = ("quick", "full")

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        status = "pass" if self.passed else "FAIL"
        text = f"{self.name}: {status} measured={self.measured:.3e} tolerance={self.tolerance:.1e}"
        return f"{text} {self.detail}".rstrip()


@dataclass
class SelftestReport:
    level: str
    results: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def to_text(self) -> str:
        lines = [r.line() for r in self.results]
        lines.append(f"level: {self.level}")
        lines.append(f"passed: {str(self.passed).lower()}")
        return "\n".join(lines) + "\n"


def register_check(name: str, level: str = "quick") -> Callable:
    def decorator(fn: Callable) -> Callable:
        get_registry().register("check", name, fn, level=level)
        return fn
    return decorator


def _result(name: str, measured: float, tolerance: float, detail: str = "") -> CheckResult:
    return CheckResult(name, bool(math.isfinite(measured) and measured <= tolerance), measured, tolerance, detail)


# === Algebra ===

@register_check("polarization")
def check_polarization(trials: int = 20, seed: int = 1) -> CheckResult:
    """Polarized pure powers against a dense multilinear evaluation."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for m in range(1, 5):
        for _ in range(trials):
            f = SymTensor(m, 3, rng.normal(size=sym_dim(m, 3)))
            thetas = rng.normal(size=(m, 3))
            dense = f.to_full()
            for theta in thetas:
                dense = np.tensordot(theta, dense, axes=(0, 0))
            plan = symtensor.polarization_plan(m)
            sums = symtensor.subset_sums(thetas, plan)
            powers = {J: symtensor.contract(f, symtensor.sym_power(t, m)) for J, t in sums.items()}
            value = polarize(m, powers)
            worst = max(worst, abs(value - float(dense)) / max(1.0, abs(float(dense))))
    return _result("polarization", worst, 1e-9, "m=1..4")


@register_check("frame-gram")
def check_frame_gram(samples: int = 1000, seed: int = 2) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in (3, 4, 5):
        angles = np.column_stack([rng.uniform(0, np.pi, size=(samples, n - 2)),
                                  rng.uniform(0, 2 * np.pi, size=samples)])
        xi, eta = frames_from_angles(angles)
        basis = np.concatenate([xi[:, None, :], eta], axis=1)
        gram = np.einsum("kij,klj->kil", basis, basis)
        worst = max(worst, float(np.max(np.abs(gram - np.eye(n)))))
    return _result("frame-gram", worst, 1e-12, "n=3,4,5")


@register_check("cramer-roundtrip")
def check_cramer(trials: int = 50, seed: int = 3) -> CheckResult:
    """theta^m rebuilt from the A_ij columns with Cramer coefficients."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for m in (1, 2, 3):
        for _ in range(trials):
            normal = rng.normal(size=3)
            basis = np.linalg.svd(normal[None, :])[2][1:]
            angles = rng.uniform(0, 2 * np.pi, size=m + 1)
            directions = np.column_stack([np.cos(angles), np.sin(angles)]) @ basis
            try:
                system = basis_system(directions)
            except TRTError:
                continue
            theta = rng.normal(size=3)
            coefficients = cramer_coefficients(system, theta)
            rebuilt = sum(c * system.matrix[:, k] for k, c in enumerate(coefficients.values()))
            target = symtensor.sym_power(theta, m).coeffs
            worst = max(worst, float(np.max(np.abs(rebuilt - target))) / max(1.0, float(np.max(np.abs(target)))))
    return _result("cramer-roundtrip", worst, 1e-10, "m=1..3")


# === Transforms ===

@register_check("radon-gaussian")
def check_radon_gaussian() -> CheckResult:
    """Plane integrals of exp(-|x|^2) equal pi * exp(-p^2)."""
    g = AnalyticField(lambda x: np.exp(-np.sum(x * x, axis=1)), [-3.0] * 3, [3.0] * 3)
    worst = 0.0
    for omega, p in (((0.0, 0.0, 1.0), 0.0), ((0.6, 0.0, 0.8), 0.5), ((1.0, 0.0, 0.0), -1.0)):
        exact = math.pi * math.exp(-p * p)
        worst = max(worst, abs(radon_forward(g, PlaneCoords(omega, p), resolution=128) - exact) / exact)
    return _result("radon-gaussian", worst, 2e-3)


@register_check("w-identity")
def check_w_identity() -> CheckResult:
    """Scalar W without transport against the second p-derivative of plane integrals."""
    spec = PhantomSpec(kind="gaussian-bump", order=0, width=0.5)
    f = phantom_field(spec)
    curve = great_circles_curve(2.5)
    data = forward_dataset(f, curve, step=0.01)
    params = WParams(transport="omit", circle_nodes=64, h_p=2e-2)
    worst = 0.0
    for omega, p in (((0.0, 0.6, 0.8), 0.2), ((0.48, 0.6, 0.64), -0.1)):
        plane = PlaneCoords(omega, p)
        crossing = plane_curve_intersections(curve, plane).crossings[0]
        got = float(w_values(data, plane, crossing, params)[0])
        expected = weighted_radon_oracle(f, plane, crossing, 0, h=2e-2, resolution=192)
        worst = max(worst, abs(got - expected) / max(abs(expected), 1e-12))
    return _result("w-identity", worst, 5e-2, "m=0, transport=omit")


# === Reconstruction ===

@register_check("algebraic-exactness")
def check_algebraic_exactness(seed: int = 4) -> CheckResult:
    """Exact frame components through Cramer and polarization reproduce the field."""
    rng = np.random.default_rng(seed)
    curve = great_circles_curve(2.0)
    worst = 0.0
    for m in (1, 2, 3):
        f = phantom_field(PhantomSpec(kind="multi-bump", order=m, seed=seed + m))
        ctx = GeometryContext(curve, f.support, m)
        for _ in range(5):
            x = 0.6 * rng.uniform(-1, 1, size=3) / math.sqrt(3)
            got = recover_tensor_components(x, ExactAProvider(f), ctx).coeffs
            truth = f.sample(x)[0]
            worst = max(worst, float(np.max(np.abs(got - truth))) / max(1.0, float(np.max(np.abs(truth)))))
    return _result("algebraic-exactness", worst, 1e-9, "m=1..3")


@register_check("vector-exactness")
def check_vector_exactness(seed: int = 5) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in (3, 5):
        spec = PhantomSpec(kind="gaussian-bump", order=1, dimension=n, center=(0.0,) * n,
                           bumps=(BumpSpec((0.1,) * n, 0.5, tuple(rng.normal(size=n))),))
        f = phantom_field(spec)
        ctx = GeometryContext(coordinate_circles_curve(1.2 * math.sqrt(n), n), f.support, 1, family="vector")
        for _ in range(4):
            x = 0.5 * rng.uniform(-1, 1, size=n) / math.sqrt(n)
            got = recover_vector(x, ExactAProvider(f, family="vector"), ctx)
            worst = max(worst, float(np.max(np.abs(got - f.sample(x)[0]))))
    return _result("vector-exactness", worst, 1e-10, "n=3,5")


@register_check("end-to-end-linearity", level="full")
def check_end_to_end() -> CheckResult:
    """Small m=1 reconstruction from W; the pipeline must be linear in f."""
    spec = PhantomSpec(kind="gaussian-bump", order=1, seed=7)
    f = phantom_field(spec)
    doubled = AnalyticTensorField(lambda pts: 2.0 * f.fn(pts), 1, f.lower, f.upper, f.support)
    curve = great_circles_curve(2.0)
    sphere = sphere_grid(3, 8, 16)
    p_grid = uniform_p_grid(2.3, 33)
    params = WParams(circle_nodes=24, transport="omit")
    ctx = GeometryContext(curve, f.support, 1)
    probes = np.array([[0.1, 0.0, 0.0], [0.0, -0.2, 0.1], [0.2, 0.2, -0.1]])
    estimates = []
    for field_model in (f, doubled):
        wfield = build_wfield(forward_dataset(field_model, curve, step=0.02), sphere, p_grid, params)
        estimates.append(reconstruct_probes(probes, WFieldAProvider(wfield), ctx))
    scale = max(float(np.max(np.abs(estimates[0]))), 1e-300)
    deviation = float(np.max(np.abs(estimates[1] - 2.0 * estimates[0]))) / scale
    error = float(np.linalg.norm(estimates[0] - f.sample(probes)) / np.linalg.norm(f.sample(probes)))
    return _result("end-to-end-linearity", deviation, 1e-6, f"relative_error={error:.3e}")


@register_check("w-gap-stability", level="full")
def check_w_gap() -> CheckResult:
    """The m=1 gap between W and the frozen-weight oracle must not depend on h_p or S(omega) nodes."""
    f = phantom_field(PhantomSpec(kind="gaussian-bump", order=1,
                                  bumps=(BumpSpec((0.1, -0.05, 0.0), 0.45, (0.6, -0.3, 0.8)),)))
    curve = great_circles_curve(2.0)
    data = forward_dataset(f, curve, step=0.05)
    center = np.array([0.48, 0.6, 0.64])
    side = np.array([0.6, -0.48, 0.0]) / math.hypot(0.6, 0.48)
    planes = [PlaneCoords(math.cos(t) * center + math.sin(t) * side, p)
              for t in np.linspace(-0.3, 0.3, 8) for p in np.linspace(-0.5, 0.5, 8)]
    coarse, _ = w_discrepancy(data, f, planes, 1, params=WParams(circle_nodes=64, h_p=1e-2))
    fine, used = w_discrepancy(data, f, planes, 1, params=WParams(circle_nodes=128, h_p=5e-3))
    return _result("w-gap-stability", abs(fine - coarse), 2e-2,
                   f"m=1 relative_gap={fine:.3e} planes={used}")


def selftest_suite(level: str = "quick") -> SelftestReport:
    """Run every registered check of the level (full includes quick)."""
    if level not in LEVELS:
        raise InvalidInputError(f"Unknown selftest level {level!r}; expected one of {LEVELS}")
    levels = LEVELS[: LEVELS.index(level) + 1]
    report = SelftestReport(level)
    for name, entry in get_registry().list("check").items():
        if entry.get("level", "quick") not in levels:
            continue
        start = time.perf_counter()
        try:
            result = entry["factory"]()
        except Exception as e:
            logger.error(f"[SELFTEST] Check '{name}' raised: {e}")
            result = CheckResult(name, False, math.nan, math.nan, f"error={type(e).__name__}: {e}")
        logger.info(f"[SELFTEST] {result.line()} ({time.perf_counter() - start:.2f}s)")
        report.results.append(result)
    return report
