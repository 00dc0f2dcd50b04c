"""
Symmetric tensor algebra on sorted multi-indices.

A symmetric m-tensor over R^d stores one coefficient per sorted multi-index
(i_1 <= ... <= i_m, 0-based axes). The contraction folds in the multinomial
multiplicity of each index so that <theta^m, w^m> = <theta, w>^m.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from errors import DegenerateSystemError, IncompleteInputError, InvalidInputError
from geometry.frames import Frame, canonical_frame

PAIR_TOL = 1e-6
DET_TOL = 1e-10

logger = logging.getLogger(__name__)

Key = Tuple[int, int]


# === Index bookkeeping ===

def sym_dim(m: int, d: int) -> int:
    """Number of independent coefficients, C(m+d-1, m)."""
    if m < 0 or d < 1:
        raise InvalidInputError(f"sym_dim needs m >= 0 and d >= 1, got m={m}, d={d}")
    return math.comb(m + d - 1, m)


@lru_cache(maxsize=None)
def multi_indices(m: int, d: int) -> Tuple[Tuple[int, ...], ...]:
    """Sorted multi-indices in lexicographic order."""
    return tuple(itertools.combinations_with_replacement(range(d), m))


@lru_cache(maxsize=None)
def _index_array(m: int, d: int) -> np.ndarray:
    arr = np.array(multi_indices(m, d), dtype=np.intp).reshape(-1, m)
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=None)
def _position(m: int, d: int) -> Dict[Tuple[int, ...], int]:
    return {index: k for k, index in enumerate(multi_indices(m, d))}


@lru_cache(maxsize=None)
def multiplicities(m: int, d: int) -> np.ndarray:
    """Multinomial weight m! / prod(count!) of every sorted multi-index."""
    weights = []
    for index in multi_indices(m, d):
        denom = 1
        for axis in set(index):
            denom *= math.factorial(index.count(axis))
        weights.append(math.factorial(m) / denom)
    arr = np.array(weights, dtype=float)
    arr.setflags(write=False)
    return arr


def index_label(index: Sequence[int]) -> str:
    """1-based label used in reports, e.g. (0, 2) -> 'f13'."""
    return "f" + "".join(str(i + 1) for i in index) if index else "f"


# === SymTensor ===

@dataclass(frozen=True)
class SymTensor:
    """Symmetric m-tensor over R^d stored by sorted multi-index."""

    order: int
    dim: int
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float).reshape(-1)
        expected = sym_dim(self.order, self.dim)
        if coeffs.size != expected:
            raise InvalidInputError(
                f"A symmetric {self.order}-tensor over R^{self.dim} has {expected} coefficients, got {coeffs.size}"
            )
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def zeros(cls, order: int, dim: int) -> "SymTensor":
        return cls(order, dim, np.zeros(sym_dim(order, dim)))

    @classmethod
    def from_mapping(cls, order: int, dim: int, values: Mapping[Sequence[int], float]) -> "SymTensor":
        """Build from {multi-index: value}; indices in any order, 0-based."""
        coeffs = np.zeros(sym_dim(order, dim))
        lookup = _position(order, dim)
        for index, value in values.items():
            key = tuple(sorted(int(i) for i in index))
            if key not in lookup:
                raise InvalidInputError(f"Index {tuple(index)} is not valid for order {order}, dim {dim}")
            coeffs[lookup[key]] = value
        return cls(order, dim, coeffs)

    @classmethod
    def from_full(cls, array) -> "SymTensor":
        """Read the sorted-index entries of a dense symmetric array."""
        full = np.asarray(array, dtype=float)
        if full.ndim == 0:
            return cls(0, 1, full.reshape(1))
        dim = full.shape[0]
        if any(s != dim for s in full.shape):
            raise InvalidInputError(f"Dense tensor must be cubic, got shape {full.shape}")
        idx = _index_array(full.ndim, dim)
        return cls(full.ndim, dim, full[tuple(idx.T)])

    def to_full(self) -> np.ndarray:
        """Dense d^m array (no multiplicity weights involved)."""
        if self.order == 0:
            return np.array(self.coeffs[0])
        lookup = _position(self.order, self.dim)
        full = np.empty((self.dim,) * self.order)
        for index in itertools.product(range(self.dim), repeat=self.order):
            full[index] = self.coeffs[lookup[tuple(sorted(index))]]
        return full

    def __getitem__(self, index) -> float:
        if isinstance(index, (int, np.integer)):
            index = (index,)
        key = tuple(sorted(int(i) for i in index))
        lookup = _position(self.order, self.dim)
        if key not in lookup:
            raise InvalidInputError(f"Index {index} is not valid for order {self.order}, dim {self.dim}")
        return float(self.coeffs[lookup[key]])

    def as_dict(self) -> Dict[Tuple[int, ...], float]:
        return {index: float(v) for index, v in zip(multi_indices(self.order, self.dim), self.coeffs)}

    def _check_same_space(self, other: "SymTensor") -> None:
        if not isinstance(other, SymTensor):
            raise InvalidInputError(f"Expected a SymTensor, got {type(other).__name__}")
        if (self.order, self.dim) != (other.order, other.dim):
            raise InvalidInputError(
                f"Tensor spaces differ: order/dim {self.order}/{self.dim} vs {other.order}/{other.dim}"
            )

    def __add__(self, other: "SymTensor") -> "SymTensor":
        self._check_same_space(other)
        return SymTensor(self.order, self.dim, self.coeffs + other.coeffs)

    def __sub__(self, other: "SymTensor") -> "SymTensor":
        self._check_same_space(other)
        return SymTensor(self.order, self.dim, self.coeffs - other.coeffs)

    def __neg__(self) -> "SymTensor":
        return SymTensor(self.order, self.dim, -self.coeffs)

    def __mul__(self, scalar: float) -> "SymTensor":
        return SymTensor(self.order, self.dim, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def norm(self) -> float:
        """Frobenius norm of the dense tensor."""
        return float(np.sqrt(np.sum(multiplicities(self.order, self.dim) * self.coeffs ** 2)))


# === Products and contraction ===

def sym_powers(thetas, m: int) -> np.ndarray:
    """Coefficients of theta^m for each row of a (K, d) array, shape (K, nu)."""
    t = np.atleast_2d(np.asarray(thetas, dtype=float))
    idx = _index_array(m, t.shape[1])
    return np.prod(t[:, idx], axis=2)


def sym_products(vectors) -> np.ndarray:
    """
    Batched symmetrized products theta_1 ⊙ ... ⊙ theta_m.

    Args:
        vectors: (K, m, d) array

    Returns:
        (K, nu) coefficients; entry I is permanent(theta_k[I_l]) / m!
    """
    v = np.asarray(vectors, dtype=float)
    count, m, d = v.shape
    idx = _index_array(m, d)
    if m == 0:
        return np.ones((count, 1))
    total = np.zeros((count, idx.shape[0]))
    for perm in itertools.permutations(range(m)):
        term = np.ones((count, idx.shape[0]))
        for slot, source in enumerate(perm):
            term *= v[:, source, :][:, idx[:, slot]]
        total += term
    return total / math.factorial(m)


def sym_power(theta, m: int) -> SymTensor:
    """theta^⊙m; the coefficient at (i_1..i_m) is theta[i_1]...theta[i_m]."""
    t = np.asarray(theta, dtype=float).reshape(-1)
    if m < 0:
        raise InvalidInputError(f"Order must be non-negative, got {m}")
    return SymTensor(m, t.size, sym_powers(t[None, :], m)[0])


def sym_product(vectors: Sequence) -> SymTensor:
    """Symmetrized product of a non-empty list of equal-length vectors."""
    if len(vectors) == 0:
        raise InvalidInputError("sym_product needs at least one vector")
    rows = [np.asarray(v, dtype=float).reshape(-1) for v in vectors]
    dims = {r.size for r in rows}
    if len(dims) != 1:
        raise InvalidInputError(f"All vectors must share one dimension, got {sorted(dims)}")
    stacked = np.stack(rows)[None, :, :]
    return SymTensor(len(rows), rows[0].size, sym_products(stacked)[0])


def contract(f: SymTensor, g: SymTensor) -> float:
    """Full contraction <f, g> with multiplicity weights."""
    f._check_same_space(g)
    return float(np.sum(multiplicities(f.order, f.dim) * f.coeffs * g.coeffs))


def binomial_expansion(theta1, theta2, m: int) -> SymTensor:
    """Sum over q of C(m, q) theta1^(m-q) ⊙ theta2^q."""
    t1 = np.asarray(theta1, dtype=float).reshape(-1)
    t2 = np.asarray(theta2, dtype=float).reshape(-1)
    if m == 0:
        return sym_power(t1, 0)
    total = SymTensor.zeros(m, t1.size)
    for q in range(m + 1):
        term = sym_product([t1] * (m - q) + [t2] * q)
        total = total + term * math.comb(m, q)
    return total


# === Polarization ===

@dataclass(frozen=True)
class PolarizationTerm:
    subset: Tuple[int, ...]  # 1-based positions
    sign: int
    weight: float


@dataclass(frozen=True)
class PolarizationPlan:
    order: int
    terms: Tuple[PolarizationTerm, ...]

    def subsets(self) -> List[Tuple[int, ...]]:
        return [term.subset for term in self.terms]


@lru_cache(maxsize=None)
def polarization_plan(m: int) -> PolarizationPlan:
    """All non-empty subsets J of {1..m}, largest first, sign (-1)^(m-|J|), weight 1/m!."""
    if m < 1:
        raise InvalidInputError(f"Polarization needs m >= 1, got {m}")
    weight = 1.0 / math.factorial(m)
    terms = []
    for size in range(m, 0, -1):
        for subset in itertools.combinations(range(1, m + 1), size):
            terms.append(PolarizationTerm(subset=subset, sign=(-1) ** (m - size), weight=weight))
    return PolarizationPlan(order=m, terms=tuple(terms))


def subset_sums(vectors: Sequence, plan: PolarizationPlan) -> Dict[Tuple[int, ...], np.ndarray]:
    """theta_J = sum of theta_j over j in J, for every subset of the plan."""
    rows = [np.asarray(v, dtype=float).reshape(-1) for v in vectors]
    return {J: np.sum([rows[j - 1] for j in J], axis=0) for J in plan.subsets()}


def polarize(m: int, power_values: Mapping) -> float:
    """
    <f, theta_1 ⊙ ... ⊙ theta_m> from the pure-power values <f, theta_J^m>.

    Keys may be tuples, lists or sets of 1-based positions.
    """
    plan = polarization_plan(m)
    values = {tuple(sorted(int(j) for j in key)): float(v) for key, v in power_values.items()}
    missing = [term.subset for term in plan.terms if term.subset not in values]
    if missing:
        raise IncompleteInputError(f"Missing power values for subsets {missing}", missing=missing)
    return math.fsum(term.sign * term.weight * values[term.subset] for term in plan.terms)


# === Genericity ===

def _unit_rows(vectors) -> np.ndarray:
    v = np.asarray(vectors, dtype=float)
    if v.ndim != 2 or v.shape[0] == 0:
        raise InvalidInputError("Genericity needs a non-empty list of vectors")
    norms = np.linalg.norm(v, axis=1)
    safe = np.where(norms > 0.0, norms, 1.0)
    u = v / safe[:, None]
    u[norms == 0.0] = 0.0
    return u


def pairwise_margins(vectors) -> Dict[Tuple[int, int], float]:
    """Smallest singular value of [u_i, u_j] for every pair of normalized rows."""
    u = _unit_rows(vectors)
    margins = {}
    for i, j in itertools.combinations(range(len(u)), 2):
        pair = np.stack([u[i], u[j]], axis=1)
        margins[(i, j)] = float(np.linalg.svd(pair, compute_uv=False)[-1])
    return margins


def dependent_pair(vectors, tol: float = PAIR_TOL) -> Optional[Tuple[int, int]]:
    """First pair (1-based) whose margin is at or below tol, else None."""
    for (i, j), margin in pairwise_margins(vectors).items():
        if margin <= tol:
            return i + 1, j + 1
    return None


def generic_margin(vectors, m: int) -> float:
    """
    Numeric margin behind is_generic.

    In R^3 with m+1 vectors this is the smallest pairwise margin; otherwise it
    is the nu-th singular value of the power-evaluation matrix.
    """
    u = _unit_rows(vectors)
    d = u.shape[1]
    if np.any(np.linalg.norm(u, axis=1) == 0.0):
        return 0.0
    if d == 3 and len(u) == m + 1:
        margins = pairwise_margins(u)
        return min(margins.values()) if margins else 1.0
    nu = sym_dim(m, d)
    if len(u) < nu:
        return 0.0
    evaluations = sym_powers(u, m) * multiplicities(m, d)
    return float(np.linalg.svd(evaluations, compute_uv=False)[nu - 1])


def is_generic(vectors, m: int, tol: float = PAIR_TOL) -> bool:
    """True when the m-th powers of the vectors determine any symmetric m-tensor."""
    return generic_margin(vectors, m) > tol


# === A_ij basis system and Cramer coefficients ===

@dataclass(frozen=True)
class BasisSystem:
    """
    Columns A_ij = (xi_j)_alpha^i ⊙ (xi_j)_beta^(m-i) in the order A_01, A_11, A_12, ...

    ``columns[k] = (i, branch)`` names the channel and the 1-based index of
    the direction in the caller's list; ``labels`` is the 1-based direction
    order used for j = 1..m+1 (identity unless the natural order is singular).
    """

    order: int
    directions: np.ndarray
    columns: Tuple[Key, ...]
    matrix: np.ndarray
    det: float
    labels: Tuple[int, ...]

    @property
    def relabelled(self) -> bool:
        return self.labels != tuple(range(1, self.order + 2))


def _assemble_columns(frames: Sequence[Frame], labels: Sequence[int], m: int):
    columns = []
    vectors = []
    for i in range(m + 1):
        for j in range(1, i + 2):
            frame = frames[labels[j - 1] - 1]
            columns.append((i, labels[j - 1]))
            vectors.append([frame.alpha] * i + [frame.beta] * (m - i))
    if m == 0:
        matrix = np.ones((1, 1))
    else:
        matrix = sym_products(np.array(vectors)).T
    return tuple(columns), matrix


def basis_system(directions, tol: float = DET_TOL) -> BasisSystem:
    """
    Assemble the A_ij system for m+1 pairwise independent directions in R^3.

    The natural direction order is tried first; when its determinant vanishes
    the remaining orders are tried and the one used is recorded in ``labels``.
    """
    d = np.asarray(directions, dtype=float)
    if d.ndim != 2 or d.shape[0] == 0 or d.shape[1] != 3:
        raise InvalidInputError(f"basis_system expects a (m+1, 3) array of directions, got shape {d.shape}")
    m = d.shape[0] - 1
    pair = dependent_pair(d)
    if pair is not None:
        raise DegenerateSystemError(f"Directions {pair[0]} and {pair[1]} are linearly dependent", pair=pair)

    frames = [canonical_frame(row) for row in d]
    smallest = 0.0
    for order in itertools.permutations(range(1, m + 2)):
        columns, matrix = _assemble_columns(frames, order, m)
        det = float(np.linalg.det(matrix))
        if abs(det) > tol:
            if order != tuple(range(1, m + 2)):
                logger.warning(f"[SYMTENSOR] Natural A_ij system singular, using direction order {order}")
            unit_dirs = d / np.linalg.norm(d, axis=1)[:, None]
            return BasisSystem(m, unit_dirs, columns, matrix, det, tuple(order))
        smallest = max(smallest, abs(det))
    raise DegenerateSystemError(f"A_ij system singular for every direction order (max |det| = {smallest:.3e})",
                                det=smallest)


def cramer_coefficients(system: BasisSystem, theta, tol: float = DET_TOL) -> Dict[Key, float]:
    """
    Coefficients c_ij with theta^m = sum c_ij A_ij, keyed by (i, branch).

    Solved with one dense factorization; c_ij equals Delta_ij(theta) / Delta.
    """
    if abs(system.det) <= tol:
        raise DegenerateSystemError(f"A_ij system determinant {system.det:.3e} below tolerance", det=system.det)
    rhs = sym_power(np.asarray(theta, dtype=float).reshape(-1), system.order).coeffs
    solution = np.linalg.solve(system.matrix, rhs)
    return {key: float(c) for key, c in zip(system.columns, solution)}


def vector_cramer(frame1: Frame, frame2: Frame, l: int, v, tol: float = DET_TOL) -> np.ndarray:
    """
    Coefficients c_1..c_n with v = sum_{i<n} c_i eta_i(xi_1) + c_n eta_l(xi_2).
    """
    n = frame1.n
    if frame2.n != n:
        raise InvalidInputError(f"Frames live in different dimensions ({n} vs {frame2.n})")
    vec = np.asarray(v, dtype=float).reshape(-1)
    if vec.size != n:
        raise InvalidInputError(f"Vector must have {n} components, got {vec.size}")
    matrix = np.column_stack([*frame1.eta, frame2.eta_axis(l)])
    det = float(np.linalg.det(matrix))
    if abs(det) <= tol:
        raise DegenerateSystemError(f"Vector system with axis l={l} is singular (det = {det:.3e})", det=det)
    return np.linalg.solve(matrix, vec)
