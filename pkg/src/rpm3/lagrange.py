"""Per-round, per-cluster Lagrange polynomial pairs and their inversion.

For round ``t`` and cluster ``u`` the master builds

    f(x) = sum_{delta<z} R_delta L_delta(x) + sum_{kappa<d} At_kappa L_{z+kappa}(x)

over the nodes ``alphas[:d+z]`` (and ``g`` likewise with S and the coded
B-blocks).  Worker shares are ``f(beta_i), g(beta_i)``; the worker returns
``h(beta_i) = f(beta_i) g(beta_i)``.  Once enough evaluations of ``h`` are in,
the master interpolates it and reads off ``h(alpha_zeta) = R_zeta S_zeta``
(shared by every cluster of the round) and ``h(alpha_{z+kappa}) = At Bt``.

Indices are 0-based throughout; worker ids are 1-based to match the
``beta_i`` numbering.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from rpm3.errors import CorruptionError, InvalidEvaluationSetError, NotReady, ShapeError
from rpm3.fountain import CodedBlock
from rpm3.gf import PrimeField
from rpm3.matgf import MatrixFq, linear_combination, mulmod, storage_dtype


@dataclass(frozen=True)
class EvalPointSet:
    q: int
    alphas: tuple[int, ...]
    betas: tuple[int, ...]

    def __post_init__(self):
        field = PrimeField(self.q)
        a = field.check_distinct(self.alphas)
        b = field.check_distinct(self.betas)
        if set(a) & set(b):
            raise InvalidEvaluationSetError(f"alphas and betas overlap: {sorted(set(a) & set(b))}")
        if len(a) + len(b) > self.q:
            raise InvalidEvaluationSetError("more evaluation points than field elements")

    @classmethod
    def standard(cls, d_max: int, z: int, n: int, q: int) -> "EvalPointSet":
        """``alpha = 0, 1, ..., d_max+z-1`` and ``beta_i = d_max+z-1+i``."""
        top = d_max + z
        return cls(q, tuple(a % q for a in range(top)), tuple((top - 1 + i) % q for i in range(1, n + 1)))

    @property
    def field(self) -> PrimeField:
        return PrimeField(self.q)

    def beta(self, worker: int) -> int:
        return self.betas[worker - 1]


@dataclass(frozen=True)
class RoundPolynomialPair:
    t: int
    u: int
    randomness_a: tuple[MatrixFq, ...]
    randomness_b: tuple[MatrixFq, ...]
    coded_a: tuple[CodedBlock, ...]
    coded_b: tuple[CodedBlock, ...]
    points: EvalPointSet

    @property
    def d(self) -> int:
        return len(self.coded_a)

    @property
    def z(self) -> int:
        return len(self.randomness_a)

    @property
    def nodes(self) -> tuple[int, ...]:
        return self.points.alphas[: self.d + self.z]

    def f_values(self) -> list[MatrixFq]:
        return list(self.randomness_a) + [c.data for c in self.coded_a]

    def g_values(self) -> list[MatrixFq]:
        return list(self.randomness_b) + [c.data for c in self.coded_b]

    def weights(self, x: int) -> list[int]:
        return self.points.field.basis_weights(self.nodes, x)

    def f(self, x: int) -> MatrixFq:
        return linear_combination(self.weights(x), self.f_values())

    def g(self, x: int) -> MatrixFq:
        return linear_combination(self.weights(x), self.g_values())


def build_pair(t, u, d, coded_a, coded_b, R, S, points: EvalPointSet) -> RoundPolynomialPair:
    if d < 1 or len(coded_a) != d or len(coded_b) != d:
        raise ShapeError(f"need exactly d={d} >= 1 coded blocks on each side")
    if len(R) != len(S) or not R:
        raise ShapeError("need z >= 1 random matrices on each side")
    z = len(R)
    if d + z > len(points.alphas):
        raise InvalidEvaluationSetError(f"d+z={d + z} nodes needed, only {len(points.alphas)} alphas")
    a_shape, b_shape = R[0].shape, S[0].shape
    if any(m.shape != a_shape for m in list(R) + [c.data for c in coded_a]):
        raise ShapeError("A-side matrices must share one shape")
    if any(m.shape != b_shape for m in list(S) + [c.data for c in coded_b]):
        raise ShapeError("B-side matrices must share one shape")
    if a_shape[1] != b_shape[0]:
        raise ShapeError(f"A-side {a_shape} and B-side {b_shape} cannot be multiplied")
    return RoundPolynomialPair(t, u, tuple(R), tuple(S), tuple(coded_a), tuple(coded_b), points)


@dataclass(frozen=True)
class TaskShare:
    worker: int
    t: int
    u: int
    x: int
    F: MatrixFq
    G: MatrixFq


@dataclass(frozen=True)
class ResultShare:
    worker: int
    t: int
    u: int
    x: int
    H: MatrixFq


def eval_at(pair: RoundPolynomialPair, x: int) -> tuple[MatrixFq, MatrixFq]:
    if x % pair.points.q in pair.points.alphas:
        raise InvalidEvaluationSetError(f"{x} is a reserved alpha point")
    w = pair.weights(x)
    return linear_combination(w, pair.f_values()), linear_combination(w, pair.g_values())


def eval_task(pair: RoundPolynomialPair, worker: int) -> TaskShare:
    x = pair.points.beta(worker)
    F, G = eval_at(pair, x)
    return TaskShare(worker, pair.t, pair.u, x, F, G)


def compute(task: TaskShare) -> ResultShare:
    """What a worker does with its share."""
    return ResultShare(task.worker, task.t, task.u, task.x, task.F @ task.G)


@dataclass(frozen=True, eq=False)
class MatrixPolynomial:
    """Matrix-valued polynomial; ``coeffs[i]`` multiplies ``x**i``."""

    coeffs: np.ndarray
    q: int

    @property
    def degree(self) -> int:
        for i in range(self.coeffs.shape[0] - 1, -1, -1):
            if np.any(self.coeffs[i]):
                return i
        return -1

    def __call__(self, x: int) -> MatrixFq:
        q = self.q
        x %= q
        acc = np.zeros(self.coeffs.shape[1:], dtype=self.coeffs.dtype)
        for c in self.coeffs[::-1]:
            acc = (acc * x % q + c) % q
        return MatrixFq(acc, q)


def interpolate_matrix(xs: Sequence[int], ys: Sequence[MatrixFq]) -> MatrixPolynomial:
    """Entry-wise interpolation: the unique polynomial of degree < len(xs)."""
    if not xs:
        raise ValueError("cannot interpolate from zero samples")
    if len(xs) != len(ys):
        raise ShapeError("one value per point required")
    q = ys[0].q
    rows = PrimeField(q).basis_coefficients(xs)
    dtype = storage_dtype(q)
    basis = np.array(rows, dtype=dtype)  # basis[j, i]: coeff of x^i in L_j
    shape = ys[0].shape
    stacked = np.stack([y.data.reshape(-1) for y in ys]).astype(dtype)
    coeffs = mulmod(basis.T.copy(), stacked, q)
    return MatrixPolynomial(coeffs.reshape((len(xs),) + shape), q)


def required_points(d: int, z: int) -> int:
    return 2 * d + 2 * z - 1


def interpolate_h(shares: Sequence[ResultShare], shared: Sequence[tuple[int, MatrixFq]], d: int, z: int) -> MatrixPolynomial:
    """Recover ``h`` (degree ``2(d+z-1)``) from worker results plus borrowed points.

    Exactly ``2d+2z-1`` points are interpolated (borrowed points first);
    any further points are checked against the result.
    """
    pts = [(x, y) for x, y in shared] + [(s.x, s.H) for s in shares]
    need = required_points(d, z)
    if len(pts) < need:
        raise NotReady(f"{len(pts)} evaluations, need {need}")
    xs = [x for x, _ in pts]
    if len(set(x % pts[0][1].q for x in xs)) != len(xs):
        raise InvalidEvaluationSetError(f"duplicate evaluation points {xs}")
    h = interpolate_matrix(xs[:need], [y for _, y in pts[:need]])
    for x, y in pts[need:]:
        if h(x) != y:
            raise CorruptionError(f"evaluation at {x} is inconsistent with deg-{need - 1} interpolant")
    return h


def extract_shared(h: MatrixPolynomial, z: int, points: EvalPointSet) -> list[MatrixFq]:
    """``[h(alpha_1), ..., h(alpha_z)]``: the products ``R_zeta S_zeta``."""
    return [h(points.alphas[i]) for i in range(z)]


def extract_products(h: MatrixPolynomial, d: int, z: int, points: EvalPointSet) -> list[MatrixFq]:
    """``[h(alpha_{z+1}), ..., h(alpha_{z+d})]``: the coded products."""
    return [h(points.alphas[z + kappa]) for kappa in range(d)]
