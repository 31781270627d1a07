"""Arithmetic in a prime field F_q and Lagrange interpolation over it.

Scalars are plain Python ints in ``[0, q)``; :class:`FieldElement` wraps one
with its field for code that wants operator syntax and modulus checking.
Python ints are arbitrary precision, so products never overflow.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Iterable, Sequence

from rpm3.errors import ConfigurationError, FieldMismatchError, InvalidEvaluationSetError

DEFAULT_Q = 2147483647  # 2^31 - 1

# Deterministic Miller-Rabin witnesses, valid for every n < 3.3e24.
_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)


@functools.lru_cache(maxsize=256)
def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in _MR_WITNESSES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_WITNESSES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class PrimeField:
    """The field F_q for a prime ``q < 2**63``."""

    q: int = DEFAULT_Q

    def __post_init__(self):
        if not isinstance(self.q, int) or self.q >= 1 << 63 or not is_prime(self.q):
            raise ConfigurationError(f"field modulus must be a prime below 2^63, got {self.q!r}")

    def __call__(self, value: int) -> "FieldElement":
        return FieldElement(value % self.q, self)

    # Scalar operations on canonical ints.

    def add(self, a: int, b: int) -> int:
        return (a + b) % self.q

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.q

    def neg(self, a: int) -> int:
        return -a % self.q

    def mul(self, a: int, b: int) -> int:
        return a * b % self.q

    def inv(self, a: int) -> int:
        a %= self.q
        if a == 0:
            raise ZeroDivisionError("0 has no inverse in F_q")
        return pow(a, self.q - 2, self.q)

    def div(self, a: int, b: int) -> int:
        return a * self.inv(b) % self.q

    def batch_inv(self, values: Sequence[int]) -> list[int]:
        """Invert many nonzero elements with a single exponentiation."""
        q = self.q
        prefix = [1] * (len(values) + 1)
        for i, v in enumerate(values):
            if v % q == 0:
                raise ZeroDivisionError("0 has no inverse in F_q")
            prefix[i + 1] = prefix[i] * v % q
        acc = pow(prefix[-1], q - 2, q)
        out = [0] * len(values)
        for i in range(len(values) - 1, -1, -1):
            out[i] = acc * prefix[i] % q
            acc = acc * values[i] % q
        return out

    # Lagrange machinery.

    def check_distinct(self, points: Iterable[int]) -> list[int]:
        pts = [p % self.q for p in points]
        if len(set(pts)) != len(pts):
            raise InvalidEvaluationSetError(f"evaluation points are not distinct mod {self.q}: {pts}")
        return pts

    def lagrange_basis(self, points: Sequence[int], delta: int, x: int) -> int:
        """Value at ``x`` of the basis polynomial that is 1 at ``points[delta]``.

        ``delta`` is a 0-based index into ``points``.
        """
        pts = self.check_distinct(points)
        if not 0 <= delta < len(pts):
            raise IndexError(f"basis index {delta} out of range for {len(pts)} points")
        q = self.q
        num = den = 1
        xd = pts[delta]
        for nu, xn in enumerate(pts):
            if nu != delta:
                num = num * (x - xn) % q
                den = den * (xd - xn) % q
        return num * self.inv(den) % q

    def basis_weights(self, points: Sequence[int], x: int) -> list[int]:
        """All basis values ``[L_0(x), ..., L_{k-1}(x)]`` in O(k^2)."""
        pts = self.check_distinct(points)
        q = self.q
        x %= q
        if x in pts:
            return [int(p == x) for p in pts]
        dens = []
        nums = []
        for d, xd in enumerate(pts):
            num = den = 1
            for nu, xn in enumerate(pts):
                if nu != d:
                    num = num * (x - xn) % q
                    den = den * (xd - xn) % q
            nums.append(num)
            dens.append(den)
        return [n * i % q for n, i in zip(nums, self.batch_inv(dens))]

    def basis_coefficients(self, points: Sequence[int]) -> list[list[int]]:
        """Coefficient vectors (lowest degree first) of every basis polynomial.

        Row ``j`` holds the coefficients of L_j, so for samples ``y`` the
        interpolant has coefficients ``sum_j y[j] * rows[j]``.
        """
        pts = self.check_distinct(points)
        q = self.q
        k = len(pts)
        # master(x) = prod (x - p), lowest degree first
        master = [1]
        for p in pts:
            nxt = [0] * (len(master) + 1)
            for i, c in enumerate(master):
                nxt[i] = (nxt[i] - p * c) % q
                nxt[i + 1] = (nxt[i + 1] + c) % q
            master = nxt
        rows = []
        dens = []
        for j, xj in enumerate(pts):
            # synthetic division of master by (x - xj)
            quot = [0] * k
            carry = 0
            for i in range(k, 0, -1):
                carry = (master[i] + carry * xj) % q
                quot[i - 1] = carry
            rows.append(quot)
            den = 1
            for nu, xn in enumerate(pts):
                if nu != j:
                    den = den * (xj - xn) % q
            dens.append(den)
        invs = self.batch_inv(dens)
        return [[c * w % q for c in row] for row, w in zip(rows, invs)]

    def interpolate(self, samples: Sequence[tuple[int, int]]) -> "Polynomial":
        if not samples:
            raise ValueError("cannot interpolate from zero samples")
        xs = [int(x) for x, _ in samples]
        ys = [int(y) % self.q for _, y in samples]
        rows = self.basis_coefficients(xs)
        q = self.q
        coeffs = [0] * len(xs)
        for y, row in zip(ys, rows):
            if y:
                for i, c in enumerate(row):
                    coeffs[i] = (coeffs[i] + y * c) % q
        return Polynomial(tuple(coeffs), self)


@dataclass(frozen=True)
class FieldElement:
    value: int
    field: PrimeField

    def __post_init__(self):
        if not 0 <= self.value < self.field.q:
            raise ValueError(f"{self.value} is not a canonical residue mod {self.field.q}")

    def _other(self, other) -> int:
        if isinstance(other, FieldElement):
            if other.field.q != self.field.q:
                raise FieldMismatchError(f"moduli differ: {self.field.q} vs {other.field.q}")
            return other.value
        if isinstance(other, int):
            return other % self.field.q
        return NotImplemented

    def _wrap(self, v: int) -> "FieldElement":
        return FieldElement(v, self.field)

    def __add__(self, other):
        o = self._other(other)
        return NotImplemented if o is NotImplemented else self._wrap(self.field.add(self.value, o))

    __radd__ = __add__

    def __sub__(self, other):
        o = self._other(other)
        return NotImplemented if o is NotImplemented else self._wrap(self.field.sub(self.value, o))

    def __rsub__(self, other):
        o = self._other(other)
        return NotImplemented if o is NotImplemented else self._wrap(self.field.sub(o, self.value))

    def __mul__(self, other):
        o = self._other(other)
        return NotImplemented if o is NotImplemented else self._wrap(self.field.mul(self.value, o))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._other(other)
        return NotImplemented if o is NotImplemented else self._wrap(self.field.div(self.value, o))

    def __neg__(self):
        return self._wrap(self.field.neg(self.value))

    def inv(self) -> "FieldElement":
        return self._wrap(self.field.inv(self.value))

    def __int__(self):
        return self.value

    def __repr__(self):
        return f"{self.value} (mod {self.field.q})"


@dataclass(frozen=True)
class Polynomial:
    """Scalar polynomial over F_q, coefficients lowest degree first."""

    coeffs: tuple[int, ...]
    field: PrimeField

    @property
    def degree(self) -> int:
        for i in range(len(self.coeffs) - 1, -1, -1):
            if self.coeffs[i]:
                return i
        return -1

    def __call__(self, x: int) -> int:
        q = self.field.q
        acc = 0
        for c in reversed(self.coeffs):
            acc = (acc * x + c) % q
        return acc


# Module-level helpers for code that only has FieldElements at hand.

def add(a: FieldElement, b: FieldElement) -> FieldElement:
    return a + b


def sub(a: FieldElement, b: FieldElement) -> FieldElement:
    return a - b


def mul(a: FieldElement, b: FieldElement) -> FieldElement:
    return a * b


def neg(a: FieldElement) -> FieldElement:
    return -a


def inv(a: FieldElement) -> FieldElement:
    return a.inv()
