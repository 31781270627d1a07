"""LT-style fountain coding of the A/B blocks and the product-symbol decoder.

A coded block is a binary combination of source blocks.  Multiplying a coded
A-block by a coded B-block gives a *product symbol*: a 0/1 combination of
the unknown blocks ``C[i, j] = A_i B_j`` whose support is the outer product
of the two coefficient vectors.  :class:`PeelingDecoder` resolves the
``m*k`` unknowns by peeling, and falls back to Gaussian elimination over
F_q when peeling stalls.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from rpm3.errors import CorruptionError, IncompleteDecodeError, NeedMoreSymbols, ShapeError
from rpm3.matgf import MatrixFq, storage_dtype


@dataclass(frozen=True)
class SolitonParams:
    c: float = 0.03
    delta: float = 0.5

    def __post_init__(self):
        if not self.c > 0 or not 0 < self.delta < 1:
            raise ValueError(f"need c > 0 and 0 < delta < 1, got c={self.c}, delta={self.delta}")


@functools.lru_cache(maxsize=64)
def robust_soliton_pmf(k: int, params: SolitonParams = SolitonParams()) -> np.ndarray:
    """Robust soliton degree pmf over degrees ``1..k`` (entry ``d-1`` is P(d)).

    The spike term is dropped when it would fall outside ``[1, k]`` or carry
    negative mass (``S <= delta``), which happens for small ``k``.
    """
    if k < 1:
        raise ValueError("need at least one source block")
    ideal = np.zeros(k)
    ideal[0] = 1.0 / k
    for d in range(2, k + 1):
        ideal[d - 1] = 1.0 / (d * (d - 1))
    s = params.c * math.log(k / params.delta) * math.sqrt(k)
    extra = np.zeros(k)
    if s > 0:
        pivot = int(k / s)
        for d in range(1, min(pivot, k + 1)):
            extra[d - 1] = s / (k * d)
        if 1 <= pivot <= k and s > params.delta:
            extra[pivot - 1] = s * math.log(s / params.delta) / k
    mu = ideal + extra
    mu /= mu.sum()
    mu.setflags(write=False)
    return mu


@dataclass(frozen=True)
class CoefVector:
    bits: tuple[int, ...]

    def __post_init__(self):
        if not self.bits or any(b not in (0, 1) for b in self.bits) or not any(self.bits):
            raise ValueError(f"coefficient vector must be binary with at least one 1, got {self.bits}")

    @property
    def degree(self) -> int:
        return sum(self.bits)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(i for i, b in enumerate(self.bits) if b)

    def __len__(self):
        return len(self.bits)

    @classmethod
    def unit(cls, length: int, i: int) -> "CoefVector":
        return cls(tuple(int(j == i) for j in range(length)))

    @classmethod
    def from_support(cls, length: int, support: Iterable[int]) -> "CoefVector":
        s = set(support)
        return cls(tuple(int(j in s) for j in range(length)))


def draw_coef(source_count: int, params: SolitonParams, rng: np.random.Generator) -> CoefVector:
    """Robust-soliton degree, then a uniformly random support of that size."""
    pmf = robust_soliton_pmf(source_count, params)
    degree = int(rng.choice(source_count, p=pmf)) + 1
    support = rng.choice(source_count, size=degree, replace=False)
    return CoefVector.from_support(source_count, support.tolist())


@dataclass(frozen=True)
class CodedBlock:
    coef: CoefVector
    data: MatrixFq


def encode_block(sources: Sequence[MatrixFq], coef: CoefVector) -> CodedBlock:
    if len(coef) != len(sources):
        raise ShapeError(f"{len(coef)} coefficients for {len(sources)} source blocks")
    shape = sources[0].shape
    if any(s.shape != shape for s in sources):
        raise ShapeError("source blocks must share one shape")
    q = sources[0].q
    acc = np.zeros(shape, dtype=storage_dtype(q))
    for i in coef.support:
        acc = (acc + sources[i].data) % q
    return CodedBlock(coef, MatrixFq(acc, q))


@dataclass(frozen=True)
class ProductSymbol:
    coef_a: CoefVector
    coef_b: CoefVector
    value: MatrixFq

    def unknowns(self) -> list[tuple[int, int]]:
        return [(i, j) for i in self.coef_a.support for j in self.coef_b.support]


def solve_system(rows: Sequence[Sequence[int]], rhs: Sequence[MatrixFq], n_unknowns: int, q: int) -> list[MatrixFq]:
    """Gauss-Jordan over F_q for ``rows @ X = rhs`` with matrix-valued unknowns.

    Raises :class:`NeedMoreSymbols` when the coefficient rank is below
    ``n_unknowns``.
    """
    if len(rows) < n_unknowns:
        raise NeedMoreSymbols(f"{len(rows)} equations for {n_unknowns} unknowns")
    shape = rhs[0].shape
    width = shape[0] * shape[1]
    dtype = storage_dtype(q)
    aug = np.zeros((len(rows), n_unknowns + width), dtype=dtype)
    for r, (row, val) in enumerate(zip(rows, rhs)):
        aug[r, :n_unknowns] = np.asarray(row, dtype=dtype) % q
        aug[r, n_unknowns:] = val.data.reshape(-1)
    pivot_row = 0
    for col in range(n_unknowns):
        nz = np.nonzero(aug[pivot_row:, col])[0]
        if nz.size == 0:
            raise NeedMoreSymbols(f"coefficient rank below {n_unknowns}")
        p = pivot_row + int(nz[0])
        if p != pivot_row:
            aug[[pivot_row, p]] = aug[[p, pivot_row]]
        inv = pow(int(aug[pivot_row, col]), q - 2, q)
        aug[pivot_row] = aug[pivot_row] * inv % q
        factors = aug[:, col].copy()
        factors[pivot_row] = 0
        rows_to_fix = np.nonzero(factors)[0]
        if rows_to_fix.size:
            f = factors[rows_to_fix][:, None]
            aug[rows_to_fix] = (aug[rows_to_fix] - f * aug[pivot_row][None, :] % q) % q
        pivot_row += 1
    return [MatrixFq(aug[i, n_unknowns:].reshape(shape), q) for i in range(n_unknowns)]


def ge_fallback(symbols: Sequence[ProductSymbol], m: int, k: int) -> dict[tuple[int, int], MatrixFq]:
    """Solve for every ``C[i, j]`` from accumulated product symbols."""
    if not symbols:
        raise NeedMoreSymbols("no symbols")
    q = symbols[0].value.q
    rows = []
    for s in symbols:
        row = [0] * (m * k)
        for i, j in s.unknowns():
            row[i * k + j] = 1
        rows.append(row)
    sol = solve_system(rows, [s.value for s in symbols], m * k, q)
    return {(i, j): sol[i * k + j] for i in range(m) for j in range(k)}


@dataclass
class _Pending:
    unknowns: set
    value: np.ndarray


@dataclass
class PeelingDecoder:
    """Incremental decoder for the ``m*k`` blocks of C.

    Push symbols one at a time.  Each push peels as far as possible; when
    peeling stalls and enough unresolved equations have accumulated, the
    residual system is handed to Gaussian elimination (unless
    ``fallback=False``).  Symbols pushed after completion are counted but
    otherwise ignored.
    """

    m: int
    k: int
    q: int
    fallback: bool = True
    resolved: dict = field(default_factory=dict)
    consumed: int = 0
    peel_steps: int = 0
    ge_solves: int = 0
    _pending: list = field(default_factory=list)
    _by_unknown: dict = field(default_factory=dict)
    _stored: int = 0
    _ge_checked_at: int = -1

    @property
    def unknown_count(self) -> int:
        return self.m * self.k

    @property
    def complete(self) -> bool:
        return len(self.resolved) == self.unknown_count

    def push(self, symbol: ProductSymbol) -> bool:
        """Feed one symbol; returns True once every block is resolved."""
        if len(symbol.coef_a) != self.m or len(symbol.coef_b) != self.k:
            raise ShapeError(f"symbol coefficient lengths do not match m={self.m}, k={self.k}")
        self.consumed += 1
        if self.complete:
            return True
        q = self.q
        residual = symbol.value.data
        unknowns = set()
        for key in symbol.unknowns():
            if key in self.resolved:
                residual = (residual - self.resolved[key]) % q
            else:
                unknowns.add(key)
        self._absorb(unknowns, residual)
        if not self.complete and self.fallback:
            self._try_elimination()
        return self.complete

    def _absorb(self, unknowns: set, residual: np.ndarray) -> None:
        if not unknowns:
            if np.any(residual):
                raise CorruptionError("symbol contradicts already-resolved blocks")
            return
        if len(unknowns) > 1:
            entry = _Pending(unknowns, residual)
            idx = len(self._pending)
            self._pending.append(entry)
            self._stored += 1
            for key in unknowns:
                self._by_unknown.setdefault(key, set()).add(idx)
            return
        ripple = [(next(iter(unknowns)), residual)]
        while ripple:
            key, value = ripple.pop()
            if key in self.resolved:
                if not np.array_equal(self.resolved[key], value):
                    raise CorruptionError(f"conflicting values for block {key}")
                continue
            self.resolved[key] = value
            self.peel_steps += 1
            for idx in sorted(self._by_unknown.pop(key, ())):
                entry = self._pending[idx]
                if entry is None:
                    continue
                entry.unknowns.discard(key)
                entry.value = (entry.value - value) % self.q
                if len(entry.unknowns) == 1:
                    last = next(iter(entry.unknowns))
                    self._by_unknown[last].discard(idx)
                    ripple.append((last, entry.value))
                    self._pending[idx] = None
                elif not entry.unknowns:
                    if np.any(entry.value):
                        raise CorruptionError("symbol contradicts already-resolved blocks")
                    self._pending[idx] = None

    def _try_elimination(self) -> None:
        live = [e for e in self._pending if e is not None]
        unresolved = sorted({key for e in live for key in e.unknowns})
        if not live or len(live) < len(unresolved) or self._stored == self._ge_checked_at:
            return
        self._ge_checked_at = self._stored
        col = {key: c for c, key in enumerate(unresolved)}
        rows = []
        for e in live:
            row = [0] * len(unresolved)
            for key in e.unknowns:
                row[col[key]] = 1
            rows.append(row)
        try:
            sol = solve_system(rows, [MatrixFq(e.value, self.q) for e in live], len(unresolved), self.q)
        except NeedMoreSymbols:
            return
        self.ge_solves += 1
        for key, val in zip(unresolved, sol):
            self.resolved[key] = val.data
        self._pending.clear()
        self._by_unknown.clear()

    def blocks(self) -> dict[tuple[int, int], MatrixFq]:
        if not self.complete:
            raise IncompleteDecodeError(f"{len(self.resolved)} of {self.unknown_count} blocks resolved")
        return {key: MatrixFq(v, self.q) for key, v in self.resolved.items()}


def peel_decode(symbols: Iterable[ProductSymbol], m: int, k: int, fallback: bool = True) -> PeelingDecoder:
    """Run a fresh decoder over ``symbols`` until it completes or they run out."""
    dec = None
    for s in symbols:
        if dec is None:
            dec = PeelingDecoder(m, k, s.value.q, fallback=fallback)
        if dec.push(s):
            break
    if dec is None:
        raise NeedMoreSymbols("no symbols")
    return dec


def measured_overhead(decoder: PeelingDecoder) -> float:
    """Fountain overhead ``consumed / (m*k) - 1`` of a finished decode."""
    if not decoder.complete:
        raise IncompleteDecodeError("overhead is only defined after decoding completes")
    eps = decoder.consumed / decoder.unknown_count - 1
    assert eps >= 0
    return eps
