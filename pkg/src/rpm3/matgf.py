"""Dense matrices over F_q backed by numpy, plus the A/B block partitioning.

Entries are stored as int64 when ``(q-1)**2`` fits in a signed 64-bit word,
otherwise as Python ints in an object array.  Matrix products split the
right operand into narrow bit chunks so every partial dot product stays
below 2**63 and no intermediate ever overflows.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from rpm3.errors import FieldMismatchError, IncompleteDecodeError, ShapeError
from rpm3.gf import PrimeField

_I63 = 1 << 63


def storage_dtype(q: int):
    return np.int64 if (q - 1) ** 2 < _I63 else object


def _chunk_bits(q: int, inner: int) -> int:
    # largest b with q * 2^b * inner < 2^63
    b = 0
    while q * (1 << (b + 1)) * max(inner, 1) < _I63:
        b += 1
    return b


def mulmod(a: np.ndarray, b: np.ndarray, q: int) -> np.ndarray:
    """Exact ``a @ b mod q`` for canonical residues."""
    inner = a.shape[-1]
    if a.dtype == object or b.dtype == object:
        return (a.astype(object) @ b.astype(object)) % q
    if (q - 1) ** 2 * max(inner, 1) < _I63:
        return (a @ b) % q
    bits = _chunk_bits(q, inner)
    if bits < 1:
        return ((a.astype(object) @ b.astype(object)) % q).astype(np.int64)
    mask = (1 << bits) - 1
    nchunks = -(-q.bit_length() // bits)
    acc = np.zeros((a.shape[0], b.shape[1]), dtype=np.int64)
    for c in range(nchunks - 1, -1, -1):
        part = (a @ ((b >> (c * bits)) & mask)) % q
        acc = (acc * (1 << bits) + part) % q
    return acc


def scale_add(acc: np.ndarray, w: int, m: np.ndarray, q: int) -> np.ndarray:
    """``(acc + w*m) mod q`` without overflow."""
    return (acc + (w % q) * m % q) % q


@dataclass(frozen=True, eq=False)
class MatrixFq:
    """Immutable matrix over F_q."""

    data: np.ndarray
    q: int

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2 or 0 in arr.shape:
            raise ShapeError(f"matrix must be 2-D and nonempty, got shape {arr.shape}")
        arr = np.array(arr % self.q, dtype=storage_dtype(self.q))
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def zeros(cls, rows: int, cols: int, q: int) -> "MatrixFq":
        return cls(np.zeros((rows, cols), dtype=storage_dtype(q)), q)

    @classmethod
    def identity(cls, n: int, q: int) -> "MatrixFq":
        return cls(np.eye(n, dtype=storage_dtype(q)), q)

    @classmethod
    def random(cls, rows: int, cols: int, q: int, rng: np.random.Generator) -> "MatrixFq":
        if storage_dtype(q) is object:
            vals = [[int(rng.integers(0, q, dtype=np.uint64)) for _ in range(cols)] for _ in range(rows)]
            return cls(np.array(vals, dtype=object), q)
        return cls(rng.integers(0, q, size=(rows, cols), dtype=np.int64), q)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def _check(self, other: "MatrixFq"):
        if not isinstance(other, MatrixFq):
            raise TypeError(f"expected MatrixFq, got {type(other).__name__}")
        if other.q != self.q:
            raise FieldMismatchError(f"moduli differ: {self.q} vs {other.q}")

    def __add__(self, other: "MatrixFq") -> "MatrixFq":
        self._check(other)
        if self.shape != other.shape:
            raise ShapeError(f"cannot add {self.shape} and {other.shape}")
        return MatrixFq((self.data + other.data) % self.q, self.q)

    def __sub__(self, other: "MatrixFq") -> "MatrixFq":
        self._check(other)
        if self.shape != other.shape:
            raise ShapeError(f"cannot subtract {other.shape} from {self.shape}")
        return MatrixFq((self.data - other.data) % self.q, self.q)

    def __neg__(self) -> "MatrixFq":
        return MatrixFq(-self.data % self.q, self.q)

    def scale(self, w: int) -> "MatrixFq":
        return MatrixFq((w % self.q) * self.data % self.q, self.q)

    def __matmul__(self, other: "MatrixFq") -> "MatrixFq":
        return matmul(self, other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MatrixFq):
            return NotImplemented
        return self.q == other.q and self.shape == other.shape and bool(np.array_equal(self.data, other.data))

    def __hash__(self):
        return hash((self.q, self.shape, self.data.tobytes()))

    def tolist(self) -> list[list[int]]:
        return [[int(v) for v in row] for row in self.data]

    def __repr__(self):
        return f"MatrixFq({self.rows}x{self.cols}, q={self.q})"


def matmul(a: MatrixFq, b: MatrixFq) -> MatrixFq:
    a._check(b)
    if a.cols != b.rows:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return MatrixFq(mulmod(a.data, b.data, a.q), a.q)


def linear_combination(weights: Sequence[int], mats: Sequence[MatrixFq]) -> MatrixFq:
    """``sum_j weights[j] * mats[j]`` over F_q."""
    if len(weights) != len(mats) or not mats:
        raise ShapeError("need one weight per matrix and at least one matrix")
    q = mats[0].q
    acc = np.zeros(mats[0].shape, dtype=storage_dtype(q))
    for w, m in zip(weights, mats):
        if m.q != q:
            raise FieldMismatchError(f"moduli differ: {q} vs {m.q}")
        if m.shape != mats[0].shape:
            raise ShapeError(f"inconsistent shapes {mats[0].shape} vs {m.shape}")
        if w % q:
            acc = scale_add(acc, w, m.data, q)
    return MatrixFq(acc, q)


@dataclass(frozen=True)
class BlockPartition:
    """How A (rows into m) and B (columns into k) were cut.

    ``rows``/``cols`` are the true dimensions of C; ``padded_rows`` and
    ``padded_cols`` include the zero padding added to make blocks uniform.
    """

    m: int
    k: int
    rows: int
    cols: int
    padded_rows: int
    padded_cols: int

    @property
    def block_rows(self) -> int:
        return self.padded_rows // self.m

    @property
    def block_cols(self) -> int:
        return self.padded_cols // self.k


def partition(a: MatrixFq, m: int, axis: str = "rows") -> tuple[list[MatrixFq], int]:
    """Cut ``a`` into ``m`` equal blocks along ``axis`` ("rows" or "cols").

    The last block is zero-padded when ``m`` does not divide the dimension.
    Returns the blocks and the padded dimension.
    """
    if axis not in ("rows", "cols"):
        raise ValueError(f"axis must be 'rows' or 'cols', not {axis!r}")
    dim = a.rows if axis == "rows" else a.cols
    if m < 1 or m > dim:
        raise ValueError(f"cannot split dimension {dim} into {m} blocks")
    size = -(-dim // m)
    padded = size * m
    data = a.data
    if padded != dim:
        pad = ((0, padded - dim), (0, 0)) if axis == "rows" else ((0, 0), (0, padded - dim))
        data = np.pad(data, pad)
    if axis == "rows":
        blocks = [MatrixFq(data[i * size:(i + 1) * size, :], a.q) for i in range(m)]
    else:
        blocks = [MatrixFq(data[:, i * size:(i + 1) * size], a.q) for i in range(m)]
    return blocks, padded


def split_operands(a: MatrixFq, b: MatrixFq, m: int, k: int):
    """Row-split A into m blocks, column-split B into k blocks."""
    if a.cols != b.rows:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    a_blocks, pr = partition(a, m, "rows")
    b_blocks, pc = partition(b, k, "cols")
    return a_blocks, b_blocks, BlockPartition(m, k, a.rows, b.cols, pr, pc)


def assemble_C(blocks: Mapping[tuple[int, int], MatrixFq], part: BlockPartition) -> MatrixFq:
    """Stack the ``(i, j)`` blocks (0-based) into C and strip padding."""
    missing = [(i, j) for i in range(part.m) for j in range(part.k) if (i, j) not in blocks]
    if missing:
        raise IncompleteDecodeError(f"missing blocks {missing}")
    shape = (part.block_rows, part.block_cols)
    for key, blk in blocks.items():
        if blk.shape != shape:
            raise ShapeError(f"block {key} has shape {blk.shape}, expected {shape}")
    rows = [np.hstack([blocks[i, j].data for j in range(part.k)]) for i in range(part.m)]
    full = np.vstack(rows)
    q = next(iter(blocks.values())).q
    return MatrixFq(full[:part.rows, :part.cols], q)


def load_matrix(path: str | Path, q: int | None = None) -> MatrixFq:
    """Read the plain-text format: ``rows cols q`` then row-major integers."""
    tokens = Path(path).read_text().split()
    if len(tokens) < 3:
        raise ShapeError(f"{path}: missing 'rows cols q' header")
    rows, cols, fq = (int(t) for t in tokens[:3])
    if q is not None and fq != q:
        raise FieldMismatchError(f"{path}: file modulus {fq} differs from scenario modulus {q}")
    vals = [int(t) for t in tokens[3:]]
    if len(vals) != rows * cols:
        raise ShapeError(f"{path}: expected {rows * cols} entries, found {len(vals)}")
    PrimeField(fq)
    return MatrixFq(np.array(vals, dtype=object).reshape(rows, cols), fq)


def save_matrix(mat: MatrixFq, path: str | Path) -> None:
    lines = [f"{mat.rows} {mat.cols} {mat.q}"]
    lines += [" ".join(str(int(v)) for v in row) for row in mat.data]
    Path(path).write_text("\n".join(lines) + "\n")
