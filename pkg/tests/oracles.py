"""Reference implementations the library is checked against."""

import numpy as np

from rpm3.fountain import ProductSymbol
from rpm3.matgf import MatrixFq


def gauss_solve(rows, rhs, q):
    """Solve ``rows @ x = rhs`` over F_q (q < 2**31), rhs entries being flat int lists.

    Plain row-by-row Gauss-Jordan.  Returns the solution vectors, or None
    when the rank is deficient.
    """
    assert q < 1 << 31
    n = len(rows[0])
    aug = np.array([list(r) + list(v) for r, v in zip(rows, rhs)], dtype=np.int64) % q
    piv = 0
    for col in range(n):
        nz = [r for r in range(piv, len(aug)) if aug[r, col]]
        if not nz:
            return None
        sel = nz[0]
        aug[[piv, sel]] = aug[[sel, piv]]
        aug[piv] = aug[piv] * pow(int(aug[piv, col]), q - 2, q) % q
        for r in range(len(aug)):
            if r != piv and aug[r, col]:
                aug[r] = (aug[r] - aug[r, col] * aug[piv]) % q
        piv += 1
    return [aug[i, n:].tolist() for i in range(n)]


def symbol_row(coef_a, coef_b):
    return [a * b for a in coef_a for b in coef_b]


def make_symbol(ca, cb, a_blocks, b_blocks):
    q = a_blocks[0].q
    a = sum((a_blocks[i].data for i in ca.support), np.zeros_like(a_blocks[0].data)) % q
    b = sum((b_blocks[j].data for j in cb.support), np.zeros_like(b_blocks[0].data)) % q
    return ProductSymbol(ca, cb, MatrixFq(a, q) @ MatrixFq(b, q))


def oracle_blocks(symbols, m, k, q):
    rows = [symbol_row(s.coef_a.bits, s.coef_b.bits) for s in symbols]
    shape = symbols[0].value.shape
    sol = gauss_solve(rows, [s.value.data.reshape(-1).tolist() for s in symbols], q)
    if sol is None:
        return None
    return {(i, j): np.array(sol[i * k + j], dtype=np.int64).reshape(shape) for i in range(m) for j in range(k)}
