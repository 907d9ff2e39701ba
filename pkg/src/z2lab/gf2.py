"""Linear algebra over the two-element field.

Small dense routines; matrices are ``uint8`` arrays with entries in {0, 1}.
"""

from __future__ import annotations

import numpy as np


def _as_bits(a) -> np.ndarray:
    return (np.asarray(a, dtype=np.int64) & 1).astype(np.uint8)


def row_reduce(a) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over GF(2).

    Pivots are chosen column by column, taking the first available row,
    so the result is deterministic.

    Parameters
    ----------
    a : array_like, shape (m, n)

    Returns
    -------
    r : ndarray
        Reduced matrix.
    pivots : list of int
        Pivot column of each nonzero row, in order.
    """
    r = _as_bits(a).copy()
    m, n = r.shape
    pivots: list[int] = []
    row = 0
    for col in range(n):
        if row == m:
            break
        hits = np.nonzero(r[row:, col])[0]
        if hits.size == 0:
            continue
        p = row + hits[0]
        if p != row:
            r[[row, p]] = r[[p, row]]
        others = np.nonzero(r[:, col])[0]
        others = others[others != row]
        r[others] ^= r[row]
        pivots.append(col)
        row += 1
    return r, pivots


def rank(a) -> int:
    return len(row_reduce(a)[1])


def solve(a, b) -> np.ndarray | None:
    """Solve ``a @ x = b`` over GF(2).

    Returns the particular solution with all free variables set to zero,
    or ``None`` if the system is inconsistent.
    """
    a = _as_bits(a)
    b = _as_bits(b).reshape(-1, 1)
    aug, pivots = row_reduce(np.hstack([a, b]))
    n = a.shape[1]
    if n in pivots:
        return None
    x = np.zeros(n, dtype=np.uint8)
    for i, col in enumerate(pivots):
        x[col] = aug[i, n]
    return x


def nullspace(a) -> np.ndarray:
    """Basis of the kernel of ``a`` over GF(2), one vector per row."""
    a = _as_bits(a)
    r, pivots = row_reduce(a)
    n = a.shape[1]
    free = [c for c in range(n) if c not in set(pivots)]
    basis = np.zeros((len(free), n), dtype=np.uint8)
    for k, f in enumerate(free):
        basis[k, f] = 1
        for i, col in enumerate(pivots):
            basis[k, col] = r[i, f]
    return basis
