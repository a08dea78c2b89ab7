"""Finite-field arithmetic and exact linear algebra.

Supports GF(2), prime fields GF(p), and binary extension fields GF(2^n) for
n <= 8. Extension fields use fixed, published irreducible polynomials so that
symbol encodings are stable across runs and machines. Matrices are plain
numpy integer arrays holding canonical element encodings (0..q-1); all
operations are exact, there is no floating point and no least squares here.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Optional

import numpy as np

# Irreducible polynomials over GF(2), bit i = coefficient of x^i, including
# the leading x^n term. Standard table entries (n=8 is the AES polynomial).
IRREDUCIBLE_POLY = {
    2: 0b111,        # x^2 + x + 1
    3: 0b1011,       # x^3 + x + 1
    4: 0b10011,      # x^4 + x + 1
    5: 0b100101,     # x^5 + x^2 + 1
    6: 0b1000011,    # x^6 + x + 1
    7: 0b10000011,   # x^7 + x + 1
    8: 0b100011011,  # x^8 + x^4 + x^3 + x + 1
}

_SMALL_PRIMES = {2, 3, 5, 7, 11, 13}


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    for d in range(2, int(p ** 0.5) + 1):
        if p % d == 0:
            return False
    return True


@dataclass(frozen=True)
class FieldSpec:
    """Field identifier: characteristic p and extension degree n (order p^n)."""

    p: int
    n: int = 1

    def __post_init__(self):
        if not _is_prime(self.p):
            raise ValueError(f"characteristic {self.p} is not prime")
        if self.n < 1:
            raise ValueError("extension degree must be >= 1")
        if self.n > 1 and self.p != 2:
            raise ValueError("extension fields are supported for p=2 only")
        if self.n > 1 and self.n not in IRREDUCIBLE_POLY:
            raise ValueError(f"no irreducible polynomial on file for n={self.n}")

    @property
    def order(self) -> int:
        return self.p ** self.n


GF2 = FieldSpec(2, 1)


def _gf2n_mul_int(a: int, b: int, poly: int, n: int) -> int:
    # Carry-less multiply with on-the-fly reduction by the field polynomial.
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a & (1 << n):
            a ^= poly
    return r


class Field:
    """Vectorized arithmetic over a FieldSpec.

    All methods accept scalars or numpy arrays of canonical encodings and
    broadcast like numpy ufuncs.
    """

    def __init__(self, spec: FieldSpec):
        self.spec = spec
        self.order = spec.order
        if spec.n == 1:
            self._mul_table = None
            p = spec.p
            inv = np.zeros(p, dtype=np.int64)
            for a in range(1, p):
                inv[a] = pow(a, p - 2, p)
            self._inv_table = inv
        else:
            q = spec.order
            poly = IRREDUCIBLE_POLY[spec.n]
            table = np.zeros((q, q), dtype=np.int64)
            for a in range(q):
                for b in range(a, q):
                    v = _gf2n_mul_int(a, b, poly, spec.n)
                    table[a, b] = v
                    table[b, a] = v
            self._mul_table = table
            inv = np.zeros(q, dtype=np.int64)
            for a in range(1, q):
                inv[a] = int(np.nonzero(table[a] == 1)[0][0])
            self._inv_table = inv

    def canon(self, a):
        a = np.asarray(a, dtype=np.int64)
        if self.spec.n == 1:
            return np.mod(a, self.spec.p)
        return np.bitwise_and(a, self.order - 1)

    def add(self, a, b):
        if self.spec.n == 1 and self.spec.p != 2:
            return np.mod(np.asarray(a, dtype=np.int64) + np.asarray(b, dtype=np.int64), self.spec.p)
        return np.bitwise_xor(np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64))

    def neg(self, a):
        if self.spec.n == 1 and self.spec.p != 2:
            return np.mod(-np.asarray(a, dtype=np.int64), self.spec.p)
        return np.asarray(a, dtype=np.int64)

    def sub(self, a, b):
        return self.add(a, self.neg(b))

    def mul(self, a, b):
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        if self._mul_table is None:
            return np.mod(a * b, self.spec.p)
        return self._mul_table[a, b]

    def inv(self, a):
        a = np.asarray(a, dtype=np.int64)
        if np.any(a == 0):
            raise ZeroDivisionError("zero has no inverse")
        return self._inv_table[a]

    def div(self, a, b):
        return self.mul(a, self.inv(b))


@functools.lru_cache(maxsize=None)
def get_field(p: int, n: int = 1) -> Field:
    """Cached Field construction (GF(2^8) tables are built once per process)."""
    return Field(FieldSpec(p, n))


def precode(symbols, alpha: int, field: Field):
    """Symbol-wise multiplication of a message by a nonzero field scalar."""
    if int(field.canon(alpha)) == 0:
        raise ValueError("precoding coefficient must be nonzero")
    return field.mul(symbols, alpha)


def ff_rref(a, field: Field):
    """Reduced row echelon form over the field.

    Returns (rref, pivot_columns). Input is not modified.
    """
    a = field.canon(np.atleast_2d(np.asarray(a, dtype=np.int64))).copy()
    rows, cols = a.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r >= rows:
            break
        nz = np.nonzero(a[r:, c])[0]
        if nz.size == 0:
            continue
        p = r + int(nz[0])
        if p != r:
            a[[r, p]] = a[[p, r]]
        a[r] = field.mul(a[r], field.inv(a[r, c]))
        factors = a[:, c].copy()
        factors[r] = 0
        a = field.sub(a, field.mul(factors[:, None], a[r][None, :]))
        pivots.append(c)
        r += 1
    return a, pivots


def ff_rank(a, field: Field) -> int:
    """Rank of a matrix over the field."""
    _, pivots = ff_rref(a, field)
    return len(pivots)


@dataclass
class FfSolution:
    """Outcome of exact Gaussian elimination on A x = b.

    `rank` is the dimension of the recoverable subspace (the row space of A).
    `determined` marks unknowns whose value is identical across the whole
    solution set; `values` holds those values (zeros elsewhere). `solution`
    is populated only for a consistent full-column-rank system.
    """

    consistent: bool
    rank: int
    n_unknowns: int
    solution: Optional[np.ndarray]
    determined: np.ndarray
    values: np.ndarray

    @property
    def deficiency(self) -> int:
        return self.n_unknowns - self.rank


def ff_solve(a, b, field: Field) -> FfSolution:
    """Solve A x = b exactly over the field.

    b may be a vector or a matrix (one right-hand side per column group of
    symbols). Inconsistent systems are flagged, never fitted: there is no
    least-squares fallback over a finite field.
    """
    a = field.canon(np.atleast_2d(np.asarray(a, dtype=np.int64)))
    b = field.canon(np.asarray(b, dtype=np.int64))
    rhs = b[:, None] if b.ndim == 1 else b
    m, n = a.shape
    if rhs.shape[0] != m:
        raise ValueError("rhs row count does not match matrix")
    aug, pivots = ff_rref(np.concatenate([a, rhs], axis=1), field)
    # Pivots landing in the rhs block mean a row 0 = nonzero: inconsistent.
    sys_pivots = [c for c in pivots if c < n]
    consistent = len(sys_pivots) == len(pivots)
    rank = len(sys_pivots)
    width = rhs.shape[1]
    determined = np.zeros(n, dtype=bool)
    values = np.zeros((n, width), dtype=np.int64)
    solution = None
    if consistent:
        free = [c for c in range(n) if c not in sys_pivots]
        for i, c in enumerate(sys_pivots):
            if all(aug[i, f] == 0 for f in free):
                determined[c] = True
                values[c] = aug[i, n:]
        if rank == n:
            solution = values if b.ndim == 2 else values[:, 0]
    if b.ndim == 1:
        values = values[:, 0]
    return FfSolution(consistent, rank, n, solution, determined, values)


def gf2_rank_batch(mats: np.ndarray) -> np.ndarray:
    """Ranks of a batch of GF(2) matrices, vectorized across the batch.

    mats has shape (batch, rows, cols) with entries in {0, 1}. This is the
    fast path for Monte Carlo invertibility counts; its agreement with
    ff_rank is covered by tests.
    """
    a = np.asarray(mats, dtype=np.uint8).copy()
    nb, rows, cols = a.shape
    row_ptr = np.zeros(nb, dtype=np.int64)
    idx = np.arange(rows)
    for c in range(cols):
        col = a[:, :, c]
        below = idx[None, :] >= row_ptr[:, None]
        candidates = (col == 1) & below
        has_pivot = candidates.any(axis=1)
        pivot_row = np.argmax(candidates, axis=1)
        batch_ids = np.nonzero(has_pivot)[0]
        if batch_ids.size == 0:
            continue
        # Swap the pivot row up to the current row pointer.
        pr = pivot_row[batch_ids]
        cr = row_ptr[batch_ids]
        tmp = a[batch_ids, pr].copy()
        a[batch_ids, pr] = a[batch_ids, cr]
        a[batch_ids, cr] = tmp
        # Eliminate every other row holding a 1 in this column.
        piv = a[batch_ids, cr]
        colv = a[batch_ids, :, c].copy()
        colv[np.arange(batch_ids.size), cr] = 0
        a[batch_ids] ^= colv[:, :, None] * piv[:, None, :]
        row_ptr[batch_ids] += 1
    return row_ptr


def invertible_fraction_expected(n: int) -> float:
    """Closed-form fraction of invertible n x n matrices over GF(2)."""
    f = 1.0
    for i in range(1, n + 1):
        f *= 1.0 - 2.0 ** (-i)
    return f


def save_ff_csv(path, matrix, field: Field) -> None:
    """Write a matrix as decimal CSV with a field-spec header line."""
    m = field.canon(np.atleast_2d(np.asarray(matrix, dtype=np.int64)))
    with open(path, "w") as fh:
        fh.write(f"# field p={field.spec.p} n={field.spec.n}\n")
        for row in m:
            fh.write(",".join(str(int(v)) for v in row) + "\n")


def load_ff_csv(path):
    """Read a matrix written by save_ff_csv; returns (matrix, field)."""
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("# field "):
            raise ValueError("missing field-spec header line")
        parts = dict(kv.split("=") for kv in header[len("# field "):].split())
        field = get_field(int(parts["p"]), int(parts["n"]))
        rows = []
        for line in fh:
            line = line.strip()
            if line:
                rows.append([int(v) for v in line.split(",")])
    return np.asarray(rows, dtype=np.int64), field
