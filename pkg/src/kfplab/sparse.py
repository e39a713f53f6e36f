"""Compressed sparse row matrices and a Jacobi-preconditioned BiCGStab solver.

The advection terms make the assembled systems nonsymmetric, hence a
stabilized bi-conjugate-gradient method. The theta-scheme matrices are mass
dominated at the time steps used here, so diagonal preconditioning is enough.
Matrices are immutable after construction; matvec and solve are pure.
"""

from dataclasses import dataclass

import numpy as np

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 1000


@dataclass
class SolveStats:
    iterations: int
    residual: float  # final residual relative to ||b||, absolute when b = 0
    converged: bool


class SparseMatrix:
    """CSR matrix. Column indices are strictly increasing within each row and
    duplicates are summed at construction; explicit zeros are kept so matrices
    assembled from the same triplet pattern share their index structure."""

    def __init__(self, rows, cols, offsets, indices, values):
        self.rows = int(rows)
        self.cols = int(cols)
        self.offsets = offsets
        self.indices = indices
        self.values = values
        # row index per stored entry, for the bincount matvec
        self._entry_rows = np.repeat(np.arange(self.rows), np.diff(offsets))

    @property
    def nnz(self) -> int:
        return len(self.values)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.cols,):
            raise ValueError(f"dimension mismatch: matrix is {self.rows}x{self.cols}, vector has length {len(x)}")
        if self.nnz == 0:
            return np.zeros(self.rows)
        prod = self.values * x[self.indices]
        return np.bincount(self._entry_rows, weights=prod, minlength=self.rows)

    def __matmul__(self, x):
        return self.matvec(x)

    def diagonal(self) -> np.ndarray:
        d = np.zeros(min(self.rows, self.cols))
        on_diag = self._entry_rows == self.indices
        np.add.at(d, self._entry_rows[on_diag], self.values[on_diag])
        return d

    def transpose(self) -> "SparseMatrix":
        return from_triplets(self.cols, self.rows, self._entry_rows, self.indices, self.values, swap=True)

    def toarray(self) -> np.ndarray:
        a = np.zeros((self.rows, self.cols))
        a[self._entry_rows, self.indices] = 0.0
        np.add.at(a, (self._entry_rows, self.indices), self.values)
        return a

    def same_pattern(self, other: "SparseMatrix") -> bool:
        return (
            self.rows == other.rows
            and self.cols == other.cols
            and np.array_equal(self.offsets, other.offsets)
            and np.array_equal(self.indices, other.indices)
        )

    def scaled(self, c: float) -> "SparseMatrix":
        return SparseMatrix(self.rows, self.cols, self.offsets, self.indices, c * self.values)


def from_triplets(rows: int, cols: int, i, j, vals, swap: bool = False) -> SparseMatrix:
    """CSR from COO triplets; out-of-range indices rejected, duplicates summed."""
    i = np.asarray(i, dtype=np.int64).ravel()
    j = np.asarray(j, dtype=np.int64).ravel()
    vals = np.asarray(vals, dtype=float).ravel()
    if not (len(i) == len(j) == len(vals)):
        raise ValueError("triplet arrays must have equal length")
    if swap:
        i, j = j, i
    if len(i) and (i.min() < 0 or i.max() >= rows or j.min() < 0 or j.max() >= cols):
        raise IndexError("triplet index out of range")

    if len(i) == 0:
        offsets = np.zeros(rows + 1, dtype=np.int64)
        return SparseMatrix(rows, cols, offsets, np.empty(0, dtype=np.int64), np.empty(0))

    order = np.lexsort((j, i))
    i, j, vals = i[order], j[order], vals[order]
    first = np.ones(len(i), dtype=bool)
    first[1:] = (i[1:] != i[:-1]) | (j[1:] != j[:-1])
    group = np.cumsum(first) - 1
    summed = np.bincount(group, weights=vals)
    ui = i[first]
    uj = j[first]
    offsets = np.zeros(rows + 1, dtype=np.int64)
    np.add.at(offsets, ui + 1, 1)
    offsets = np.cumsum(offsets)
    return SparseMatrix(rows, cols, offsets, uj, summed)


class TripletPattern:
    """Shared (i, j) layout so several element kernels assemble into CSR
    matrices with byte-identical index structure (required by combine)."""

    def __init__(self, rows, cols, i, j):
        self.rows = int(rows)
        self.cols = int(cols)
        self.i = np.asarray(i, dtype=np.int64).ravel()
        self.j = np.asarray(j, dtype=np.int64).ravel()
        if len(self.i) and (self.i.min() < 0 or self.i.max() >= rows or self.j.min() < 0 or self.j.max() >= cols):
            raise IndexError("triplet index out of range")
        self._order = np.lexsort((self.j, self.i))
        si, sj = self.i[self._order], self.j[self._order]
        first = np.ones(len(si), dtype=bool)
        if len(si):
            first[1:] = (si[1:] != si[:-1]) | (sj[1:] != sj[:-1])
        self._group = np.cumsum(first) - 1 if len(si) else first.astype(np.int64)
        self._n_unique = int(self._group[-1]) + 1 if len(si) else 0
        ui = si[first] if len(si) else si
        uj = sj[first] if len(sj) else sj
        offsets = np.zeros(rows + 1, dtype=np.int64)
        np.add.at(offsets, ui + 1, 1)
        self.offsets = np.cumsum(offsets)
        self.indices = uj

    def assemble(self, vals) -> SparseMatrix:
        vals = np.asarray(vals, dtype=float).ravel()
        if len(vals) != len(self.i):
            raise ValueError("value array does not match pattern length")
        summed = np.bincount(self._group, weights=vals[self._order], minlength=self._n_unique)
        return SparseMatrix(self.rows, self.cols, self.offsets, self.indices, summed)


def combine(terms) -> SparseMatrix:
    """Linear combination sum(c * A) of matrices sharing one CSR pattern."""
    (c0, a0), *rest = terms
    values = c0 * a0.values
    for c, a in rest:
        if not a.same_pattern(a0):
            raise ValueError("combine requires matrices with an identical sparsity pattern")
        values = values + c * a.values
    return SparseMatrix(a0.rows, a0.cols, a0.offsets, a0.indices, values)


def solve(A: SparseMatrix, b: np.ndarray, tol: float = DEFAULT_TOL,
          max_iter: int = DEFAULT_MAX_ITER, x0: np.ndarray | None = None):
    """BiCGStab with Jacobi preconditioning for A x = b.

    Returns (x, SolveStats); convergence means ||A x - b||_2 <= tol * ||b||_2.
    A breakdown of the recurrence triggers one restart from the current
    iterate before giving up.
    """
    if A.rows != A.cols:
        raise ValueError("solve requires a square matrix")
    if tol <= 0:
        raise ValueError("tol must be positive")
    b = np.asarray(b, dtype=float)
    if b.shape != (A.rows,):
        raise ValueError("right-hand side has wrong length")

    norm_b = np.linalg.norm(b)
    if norm_b == 0.0:
        return np.zeros(A.rows), SolveStats(0, 0.0, True)

    diag = A.diagonal()
    inv_diag = np.where(np.abs(diag) > 0, 1.0 / np.where(diag == 0, 1.0, diag), 1.0)
    target = tol * norm_b

    x = np.zeros(A.rows) if x0 is None else np.array(x0, dtype=float)
    r = b - A.matvec(x)
    normr = np.linalg.norm(r)
    if normr <= target:
        return x, SolveStats(0, normr / norm_b, True)

    restarted = False
    r_star = r.copy()
    p = r.copy()
    rho = float(r_star @ r)
    iters = 0
    tiny = np.finfo(float).tiny

    while iters < max_iter:
        mp = inv_diag * p
        amp = A.matvec(mp)
        denom = float(r_star @ amp)
        if abs(denom) < tiny or abs(rho) < tiny:
            if restarted:
                break
            restarted = True
            r = b - A.matvec(x)
            r_star = r.copy()
            p = r.copy()
            rho = float(r_star @ r)
            continue
        alpha = rho / denom
        s = r - alpha * amp
        ms = inv_diag * s
        ams = A.matvec(ms)
        ams_sq = float(ams @ ams)
        if ams_sq < tiny:
            x = x + alpha * mp
            iters += 1
            normr = np.linalg.norm(b - A.matvec(x))
            if normr <= target:
                return x, SolveStats(iters, normr / norm_b, True)
            continue
        omega = float(ams @ s) / ams_sq
        x = x + alpha * mp + omega * ms
        r = s - omega * ams
        iters += 1
        normr = np.linalg.norm(r)
        if normr <= target:
            true_res = np.linalg.norm(b - A.matvec(x))
            if true_res <= target:
                return x, SolveStats(iters, true_res / norm_b, True)
            normr = true_res
        rho_new = float(r_star @ r)
        if abs(omega) < tiny:
            if restarted:
                break
            restarted = True
            r = b - A.matvec(x)
            r_star = r.copy()
            p = r.copy()
            rho = float(r_star @ r)
            continue
        beta = (rho_new / rho) * (alpha / omega)
        rho = rho_new
        p = r + beta * (p - omega * amp)

    final = np.linalg.norm(b - A.matvec(x))
    return x, SolveStats(iters, final / norm_b, bool(final <= target))


def identity(n: int) -> SparseMatrix:
    idx = np.arange(n)
    return from_triplets(n, n, idx, idx, np.ones(n))
