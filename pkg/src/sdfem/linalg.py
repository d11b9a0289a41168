"""Sparse storage, restarted GMRES and a dense LU oracle."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse

from .errors import GmresBreakdown, SingularMatrixError

logger = logging.getLogger(__name__)

__all__ = ["CsrMatrix", "SolveStats", "spmv", "gmres", "dense_lu_solve"]


@dataclass(frozen=True, eq=False)
class CsrMatrix:
    """Compressed sparse row matrix with sorted, duplicate-free column indices."""

    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    shape: tuple[int, int]

    def __post_init__(self):
        indptr = np.asarray(self.indptr, dtype=np.int64)
        indices = np.asarray(self.indices, dtype=np.int64)
        data = np.asarray(self.data, dtype=float)
        n_rows, n_cols = (int(s) for s in self.shape)
        if indptr.shape != (n_rows + 1,) or indptr[0] != 0 or indptr[-1] != len(indices):
            raise ValueError("malformed row offsets")
        if np.any(np.diff(indptr) < 0):
            raise ValueError("row offsets must be monotone")
        if len(data) != len(indices):
            raise ValueError("indices and data lengths differ")
        if len(indices) and (indices.min() < 0 or indices.max() >= n_cols):
            raise ValueError("column index out of range")
        steps = np.diff(indices)
        row_starts = np.zeros(len(indices), dtype=bool)
        row_starts[indptr[:-1][np.diff(indptr) > 0]] = True
        if np.any((steps <= 0) & ~row_starts[1:]):
            raise ValueError("column indices must be strictly increasing within a row")
        for name, arr in (("indptr", indptr), ("indices", indices), ("data", data)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "shape", (n_rows, n_cols))

    @classmethod
    def from_triplets(cls, rows, cols, vals, shape) -> "CsrMatrix":
        """Sum duplicate (row, col) entries; entries are added in input order."""
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=float).ravel()
        n_rows, n_cols = shape
        keys = rows * n_cols + cols
        order = np.argsort(keys, kind="stable")
        keys, vals = keys[order], vals[order]
        first = np.ones(len(keys), dtype=bool)
        first[1:] = keys[1:] != keys[:-1]
        starts = np.flatnonzero(first)
        # sequential accumulation in element order keeps results bit-reproducible
        summed = np.add.reduceat(vals, starts) if len(vals) else vals
        ukeys = keys[starts]
        r, c = np.divmod(ukeys, n_cols)
        indptr = np.zeros(n_rows + 1, dtype=np.int64)
        np.cumsum(np.bincount(r, minlength=n_rows), out=indptr[1:])
        return cls(indptr, c, summed, (n_rows, n_cols))

    @classmethod
    def from_dense(cls, a) -> "CsrMatrix":
        a = np.asarray(a, dtype=float)
        r, c = np.nonzero(a)
        return cls.from_triplets(r, c, a[r, c], a.shape)

    @classmethod
    def identity(cls, n: int) -> "CsrMatrix":
        idx = np.arange(n)
        return cls(np.arange(n + 1), idx, np.ones(n), (n, n))

    @property
    def nnz(self) -> int:
        return len(self.data)

    @cached_property
    def row_ids(self) -> np.ndarray:
        return np.repeat(np.arange(self.shape[0]), np.diff(self.indptr))

    @cached_property
    def _scipy(self) -> scipy.sparse.csr_matrix:
        m = scipy.sparse.csr_matrix((self.data, self.indices, self.indptr), shape=self.shape)
        m.has_sorted_indices = True
        return m

    def to_scipy(self) -> scipy.sparse.csr_matrix:
        return self._scipy.copy()

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.row_ids, self.indices] = self.data
        return out

    def diagonal(self) -> np.ndarray:
        n = min(self.shape)
        diag = np.zeros(n)
        mask = (self.row_ids == self.indices) & (self.indices < n)
        diag[self.indices[mask]] = self.data[mask]
        return diag

    def submatrix(self, rows: np.ndarray, cols: np.ndarray) -> "CsrMatrix":
        sub = self._scipy[rows][:, cols].tocsr()
        sub.sort_indices()
        sub.eliminate_zeros()
        return CsrMatrix(sub.indptr, sub.indices, sub.data, sub.shape)

    def quadratic_form(self, v: np.ndarray) -> float:
        v = np.asarray(v, dtype=float)
        return float(v @ spmv(self, v))

    def __matmul__(self, x):
        return spmv(self, x)


def spmv(a: CsrMatrix, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (a.shape[1],):
        raise ValueError(f"dimension mismatch: matrix {a.shape}, vector {x.shape}")
    return a._scipy @ x


@dataclass
class SolveStats:
    iterations: int
    residual: float  # recomputed ||b - Ax|| / ||b||
    converged: bool
    restarts: int
    breakdown: bool = False
    history: list = field(default_factory=list, repr=False)  # Arnoldi LS estimates per cycle


def _relative_residual(a, b, x, bnorm):
    r = b - spmv(a, x)
    return float(np.linalg.norm(r) / bnorm) if bnorm > 0 else float(np.linalg.norm(r))


def gmres(a: CsrMatrix, b, tol: float = 1e-12, restart: int = 100, max_iters: int = 20000,
          preconditioner: str = "jacobi", x0=None):
    """Restarted GMRES with right preconditioning.

    Arnoldi uses classical Gram-Schmidt with one reorthogonalization pass.
    Convergence is declared only on the recomputed true residual. Returns the
    best iterate seen and a :class:`SolveStats`. A zero Arnoldi vector that does
    not coincide with a solved system raises :class:`GmresBreakdown`.
    """
    n = a.shape[0]
    if a.shape[0] != a.shape[1]:
        raise ValueError("GMRES needs a square matrix")
    b = np.asarray(b, dtype=float)
    if b.shape != (n,):
        raise ValueError("right-hand side has wrong length")
    if not np.all(np.isfinite(b)):
        raise ValueError("right-hand side is not finite")
    if not tol > 0:
        raise ValueError("tol must be positive")
    if preconditioner == "jacobi":
        d = a.diagonal()
        if np.any(d == 0):
            raise ValueError("Jacobi preconditioner needs a zero-free diagonal")
        minv = 1.0 / d
    elif preconditioner in ("none", None):
        minv = None
    else:
        raise ValueError(f"unknown preconditioner {preconditioner!r}")

    bnorm = float(np.linalg.norm(b))
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    stats = SolveStats(iterations=0, residual=np.inf, converged=False, restarts=0)
    if bnorm == 0.0:
        x[:] = 0.0
        stats.residual, stats.converged = 0.0, True
        return x, stats

    m = max(1, min(restart, n))
    V = np.empty((m + 1, n))
    H = np.zeros((m + 1, m))
    cs, sn = np.empty(m), np.empty(m)
    best_x, best_res = x.copy(), _relative_residual(a, b, x, bnorm)
    total = 0
    cycles = 0

    while True:
        r = b - spmv(a, x)
        beta = float(np.linalg.norm(r))
        if beta / bnorm <= tol:
            best_x, best_res = x, beta / bnorm
            stats.converged = True
            break
        if total >= max_iters:
            break
        cycles += 1
        V[0] = r / beta
        g = np.zeros(m + 1)
        g[0] = beta
        H[:] = 0.0
        cycle_hist = [beta / bnorm]
        k_used = 0
        broke = False
        for k in range(m):
            z = V[k] * minv if minv is not None else V[k]
            w = spmv(a, z)
            h = V[: k + 1] @ w
            w -= V[: k + 1].T @ h
            h2 = V[: k + 1] @ w
            w -= V[: k + 1].T @ h2
            h += h2
            hnorm = float(np.linalg.norm(w))
            H[: k + 1, k] = h
            H[k + 1, k] = hnorm
            for i in range(k):
                t = cs[i] * H[i, k] + sn[i] * H[i + 1, k]
                H[i + 1, k] = -sn[i] * H[i, k] + cs[i] * H[i + 1, k]
                H[i, k] = t
            denom = np.hypot(H[k, k], H[k + 1, k])
            if denom == 0.0:
                broke = True
                break
            cs[k], sn[k] = H[k, k] / denom, H[k + 1, k] / denom
            H[k, k] = denom
            H[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = cs[k] * g[k]
            total += 1
            k_used = k + 1
            cycle_hist.append(abs(g[k + 1]) / bnorm)
            if hnorm <= 1e-14 * max(1.0, np.linalg.norm(h)) or hnorm == 0.0:
                broke = True
                break
            if abs(g[k + 1]) / bnorm <= tol or total >= max_iters:
                break
            V[k + 1] = w / hnorm
        stats.history.append(cycle_hist)
        if k_used:
            y = scipy.linalg.solve_triangular(H[:k_used, :k_used], g[:k_used])
            dx = V[:k_used].T @ y
            x = x + (dx * minv if minv is not None else dx)
        res = _relative_residual(a, b, x, bnorm)
        if res < best_res:
            best_x, best_res = x.copy(), res
        if broke:
            stats.breakdown = True
            if res <= tol:
                stats.converged = True
                break
            raise GmresBreakdown(
                f"Arnoldi breakdown after {total} iterations, residual {res:.3e} > tol {tol:.1e}")
        if total >= max_iters and res > tol:
            break
        # otherwise loop: recompute the true residual and restart

    stats.restarts = max(0, cycles - 1)
    stats.iterations = total
    stats.residual = best_res
    x = best_x
    if not stats.converged:
        logger.warning("GMRES stopped after %d iterations, residual %.3e", total, best_res)
    return x, stats


def dense_lu_solve(a_dense, b) -> np.ndarray:
    """Partial-pivoting LU solve; intended as an oracle for small systems."""
    a = np.asarray(a_dense, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if a.shape[0] > 4096:
        raise ValueError("dense oracle limited to 4096 unknowns")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=True)
    if np.min(np.abs(np.diag(lu))) < 1e-300:
        raise SingularMatrixError("singular pivot encountered")
    return scipy.linalg.lu_solve((lu, piv), b)
