"""Column-oriented matrix storage and the small factorization kernels.

Data matrices are d x n with one data point per column, stored either as a
dense Fortran-ordered array or as a CSC sparse matrix.  Everything downstream
(kernels, sketches, the distributed pipeline) works on sketch-sized dense
matrices, so the factorizations here use plain LAPACK through numpy/scipy;
only `matmul` carries the fixed-summation-order contract needed for
reproducible sparse/dense agreement.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

DEFAULT_RANK_TOL = 1e-10


class NumericalError(RuntimeError):
    """Raised when a factorization or solve is numerically impossible
    (non-PSD input, dropped pivot touched, rank below what was requested)."""


class ColumnMatrix:
    """A d x n matrix whose columns are data points.

    Storage is either a dense float64 array in column-major order or a
    canonical CSC sparse matrix (per-column index/value lists with strictly
    increasing row indices).  Instances are treated as immutable.
    """

    def __init__(self, values):
        if sp.issparse(values):
            values = sp.csc_array(values).astype(np.float64)
            values.sum_duplicates()
            values.sort_indices()
            self._values = values
        else:
            arr = np.asarray(values, dtype=np.float64)
            if arr.ndim == 1:
                arr = arr.reshape(-1, 1)
            if arr.ndim != 2:
                raise ValueError(f"expected 2-D data, got shape {arr.shape}")
            self._values = np.asfortranarray(arr)

    @property
    def values(self):
        """Underlying ndarray (dense) or csc_matrix (sparse)."""
        return self._values

    @property
    def is_sparse(self):
        return sp.issparse(self._values)

    @property
    def shape(self):
        return self._values.shape

    @property
    def n_rows(self):
        return self._values.shape[0]

    @property
    def n_cols(self):
        return self._values.shape[1]

    @property
    def nnz(self):
        if self.is_sparse:
            return int(self._values.nnz)
        return int(np.count_nonzero(self._values))

    def column(self, j):
        """Column j as a dense 1-D array."""
        if self.is_sparse:
            return self._values[:, [j]].toarray().ravel()
        return np.array(self._values[:, j])

    def take(self, indices):
        """New ColumnMatrix made of the given columns, preserving storage."""
        indices = np.asarray(indices, dtype=np.intp)
        return ColumnMatrix(self._values[:, indices])

    def toarray(self):
        if self.is_sparse:
            return self._values.toarray()
        return np.array(self._values)

    def __repr__(self):
        kind = "sparse" if self.is_sparse else "dense"
        return f"ColumnMatrix({self.n_rows}x{self.n_cols}, {kind}, nnz={self.nnz})"


def hstack_columns(mats):
    """Concatenate ColumnMatrix blocks side by side (sparse if all are)."""
    if not mats:
        raise ValueError("nothing to concatenate")
    if all(m.is_sparse for m in mats):
        return ColumnMatrix(sp.hstack([m.values for m in mats], format="csc"))
    return ColumnMatrix(np.hstack([m.toarray() for m in mats]))


def as_dense(M):
    """Coerce a ColumnMatrix / sparse matrix / array to a dense 2-D float64 array."""
    if isinstance(M, ColumnMatrix):
        return M.toarray()
    if sp.issparse(M):
        return M.toarray()
    arr = np.asarray(M, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    return arr


@dataclass
class SvdResult:
    """Truncated singular value decomposition M ~ U diag(s) Vt.

    U has orthonormal columns, singular values are nonincreasing and
    nonnegative, and each left singular vector is sign-normalized so its
    largest-magnitude entry is positive (first such entry on ties), which
    makes results reproducible across runs and equivalent inputs.
    """

    U: np.ndarray
    singular_values: np.ndarray
    Vt: np.ndarray


@dataclass
class TriangularFactor:
    """Upper-triangular factor with a recorded numerical rank.

    `R` has shape (rank, size) with columns in pivot order, so the leading
    rank x rank block is upper triangular with diagonal above the tolerance.
    `pivots` lists all column indices, retained pivots first; `retained` and
    `dropped` expose the two halves.
    """

    R: np.ndarray
    pivots: np.ndarray
    rank: int
    tol: float = field(default=DEFAULT_RANK_TOL)

    @property
    def size(self):
        return self.pivots.shape[0]

    @property
    def retained(self):
        return self.pivots[: self.rank]

    @property
    def dropped(self):
        return self.pivots[self.rank :]

    @property
    def block(self):
        """The square upper-triangular block on the retained pivots."""
        return self.R[:, : self.rank]


def _as_csc(M):
    if isinstance(M, ColumnMatrix):
        M = M.values
    if sp.issparse(M):
        return sp.csc_array(M)
    return sp.csc_array(np.asarray(M, dtype=np.float64))


def matmul(A, B, transpose_a=False):
    """Matrix product A @ B (or A.T @ B) with a fixed summation order.

    The product is accumulated column-major over the inner dimension in
    ascending order regardless of storage, so sparse and densified inputs
    produce bit-identical results.  Cost is proportional to nnz(A) times the
    number of columns of B.  Returns a ColumnMatrix if either input is one,
    sparse iff both inputs are sparse.
    """
    a_cm = isinstance(A, ColumnMatrix)
    b_cm = isinstance(B, ColumnMatrix)
    left = _as_csc(A)
    if transpose_a:
        left = left.T.tocsc()
    right = B.values if b_cm else B
    if not sp.issparse(right):
        right = np.asarray(right, dtype=np.float64)
        if right.ndim == 1:
            right = right.reshape(-1, 1)
    if left.shape[1] != right.shape[0]:
        raise ValueError(
            f"matmul: inner dimensions disagree: {left.shape} x {right.shape}"
        )
    out = left @ right
    if a_cm or b_cm:
        return ColumnMatrix(out)
    return out.toarray() if sp.issparse(out) else out


def truncated_svd(M, k):
    """Top-k singular triplets of M.

    Returns min(k, numerical rank) triplets; the reconstruction from them is
    the best rank-k approximation in Frobenius norm.  Raises ValueError for
    k < 1 or an empty matrix.
    """
    if k < 1:
        raise ValueError(f"truncated_svd: k must be >= 1, got {k}")
    A = as_dense(M)
    if A.size == 0:
        raise ValueError(f"truncated_svd: empty matrix of shape {A.shape}")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    if s[0] > 0:
        rank = int(np.sum(s > max(A.shape) * np.finfo(np.float64).eps * s[0]))
    else:
        rank = 0
    r = max(min(k, rank), 1) if rank > 0 else 1
    U, s, Vt = U[:, :r].copy(), s[:r].copy(), Vt[:r].copy()
    _fix_signs(U, Vt)
    return SvdResult(U=U, singular_values=s, Vt=Vt)


def _fix_signs(U, Vt):
    """Flip each singular pair so the largest-|entry| of u is positive."""
    for i in range(U.shape[1]):
        lead = int(np.argmax(np.abs(U[:, i])))
        if U[lead, i] < 0:
            U[:, i] = -U[:, i]
            Vt[i, :] = -Vt[i, :]


def qr_thin(M):
    """Thin QR factorization M = Q R with Q orthonormal.

    Signs are normalized so diag(R) >= 0.  Works for rank-deficient input;
    the numerical rank (SVD-based tolerance cut) is recorded on the returned
    factor rather than raising.
    """
    A = as_dense(M)
    m, n = A.shape
    if m < n:
        raise ValueError(f"qr_thin: need n_rows >= n_cols, got {A.shape}")
    Q, R = np.linalg.qr(A)
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    Q = Q * signs
    R = R * signs[:, None]
    rank = int(np.linalg.matrix_rank(R))
    return Q, TriangularFactor(R=R, pivots=np.arange(n), rank=rank, tol=DEFAULT_RANK_TOL)


def psd_factor(K, tol=DEFAULT_RANK_TOL):
    """Pivoted Cholesky factorization of a PSD matrix K.

    Greedily picks the largest remaining diagonal as pivot until it falls to
    tol * max(diag); returns an upper-trapezoidal factor R (rank x size, in
    pivot order) with R.T @ R reconstructing K on the retained pivots.  A
    diagonal that turns negative beyond the tolerance raises NumericalError
    naming the offending pivot.
    """
    K = as_dense(K)
    m = K.shape[0]
    if K.shape[0] != K.shape[1]:
        raise ValueError(f"psd_factor: matrix must be square, got {K.shape}")
    scale = float(np.max(np.abs(K))) if m else 0.0
    if not np.allclose(K, K.T, atol=1e-8 * max(scale, 1.0)):
        raise ValueError("psd_factor: matrix is not symmetric")
    d = np.diag(K).astype(np.float64).copy()
    threshold = tol * max(d.max(initial=0.0), 0.0)
    neg_limit = -max(tol * max(scale, 1.0), np.finfo(np.float64).eps * m * scale)
    perm = np.arange(m)
    R = np.zeros((m, m))
    rank = m
    for r in range(m):
        rel = int(np.argmax(d[perm[r:]]))
        worst = float(np.min(d[perm[r:]]))
        if worst < neg_limit:
            bad = perm[r:][int(np.argmin(d[perm[r:]]))]
            raise NumericalError(
                f"psd_factor: pivot {bad} has negative diagonal {worst:.3e}; "
                "input is not positive semidefinite"
            )
        dmax = float(d[perm[r + rel]])
        if dmax <= threshold:
            rank = r
            break
        if rel != 0:
            pos = r + rel
            perm[r], perm[pos] = perm[pos], perm[r]
            R[:r, [r, pos]] = R[:r, [pos, r]]
        j = perm[r]
        rjj = np.sqrt(dmax)
        row = (K[j, perm[r:]] - R[:r, r] @ R[:r, r:]) / rjj
        row[0] = rjj
        R[r, r:] = row
        d[perm[r + 1 :]] -= row[1:] ** 2
    if rank == 0:
        raise NumericalError("psd_factor: all pivots below tolerance (zero matrix?)")
    return TriangularFactor(R=R[:rank, :], pivots=perm, rank=rank, tol=tol)


def tri_solve(factor, B, transpose=False):
    """Solve R X = B (or R.T X = B) on the retained pivot block of `factor`.

    B must have exactly `factor.rank` rows; passing the full pre-drop row
    count when pivots were dropped raises NumericalError.
    """
    B = as_dense(B)
    if B.shape[0] != factor.rank:
        if B.shape[0] == factor.size and factor.rank < factor.size:
            raise NumericalError(
                f"tri_solve: {factor.size - factor.rank} pivots were dropped; "
                f"B has {B.shape[0]} rows but only {factor.rank} are retained"
            )
        raise ValueError(
            f"tri_solve: B has {B.shape[0]} rows, factor rank is {factor.rank}"
        )
    block = factor.block
    if np.any(np.diag(block) == 0.0):
        raise NumericalError("tri_solve: zero pivot in retained block")
    return scipy.linalg.solve_triangular(block, B, trans="T" if transpose else "N")
