"""Kernel functions, Gram matrices, and implicit feature-space geometry.

Three kernel families are supported: homogeneous polynomial (x'y)^q,
Gaussian exp(-||x-y||^2 / 2 sigma^2), and arc-cosine of degree 0/1/2.  The
span machinery at the bottom represents the subspace spanned by the feature
images of a point set Y through a triangular factor of its Gram matrix, so
projections and residual distances are computed entirely through kernel
evaluations (no explicit feature map).
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .matrix import ColumnMatrix, NumericalError, psd_factor, tri_solve


@dataclass(frozen=True)
class PolynomialKernel:
    """k(x, y) = (x' y)^degree, degree >= 1."""

    degree: int

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError(f"polynomial degree must be >= 1, got {self.degree}")


@dataclass(frozen=True)
class GaussianKernel:
    """k(x, y) = exp(-||x - y||^2 / (2 bandwidth^2)), bandwidth > 0."""

    bandwidth: float

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")


@dataclass(frozen=True)
class ArcCosKernel:
    """Arc-cosine kernel of degree 0, 1 or 2 (ReLU-style random feature bases)."""

    degree: int

    def __post_init__(self):
        if self.degree not in (0, 1, 2):
            raise ValueError(f"arc-cos degree must be 0, 1 or 2, got {self.degree}")


def _raw(X):
    if isinstance(X, ColumnMatrix):
        return X.values
    if sp.issparse(X):
        return X
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    return arr


def _inner(X, Y):
    """Dense X' Y for possibly sparse column matrices."""
    xv, yv = _raw(X), _raw(Y)
    if xv.shape[0] != yv.shape[0]:
        raise ValueError(f"dimension mismatch: {xv.shape} vs {yv.shape}")
    out = xv.T @ yv
    return out.toarray() if sp.issparse(out) else np.asarray(out)


def col_sqnorms(X):
    """Squared Euclidean norm of every column."""
    xv = _raw(X)
    if sp.issparse(xv):
        return np.asarray(xv.multiply(xv).sum(axis=0)).ravel()
    return np.einsum("ij,ij->j", xv, xv)


def _arccos_angular(degree, cos_theta):
    """The angular factor J_degree(theta) / pi with theta = arccos(cos_theta)."""
    c = np.clip(cos_theta, -1.0, 1.0)
    theta = np.arccos(c)
    s = np.sin(theta)
    if degree == 0:
        return 1.0 - theta / np.pi
    if degree == 1:
        return (s + (np.pi - theta) * c) / np.pi
    return (3.0 * s * c + (np.pi - theta) * (1.0 + 2.0 * c**2)) / np.pi


def gram(spec, X, Y):
    """Gram matrix K[i, j] = k(X_:i, Y_:j) as a dense array.

    When called with the same object for X and Y the result is exactly
    symmetric and (for the Gaussian kernel) has an exact unit diagonal.
    """
    same = X is Y
    inner = _inner(X, Y)
    if isinstance(spec, PolynomialKernel):
        K = inner**spec.degree
    elif isinstance(spec, GaussianKernel):
        sq = col_sqnorms(X)[:, None] + col_sqnorms(Y)[None, :] - 2.0 * inner
        np.maximum(sq, 0.0, out=sq)
        if same:
            np.fill_diagonal(sq, 0.0)
        K = np.exp(-sq / (2.0 * spec.bandwidth**2))
    elif isinstance(spec, ArcCosKernel):
        nx = np.sqrt(col_sqnorms(X))
        ny = nx if same else np.sqrt(col_sqnorms(Y))
        denom = nx[:, None] * ny[None, :]
        safe = np.where(denom > 0, denom, 1.0)
        ang = _arccos_angular(spec.degree, inner / safe)
        K = denom**spec.degree * ang if spec.degree > 0 else ang
        K[denom == 0] = 0.0
    else:
        raise TypeError(f"unknown kernel spec {spec!r}")
    if same:
        K = 0.5 * (K + K.T)
    return K


def gram_diag(spec, X):
    """The diagonal k(x_j, x_j) for every column, without forming the Gram matrix."""
    n = X.n_cols if isinstance(X, ColumnMatrix) else _raw(X).shape[1]
    if isinstance(spec, GaussianKernel):
        return np.ones(n)
    sq = col_sqnorms(X)
    if isinstance(spec, PolynomialKernel):
        return sq**spec.degree
    if isinstance(spec, ArcCosKernel):
        if spec.degree == 0:
            return (sq > 0).astype(np.float64)
        # J_deg(0)/pi is 1 for degree 1 and 3 for degree 2
        return sq**spec.degree * (1.0 if spec.degree == 1 else 3.0)
    raise TypeError(f"unknown kernel spec {spec!r}")


def kernel_eval(spec, x, y):
    """Single kernel value k(x, y)."""
    x = np.asarray(x, dtype=np.float64).reshape(-1, 1)
    y = np.asarray(y, dtype=np.float64).reshape(-1, 1)
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    return float(gram(spec, x, y)[0, 0])


def median_bandwidth(X, seed, max_points=20000, factor=0.2):
    """Bandwidth from the median pairwise distance of a seeded point sample.

    Draws min(n, max_points) columns uniformly without replacement and
    returns factor * median over all pairwise Euclidean distances among them
    (memory is quadratic in the sample size).
    """
    n = X.n_cols if isinstance(X, ColumnMatrix) else _raw(X).shape[1]
    if n < 2:
        raise ValueError("need at least two points for a pairwise median")
    rng = np.random.default_rng(seed)
    idx = rng.choice(n, size=min(n, max_points), replace=False)
    S = X.take(idx) if isinstance(X, ColumnMatrix) else ColumnMatrix(_raw(X)[:, idx])
    sq = col_sqnorms(S)[:, None] + col_sqnorms(S)[None, :] - 2.0 * _inner(S, S)
    np.maximum(sq, 0.0, out=sq)
    m = sq.shape[0]
    dists = np.sqrt(sq[np.triu_indices(m, k=1)])
    med = float(np.median(dists))
    if med <= 0:
        raise NumericalError("median pairwise distance is zero (duplicate data?)")
    return factor * med


@dataclass
class SpanBasis:
    """Orthonormal basis of span{phi(y) : y in Y}, held implicitly.

    The basis is Q = phi(Y_retained) R^{-1} where R'R factors the Gram matrix
    of the numerically independent columns of Y, so Q'Q = I and projections
    onto the span reduce to triangular solves against kernel evaluations.
    """

    Y: ColumnMatrix
    factor: object  # TriangularFactor of K(Y_retained, Y_retained)

    @property
    def retained(self):
        return self.factor.retained

    @property
    def rank(self):
        return self.factor.rank

    @property
    def retained_points(self):
        return self.Y.take(self.retained)


def build_span_basis(spec, Y, tol=1e-10):
    """Factor the Gram matrix of Y, dropping numerically dependent columns."""
    if Y.n_cols == 0:
        raise ValueError("cannot build a span basis from zero points")
    K = gram(spec, Y, Y)
    try:
        factor = psd_factor(K, tol=tol)
    except NumericalError as exc:
        raise NumericalError(f"span basis of {Y.n_cols} points failed: {exc}") from exc
    return SpanBasis(Y=Y, factor=factor)


def project_coeffs(basis, spec, A):
    """Coordinates of phi(A) in the implicit orthonormal basis.

    Returns R^{-T} K(Y_retained, A), one column per column of A; the squared
    column norm is the squared norm of the projection of phi(a_j).
    """
    K_ra = gram(spec, basis.retained_points, A)
    return tri_solve(basis.factor, K_ra, transpose=True)


def residual_sq_distances(basis, spec, A):
    """Squared feature-space distance of each column of A to the span.

    Computed as k(a_j, a_j) minus the squared projection norm, clamped at
    zero against floating cancellation.
    """
    coeffs = project_coeffs(basis, spec, A)
    res = gram_diag(spec, A) - np.einsum("ij,ij->j", coeffs, coeffs)
    np.maximum(res, 0.0, out=res)
    return res


def subspace_error(spec, A, sol, ortho_tol=1e-6):
    """Squared Frobenius residual of A's feature image against sol's subspace.

    `sol` carries points P and coefficients C with L = phi(P) C; the value is
    tr(K_AA) - ||C' K(P, A)||_F^2, clamped at zero against floating
    cancellation.  Raises if L'L deviates from the identity by more than
    ortho_tol.
    """
    points, C = sol.points, sol.C
    if C.shape[1] == 0:
        return float(np.sum(gram_diag(spec, A)))
    K_pp = gram(spec, points, points)
    gap = C.T @ K_pp @ C - np.eye(C.shape[1])
    if np.max(np.abs(gap)) > ortho_tol:
        raise NumericalError(
            f"solution subspace is not orthonormal (deviation {np.max(np.abs(gap)):.2e})"
        )
    proj = C.T @ gram(spec, points, A)
    err = float(np.sum(gram_diag(spec, A)) - np.einsum("ij,ij->", proj, proj))
    return max(err, 0.0)
