"""Randomized embedding operators: CountSketch, Gaussian maps, TensorSketch,
random Fourier and arc-cosine features, and their compositions.

Operators are immutable descriptors; `apply` regenerates hashes / projection
matrices from the stored seed on every call, so two operators with equal
parameters and seed produce bit-identical output on any input, with no state
to synchronize between workers.  All outputs are dense (they are small by
construction); sparse inputs are consumed without densification.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .kernels import ArcCosKernel, GaussianKernel, PolynomialKernel
from .matrix import ColumnMatrix
from .seeding import lane, make_rng


def _input_values(X):
    if isinstance(X, ColumnMatrix):
        return X.values
    if sp.issparse(X):
        return sp.csc_array(X)
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    return arr


def _densify(X):
    return X.toarray() if sp.issparse(X) else X


@dataclass(frozen=True)
class CountSketch:
    """Signed hashing of input rows into `dim` buckets, linear in nnz."""

    dim: int
    seed: object

    def hash_and_signs(self, in_dim):
        rng = make_rng(self.seed)
        h = rng.integers(0, self.dim, size=in_dim)
        signs = rng.integers(0, 2, size=in_dim) * 2.0 - 1.0
        return h, signs

    @property
    def out_dim(self):
        return self.dim

    def apply(self, X):
        X = _input_values(X)
        h, signs = self.hash_and_signs(X.shape[0])
        S = sp.csr_array(
            (signs, (h, np.arange(X.shape[0]))), shape=(self.dim, X.shape[0])
        )
        return _densify(S @ X)


@dataclass(frozen=True)
class GaussianSketch:
    """Dense i.i.d. N(0, 1/dim) projection to `dim` rows."""

    dim: int
    seed: object

    @property
    def out_dim(self):
        return self.dim

    def matrix(self, in_dim):
        rng = make_rng(self.seed)
        return rng.standard_normal((self.dim, in_dim)) / np.sqrt(self.dim)

    def apply(self, X):
        X = _input_values(X)
        return _densify(self.matrix(X.shape[0]) @ X)


@dataclass(frozen=True)
class TensorSketch:
    """Degree-q polynomial feature sketch via q CountSketches and an FFT
    cyclic convolution of length exactly `dim`.

    Inner products of sketched columns are unbiased estimates of (x'y)^q.
    """

    degree: int
    dim: int
    seed: object

    @property
    def out_dim(self):
        return self.dim

    @property
    def components(self):
        return tuple(
            CountSketch(self.dim, lane(self.seed, "cs", r)) for r in range(self.degree)
        )

    def apply(self, X):
        parts = [cs.apply(X) for cs in self.components]
        if self.degree == 1:
            return parts[0]
        prod = np.fft.fft(parts[0], axis=0)
        for p in parts[1:]:
            prod *= np.fft.fft(p, axis=0)
        return np.fft.ifft(prod, axis=0).real


@dataclass(frozen=True)
class FourierFeatures:
    """Random Fourier features sqrt(2/m) cos(w'x + b) for the Gaussian kernel
    of the given bandwidth; inner products estimate kernel values."""

    n_features: int
    bandwidth: float
    seed: object

    @property
    def out_dim(self):
        return self.n_features

    def apply(self, X):
        X = _input_values(X)
        rng = make_rng(self.seed)
        omega = rng.standard_normal((self.n_features, X.shape[0])) / self.bandwidth
        b = rng.uniform(0.0, 2.0 * np.pi, size=self.n_features)
        Z = _densify(omega @ X)
        Z += b[:, None]
        np.cos(Z, out=Z)
        Z *= np.sqrt(2.0 / self.n_features)
        return Z


@dataclass(frozen=True)
class ArcCosFeatures:
    """Rectified random features sqrt(2/m) max(0, w'x)^degree for the
    arc-cosine kernel (degree 0 uses the step indicator)."""

    n_features: int
    degree: int
    seed: object

    @property
    def out_dim(self):
        return self.n_features

    def apply(self, X):
        X = _input_values(X)
        rng = make_rng(self.seed)
        omega = rng.standard_normal((self.n_features, X.shape[0]))
        T = _densify(omega @ X)
        if self.degree == 0:
            Z = (T > 0).astype(np.float64)
        else:
            np.maximum(T, 0.0, out=T)
            Z = T if self.degree == 1 else T**self.degree
        return Z * np.sqrt(2.0 / self.n_features)


@dataclass(frozen=True)
class ComposedSketch:
    """Stages applied left to right; output dimension is the last stage's."""

    stages: tuple

    @property
    def out_dim(self):
        return self.stages[-1].out_dim

    def apply(self, X):
        out = X
        for stage in self.stages:
            out = stage.apply(out)
        return out


@dataclass
class EmbeddedData:
    """A worker's embedded block E = S(phi(A_local)), dense t x n_local."""

    E: ColumnMatrix
    op: object
    source_count: int = field(default=0)


def default_embed_dim(k, epsilon):
    """Output dimension rule for the kernel subspace embedding."""
    return max(4 * k, int(np.ceil(2.0 * k / epsilon)))


def build_embedding_op(spec, k, epsilon, seed, t=None, t1=None, m=2000,
                       countsketch_stage=None):
    """Construct the subspace-embedding operator for the given kernel.

    Polynomial kernels compose a TensorSketch (dimension t1, default
    3^q k^2 + ceil(k/eps)) with a Gaussian stage down to t rows.  Kernels
    with random feature expansions (Gaussian, arc-cosine) expand to m random
    features, optionally CountSketch down to ceil(k/eps)^2 when that is
    smaller than m, then apply the Gaussian stage.  t defaults to
    max(4k, ceil(2k/eps)).
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not 0 < epsilon <= 1:
        raise ValueError(f"epsilon must be in (0, 1], got {epsilon}")
    if t is None:
        t = default_embed_dim(k, epsilon)
    if isinstance(spec, PolynomialKernel):
        if t1 is None:
            t1 = 3**spec.degree * k * k + int(np.ceil(k / epsilon))
        return ComposedSketch(
            (
                TensorSketch(spec.degree, t1, lane(seed, "tensorsketch")),
                GaussianSketch(t, lane(seed, "gaussian")),
            )
        )
    if isinstance(spec, GaussianKernel):
        features = FourierFeatures(m, spec.bandwidth, lane(seed, "features"))
    elif isinstance(spec, ArcCosKernel):
        features = ArcCosFeatures(m, spec.degree, lane(seed, "features"))
    else:
        raise TypeError(f"unknown kernel spec {spec!r}")
    if m < t:
        warnings.warn(
            f"feature count m={m} is below the embedding dimension t={t}; "
            "the additive error of the embedding may dominate",
            stacklevel=2,
        )
    stages = [features]
    t_cs = int(np.ceil(k / epsilon)) ** 2
    if countsketch_stage is None:
        countsketch_stage = t_cs < m
    if countsketch_stage:
        stages.append(CountSketch(t_cs, lane(seed, "countsketch")))
    stages.append(GaussianSketch(t, lane(seed, "gaussian")))
    return ComposedSketch(tuple(stages))


def good_embedding(spec, k, epsilon, seed, A, t=None, t1=None, m=2000,
                   countsketch_stage=None):
    """Apply the kernel subspace embedding to A, returning EmbeddedData."""
    op = build_embedding_op(
        spec, k, epsilon, seed, t=t, t1=t1, m=m, countsketch_stage=countsketch_stage
    )
    n = A.n_cols if isinstance(A, ColumnMatrix) else _input_values(A).shape[1]
    return EmbeddedData(E=ColumnMatrix(op.apply(A)), op=op, source_count=n)


def sketch_columns(op, M):
    """Right-sketch: compress the columns of M with `op` (M @ S')."""
    return op.apply(np.asarray(M, dtype=np.float64).T).T
