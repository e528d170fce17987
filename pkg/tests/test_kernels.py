import numpy as np
import pytest
from scipy import integrate

from distkpca.kernels import (
    ArcCosKernel,
    GaussianKernel,
    PolynomialKernel,
    build_span_basis,
    gram,
    gram_diag,
    kernel_eval,
    median_bandwidth,
    project_coeffs,
    residual_sq_distances,
    subspace_error,
)
from distkpca.algorithms import KpcaSolution, batch_kpca
from distkpca.matrix import ColumnMatrix, NumericalError
from distkpca.sketch import FourierFeatures

ALL_KERNELS = [
    PolynomialKernel(2),
    PolynomialKernel(3),
    GaussianKernel(1.2),
    ArcCosKernel(0),
    ArcCosKernel(1),
    ArcCosKernel(2),
]


class TestKernelEval:
    def test_gaussian_at_identical_points(self):
        x = np.array([0.3, -1.2, 0.5])
        assert kernel_eval(GaussianKernel(0.7), x, x) == pytest.approx(1.0)

    def test_polynomial_closed_form(self):
        assert kernel_eval(PolynomialKernel(2), [1, 2], [3, 1]) == 25.0

    def test_arccos_degree2_matches_quadrature_oracle(self):
        # oracle: 2 E_w[max(0, w'x)^2 max(0, w'y)^2], w standard normal,
        # reduced to the 2-D plane spanned by x and y
        rng = np.random.default_rng(123)
        x, y = rng.standard_normal(3), rng.standard_normal(3)
        nx, ny = np.linalg.norm(x), np.linalg.norm(y)
        ct = float(x @ y / (nx * ny))
        st = np.sqrt(1.0 - ct**2)

        def integrand(v, u):
            a = max(0.0, u * nx) ** 2
            b = max(0.0, (u * ct + v * st) * ny) ** 2
            return 2.0 * a * b * np.exp(-(u * u + v * v) / 2.0) / (2.0 * np.pi)

        oracle, _ = integrate.dblquad(
            integrand, -8, 8, lambda u: -8, lambda u: 8, epsabs=1e-11, epsrel=1e-11
        )
        assert kernel_eval(ArcCosKernel(2), x, y) == pytest.approx(oracle, rel=1e-6)

    def test_arccos_degree0_orthogonal_vectors(self):
        # orthogonal inputs have angle pi/2: value 1 - (pi/2)/pi = 1/2
        val = kernel_eval(ArcCosKernel(0), [1.0, 0.0], [0.0, 2.0])
        assert val == pytest.approx(0.5)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            kernel_eval(GaussianKernel(1.0), [1.0], [1.0, 2.0])


class TestGram:
    def test_single_point(self):
        x = np.array([[1.0], [2.0]])
        K = gram(PolynomialKernel(2), ColumnMatrix(x), ColumnMatrix(x))
        assert K.shape == (1, 1)
        assert K[0, 0] == pytest.approx(25.0)

    def test_gaussian_unit_diagonal(self):
        rng = np.random.default_rng(0)
        X = ColumnMatrix(rng.standard_normal((3, 4)))
        K = gram(GaussianKernel(0.8), X, X)
        assert np.array_equal(np.diag(K), np.ones(4))

    def test_gaussian_eigenvalues_nonnegative(self):
        rng = np.random.default_rng(1)
        X = ColumnMatrix(rng.standard_normal((4, 6)))
        K = gram(GaussianKernel(1.0), X, X)
        assert np.linalg.eigvalsh(K).min() >= -1e-10

    @pytest.mark.parametrize("spec", ALL_KERNELS)
    def test_symmetric_and_psd_up_to_100_points(self, spec):
        rng = np.random.default_rng(2)
        X = ColumnMatrix(rng.standard_normal((6, 100)))
        K = gram(spec, X, X)
        assert np.abs(K - K.T).max() < 1e-12
        assert np.linalg.eigvalsh(K).min() >= -1e-8 * np.trace(K)

    @pytest.mark.parametrize("spec", ALL_KERNELS)
    def test_diag_matches_gram(self, spec):
        rng = np.random.default_rng(3)
        X = ColumnMatrix(rng.standard_normal((5, 8)))
        assert np.allclose(gram_diag(spec, X), np.diag(gram(spec, X, X)), atol=1e-12)

    def test_sparse_dense_agree(self):
        import scipy.sparse as sp

        rng = np.random.default_rng(4)
        A = rng.standard_normal((6, 9)) * (rng.random((6, 9)) < 0.4)
        for spec in (PolynomialKernel(2), GaussianKernel(1.0)):
            Kd = gram(spec, ColumnMatrix(A), ColumnMatrix(A))
            Ks = gram(spec, ColumnMatrix(sp.csc_array(A)), ColumnMatrix(sp.csc_array(A)))
            assert np.allclose(Kd, Ks, atol=1e-12)


class TestMedianBandwidth:
    def test_seeded_and_positive(self):
        rng = np.random.default_rng(5)
        X = ColumnMatrix(rng.standard_normal((4, 60)))
        a = median_bandwidth(X, seed=7)
        b = median_bandwidth(X, seed=7)
        assert a == b and a > 0

    def test_duplicate_data_rejected(self):
        X = ColumnMatrix(np.ones((3, 10)))
        with pytest.raises(NumericalError):
            median_bandwidth(X, seed=0)


class TestSpanBasis:
    def test_single_unit_point(self):
        Y = ColumnMatrix(np.array([[1.0], [0.0]]))
        basis = build_span_basis(GaussianKernel(1.0), Y)
        assert basis.rank == 1
        assert np.allclose(basis.factor.R, [[1.0]])

    def test_duplicate_point_dropped(self):
        rng = np.random.default_rng(6)
        base = rng.standard_normal((3, 4))
        Y = ColumnMatrix(np.hstack([base, base[:, 1:2]]))
        basis = build_span_basis(GaussianKernel(1.0), Y)
        assert basis.rank == 4
        assert basis.factor.dropped.shape == (1,)

    def test_implied_basis_is_orthonormal(self):
        rng = np.random.default_rng(7)
        Y = ColumnMatrix(rng.standard_normal((5, 8)))
        spec = GaussianKernel(1.5)
        basis = build_span_basis(spec, Y)
        K = gram(spec, basis.retained_points, basis.retained_points)
        Rinv = np.linalg.inv(basis.factor.block)
        assert np.abs(Rinv.T @ K @ Rinv - np.eye(basis.rank)).max() < 1e-6


class TestProjection:
    def test_points_inside_span_have_full_norm(self):
        rng = np.random.default_rng(8)
        spec = GaussianKernel(1.0)
        Y = ColumnMatrix(rng.standard_normal((4, 6)))
        basis = build_span_basis(spec, Y)
        A = Y.take([2, 4])
        coeffs = project_coeffs(basis, spec, A)
        norms = np.einsum("ij,ij->j", coeffs, coeffs)
        assert np.allclose(norms, gram_diag(spec, A), atol=1e-8)

    def test_single_point_projection(self):
        spec = PolynomialKernel(2)
        Y = ColumnMatrix(np.array([[1.0], [2.0]]))
        basis = build_span_basis(spec, Y)
        coeffs = project_coeffs(basis, spec, Y)
        assert coeffs.shape == (1, 1)
        assert coeffs[0, 0] == pytest.approx(np.sqrt(kernel_eval(spec, [1, 2], [1, 2])))

    @pytest.mark.parametrize("spec", [GaussianKernel(0.9), PolynomialKernel(2)])
    def test_projection_never_exceeds_norm(self, spec):
        rng = np.random.default_rng(9)
        Y = ColumnMatrix(rng.standard_normal((5, 7)))
        A = ColumnMatrix(rng.standard_normal((5, 20)))
        basis = build_span_basis(spec, Y)
        coeffs = project_coeffs(basis, spec, A)
        norms = np.einsum("ij,ij->j", coeffs, coeffs)
        assert np.all(norms <= gram_diag(spec, A) + 1e-8)


class TestResiduals:
    def test_zero_for_span_members(self):
        rng = np.random.default_rng(10)
        spec = GaussianKernel(1.1)
        Y = ColumnMatrix(rng.standard_normal((4, 5)))
        basis = build_span_basis(spec, Y)
        assert np.all(residual_sq_distances(basis, spec, Y) < 1e-8)

    def test_one_point_basis_closed_form(self):
        spec = GaussianKernel(1.0)
        y = np.array([[0.5], [0.5]])
        a = np.array([[1.5], [-0.5]])
        basis = build_span_basis(spec, ColumnMatrix(y))
        r = residual_sq_distances(basis, spec, ColumnMatrix(a))[0]
        kaa = kernel_eval(spec, a.ravel(), a.ravel())
        kay = kernel_eval(spec, a.ravel(), y.ravel())
        kyy = kernel_eval(spec, y.ravel(), y.ravel())
        assert r == pytest.approx(kaa - kay**2 / kyy, abs=1e-12)

    def test_matches_explicit_feature_oracle(self):
        # explicit random Fourier features with m = 1e5 approximate the
        # kernel geometry; residuals should agree within 2%
        rng = np.random.default_rng(11)
        sigma = 1.3
        spec = GaussianKernel(sigma)
        Y = ColumnMatrix(rng.standard_normal((4, 5)))
        A = ColumnMatrix(rng.standard_normal((4, 8)))
        basis = build_span_basis(spec, Y)
        r = residual_sq_distances(basis, spec, A)

        feats = FourierFeatures(100_000, sigma, seed=99)
        ZY, ZA = feats.apply(Y), feats.apply(A)
        Q = np.linalg.qr(ZY)[0]
        resid = ZA - Q @ (Q.T @ ZA)
        oracle = np.einsum("ij,ij->j", resid, resid)
        assert np.allclose(r, oracle, rtol=0.02, atol=0.005)

    def test_monotone_in_added_points(self):
        rng = np.random.default_rng(12)
        spec = GaussianKernel(1.0)
        pts = rng.standard_normal((4, 9))
        A = ColumnMatrix(rng.standard_normal((4, 15)))
        small = build_span_basis(spec, ColumnMatrix(pts[:, :5]))
        large = build_span_basis(spec, ColumnMatrix(pts))
        r_small = residual_sq_distances(small, spec, A)
        r_large = residual_sq_distances(large, spec, A)
        assert np.all(r_large <= r_small + 1e-8)


class TestSubspaceError:
    def test_full_span_solution_has_zero_error(self):
        rng = np.random.default_rng(13)
        A = ColumnMatrix(rng.standard_normal((4, 12)))
        spec = GaussianKernel(1.0)
        sol, opt = batch_kpca(spec, A, k=12)
        err = subspace_error(spec, A, sol)
        assert err == pytest.approx(0.0, abs=1e-6 * 12)
        assert opt == pytest.approx(0.0, abs=1e-8 * 12)

    def test_empty_solution_gives_trace(self):
        rng = np.random.default_rng(14)
        A = ColumnMatrix(rng.standard_normal((3, 6)))
        spec = GaussianKernel(1.0)
        sol = KpcaSolution(points=A, C=np.zeros((6, 0)), k=0)
        assert subspace_error(spec, A, sol) == pytest.approx(6.0)

    def test_matches_batch_eigendecomposition_oracle(self):
        rng = np.random.default_rng(15)
        A = ColumnMatrix(rng.standard_normal((5, 30)))
        spec = GaussianKernel(1.4)
        K = gram(spec, A, A)
        evals = np.linalg.eigvalsh(K)[::-1]
        for k in (1, 3, 10):
            sol, opt = batch_kpca(spec, A, k)
            err = subspace_error(spec, A, sol)
            assert err == pytest.approx(float(evals[k:].sum()), rel=1e-6)
            assert opt == pytest.approx(float(evals[k:].sum()), rel=1e-6)

    def test_non_orthonormal_solution_rejected(self):
        rng = np.random.default_rng(16)
        A = ColumnMatrix(rng.standard_normal((3, 5)))
        spec = GaussianKernel(1.0)
        sol = KpcaSolution(points=A, C=np.ones((5, 2)), k=2)
        with pytest.raises(NumericalError, match="orthonormal"):
            subspace_error(spec, A, sol)
