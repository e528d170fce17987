"""Kernels and their randomized sketches.

Every kernel here has a randomized finite-dimensional stand-in whose inner
products estimate true kernel values: TensorSketch for polynomial kernels,
random Fourier features for the Gaussian, rectified features for arc-cosine.
This script evaluates each estimator on a fixed pair of points and shows the
estimate converging as the sketch grows.
"""

import numpy as np

from distkpca import (
    ArcCosFeatures,
    ArcCosKernel,
    FourierFeatures,
    GaussianKernel,
    PolynomialKernel,
    TensorSketch,
    kernel_eval,
)

rng = np.random.default_rng(0)
x = rng.standard_normal(12)
y = x + 0.4 * rng.standard_normal(12)
pair = np.stack([x, y], axis=1)

print("point pair: <x, y> =", round(float(x @ y), 4))

print("\npolynomial kernel, degree 2, via TensorSketch")
exact = kernel_eval(PolynomialKernel(2), x, y)
for dim in (64, 256, 1024, 4096):
    Z = TensorSketch(2, dim, seed=1).apply(pair)
    est = float(Z[:, 0] @ Z[:, 1])
    print(f"  dim={dim:5d}  estimate={est:10.3f}  exact={exact:10.3f}  "
          f"rel.err={abs(est - exact) / exact:.3f}")

print("\nGaussian kernel, bandwidth 1.5, via random Fourier features")
exact = kernel_eval(GaussianKernel(1.5), x, y)
for m in (200, 1000, 5000, 20000):
    Z = FourierFeatures(m, 1.5, seed=2).apply(pair)
    est = float(Z[:, 0] @ Z[:, 1])
    print(f"  m={m:6d}  estimate={est:.4f}  exact={exact:.4f}  "
          f"abs.err={abs(est - exact):.4f}")

print("\narc-cosine kernel, degree 1, via rectified random features")
exact = kernel_eval(ArcCosKernel(1), x, y)
for m in (200, 1000, 5000, 20000):
    Z = ArcCosFeatures(m, 1, seed=3).apply(pair)
    est = float(Z[:, 0] @ Z[:, 1])
    print(f"  m={m:6d}  estimate={est:.4f}  exact={exact:.4f}  "
          f"abs.err={abs(est - exact):.4f}")
