"""Communication-efficient distributed kernel PCA over a simulated
master-worker network, with word-exact communication accounting."""

from .algorithms import (
    KpcaSolution,
    LeverageScores,
    RepresentativeSet,
    baseline_uniform_batch,
    baseline_uniform_dislr,
    batch_kpca,
    centralized_kpca,
    default_n_leverage,
    dis_kpca,
    dis_leverage_scores,
    dis_low_rank,
    rep_sample,
)
from .data import gen_clustered, gen_low_rank, gen_synthetic, load_dataset, save_dataset
from .experiments import (
    ExperimentRecord,
    error_curve,
    lloyd_kmeans,
    run_method,
    spectral_cluster,
    summarize,
)
from .kernels import (
    ArcCosKernel,
    GaussianKernel,
    PolynomialKernel,
    SpanBasis,
    build_span_basis,
    gram,
    gram_diag,
    kernel_eval,
    median_bandwidth,
    project_coeffs,
    residual_sq_distances,
    subspace_error,
)
from .matrix import (
    ColumnMatrix,
    NumericalError,
    SvdResult,
    TriangularFactor,
    hstack_columns,
    matmul,
    psd_factor,
    qr_thin,
    tri_solve,
    truncated_svd,
)
from .seeding import lane, make_rng
from .simnet import Cluster, CommLedger, Partition, partition_power_law, word_count
from .sketch import (
    ArcCosFeatures,
    ComposedSketch,
    CountSketch,
    EmbeddedData,
    FourierFeatures,
    GaussianSketch,
    TensorSketch,
    build_embedding_op,
    good_embedding,
    sketch_columns,
)

__version__ = "0.1.0"
