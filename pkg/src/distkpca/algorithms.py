"""The distributed kernel PCA pipeline and its baselines.

The pipeline runs in four stages over a simulated cluster: (1) every worker
compresses its local block with a shared kernel subspace embedding; (2) the
workers and master cooperate to estimate every column's leverage score from
the embedded data; (3) a representative point set is sampled in two passes,
first by leverage scores and then adaptively by residual distance to the
span of the first pass; (4) the data is projected onto the span of the
representatives, right-sketched, and the master extracts the top-k subspace.
Every message goes through the cluster ledger, and all randomness derives
from one root seed through labeled lanes, so a single-worker run is
bit-identical to the centralized path (`centralized_kpca`).
"""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .kernels import (
    build_span_basis,
    gram,
    project_coeffs,
    residual_sq_distances,
)
from .matrix import ColumnMatrix, NumericalError, hstack_columns, qr_thin, tri_solve, truncated_svd
from .seeding import lane, make_rng
from .sketch import EmbeddedData, GaussianSketch, build_embedding_op, sketch_columns

logger = logging.getLogger(__name__)


@dataclass
class LeverageScores:
    """Approximate leverage scores per worker, plus their global sum."""

    per_worker: list
    global_sum: float

    @property
    def worker_sums(self):
        return np.array([float(v.sum()) for v in self.per_worker])

    def concatenated(self):
        return np.concatenate(self.per_worker)


@dataclass
class RepresentativeSet:
    """Sampled representative points: leverage-sampled P, then adaptive ones.

    `indices` are global column indices (P first, then the adaptive points,
    each group in ascending order, deduplicated); `columns` holds the actual
    points and `owners` the worker that contributed each.
    """

    indices: np.ndarray
    columns: ColumnMatrix
    owners: np.ndarray
    n_leverage: int
    n_adaptive: int
    leverage_draws: int
    adaptive_draws: int


@dataclass
class KpcaSolution:
    """A rank-k subspace L = phi(points) @ C with orthonormal columns."""

    points: ColumnMatrix
    C: np.ndarray
    k: int
    basis: object = field(default=None)
    rep: object = field(default=None)


def default_n_leverage(k, coeff=5.0):
    """Default leverage-stage draw count, ceil(coeff * k * ln(k + 1))."""
    return int(np.ceil(coeff * k * np.log(k + 1)))


# ---------------------------------------------------------------------------
# Stage 2: distributed leverage scores
# ---------------------------------------------------------------------------

def _scores_from_mixing(Z, E):
    """Column norms of Z^-T E, falling back to a pseudo-solve (with a
    warning) if Z is rank deficient."""
    rank = int(np.linalg.matrix_rank(Z))
    if rank == Z.shape[0]:
        X = np.linalg.solve(Z.T, E)
    else:
        warnings.warn(
            f"leverage mixing matrix has rank {rank} < {Z.shape[0]}; "
            "using a pseudo-solve on the retained directions",
            stacklevel=3,
        )
        X = np.linalg.lstsq(Z.T, E, rcond=None)[0]
    return np.einsum("ij,ij->j", X, X)


def dis_leverage_scores(cluster, embedded, p, seed):
    """Estimate the leverage scores of the concatenated embedded data.

    Every worker right-sketches its t x n_i block down to t x p and uploads
    it (blocks narrower than p go up as they are); the master QR-factorizes
    the stacked transpose and broadcasts the triangular mixing matrix Z;
    workers then score their own columns as squared column norms of Z^-T E_i
    and upload the per-worker sums.
    """
    t = embedded[0].E.n_rows
    if any(e.E.n_rows != t for e in embedded):
        raise ValueError("embedded blocks disagree on row dimension")
    if p < t:
        raise ValueError(f"right-sketch dimension p={p} must be >= t={t}")

    def sketch_up(ctx):
        E = embedded[ctx.wid].E.toarray()
        if p >= E.shape[1]:
            ctx.send(E)
        else:
            op = GaussianSketch(p, lane(seed, "right-sketch", ctx.wid))
            ctx.send(sketch_columns(op, E))

    def fold_and_mix(ctx):
        stacked = np.hstack([box[0] for box in ctx.messages])
        _, factor = qr_thin(stacked.T)
        ctx.state["mixing"] = factor.R
        ctx.broadcast(factor.R)

    cluster.run_round("leverage-sketch", sketch_up, fold_and_mix)

    per_worker = [None] * cluster.n_workers

    def score(ctx):
        Z = ctx.inbox[0]
        scores = _scores_from_mixing(Z, embedded[ctx.wid].E.toarray())
        per_worker[ctx.wid] = scores
        ctx.send(float(scores.sum()))

    def total(ctx):
        ctx.state["score_sum"] = float(sum(box[0] for box in ctx.messages))

    cluster.run_round("leverage-scores", score, total)
    return LeverageScores(
        per_worker=per_worker, global_sum=cluster.master_state["score_sum"]
    )


# ---------------------------------------------------------------------------
# Stage 3: representative sampling
# ---------------------------------------------------------------------------

def _draw_local(rng, weights, count):
    """Sample `count` local column positions with replacement, proportional
    to `weights`; returns unique positions in ascending order."""
    if count == 0:
        return np.empty(0, dtype=np.intp)
    total = float(weights.sum())
    draws = rng.choice(weights.shape[0], size=count, replace=True, p=weights / total)
    return np.unique(draws)


def _gather_points(messages):
    """Merge (global_indices, columns) uploads into ascending global order."""
    idx_parts = [box[0][0] for box in messages if box]
    col_parts = [box[0][1] for box in messages if box]
    keep = [i for i, ix in enumerate(idx_parts) if ix.size]
    if not keep:
        return np.empty(0, dtype=np.int64), None
    idx = np.concatenate([idx_parts[i] for i in keep])
    cols = hstack_columns([col_parts[i] for i in keep])
    order = np.argsort(idx, kind="stable")
    return idx[order], cols.take(order)


def rep_sample(cluster, spec, scores, n_lev, n_adapt, seed, span_tol=1e-10):
    """Two-pass representative sampling.

    Pass one draws n_lev points (with replacement, deduplicated) proportional
    to the leverage scores, allocating per-worker counts multinomially from
    the per-worker score sums.  Pass two draws n_adapt points proportional to
    the squared residual distance to the span of the first pass.  Returns the
    union with the points themselves.
    """
    if n_lev < 1 or n_adapt < 1:
        raise ValueError("n_lev and n_adapt must be >= 1")

    def alloc_leverage(ctx):
        sums = scores.worker_sums
        total = float(sums.sum())
        if total <= 0:
            raise NumericalError("all leverage scores are zero; nothing to sample")
        rng = make_rng(seed, "alloc-lev")
        counts = rng.multinomial(n_lev, sums / total)
        for wid in range(ctx.n_workers):
            ctx.send_to(wid, int(counts[wid]))

    cluster.run_round("sample-leverage-alloc", lambda ctx: None, alloc_leverage)

    def draw_leverage(ctx):
        count = ctx.inbox[0]
        rng = make_rng(seed, "lev-sample", ctx.wid)
        local = _draw_local(rng, scores.per_worker[ctx.wid], count)
        ctx.send((ctx.global_indices[local], ctx.data.take(local)))

    def merge_p(ctx):
        idx, cols = _gather_points(ctx.messages)
        ctx.state["P"] = (idx, cols)
        ctx.broadcast((idx, cols))

    cluster.run_round("sample-leverage", draw_leverage, merge_p)
    p_idx, p_cols = cluster.master_state["P"]

    residuals = [None] * cluster.n_workers

    def residual_sums(ctx):
        _, cols = ctx.inbox[0]
        basis = build_span_basis(spec, cols, tol=span_tol)
        res = residual_sq_distances(basis, spec, ctx.data)
        residuals[ctx.wid] = res
        ctx.send(float(res.sum()))

    def alloc_adaptive(ctx):
        sums = np.array([box[0] for box in ctx.messages])
        total = float(sums.sum())
        if total <= 1e-12 * max(total, 1.0):
            logger.info("all residuals are zero; skipping the adaptive pass")
            counts = np.zeros(ctx.n_workers, dtype=np.int64)
        else:
            rng = make_rng(seed, "alloc-adapt")
            counts = rng.multinomial(n_adapt, sums / total)
        for wid in range(ctx.n_workers):
            ctx.send_to(wid, int(counts[wid]))

    cluster.run_round("sample-adaptive-alloc", residual_sums, alloc_adaptive)

    def draw_adaptive(ctx):
        count = ctx.inbox[0]
        rng = make_rng(seed, "adapt-sample", ctx.wid)
        local = _draw_local(rng, residuals[ctx.wid], count)
        ctx.send((ctx.global_indices[local], ctx.data.take(local)))

    def merge_y(ctx):
        idx, cols = _gather_points(ctx.messages)
        p_idx, p_cols = ctx.state["P"]
        if idx.size:
            new = ~np.isin(idx, p_idx)
            idx, cols = idx[new], cols.take(np.flatnonzero(new))
        if idx.size:
            y_idx = np.concatenate([p_idx, idx])
            y_cols = hstack_columns([p_cols, cols])
        else:
            y_idx, y_cols = p_idx, p_cols
        ctx.state["Y"] = (y_idx, y_cols, idx.size)
        ctx.broadcast((y_idx, y_cols))

    cluster.run_round("sample-adaptive", draw_adaptive, merge_y)
    y_idx, y_cols, n_new = cluster.master_state["Y"]
    return RepresentativeSet(
        indices=y_idx,
        columns=y_cols,
        owners=cluster.partition.assignment[y_idx],
        n_leverage=p_idx.size,
        n_adaptive=int(n_new),
        leverage_draws=n_lev,
        adaptive_draws=n_adapt,
    )


# ---------------------------------------------------------------------------
# Stage 4: low-rank fit in the span of the representatives
# ---------------------------------------------------------------------------

def dis_low_rank(cluster, spec, rep, k, w=None, seed=0, span_tol=1e-10):
    """Best rank-k fit of the data inside span phi(Y).

    Workers project their blocks onto the span (coefficients r x n_i), right
    sketch to r x min(w, n_i) (no sketch when w covers the block), and the
    master takes the top-k left singular vectors of the concatenation.  The
    returned solution has L = phi(Y_retained) C with C = R^-1 W.
    """
    y_cols = rep.columns if isinstance(rep, RepresentativeSet) else rep
    if w is None:
        w = y_cols.n_cols
    basis = build_span_basis(spec, y_cols, tol=span_tol)
    if w < basis.rank:
        raise ValueError(f"fit sketch dimension w={w} is below the span rank {basis.rank}")

    def project_and_sketch(ctx):
        coeffs = project_coeffs(basis, spec, ctx.data)
        if w >= coeffs.shape[1]:
            ctx.send(coeffs)
        else:
            op = GaussianSketch(w, lane(seed, "fit-sketch", ctx.wid))
            ctx.send(sketch_columns(op, coeffs))

    def fit(ctx):
        stacked = np.hstack([box[0] for box in ctx.messages])
        k_eff = k
        if basis.rank < k:
            warnings.warn(
                f"span rank {basis.rank} is below the requested k={k}; reducing k",
                stacklevel=2,
            )
            k_eff = basis.rank
        W = truncated_svd(stacked, k_eff).U
        ctx.state["W"] = W
        ctx.broadcast(W)

    cluster.run_round("fit", project_and_sketch, fit)
    W = cluster.master_state["W"]
    C = tri_solve(basis.factor, W)
    return KpcaSolution(
        points=basis.retained_points,
        C=C,
        k=W.shape[1],
        basis=basis,
        rep=rep if isinstance(rep, RepresentativeSet) else None,
    )


# ---------------------------------------------------------------------------
# The full pipeline and its baselines
# ---------------------------------------------------------------------------

def dis_kpca(cluster, spec, k, epsilon=0.5, seed=0, t=None, p=None, m=2000,
             n_leverage=None, n_adaptive=None, w=None, span_tol=1e-10,
             countsketch_stage=None):
    """Distributed kernel PCA: embed, score, sample, fit.

    Embedding-stage defaults follow the coarse quarter-error regime with
    t = max(4k, 50) rows and a right-sketch width p = 5t; the sample counts
    default to ceil(5 k ln(k+1)) leverage draws and ceil(k / epsilon)
    adaptive draws, and the fit sketch width w defaults to |Y|.  Returns the
    solution together with the cluster's communication ledger.
    """
    if not 0 < epsilon <= 1:
        raise ValueError(f"epsilon must be in (0, 1], got {epsilon}")
    if t is None:
        t = max(4 * k, 50)
    if p is None:
        p = 5 * t
    if n_leverage is None:
        n_leverage = default_n_leverage(k)
    if n_adaptive is None:
        n_adaptive = int(np.ceil(k / epsilon))
    op = build_embedding_op(
        spec, k, 0.25, lane(seed, "embed"), t=t, m=m, countsketch_stage=countsketch_stage
    )
    seed_token = int(lane(seed).generate_state(1)[0])

    def share_seed(ctx):
        # one word per worker, standing in for the shared-randomness setup
        ctx.broadcast(seed_token)

    cluster.run_round("setup", lambda ctx: None, share_seed)

    embedded = [None] * cluster.n_workers

    def embed(ctx):
        E = op.apply(ctx.data)
        embedded[ctx.wid] = EmbeddedData(
            E=ColumnMatrix(E), op=op, source_count=ctx.data.n_cols
        )

    cluster.run_round("embed", embed)
    scores = dis_leverage_scores(cluster, embedded, p, lane(seed, "leverage"))
    rep = rep_sample(
        cluster, spec, scores, n_leverage, n_adaptive, lane(seed, "sample"),
        span_tol=span_tol,
    )
    sol = dis_low_rank(
        cluster, spec, rep, k, w=w, seed=lane(seed, "fit"), span_tol=span_tol
    )
    return sol, cluster.ledger


def _gather_uniform(cluster, n_samples, seed, broadcast_y):
    """Master draws global indices uniformly without replacement, pulls the
    columns from their owners, and optionally broadcasts the set."""
    n = cluster.data.n_cols
    if n_samples > n:
        warnings.warn(f"n_samples={n_samples} exceeds n={n}; clamping", stacklevel=3)
        n_samples = n

    def alloc(ctx):
        rng = make_rng(seed, "uniform")
        chosen = np.sort(rng.choice(n, size=n_samples, replace=False))
        ctx.state["chosen"] = chosen
        owners = cluster.partition.assignment[chosen]
        for wid in range(ctx.n_workers):
            ctx.send_to(wid, chosen[owners == wid])

    cluster.run_round("uniform-alloc", lambda ctx: None, alloc)

    def upload(ctx):
        wanted = ctx.inbox[0]
        local = np.searchsorted(ctx.global_indices, wanted)
        ctx.send((wanted, ctx.data.take(local)))

    def merge(ctx):
        idx, cols = _gather_points(ctx.messages)
        ctx.state["Y"] = (idx, cols)
        if broadcast_y:
            ctx.broadcast((idx, cols))

    cluster.run_round("uniform-gather", upload, merge)
    return cluster.master_state["Y"]


def baseline_uniform_dislr(cluster, spec, k, n_samples, w=None, seed=0,
                           span_tol=1e-10):
    """Uniformly sampled representatives followed by the distributed fit."""
    idx, cols = _gather_uniform(cluster, n_samples, seed, broadcast_y=True)
    rep = RepresentativeSet(
        indices=idx,
        columns=cols,
        owners=cluster.partition.assignment[idx],
        n_leverage=0,
        n_adaptive=idx.size,
        leverage_draws=0,
        adaptive_draws=n_samples,
    )
    sol = dis_low_rank(
        cluster, spec, rep, k, w=w, seed=lane(seed, "fit"), span_tol=span_tol
    )
    return sol, cluster.ledger


def baseline_uniform_batch(cluster, spec, k, n_samples, seed=0):
    """Uniformly sampled columns solved exactly at the master."""
    _, cols = _gather_uniform(cluster, n_samples, seed, broadcast_y=False)
    sol, _ = batch_kpca(spec, cols, k)
    return sol


def batch_kpca(spec, A, k, rank_tol=1e-10):
    """Exact kernel PCA by eigendecomposition of the full Gram matrix.

    Returns the solution (over Y = A) and the optimum rank-k error, the sum
    of the trailing eigenvalues.  k above the numerical rank is clamped with
    a warning.
    """
    if not isinstance(A, ColumnMatrix):
        A = ColumnMatrix(A)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    K = gram(spec, A, A)
    evals, evecs = np.linalg.eigh(K)
    evals, evecs = evals[::-1].copy(), evecs[:, ::-1].copy()
    rank = int(np.sum(evals > rank_tol * max(evals[0], 0.0)))
    if rank == 0:
        raise NumericalError("kernel matrix is numerically zero")
    if k > rank:
        warnings.warn(f"k={k} exceeds the kernel rank {rank}; clamping", stacklevel=2)
        k = rank
    for i in range(k):
        lead = int(np.argmax(np.abs(evecs[:, i])))
        if evecs[lead, i] < 0:
            evecs[:, i] = -evecs[:, i]
    C = evecs[:, :k] / np.sqrt(evals[:k])
    opt_error = float(np.sum(np.clip(evals[k:], 0.0, None)))
    return KpcaSolution(points=A, C=C, k=k), opt_error


# ---------------------------------------------------------------------------
# Centralized mirror of the pipeline (for the single-worker equivalence)
# ---------------------------------------------------------------------------

def centralized_kpca(A, spec, k, epsilon=0.5, seed=0, t=None, p=None, m=2000,
                     n_leverage=None, n_adaptive=None, w=None, span_tol=1e-10,
                     countsketch_stage=None):
    """The same pipeline as `dis_kpca` run without a cluster.

    Uses the worker-0 seed lanes throughout, so on a single-worker cluster
    `dis_kpca` produces bit-identical output.
    """
    if not 0 < epsilon <= 1:
        raise ValueError(f"epsilon must be in (0, 1], got {epsilon}")
    if not isinstance(A, ColumnMatrix):
        A = ColumnMatrix(A)
    n = A.n_cols
    if t is None:
        t = max(4 * k, 50)
    if p is None:
        p = 5 * t
    if n_leverage is None:
        n_leverage = default_n_leverage(k)
    if n_adaptive is None:
        n_adaptive = int(np.ceil(k / epsilon))
    op = build_embedding_op(
        spec, k, 0.25, lane(seed, "embed"), t=t, m=m, countsketch_stage=countsketch_stage
    )
    E = op.apply(A)

    lev_seed = lane(seed, "leverage")
    if p >= E.shape[1]:
        sketched = E
    else:
        right = GaussianSketch(p, lane(lev_seed, "right-sketch", 0))
        sketched = sketch_columns(right, E)
    _, factor = qr_thin(sketched.T)
    scores = _scores_from_mixing(factor.R, E)

    samp_seed = lane(seed, "sample")
    counts = make_rng(samp_seed, "alloc-lev").multinomial(n_leverage, np.array([1.0]))
    p_idx = _draw_local(make_rng(samp_seed, "lev-sample", 0), scores, int(counts[0]))
    p_cols = A.take(p_idx)
    basis_p = build_span_basis(spec, p_cols, tol=span_tol)
    res = residual_sq_distances(basis_p, spec, A)
    total = float(res.sum())
    if total <= 1e-12 * max(total, 1.0):
        logger.info("all residuals are zero; skipping the adaptive pass")
        a_idx = np.empty(0, dtype=np.intp)
    else:
        counts = make_rng(samp_seed, "alloc-adapt").multinomial(n_adaptive, np.array([1.0]))
        a_idx = _draw_local(make_rng(samp_seed, "adapt-sample", 0), res, int(counts[0]))
        a_idx = a_idx[~np.isin(a_idx, p_idx)]
    y_idx = np.concatenate([p_idx, a_idx])
    y_cols = A.take(y_idx)

    fit_seed = lane(seed, "fit")
    basis = build_span_basis(spec, y_cols, tol=span_tol)
    coeffs = project_coeffs(basis, spec, A)
    w_eff = y_cols.n_cols if w is None else w
    if w_eff >= n:
        sketched = coeffs
    else:
        sketched = sketch_columns(GaussianSketch(w_eff, lane(fit_seed, "fit-sketch", 0)), coeffs)
    k_eff = min(k, basis.rank)
    if k_eff < k:
        warnings.warn(f"span rank {basis.rank} is below the requested k={k}; reducing k",
                      stacklevel=2)
    W = truncated_svd(sketched, k_eff).U
    C = tri_solve(basis.factor, W)
    rep = RepresentativeSet(
        indices=y_idx,
        columns=y_cols,
        owners=np.zeros(y_idx.size, dtype=np.int64),
        n_leverage=p_idx.size,
        n_adaptive=a_idx.size,
        leverage_draws=n_leverage,
        adaptive_draws=n_adaptive,
    )
    return KpcaSolution(points=basis.retained_points, C=C, k=W.shape[1], basis=basis, rep=rep)
