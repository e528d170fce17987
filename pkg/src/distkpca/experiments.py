"""Experiment drivers: approximation-error vs communication curves and the
downstream spectral-clustering application.

`error_curve` reruns a method over a sweep of adaptive-sample budgets with
seeded repeats and records the subspace error together with the exact word
count from the ledger.  `spectral_cluster` projects every point onto the
subspace found by the distributed pipeline, gathers the k-dimensional
coordinates at the master, and runs Lloyd's k-means there with a greedy
farthest-point initialization.
"""

import csv
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .algorithms import (
    baseline_uniform_batch,
    baseline_uniform_dislr,
    default_n_leverage,
    dis_kpca,
)
from .kernels import gram, gram_diag, subspace_error
from .seeding import lane, make_rng

METHODS = ("diskpca", "uniform-dislr", "uniform-batch")


@dataclass
class ExperimentRecord:
    """One method run: parameters, error, and exact communication cost."""

    method: str
    params: dict
    subspace_error: float
    total_words: int
    wall_time: float
    opt_error: float = field(default=None)

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)


def run_method(cluster, spec, method, k, n_adapt, seed, epsilon=0.5, w=None,
               opt_error=None, **kpca_kwargs):
    """Run one method on a fresh copy of the cluster and record the outcome.

    The uniform baselines draw n_leverage + n_adapt points so all methods get
    the same nominal point budget at a given n_adapt.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    work = cluster.fresh()
    n_lev = kpca_kwargs.get("n_leverage") or default_n_leverage(k)
    start = time.perf_counter()
    if method == "diskpca":
        sol, _ = dis_kpca(
            work, spec, k, epsilon=epsilon, seed=seed, n_adaptive=n_adapt, w=w,
            **kpca_kwargs,
        )
    elif method == "uniform-dislr":
        sol, _ = baseline_uniform_dislr(
            work, spec, k, n_samples=n_lev + n_adapt, w=w, seed=seed,
        )
    else:
        sol = baseline_uniform_batch(work, spec, k, n_samples=n_lev + n_adapt, seed=seed)
    err = subspace_error(spec, work.data, sol)
    elapsed = time.perf_counter() - start
    params = {
        "k": k,
        "epsilon": epsilon,
        "n_leverage": n_lev,
        "n_adapt": n_adapt,
        "w": w,
        "s": work.n_workers,
        **{key: val for key, val in kpca_kwargs.items() if key != "n_leverage"},
    }
    return ExperimentRecord(
        method=method,
        params=params,
        subspace_error=float(err),
        total_words=int(work.ledger.total_words),
        wall_time=elapsed,
        opt_error=None if opt_error is None else float(opt_error),
    ), sol, work.ledger


def error_curve(cluster, spec, method, sweep, repeats, seed, k, epsilon=0.5,
                opt_error=None, **kpca_kwargs):
    """Records for every sweep point (adaptive budget) and seeded repeat."""
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    records = []
    for n_adapt in sweep:
        for rep in range(repeats):
            rec, _, _ = run_method(
                cluster, spec, method, k, n_adapt,
                seed=lane(seed, method, int(n_adapt), rep),
                epsilon=epsilon, opt_error=opt_error, **kpca_kwargs,
            )
            rec.params["repeat"] = rep
            records.append(rec)
    return records


def summarize(records):
    """Aggregate per (method, n_adapt): mean/std error and mean words."""
    groups = {}
    for rec in records:
        groups.setdefault((rec.method, rec.params["n_adapt"]), []).append(rec)
    rows = []
    for (method, n_adapt), batch in sorted(groups.items()):
        errs = np.array([r.subspace_error for r in batch])
        words = np.array([r.total_words for r in batch], dtype=np.float64)
        rows.append(
            {
                "method": method,
                "n_adapt": int(n_adapt),
                "words": float(words.mean()),
                "err_mean": float(errs.mean()),
                "err_std": float(errs.std()),
                "repeats": len(batch),
            }
        )
    return rows


def write_records_jsonl(records, path):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


def write_curve_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["method", "words", "err_mean", "err_std"])
        writer.writeheader()
        for row in rows:
            writer.writerow({key: row[key] for key in writer.fieldnames})


# ---------------------------------------------------------------------------
# Spectral clustering (KPCA projection + Lloyd's k-means at the master)
# ---------------------------------------------------------------------------

@dataclass
class SpectralClusteringResult:
    assignments: np.ndarray
    objective: float
    projected_objective: float
    iteration_objectives: list
    solution: object
    ledger: object


def _sq_distances(centers, X):
    """Squared Euclidean distances, centers (d x k) against points (d x n)."""
    c2 = np.einsum("ij,ij->j", centers, centers)
    x2 = np.einsum("ij,ij->j", X, X)
    return np.maximum(c2[:, None] + x2[None, :] - 2.0 * centers.T @ X, 0.0)


def farthest_point_init(X, k, seed):
    """Greedy farthest-point center indices: seeded first pick, then argmax
    of the distance to the chosen set (first index on ties)."""
    n = X.shape[1]
    rng = make_rng(seed, "init")
    chosen = [int(rng.integers(n))]
    gap = _sq_distances(X[:, chosen], X)[0]
    for _ in range(1, k):
        nxt = int(np.argmax(gap))
        chosen.append(nxt)
        gap = np.minimum(gap, _sq_distances(X[:, [nxt]], X)[0])
    return np.array(chosen)


def lloyd_kmeans(X, k, seed, max_iters=100):
    """Lloyd's k-means on columns of X with farthest-point initialization.

    Returns (labels, centers, objectives); objectives[i] is the total squared
    distance right after the i-th assignment step, a nonincreasing sequence.
    An emptied cluster is re-seeded from the point farthest from its own
    center.
    """
    n = X.shape[1]
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points {n}")
    centers = X[:, farthest_point_init(X, k, seed)].copy()
    labels = np.full(n, -1)
    objectives = []
    for _ in range(max_iters):
        D = _sq_distances(centers, X)
        new_labels = np.argmin(D, axis=0)
        objectives.append(float(D[new_labels, np.arange(n)].sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        own = D[labels, np.arange(n)]
        taken = set()
        for c in range(k):
            members = labels == c
            if members.any():
                centers[:, c] = X[:, members].mean(axis=1)
            else:
                order = np.argsort(-own, kind="stable")
                pick = next(int(j) for j in order if int(j) not in taken)
                taken.add(pick)
                centers[:, c] = X[:, pick]
    return labels, centers, objectives


def spectral_cluster(cluster, spec, k, seed=0, kmeans_iters=100, **kpca_kwargs):
    """KPCA to k components, project, and cluster in feature space.

    The workers project their blocks onto the solution subspace (k words per
    point charged up), the master runs Lloyd there, and the reported
    objective is the mean squared feature-space distance to the assigned
    center: projected distance plus each point's residual to the subspace.
    The projected-only objective is also returned.
    """
    if k < 2:
        raise ValueError(f"spectral clustering needs k >= 2, got {k}")
    sol, _ = dis_kpca(cluster, spec, k, seed=lane(seed, "kpca"), **kpca_kwargs)
    blocks = [None] * cluster.n_workers
    residual_sums = [None] * cluster.n_workers

    def project(ctx):
        coords = sol.C.T @ gram(spec, sol.points, ctx.data)
        resid = gram_diag(spec, ctx.data) - np.einsum("ij,ij->j", coords, coords)
        np.maximum(resid, 0.0, out=resid)
        ctx.send((coords, float(resid.sum())))

    def gather(ctx):
        for wid, box in enumerate(ctx.messages):
            blocks[wid], residual_sums[wid] = box[0]

    cluster.run_round("project-gather", project, gather)
    X = np.hstack(blocks)
    n = X.shape[1]
    labels, _, objectives = lloyd_kmeans(X, k, lane(seed, "kmeans"), max_iters=kmeans_iters)
    assignments = np.empty(n, dtype=np.int64)
    order = np.concatenate(
        [cluster.partition.worker_columns(w) for w in range(cluster.n_workers)]
    )
    assignments[order] = labels
    projected = objectives[-1] / n
    total = (objectives[-1] + float(np.sum(residual_sums))) / n
    return SpectralClusteringResult(
        assignments=assignments,
        objective=total,
        projected_objective=projected,
        iteration_objectives=objectives,
        solution=sol,
        ledger=cluster.ledger,
    )
