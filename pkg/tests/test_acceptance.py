"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines; every tolerance is pinned here.
"""

import json
import time

import numpy as np
import pytest

import distkpca as dk
from distkpca.cli import main as cli_main
from distkpca.matrix import ColumnMatrix
from distkpca.seeding import lane, make_rng
from distkpca.sketch import EmbeddedData, FourierFeatures, TensorSketch


def report(name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    print(line)
    assert ok, line


# ---------------------------------------------------------------------------
# 1. batch oracle optimality
# ---------------------------------------------------------------------------

def test_c01_batch_oracle_optimality():
    start = time.perf_counter()
    worst = 0.0
    for trial in range(20):
        rng = make_rng(9001, "c1", trial)
        n = int(rng.integers(50, 501))
        d = int(rng.integers(4, 16))
        A = ColumnMatrix(rng.standard_normal((d, n)))
        spec = (
            dk.GaussianKernel(float(rng.uniform(0.8, 2.0)))
            if trial % 2 == 0
            else dk.PolynomialKernel(2)
        )
        k = int(rng.integers(1, 12))
        sol, opt = dk.batch_kpca(spec, A, k)
        err = dk.subspace_error(spec, A, sol)
        tail = float(np.linalg.eigvalsh(dk.gram(spec, A, A))[::-1][sol.k :].sum())
        scale = max(abs(tail), 1e-12)
        worst = max(worst, abs(err - tail) / scale, abs(opt - tail) / scale)
    elapsed = time.perf_counter() - start
    report(
        "criterion 1 (batch oracle optimality)",
        worst < 1e-6 and elapsed < 10.0,
        f"worst relative gap {worst:.2e} over 20 instances in {elapsed:.1f}s",
    )


# ---------------------------------------------------------------------------
# 2. disKPCA approximation on the reference synthetic
# ---------------------------------------------------------------------------

def test_c02_diskpca_approximation():
    start = time.perf_counter()
    n, d, s, k = 2000, 20, 5, 10
    A = dk.gen_low_rank(n, d, k, noise=0.25, seed=777)
    spec = dk.GaussianKernel(dk.median_bandwidth(A, seed=0))
    _, opt = dk.batch_kpca(spec, A, k)
    tr = float(np.sum(dk.gram_diag(spec, A)))
    bound = 1.15 * opt + 0.02 * tr
    part = dk.partition_power_law(n, s, 2.0, seed=1)
    hits = 0
    for seed in range(100):
        cluster = dk.Cluster(A, part)
        sol, _ = dk.dis_kpca(
            cluster, spec, k=k, seed=lane(4242, seed),
            t=50, p=250, m=2000, n_adaptive=200,
        )
        hits += dk.subspace_error(spec, A, sol) <= bound
    elapsed = time.perf_counter() - start
    report(
        "criterion 2 (disKPCA approximation)",
        hits >= 90 and elapsed < 300.0,
        f"{hits}/100 seeds within 1.15*opt + 0.02*tr in {elapsed:.0f}s",
    )


# ---------------------------------------------------------------------------
# 3. polynomial-kernel exactness regime
# ---------------------------------------------------------------------------

def test_c03_polynomial_exactness():
    # columns in a 4-dim subspace of R^20: the degree-2 feature rank is
    # exactly 4*5/2 = 10 = k, so the optimum error is zero
    rng = make_rng(424242, "c3-data")
    A = ColumnMatrix(rng.standard_normal((20, 4)) @ rng.standard_normal((4, 1000)))
    spec = dk.PolynomialKernel(2)
    tr = float(np.sum(dk.gram_diag(spec, A)))
    part = dk.partition_power_law(1000, 5, 2.0, seed=1)
    hits = 0
    with pytest.warns(UserWarning):  # exact low rank trips the pseudo-solve path
        for seed in range(100):
            cluster = dk.Cluster(A, part)
            sol, _ = dk.dis_kpca(
                cluster, spec, k=10, seed=lane(31337, seed), t=50, p=250, n_adaptive=50
            )
            hits += dk.subspace_error(spec, A, sol) <= 0.05 * tr
    report(
        "criterion 3 (polynomial exactness)",
        hits >= 90,
        f"{hits}/100 seeds at error <= 0.05 tr(K)",
    )


# ---------------------------------------------------------------------------
# 4. leverage-score bracket
# ---------------------------------------------------------------------------

def _bracket_rate(t, n, s, p, seeds):
    ok = tot = 0
    for seed in range(seeds):
        rng = np.random.default_rng(seed)
        E = rng.standard_normal((t, n))
        part = dk.partition_power_law(n, s, 2.0, seed=seed)
        cluster = dk.Cluster(ColumnMatrix(rng.standard_normal((2, n))), part)
        blocks = [
            EmbeddedData(E=ColumnMatrix(E[:, part.worker_columns(i)]), op=None,
                         source_count=int(part.sizes[i]))
            for i in range(s)
        ]
        scores = dk.dis_leverage_scores(cluster, blocks, p, lane(777, seed))
        order = np.concatenate([part.worker_columns(i) for i in range(s)])
        Vt = np.linalg.svd(E[:, order], full_matrices=False)[2]
        exact = np.einsum("ij,ij->j", Vt, Vt)
        ratio = np.concatenate(scores.per_worker) / exact
        ok += int(np.sum((ratio >= 0.5) & (ratio <= 1.5)))
        tot += n
    return ok / tot


def test_c04_leverage_bracket():
    start = time.perf_counter()
    t = 8
    p = 16 * t  # quarter-error right-sketch width
    rate_pinned = _bracket_rate(t, 60, 3, p, seeds=20)
    # larger n so the sketch path engages on the big shards
    rate_sketched = _bracket_rate(t, 1000, 3, p, seeds=20)
    elapsed = time.perf_counter() - start
    report(
        "criterion 4 (leverage-score bracket)",
        rate_pinned >= 0.95 and rate_sketched >= 0.95 and elapsed < 30.0,
        f"in-bracket {rate_pinned:.3f} (n=60), {rate_sketched:.3f} (n=1000) in {elapsed:.1f}s",
    )


# ---------------------------------------------------------------------------
# 5. communication linearity in s
# ---------------------------------------------------------------------------

def test_c05_communication_linear_in_s():
    n, d, k = 4000, 8, 5
    A = dk.gen_low_rank(n, d, 4, noise=0.3, seed=12)
    spec = dk.GaussianKernel(1.0)
    svals = [2, 4, 8, 16]
    words = []
    for s in svals:
        part = dk.partition_power_law(n, s, 0.0, seed=13)
        cluster = dk.Cluster(A, part)
        dk.dis_kpca(cluster, spec, k=k, seed=55, t=20, p=100, n_adaptive=40, w=120)
        words.append(cluster.ledger.total_words)
    fit = np.polyval(np.polyfit(svals, words, 1), svals)
    resid = float(np.max(np.abs(fit - words) / np.asarray(words)))
    report(
        "criterion 5 (communication linear in s)",
        resid < 0.05,
        f"words={words}, max relative residual {resid:.4f}",
    )


# ---------------------------------------------------------------------------
# 6. sketch statistics
# ---------------------------------------------------------------------------

def test_c06_sketch_statistics():
    rng = np.random.default_rng(9)
    x = rng.standard_normal(10)
    y = x + 0.3 * rng.standard_normal(10)
    pair = np.stack([x, y], axis=1)

    exact_poly = float(x @ y) ** 2
    ts_est = []
    for seed in range(500):
        Z = TensorSketch(2, 512, seed=lane(1234, seed)).apply(pair)
        ts_est.append(float(Z[:, 0] @ Z[:, 1]))
    ts_mean = float(np.mean(ts_est))
    ts_se = float(np.std(ts_est, ddof=1) / np.sqrt(len(ts_est)))
    ts_ok = abs(ts_mean - exact_poly) <= min(3 * ts_se, 0.05 * exact_poly)

    sigma = 1.3
    exact_rbf = dk.kernel_eval(dk.GaussianKernel(sigma), x, y)
    rf_est = []
    for seed in range(500):
        Z = FourierFeatures(2000, sigma, seed=lane(88, seed)).apply(pair)
        rf_est.append(float(Z[:, 0] @ Z[:, 1]))
    rf_mean = float(np.mean(rf_est))
    rf_se = float(np.std(rf_est, ddof=1) / np.sqrt(len(rf_est)))
    rf_ok = abs(rf_mean - exact_rbf) <= min(3 * rf_se, 0.05 * exact_rbf)

    report(
        "criterion 6 (sketch statistics)",
        ts_ok and rf_ok,
        f"TensorSketch rel err {abs(ts_mean - exact_poly) / exact_poly:.4f} "
        f"(3se band {3 * ts_se / exact_poly:.4f}), "
        f"RFF rel err {abs(rf_mean - exact_rbf) / exact_rbf:.4f} "
        f"(3se band {3 * rf_se / exact_rbf:.4f})",
    )


# ---------------------------------------------------------------------------
# 7. single-worker bit-equivalence and full-run determinism
# ---------------------------------------------------------------------------

def test_c07_determinism(tmp_path):
    A = dk.gen_low_rank(300, 10, 4, noise=0.2, seed=5)
    spec = dk.GaussianKernel(1.0)
    part = dk.partition_power_law(300, 1, 2.0, seed=6)
    cluster = dk.Cluster(A, part)
    sol, _ = dk.dis_kpca(cluster, spec, k=4, seed=17, n_adaptive=30)
    ref = dk.centralized_kpca(A, spec, k=4, seed=17, n_adaptive=30)
    bit_equal = (
        np.array_equal(sol.rep.indices, ref.rep.indices)
        and np.array_equal(sol.C, ref.C)
        and np.array_equal(sol.points.toarray(), ref.points.toarray())
    )

    args = [
        "kpca", "--synthetic", "low-rank-plus-noise", "--n", "200", "--d", "8",
        "--k-true", "4", "--noise", "0.2", "--k", "4", "--workers", "3",
        "--n-adaptive", "20", "--seed", "3",
    ]
    outs = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        assert cli_main([*args, "--out", str(out)]) == 0
        records = [
            json.loads(line)
            for line in (out / "records.jsonl").read_text().splitlines()
        ]
        for rec in records:
            rec.pop("wall_time")
        outs.append((records, (out / "ledger.jsonl").read_bytes()))
    byte_equal = outs[0] == outs[1]
    report(
        "criterion 7 (determinism)",
        bit_equal and byte_equal,
        f"single-worker bitwise equal: {bit_equal}, reruns byte-identical: {byte_equal}",
    )


# ---------------------------------------------------------------------------
# 8. error monotonicity in the adaptive budget
# ---------------------------------------------------------------------------

def test_c08_error_monotonicity():
    A = dk.gen_low_rank(800, 15, 8, noise=0.5, seed=21)
    spec = dk.GaussianKernel(dk.median_bandwidth(A, seed=2))
    part = dk.partition_power_law(800, 4, 2.0, seed=22)
    medians = []
    for n_adapt in (50, 100, 200, 400):
        errs = []
        for seed in range(50):
            cluster = dk.Cluster(A, part)
            sol, _ = dk.dis_kpca(
                cluster, spec, k=10, seed=lane(616, n_adapt, seed),
                t=50, p=250, n_adaptive=n_adapt,
            )
            errs.append(dk.subspace_error(spec, A, sol))
        medians.append(float(np.median(errs)))
    ok = all(b <= a for a, b in zip(medians, medians[1:]))
    report(
        "criterion 8 (error monotonicity)",
        ok,
        "medians over n_adapt {50,100,200,400}: "
        + ", ".join(f"{m:.2f}" for m in medians),
    )


# ---------------------------------------------------------------------------
# 9. head-to-head against uniform sampling
# ---------------------------------------------------------------------------

def test_c09_beats_uniform():
    k = 6
    A, _ = dk.gen_clustered(
        500, 10, k, noise=0.12, seed=3, separation=9.0,
        size_weights=[80, 24, 8, 4, 2, 1],
    )
    spec = dk.GaussianKernel(dk.median_bandwidth(A, seed=0))
    part = dk.partition_power_law(500, 4, 2.0, seed=4)
    n_lev = dk.default_n_leverage(k)
    n_uni = n_lev + 2 * k
    wins = 0
    for seed in range(100):
        sol_d, _ = dk.dis_kpca(
            dk.Cluster(A, part), spec, k=k, seed=lane(7, seed),
            n_leverage=n_lev, n_adaptive=2 * k,
        )
        sol_u, _ = dk.baseline_uniform_dislr(
            dk.Cluster(A, part), spec, k=k, n_samples=n_uni, seed=lane(8, seed)
        )
        wins += dk.subspace_error(spec, A, sol_d) < dk.subspace_error(spec, A, sol_u)
    report(
        "criterion 9 (beats uniform sampling)",
        wins >= 80,
        f"disKPCA below uniform+disLR error in {wins}/100 seeds at equal budget",
    )


# ---------------------------------------------------------------------------
# 10. spectral clustering
# ---------------------------------------------------------------------------

def test_c10_spectral_clustering():
    k = 4
    A, labels = dk.gen_clustered(200, 6, k, noise=0.02, seed=5, separation=12.0)
    spec = dk.GaussianKernel(dk.median_bandwidth(A, seed=0))
    part = dk.partition_power_law(200, 3, 2.0, seed=6)
    recovered = 0
    monotone = True
    for seed in range(100):
        res = dk.spectral_cluster(
            dk.Cluster(A, part), spec, k, seed=lane(3, seed), n_adaptive=12
        )
        objs = res.iteration_objectives
        monotone &= all(b <= a for a, b in zip(objs, objs[1:]))
        recovered += len(set(zip(labels.tolist(), res.assignments.tolist()))) == k
    report(
        "criterion 10 (spectral clustering)",
        monotone and recovered == 100,
        f"objective nonincreasing: {monotone}, partition recovered {recovered}/100",
    )
