"""Command-line interface: dataset ingestion, synthetic generation, and the
experiment subcommands.

Subcommands: kpca, baseline-dislr, baseline-batch, sweep, cluster, gen,
leverage-debug.  Options come from an optional TOML config file overridden
by flags; every run is reproducible from (config, seed).  Exit codes:
0 success, 1 usage, 2 data error, 3 numerical failure.
"""

import argparse
import json
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .algorithms import dis_leverage_scores
from .data import DataFormatError, gen_synthetic, load_dataset, save_dataset
from .experiments import (
    METHODS,
    error_curve,
    run_method,
    spectral_cluster,
    summarize,
    write_curve_csv,
    write_records_jsonl,
)
from .kernels import ArcCosKernel, GaussianKernel, PolynomialKernel, median_bandwidth
from .matrix import ColumnMatrix, NumericalError
from .seeding import lane
from .simnet import Cluster, partition_power_law
from .sketch import EmbeddedData, build_embedding_op


@dataclass
class Config:
    kernel: str = "gaussian"
    degree: int = 2
    bandwidth: object = "median"
    k: int = 10
    epsilon: float = 0.5
    t: object = None
    p: object = None
    w: object = None
    m: int = 2000
    n_leverage: object = None
    n_adaptive: int = 200
    s: int = 5
    partition_exponent: float = 2.0
    seed: int = 0
    data_path: object = None
    data_format: str = "dense"
    synthetic: object = None
    n: int = 1000
    d: int = 20
    k_true: int = 10
    noise: float = 0.1
    separation: float = 6.0
    data_seed: int = 0
    sweep: object = (50, 100, 200, 400)
    repeats: int = 5
    method: str = "diskpca"
    kmeans_iters: int = 100
    out: str = "results"


def load_config(path):
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    known = {f.name for f in fields(Config)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if raw.get("data_path") and not Path(raw["data_path"]).is_absolute():
        raw["data_path"] = str(Path(path).resolve().parent / raw["data_path"])
    return Config(**raw)


def validate_config(cfg):
    if not 0 < cfg.epsilon <= 1:
        raise ValueError(f"epsilon must be in (0, 1], got {cfg.epsilon}")
    for name in ("k", "m", "n_adaptive", "s", "repeats", "kmeans_iters"):
        if getattr(cfg, name) < 1:
            raise ValueError(f"{name} must be >= 1, got {getattr(cfg, name)}")
    if cfg.data_path is None and cfg.synthetic is None:
        raise ValueError("either data_path or synthetic must be set")
    if cfg.method != "all" and cfg.method not in METHODS:
        raise ValueError(f"method must be 'all' or one of {METHODS}")


def kernel_from_config(cfg, A):
    if cfg.kernel == "polynomial":
        return PolynomialKernel(cfg.degree)
    if cfg.kernel == "arccos":
        return ArcCosKernel(cfg.degree)
    if cfg.kernel == "gaussian":
        bw = cfg.bandwidth
        if bw == "median":
            bw = median_bandwidth(A, lane(cfg.seed, "bandwidth"))
        return GaussianKernel(float(bw))
    raise ValueError(f"unknown kernel {cfg.kernel!r}")


def _dataset(cfg):
    if cfg.data_path is not None:
        return load_dataset(cfg.data_path, fmt=cfg.data_format)
    return gen_synthetic(
        cfg.synthetic, cfg.n, cfg.d, cfg.k_true, cfg.noise, cfg.data_seed,
        separation=cfg.separation,
    )


def _cluster(cfg, A):
    part = partition_power_law(
        A.n_cols, cfg.s, cfg.partition_exponent, seed=lane(cfg.seed, "partition")
    )
    return Cluster(A, part)


def _resolved_w(cfg):
    return None if cfg.w in (None, "auto") else int(cfg.w)


def _kpca_kwargs(cfg):
    return {
        "t": cfg.t,
        "p": cfg.p,
        "m": cfg.m,
        "n_leverage": cfg.n_leverage,
    }


def _outdir(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run_single(cfg, method):
    A = _dataset(cfg)
    spec = kernel_from_config(cfg, A)
    cluster = _cluster(cfg, A)
    rec, sol, ledger = run_method(
        cluster, spec, method, cfg.k, cfg.n_adaptive,
        seed=lane(cfg.seed, "run"), epsilon=cfg.epsilon, w=_resolved_w(cfg),
        **_kpca_kwargs(cfg),
    )
    out = _outdir(cfg)
    write_records_jsonl([rec], out / "records.jsonl")
    ledger.write_report(out / "ledger.jsonl")
    print(f"{method}: subspace_error={rec.subspace_error:.6g} "
          f"words={rec.total_words} -> {out}")
    return 0


def cmd_kpca(cfg):
    return _run_single(cfg, "diskpca")


def cmd_baseline_dislr(cfg):
    return _run_single(cfg, "uniform-dislr")


def cmd_baseline_batch(cfg):
    return _run_single(cfg, "uniform-batch")


def cmd_sweep(cfg):
    A = _dataset(cfg)
    spec = kernel_from_config(cfg, A)
    cluster = _cluster(cfg, A)
    sweep = tuple(int(x) for x in cfg.sweep)
    methods = list(METHODS) if cfg.method == "all" else [cfg.method]
    records = []
    for method in methods:
        records.extend(
            error_curve(
                cluster, spec, method, sweep, cfg.repeats,
                seed=lane(cfg.seed, "sweep"), k=cfg.k, epsilon=cfg.epsilon,
                w=_resolved_w(cfg), **_kpca_kwargs(cfg),
            )
        )
    out = _outdir(cfg)
    write_records_jsonl(records, out / "records.jsonl")
    write_curve_csv(summarize(records), out / "curve.csv")
    _, _, ledger = run_method(
        cluster, spec, methods[-1], cfg.k, sweep[-1],
        seed=lane(cfg.seed, "sweep", methods[-1], int(sweep[-1]), cfg.repeats - 1),
        epsilon=cfg.epsilon, w=_resolved_w(cfg), **_kpca_kwargs(cfg),
    )
    ledger.write_report(out / "ledger.jsonl")
    print(f"sweep: {len(records)} records -> {out}")
    return 0


def cmd_cluster(cfg):
    A = _dataset(cfg)
    spec = kernel_from_config(cfg, A)
    cluster = _cluster(cfg, A)
    res = spectral_cluster(
        cluster, spec, cfg.k, seed=lane(cfg.seed, "run"),
        kmeans_iters=cfg.kmeans_iters, epsilon=cfg.epsilon,
        n_adaptive=cfg.n_adaptive, w=_resolved_w(cfg), **_kpca_kwargs(cfg),
    )
    out = _outdir(cfg)
    payload = {
        "objective": res.objective,
        "projected_objective": res.projected_objective,
        "iteration_objectives": res.iteration_objectives,
        "total_words": int(res.ledger.total_words),
        "assignments": res.assignments.tolist(),
    }
    (out / "clustering.json").write_text(json.dumps(payload, sort_keys=True) + "\n")
    res.ledger.write_report(out / "ledger.jsonl")
    print(f"cluster: objective={res.objective:.6g} words={payload['total_words']} -> {out}")
    return 0


def cmd_gen(cfg):
    A = _dataset(cfg)
    path = Path(cfg.out)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(A, path, fmt=cfg.data_format)
    print(f"gen: wrote {A.n_rows}x{A.n_cols} ({cfg.data_format}) -> {path}")
    return 0


def cmd_leverage_debug(cfg):
    A = _dataset(cfg)
    spec = kernel_from_config(cfg, A)
    cluster = _cluster(cfg, A)
    k = cfg.k
    t = cfg.t if cfg.t is not None else max(4 * k, 50)
    p = cfg.p if cfg.p is not None else 5 * t
    op = build_embedding_op(spec, k, 0.25, lane(cfg.seed, "embed"), t=t, m=cfg.m)
    embedded = [None] * cluster.n_workers

    def embed(ctx):
        embedded[ctx.wid] = EmbeddedData(
            E=ColumnMatrix(op.apply(ctx.data)), op=op, source_count=ctx.data.n_cols
        )

    cluster.run_round("embed", embed)
    scores = dis_leverage_scores(cluster, embedded, p, lane(cfg.seed, "leverage"))
    E = np.hstack([e.E.toarray() for e in embedded])
    svd = np.linalg.svd(E, full_matrices=False)
    keep = svd[1] > max(E.shape) * np.finfo(np.float64).eps * svd[1][0]
    exact = np.einsum("ij,ij->j", svd[2][keep], svd[2][keep])
    out = _outdir(cfg)
    offset = 0
    with open(out / "leverage.jsonl", "w") as fh:
        for wid in range(cluster.n_workers):
            approx = scores.per_worker[wid]
            gidx = cluster.workers[wid].global_indices
            for j in range(approx.shape[0]):
                ex = float(exact[offset + j])
                fh.write(json.dumps({
                    "index": int(gidx[j]),
                    "worker": wid,
                    "score": float(approx[j]),
                    "exact": ex,
                    "ratio": float(approx[j] / ex) if ex > 0 else None,
                }, sort_keys=True) + "\n")
            offset += approx.shape[0]
    print(f"leverage-debug: {E.shape[1]} columns -> {out}")
    return 0


COMMANDS = {
    "kpca": cmd_kpca,
    "baseline-dislr": cmd_baseline_dislr,
    "baseline-batch": cmd_baseline_batch,
    "sweep": cmd_sweep,
    "cluster": cmd_cluster,
    "gen": cmd_gen,
    "leverage-debug": cmd_leverage_debug,
}


def _add_common_flags(p):
    p.add_argument("--config", help="TOML config file")
    p.add_argument("--kernel", choices=["gaussian", "polynomial", "arccos"])
    p.add_argument("--degree", type=int)
    p.add_argument("--bandwidth", help="float or 'median'")
    p.add_argument("--k", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--t", type=int)
    p.add_argument("--p", type=int)
    p.add_argument("--w", help="int or 'auto' (= |Y|)")
    p.add_argument("--m", type=int)
    p.add_argument("--n-leverage", dest="n_leverage", type=int)
    p.add_argument("--n-adaptive", dest="n_adaptive", type=int)
    p.add_argument("--workers", dest="s", type=int)
    p.add_argument("--partition-exponent", dest="partition_exponent", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--data", dest="data_path")
    p.add_argument("--format", dest="data_format", choices=["dense", "sparse"])
    p.add_argument("--synthetic", choices=["low-rank-plus-noise", "clustered"])
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--k-true", dest="k_true", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--separation", type=float)
    p.add_argument("--data-seed", dest="data_seed", type=int)
    p.add_argument("--sweep", help="comma-separated adaptive budgets")
    p.add_argument("--repeats", type=int)
    p.add_argument("--method", help=f"one of {METHODS} or 'all'")
    p.add_argument("--kmeans-iters", dest="kmeans_iters", type=int)
    p.add_argument("--out")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="distkpca",
        description="Distributed kernel PCA on a simulated master-worker cluster",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        _add_common_flags(sub.add_parser(name))
    return parser


def resolve_config(args):
    cfg = load_config(args.config) if args.config else Config()
    overrides = {}
    for f in fields(Config):
        val = getattr(args, f.name, None)
        if val is not None:
            overrides[f.name] = val
    if "bandwidth" in overrides and overrides["bandwidth"] != "median":
        overrides["bandwidth"] = float(overrides["bandwidth"])
    if "sweep" in overrides and isinstance(overrides["sweep"], str):
        overrides["sweep"] = tuple(int(x) for x in overrides["sweep"].split(","))
    if "w" in overrides and overrides["w"] != "auto":
        overrides["w"] = int(overrides["w"])
    cfg = replace(cfg, **overrides)
    validate_config(cfg)
    return cfg


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except (DataFormatError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
