"""Dataset ingestion, writing, and synthetic generators.

Two on-disk formats, one data point per line: `sparse` lines hold 1-based
"index:value" pairs and never densify on load; `dense` lines are
comma-separated floats.  Values are written with repr so a save/load round
trip is bit-exact.
"""

import numpy as np
import scipy.sparse as sp

from .matrix import ColumnMatrix
from .seeding import make_rng

FORMATS = ("sparse", "dense")


class DataFormatError(ValueError):
    """A dataset file could not be parsed."""


def load_dataset(path, fmt="dense", n_rows=None):
    """Read a ColumnMatrix from `path`, one column per input line.

    Sparse files use 1-based index:value tokens; the row count is the
    largest index seen unless `n_rows` is given.  Dense files are CSV rows
    of equal length.  Malformed input raises DataFormatError with the line
    number.
    """
    if fmt not in FORMATS:
        raise DataFormatError(f"unknown dataset format {fmt!r}; expected {FORMATS}")
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DataFormatError(f"{path}: empty dataset file")
    if fmt == "dense":
        return _parse_dense(path, lines)
    return _parse_sparse(path, lines, n_rows)


def _parse_dense(path, lines):
    columns = []
    width = None
    for lineno, line in enumerate(lines, start=1):
        try:
            vals = [float(tok) for tok in line.split(",")]
        except ValueError as exc:
            raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
        if width is None:
            width = len(vals)
        elif len(vals) != width:
            raise DataFormatError(
                f"{path}:{lineno}: expected {width} values, found {len(vals)}"
            )
        columns.append(vals)
    return ColumnMatrix(np.array(columns, dtype=np.float64).T)


def _parse_sparse(path, lines, n_rows):
    rows, cols, vals = [], [], []
    max_index = 0
    for lineno, line in enumerate(lines, start=1):
        seen = set()
        for tok in line.split():
            try:
                idx_s, val_s = tok.split(":", 1)
                idx, val = int(idx_s), float(val_s)
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: bad token {tok!r}") from exc
            if idx < 1:
                raise DataFormatError(f"{path}:{lineno}: index {idx} is not 1-based")
            if idx in seen:
                raise DataFormatError(f"{path}:{lineno}: duplicate index {idx}")
            seen.add(idx)
            rows.append(idx - 1)
            cols.append(lineno - 1)
            vals.append(val)
            max_index = max(max_index, idx)
    d = max_index if n_rows is None else n_rows
    if n_rows is not None and max_index > n_rows:
        raise DataFormatError(f"{path}: index {max_index} exceeds n_rows={n_rows}")
    if d == 0:
        raise DataFormatError(f"{path}: no entries in sparse dataset")
    mat = sp.csc_array(
        (vals, (rows, cols)), shape=(d, len(lines)), dtype=np.float64
    )
    return ColumnMatrix(mat)


def save_dataset(M, path, fmt="dense"):
    """Write a ColumnMatrix (one column per line) so it reloads bit-exactly."""
    if fmt not in FORMATS:
        raise DataFormatError(f"unknown dataset format {fmt!r}; expected {FORMATS}")
    with open(path, "w") as fh:
        if fmt == "dense":
            A = M.toarray()
            for j in range(A.shape[1]):
                fh.write(",".join(repr(float(v)) for v in A[:, j]) + "\n")
        else:
            csc = sp.csc_array(M.values)
            for j in range(csc.shape[1]):
                lo, hi = csc.indptr[j], csc.indptr[j + 1]
                pairs = (
                    f"{i + 1}:{float(v)!r}"
                    for i, v in zip(csc.indices[lo:hi], csc.data[lo:hi])
                )
                fh.write(" ".join(pairs) + "\n")


def gen_low_rank(n, d, k_true, noise, seed):
    """Rank-k_true factor product plus isotropic Gaussian noise."""
    if k_true > min(d, n):
        raise ValueError(f"k_true={k_true} exceeds min(d, n)={min(d, n)}")
    rng = make_rng(seed, "low-rank")
    B = rng.standard_normal((d, k_true))
    C = rng.standard_normal((k_true, n))
    A = B @ C
    if noise:
        A += noise * rng.standard_normal((d, n))
    return ColumnMatrix(A)


def gen_clustered(n, d, k_true, noise, seed, separation=6.0, size_weights=None):
    """Gaussian blobs with configurable separation and mixture weights.

    Returns (data, labels).  Centers are drawn at typical pairwise distance
    `separation`; `size_weights` (default uniform) set the expected share of
    points per blob, with every blob guaranteed at least one point.
    """
    if k_true > min(d, n):
        raise ValueError(f"k_true={k_true} exceeds min(d, n)={min(d, n)}")
    rng = make_rng(seed, "clustered")
    centers = separation / np.sqrt(2.0 * d) * rng.standard_normal((d, k_true))
    if size_weights is None:
        weights = np.full(k_true, 1.0 / k_true)
    else:
        weights = np.asarray(size_weights, dtype=np.float64)
        if weights.shape != (k_true,) or np.any(weights <= 0):
            raise ValueError("size_weights must be k_true positive numbers")
        weights = weights / weights.sum()
    labels = rng.choice(k_true, size=n, p=weights)
    labels[:k_true] = np.arange(k_true)  # every blob occupied
    points = centers[:, labels] + noise * rng.standard_normal((d, n))
    return ColumnMatrix(points), labels


def gen_synthetic(kind, n, d, k_true, noise, seed, separation=6.0):
    """Dispatch on the synthetic family named by `kind`."""
    if kind == "low-rank-plus-noise":
        return gen_low_rank(n, d, k_true, noise, seed)
    if kind == "clustered":
        return gen_clustered(n, d, k_true, noise, seed, separation=separation)[0]
    raise ValueError(f"unknown synthetic kind {kind!r}")
