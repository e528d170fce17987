"""Deterministic simulated master-worker network with word-exact accounting.

Workers hold disjoint column shards of one dataset and communicate only
through the master.  A round runs every worker's function (any execution
order gives identical results since workers share no state), then the master
folds the uploaded messages in worker-id order and may reply.  Every payload
crossing a link is charged to a ledger: one word per scalar or index, two
words per stored entry of a sparse payload (index plus value).
"""

import json
import numbers
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .matrix import ColumnMatrix


class RoundError(RuntimeError):
    """A worker or master step failed inside a communication round."""


def word_count(payload):
    """Number of words (scalars and indices) needed to transmit `payload`."""
    if payload is None:
        return 0
    if isinstance(payload, (numbers.Number, np.generic)):
        return 1
    if isinstance(payload, np.ndarray):
        return int(payload.size)
    if sp.issparse(payload):
        return 2 * int(payload.nnz)
    if isinstance(payload, ColumnMatrix):
        return word_count(payload.values)
    if isinstance(payload, (tuple, list)):
        return sum(word_count(item) for item in payload)
    raise TypeError(f"cannot count words of {type(payload).__name__}")


def _check_finite(payload):
    if payload is None:
        return
    if isinstance(payload, (numbers.Number, np.generic)):
        if not np.isfinite(payload):
            raise ValueError("non-finite scalar in message payload")
        return
    if isinstance(payload, np.ndarray):
        if payload.dtype.kind == "f" and not np.all(np.isfinite(payload)):
            raise ValueError("non-finite values in message payload")
        return
    if sp.issparse(payload):
        if not np.all(np.isfinite(payload.data)):
            raise ValueError("non-finite values in sparse message payload")
        return
    if isinstance(payload, ColumnMatrix):
        _check_finite(payload.values)
        return
    if isinstance(payload, (tuple, list)):
        for item in payload:
            _check_finite(item)
        return
    raise TypeError(f"cannot send {type(payload).__name__}")


@dataclass
class RoundRecord:
    label: str
    up: np.ndarray
    down: np.ndarray

    @property
    def words(self):
        return int(self.up.sum() + self.down.sum())


class CommLedger:
    """Per-round, per-link word counts for every message sent."""

    def __init__(self, n_workers):
        self.n_workers = n_workers
        self.rounds = []

    def open_round(self, label):
        rec = RoundRecord(
            label=label,
            up=np.zeros(self.n_workers, dtype=np.int64),
            down=np.zeros(self.n_workers, dtype=np.int64),
        )
        self.rounds.append(rec)
        return rec

    @property
    def total_words(self):
        return sum(rec.words for rec in self.rounds)

    def json_lines(self):
        """One JSON object per round: {label, up_words[], down_words[]}."""
        for rec in self.rounds:
            yield json.dumps(
                {
                    "label": rec.label,
                    "up_words": rec.up.tolist(),
                    "down_words": rec.down.tolist(),
                },
                sort_keys=True,
            )

    def write_report(self, path):
        with open(path, "w") as fh:
            for line in self.json_lines():
                fh.write(line + "\n")


@dataclass
class Partition:
    """Assignment of every global column index to a worker."""

    assignment: np.ndarray
    n_workers: int

    @property
    def sizes(self):
        return np.bincount(self.assignment, minlength=self.n_workers)

    def worker_columns(self, wid):
        """Global column indices owned by `wid`, in ascending order."""
        return np.flatnonzero(self.assignment == wid)


def partition_power_law(n, s, exponent=2.0, seed=0):
    """Partition n columns over s workers with power-law share sizes.

    Worker i's share is proportional to (i+1)^(-exponent) (floored, with the
    remainder added to the largest share and a minimum of one column per
    worker); which columns land where is a seeded uniform shuffle.
    """
    if s < 1:
        raise ValueError(f"need at least one worker, got {s}")
    if n < s:
        raise ValueError(f"cannot give {s} workers at least one of {n} columns")
    weights = (np.arange(1, s + 1, dtype=np.float64)) ** (-float(exponent))
    shares = np.floor(n * weights / weights.sum()).astype(np.int64)
    shares[int(np.argmax(shares))] += n - shares.sum()
    while np.any(shares < 1):
        shares[int(np.argmax(shares == 0))] += 1
        shares[int(np.argmax(shares))] -= 1
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    assignment = np.empty(n, dtype=np.int64)
    start = 0
    for wid, size in enumerate(shares):
        assignment[order[start : start + size]] = wid
        start += size
    return Partition(assignment=assignment, n_workers=s)


class WorkerContext:
    """A worker's view inside a round: its own shard, inbox, state, and an
    uplink to the master.  No other worker is reachable from here."""

    def __init__(self, wid, data, global_indices, state, inbox, outbox):
        self.wid = wid
        self.data = data
        self.global_indices = global_indices
        self.state = state
        self.inbox = inbox
        self._outbox = outbox

    def send(self, payload):
        """Upload a payload to the master (charged to the open round)."""
        _check_finite(payload)
        self._outbox.append(payload)


class MasterContext:
    """The master's view inside a round: uploaded messages in worker-id
    order, persistent state, and downlinks to the workers."""

    def __init__(self, messages, state, deliver):
        self.messages = messages
        self.state = state
        self._deliver = deliver

    @property
    def n_workers(self):
        return len(self.messages)

    def broadcast(self, payload):
        """Send the same payload to every worker."""
        _check_finite(payload)
        for wid in range(self.n_workers):
            self._deliver(wid, payload)

    def send_to(self, wid, payload):
        """Send a payload to one worker."""
        _check_finite(payload)
        self._deliver(wid, payload)


class _Worker:
    __slots__ = ("wid", "data", "global_indices", "state", "pending")

    def __init__(self, wid, data, global_indices):
        self.wid = wid
        self.data = data
        self.global_indices = global_indices
        self.state = {}
        self.pending = []


class Cluster:
    """s workers around one master, holding a partitioned ColumnMatrix.

    Worker shards keep their columns in ascending global order, so a
    single-worker cluster holds the dataset exactly as given.
    """

    def __init__(self, data, partition):
        if not isinstance(data, ColumnMatrix):
            data = ColumnMatrix(data)
        self.data = data
        self.partition = partition
        self.workers = []
        for wid in range(partition.n_workers):
            cols = partition.worker_columns(wid)
            self.workers.append(_Worker(wid, data.take(cols), cols))
        self.master_state = {}
        self.ledger = CommLedger(partition.n_workers)

    @property
    def n_workers(self):
        return len(self.workers)

    def fresh(self):
        """A new cluster over the same data and partition with a clean ledger."""
        return Cluster(self.data, self.partition)

    def run_round(self, label, worker_fn, master_fn=None, order=None):
        """Run one communication round.

        `worker_fn(ctx)` runs once per worker (in `order`, default ascending;
        results must not depend on it), then `master_fn(ctx)` folds the
        uploads.  Messages the master sends become the workers' inboxes for
        the next round they run.
        """
        record = self.ledger.open_round(label)
        wids = list(range(self.n_workers)) if order is None else list(order)
        uploads = [[] for _ in range(self.n_workers)]
        for wid in wids:
            worker = self.workers[wid]
            ctx = WorkerContext(
                wid=wid,
                data=worker.data,
                global_indices=worker.global_indices,
                state=worker.state,
                inbox=list(worker.pending),
                outbox=uploads[wid],
            )
            worker.pending = []
            try:
                worker_fn(ctx)
            except Exception as exc:
                raise RoundError(f"round {label!r}: worker {wid} failed: {exc}") from exc
        for wid, box in enumerate(uploads):
            record.up[wid] += sum(word_count(p) for p in box)

        def deliver(wid, payload):
            record.down[wid] += word_count(payload)
            self.workers[wid].pending.append(payload)

        if master_fn is not None:
            ctx = MasterContext(messages=uploads, state=self.master_state, deliver=deliver)
            try:
                master_fn(ctx)
            except RoundError:
                raise
            except Exception as exc:
                raise RoundError(f"round {label!r}: master failed: {exc}") from exc
