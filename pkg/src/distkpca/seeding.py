"""Labeled randomness lanes derived from a single root seed.

Every random choice in the library draws from a lane addressed by the root
seed plus a path of labels (strings and worker ids), so runs are exactly
reproducible and independent stages never share a stream.  String labels are
hashed with BLAKE2 for stability across processes and platforms.
"""

import hashlib

import numpy as np


def _key(label):
    if isinstance(label, (int, np.integer)):
        return int(label)
    digest = hashlib.blake2s(str(label).encode("utf-8"), digest_size=4).digest()
    return int.from_bytes(digest, "little")


def lane(root, *labels):
    """SeedSequence for the given label path under `root` (int or SeedSequence)."""
    keys = tuple(_key(l) for l in labels)
    if isinstance(root, np.random.SeedSequence):
        base = () if root.spawn_key is None else tuple(root.spawn_key)
        return np.random.SeedSequence(entropy=root.entropy, spawn_key=base + keys)
    return np.random.SeedSequence(entropy=int(root), spawn_key=keys)


def make_rng(root, *labels):
    """Generator seeded from the lane at the given label path."""
    return np.random.default_rng(lane(root, *labels))
