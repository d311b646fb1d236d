"""Named, reproducible random substreams derived from one root seed.

Components (prior sampling, noise draws, individual chains, distance
estimates) each get a generator keyed by a stable name, so any one of them
can be reproduced without replaying the others.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream_key(name: str) -> int:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def substream_seed(root_seed: int, name: str) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(root_seed), spawn_key=(stream_key(name),))


def substream(root_seed: int, name: str) -> np.random.Generator:
    """Generator for the named component under the given root seed."""
    return np.random.default_rng(substream_seed(root_seed, name))
