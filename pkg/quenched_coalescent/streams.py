"""Counter-based random streams.

Every random draw in a run is taken from a stream keyed by
``(seed, tag, *index)``. Streams are independent of each other and of the
order in which they are created, so parallel runs reproduce serial runs
bit for bit.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["stream", "tag_key"]

# Purpose tags used across the package.
PEDIGREE = "pedigree"
LOCUS = "locus"
PSI = "psi"
REPLICATE = "replicate"
ESTIMATE = "estimate"
ANNEALED = "annealed"


def tag_key(tag: str) -> int:
    """Stable integer for a purpose tag (``hash`` is salted per process)."""
    return zlib.crc32(tag.encode("utf-8"))


def stream(seed: int, tag: str, *index: int) -> np.random.Generator:
    """
    Return the generator for one work item.

    Parameters
    ----------
    seed : int
        Master seed of the run.
    tag : str
        Purpose of the stream, e.g. ``"locus"``.
    *index : int
        Replicate, pedigree or generation indices.

    Returns
    -------
    numpy.random.Generator
        A Philox-backed generator.
    """
    if seed is None or int(seed) < 0:
        raise ValueError("seed must be a nonnegative integer")
    key = (tag_key(tag),) + tuple(int(i) for i in index)
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(seq))
