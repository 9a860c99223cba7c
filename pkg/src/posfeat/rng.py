"""Counter-based random streams.

All stochastic choices in the pipeline (query sampling, window noise,
candidate selection, weight init, scene synthesis) draw from Philox
generators keyed by an explicit tuple of integers, never from shared global
state.  A draw therefore depends only on its key — not on how many other
draws happened before it — which makes every run reproducible regardless of
data loading order and lets independent consumers share one seed safely.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

# Stream tags keep consumers of the same seed statistically independent.
STREAM_QUERIES = 1
STREAM_WINDOW_NOISE = 2
STREAM_CANDIDATES = 3
STREAM_INIT = 4
STREAM_TEXTURE = 5
STREAM_SCENE = 6
STREAM_JITTER = 7


def stream(*key: int) -> np.random.Generator:
    """Return a Philox generator keyed by the given integers.

    The key tuple is hashed (blake2b) into the 128-bit Philox key, so any
    number of integers of any size may be used and distinct tuples yield
    independent streams.
    """
    packed = struct.pack(f"<{len(key)}q", *[int(k) for k in key])
    digest = hashlib.blake2b(packed, digest_size=16).digest()
    words = np.frombuffer(digest, dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=words))


def uniforms(shape: tuple[int, ...] | int, *key: int) -> np.ndarray:
    """Uniform [0, 1) float64 draws for the given key."""
    return stream(*key).random(shape)
