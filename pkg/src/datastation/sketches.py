"""Minhash sketches over column value sets.

One base hash (blake2b, first 8 bytes) per distinct normalized value, then
128 salted mixes of that 64-bit word. The salts are fixed constants so the
same value set sketches identically across processes and runs. Sketches of
empty sets are all-sentinel (2^64-1) and estimate Jaccard 0 against
everything except another empty set.
"""

from __future__ import annotations

import hashlib
import random

import numpy as np

SKETCH_K = 128
EMPTY_SLOT = 2**64 - 1

# Fixed salt constants; regenerating with the same seed is part of the wire
# contract for persisted sketches.
_salt_rng = random.Random(0x5EEDD474)
SALTS = np.array([_salt_rng.getrandbits(64) for _ in range(SKETCH_K)], dtype=np.uint64)
del _salt_rng

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _mix64(x: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; uint64 arithmetic wraps mod 2^64.
    x = (x + _GOLDEN).astype(np.uint64)
    x ^= x >> np.uint64(30)
    x *= _MIX1
    x ^= x >> np.uint64(27)
    x *= _MIX2
    x ^= x >> np.uint64(31)
    return x


def base_hash(value: str) -> int:
    return int.from_bytes(hashlib.blake2b(value.encode("utf-8"), digest_size=8).digest(), "big")


def sketch_of(values) -> list[int]:
    """Minhash sketch (k=128) of a collection of already-normalized strings."""
    distinct = set(values)
    if not distinct:
        return [EMPTY_SLOT] * SKETCH_K
    base = np.array([base_hash(v) for v in distinct], dtype=np.uint64)
    mins = np.full(SKETCH_K, EMPTY_SLOT, dtype=np.uint64)
    for i in range(SKETCH_K):
        mins[i] = _mix64(base ^ SALTS[i]).min()
    return [int(m) for m in mins]


def is_empty_sketch(sketch: list[int]) -> bool:
    return all(s == EMPTY_SLOT for s in sketch)


def jaccard_estimate(a: list[int], b: list[int]) -> float:
    if len(a) != SKETCH_K or len(b) != SKETCH_K:
        raise ValueError(f"sketches must have length {SKETCH_K}")
    if is_empty_sketch(a) or is_empty_sketch(b):
        return 1.0 if (is_empty_sketch(a) and is_empty_sketch(b)) else 0.0
    equal = sum(1 for x, y in zip(a, b) if x == y)
    return equal / SKETCH_K


def distinct_estimate(sketch: list[int]) -> int:
    """Cardinality estimate from sketch minima; used past the exact-count cap."""
    if is_empty_sketch(sketch):
        return 0
    mean_min = float(np.mean(np.array(sketch, dtype=np.float64)))
    if mean_min <= 0:
        return 1
    est = (2.0**64) / mean_min - 1.0
    return max(1, round(est))


def normalize_value(value: str, dtype: str) -> str:
    """Normalization applied before sketching: trim always, casefold text."""
    v = value.strip()
    return v.lower() if dtype == "text" else v
