"""Counter-based randomness keyed by (seed, edge).

The state of an edge is a pure function of the master seed and the edge's
canonical key, so configurations can be evaluated on any window in any
order and extended across nested windows without drift.
"""
from __future__ import annotations

import numpy as np

MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK
    return x ^ (x >> 31)


def mix(*words: int) -> int:
    h = 0x243F6A8885A308D3
    for w in words:
        h = splitmix64(h ^ (int(w) & MASK))
    return h


def element_hash(g) -> int:
    return mix(len(g.coords), g.finite_part, *g.coords)


def edge_key_hash(a, b) -> int:
    """Hash of an unordered edge; independent of endpoint order."""
    ka, kb = (a.coords, a.finite_part), (b.coords, b.finite_part)
    if kb < ka:
        a, b = b, a
    return mix(0xED6E, element_hash(a), element_hash(b))


def splitmix64_array(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.uint64, copy=True)
    with np.errstate(over="ignore"):
        x += np.uint64(_GOLDEN)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return x ^ (x >> np.uint64(31))


def uniforms(seed: int, keys: np.ndarray) -> np.ndarray:
    """One U[0,1) draw per key for the given stream seed (53-bit resolution)."""
    s = np.uint64(splitmix64(int(seed) & MASK))
    bits = splitmix64_array(keys ^ s)
    return (bits >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def uniform(seed: int, key: int) -> float:
    bits = splitmix64((key ^ splitmix64(int(seed) & MASK)) & MASK)
    return (bits >> 11) * (1.0 / (1 << 53))


def derive_seed(seed: int, *labels: int) -> int:
    """Child stream seed, e.g. ``derive_seed(master, replicate)``."""
    return mix(0x5EED, seed, *labels)


def uniforms_matrix(seeds, keys: np.ndarray) -> np.ndarray:
    """Row ``i`` equals ``uniforms(seeds[i], keys)``."""
    s = np.array([splitmix64(int(x) & MASK) for x in seeds], dtype=np.uint64)
    bits = splitmix64_array(keys[None, :] ^ s[:, None])
    return (bits >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
