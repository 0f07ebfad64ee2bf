"""Deterministic seed derivation.

Every random stream in the pipeline is keyed by a pure function of the
master seed and a stable label (config name, model index, point index),
so results never depend on execution order or parallelism.
"""

import hashlib

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def mix_seed(seed: int, index: int) -> int:
    """Stable 64-bit mix of a base seed and an integer index."""
    return _splitmix64((seed & _MASK64) ^ _splitmix64(index & _MASK64))


def derive_seed(master: int, *labels) -> int:
    """Derive a child seed from a master seed and a path of labels.

    Labels may be strings or integers; the derivation hashes their text
    form, so it is stable across processes and platforms.
    """
    h = hashlib.sha256()
    h.update(str(int(master)).encode())
    for label in labels:
        h.update(b"/")
        h.update(str(label).encode())
    return int.from_bytes(h.digest()[:8], "little") & ((1 << 63) - 1)
