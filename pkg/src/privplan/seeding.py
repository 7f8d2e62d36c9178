"""Deterministic RNG stream derivation.

Every source of randomness in the package is a numpy Generator derived from
one master seed plus a sequence of string/int labels.  Runs with the same
master seed are bit-reproducible regardless of execution order, because each
(label path) gets its own independent stream.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_entropy(label: object) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & 0xFFFFFFFFFFFFFFFF
    data = str(label).encode("utf-8")
    return int.from_bytes(hashlib.sha256(data).digest()[:8], "big")


def spawn(master_seed: int, *labels: object) -> np.random.Generator:
    """Derive an independent, reproducible Generator for a labelled purpose."""
    entropy = [int(master_seed) & 0xFFFFFFFFFFFFFFFF]
    entropy.extend(_label_entropy(lab) for lab in labels)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
