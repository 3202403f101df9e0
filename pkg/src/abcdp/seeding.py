"""Seed derivation and generator construction.

Every random stream in the package is a ``numpy.random.Generator`` backed by
Philox, a counter-based bit generator. Child seeds are derived from a master
seed by hashing the master seed together with string/int labels, so that
streams are independent of evaluation order and safe to fan out in parallel.
"""
from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master_seed: int, *labels: object) -> int:
    """Return a 64-bit seed for the stream named by ``labels``.

    The rule is ``int.from_bytes(sha256("master:l1:l2:...")[:8], "little")``,
    which is stable across platforms and Python versions.
    """
    key = ":".join([str(int(master_seed))] + [str(label) for label in labels])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def make_rng(seed: int | np.random.Generator | None = None) -> np.random.Generator:
    """Build a Philox-backed generator; generators pass through unchanged."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))
