"""Seed derivation.

All stochastic stages draw from a generator seeded by
``derive_seed(root, stage, index)``: the first eight bytes of
``sha256(f"{root}/{stage}/{index}")`` read as an unsigned little-endian
integer. Changing the order in which stages run, or the number of
worker threads, never changes what any stage sees.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(root: int, stage: str, index: int = 0) -> int:
    digest = hashlib.sha256(f"{int(root)}/{stage}/{int(index)}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(root: int, stage: str, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(derive_seed(root, stage, index))
