"""Seed derivation.

Every random stream is a numpy ``PCG64`` generator keyed by a
``SeedSequence(master, spawn_key=keys)``. The spawn key is the path of
integers identifying the stream (trial index, sweep cell, planning step, ...),
so any sub-stream can be regenerated without replaying its siblings.
"""
from __future__ import annotations

import numpy as np


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *keys: int) -> int:
    """A 63-bit integer seed for the sub-stream at ``keys``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))
