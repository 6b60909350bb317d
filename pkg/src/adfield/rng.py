"""Named random streams derived from one 64-bit seed.

Each consumer asks for ``stream(seed, label)``; the label is hashed into the
SeedSequence spawn key, so streams are independent of each other and of the
order in which they are requested.

Labels in use: ``synth.routes``, ``synth.flights``, ``synth.points``,
``synth.noise``, ``kmeans``, ``bench.queries``.
"""
from __future__ import annotations

import zlib

import numpy as np


def stream(seed: int, label: str) -> np.random.Generator:
    key = zlib.crc32(label.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(key,)))


def derived_seed(seed: int, label: str) -> int:
    return int(stream(seed, label).integers(0, 2**63 - 1))
