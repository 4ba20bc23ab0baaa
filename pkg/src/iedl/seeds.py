"""Deterministic fan-out of one master seed into independent streams.

Every consumer of randomness draws from ``make_rng(master, DOMAIN)``, so
adding or removing one consumer never shifts the draws of another.
"""

from __future__ import annotations

import numpy as np

DATA = 0
INIT = 1
SHUFFLE = 2
NOISE = 3
SUBSAMPLE = 4
ORACLE = 5
EVAL = 6


def make_rng(master, domain, *path):
    """Generator seeded by the (master, domain, *path) tuple."""
    entropy = (int(master), int(domain), *(int(p) for p in path))
    return np.random.default_rng(np.random.SeedSequence(entropy))
