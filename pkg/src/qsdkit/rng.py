"""Replica streams.

Replica ``r`` of master seed ``s`` draws from a Philox counter-based
generator keyed by ``SeedSequence(s, spawn_key=(r,))``, so any replica can
be regenerated alone and results do not depend on how replicas are
scheduled across workers.
"""
from __future__ import annotations

import os

import numpy as np


def replica_rng(seed: int, replica: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replica),))
    return np.random.Generator(np.random.Philox(ss))


def default_workers() -> int:
    env = os.environ.get("QSD_WORKERS")
    if env:
        n = int(env)
        if n < 1:
            raise ValueError(f"QSD_WORKERS must be >= 1, got {env!r}")
        return n
    return os.cpu_count() or 1
