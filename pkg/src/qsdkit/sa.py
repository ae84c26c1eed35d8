"""Reinforced resurrection walk and its weighted occupation measure.

The walker moves with the interior transitions; when it is absorbed it is
immediately restarted at a state drawn from its own weighted occupation
measure ``x_n``, which is then updated as
``x_n = (1 - gamma_n) x_{n-1} + gamma_n delta_{X_n}``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .chain import AbsorbedChain, as_simplex, uniform
from .rng import default_workers, replica_rng
from .schedules import StepSchedule

CHUNK = 1 << 13
GROUP = 64


@dataclass
class SaState:
    n: int
    x: np.ndarray
    current: int
    tau: float
    absorptions: int
    rng: np.random.Generator


@dataclass(frozen=True)
class TrajectoryRecord:
    n: int
    tau: float
    gamma: float
    x: np.ndarray
    err_l1: float
    absorptions: int
    current: int


@dataclass(eq=False)
class SaBatch:
    """Checkpointed output of a batch of independent replicas.

    ``x`` has shape (replicas, checkpoints, d); ``current`` and ``absorptions``
    have shape (replicas, checkpoints).
    """

    replicas: np.ndarray
    n: np.ndarray
    tau: np.ndarray
    gamma: np.ndarray
    x: np.ndarray
    current: np.ndarray
    absorptions: np.ndarray

    def err_l1(self, nu) -> np.ndarray:
        return np.abs(self.x - np.asarray(nu)).sum(axis=-1)

    def records(self, k: int, nu=None) -> list[TrajectoryRecord]:
        err = self.err_l1(nu)[k] if nu is not None else np.full(len(self.n), math.nan)
        return [
            TrajectoryRecord(
                int(self.n[c]), float(self.tau[c]), float(self.gamma[c]), self.x[k, c].copy(),
                float(err[c]), int(self.absorptions[k, c]), int(self.current[k, c]),
            )
            for c in range(len(self.n))
        ]


def geometric_grid(steps: int, ratio: float = 1.25) -> np.ndarray:
    """Checkpoints ``0`` and ``ceil(ratio**k)`` up to ``steps`` (always included)."""
    if ratio <= 1:
        raise ValueError("ratio must exceed 1")
    pts = {0, int(steps)}
    k = 0
    while True:
        v = math.ceil(ratio**k - 1e-9)
        if v > steps:
            break
        pts.add(v)
        k += 1
    return np.array(sorted(pts), dtype=np.int64)


def taus(schedule: StepSchedule, grid) -> np.ndarray:
    """``tau_n`` at every ``n`` of an increasing grid (``tau_0 = 0``)."""
    grid = np.asarray(grid, dtype=np.int64)
    out = np.zeros(len(grid))
    acc, n = 0.0, 0
    for idx, target in enumerate(grid):
        while n < target:
            m = int(min(CHUNK, target - n))
            acc += math.fsum(schedule.gammas(n + 1, m))
            n += m
        out[idx] = acc
    return out


def _initial(d, x0, X0, rng):
    x0 = uniform(d) if x0 is None else as_simplex(x0, d)
    if X0 is None or X0 == "sample-from-x0":
        u = rng.random()
        cum = np.cumsum(x0)
        X0 = min(int(np.searchsorted(cum, u * cum[-1], side="right")), d - 1)
    elif not 0 <= int(X0) < d:
        raise ValueError(f"initial state {X0} outside 0..{d - 1}")
    return x0.astype(float).copy(), int(X0)


def init_state(chain: AbsorbedChain, x0=None, X0="sample-from-x0", seed: int = 0, replica: int = 0) -> SaState:
    """Fresh sampler state; ``x0`` defaults to uniform and ``X0`` to a draw from ``x0``."""
    rng = replica_rng(seed, replica)
    x, cur = _initial(chain.d, x0, X0, rng)
    return SaState(0, x, cur, 0.0, 0, rng)


def sa_step(chain: AbsorbedChain, schedule: StepSchedule, state: SaState, backend: str | None = None) -> SaState:
    """Advance ``state`` by one transition in place and return it."""
    n = state.n + 1
    g = schedule.gammas(n, 1)
    U = state.rng.random((1, 1, 2))
    X = state.x[None, :].copy()
    cur = np.array([state.current], dtype=np.int64)
    ab = np.zeros(1, dtype=np.int64)
    _kernels.get("sa", backend)(
        _kernels.cumulative_rows(chain.p_hat), chain.p0, X, cur, ab, g, U, n, _kernels.RENORM_EVERY
    )
    state.x = X[0]
    state.current = int(cur[0])
    state.absorptions += int(ab[0])
    state.tau += float(g[0])
    state.n = n
    return state


def _run_group(chain, schedule, grid, x0, X0, seed, reps, backend):
    d = chain.d
    cum_rows = _kernels.cumulative_rows(chain.p_hat)
    p0 = np.ascontiguousarray(chain.p0)
    advance = _kernels.get("sa", backend)
    rngs = [replica_rng(seed, r) for r in reps]
    inits = [_initial(d, x0, X0, g) for g in rngs]
    X = np.array([x for x, _ in inits])
    cur = np.array([c for _, c in inits], dtype=np.int64)
    ab = np.zeros(len(reps), dtype=np.int64)
    R, K = len(reps), len(grid)
    out_x = np.empty((R, K, d))
    out_cur = np.empty((R, K), dtype=np.int64)
    out_ab = np.empty((R, K), dtype=np.int64)
    n = 0
    for c, target in enumerate(grid):
        while n < target:
            m = int(min(CHUNK, target - n))
            gam = schedule.gammas(n + 1, m)
            U = np.stack([g.random((m, 2)) for g in rngs])
            advance(cum_rows, p0, X, cur, ab, gam, U, n + 1, _kernels.RENORM_EVERY)
            n += m
        out_x[:, c] = X
        out_cur[:, c] = cur
        out_ab[:, c] = ab
    return out_x, out_cur, out_ab


def run_sa_batch(
    chain: AbsorbedChain,
    schedule: StepSchedule,
    steps: int,
    x0=None,
    X0="sample-from-x0",
    seed: int = 0,
    replicas=1,
    checkpoints=None,
    ratio: float = 1.25,
    workers: int | None = None,
    backend: str | None = None,
) -> SaBatch:
    """Run independent replicas and record them on a checkpoint grid.

    ``replicas`` is a count or an explicit sequence of replica indices.
    Output does not depend on ``workers`` or ``backend``.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    reps = np.arange(replicas) if np.isscalar(replicas) else np.asarray(replicas, dtype=np.int64)
    grid = geometric_grid(steps, ratio) if checkpoints is None else np.unique(np.asarray(checkpoints, dtype=np.int64))
    if grid[0] < 0 or grid[-1] > steps:
        raise ValueError("checkpoints must lie in [0, steps]")
    groups = [reps[i : i + GROUP] for i in range(0, len(reps), GROUP)]
    workers = workers or default_workers()
    job = lambda g: _run_group(chain, schedule, grid, x0, X0, seed, g, backend)  # noqa: E731
    if workers > 1 and len(groups) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, groups))
    else:
        parts = [job(g) for g in groups]
    gam = np.array([schedule.gamma(int(k)) if k >= 1 else math.nan for k in grid])
    return SaBatch(
        replicas=reps,
        n=grid,
        tau=taus(schedule, grid),
        gamma=gam,
        x=np.concatenate([p[0] for p in parts]),
        current=np.concatenate([p[1] for p in parts]),
        absorptions=np.concatenate([p[2] for p in parts]),
    )


def run_sa(
    chain: AbsorbedChain,
    schedule: StepSchedule,
    steps: int,
    x0=None,
    X0="sample-from-x0",
    seed: int = 0,
    checkpoints=None,
    ratio: float = 1.25,
    nu=None,
    backend: str | None = None,
) -> list[TrajectoryRecord]:
    """One replica; ``err_l1`` is filled when the exact QSD ``nu`` is given."""
    batch = run_sa_batch(chain, schedule, steps, x0, X0, seed, [0], checkpoints, ratio, 1, backend)
    return batch.records(0, nu)
