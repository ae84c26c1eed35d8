"""Discrete-time Fleming-Viot particle system.

At each move one particle, chosen uniformly, jumps with the interior
transitions; if it is absorbed it is relocated onto the position of a
uniformly chosen particle, possibly itself.  Particles are exchangeable, so
only the occupation counts are stored.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .chain import AbsorbedChain, as_simplex, kernel, tangent_basis, vertex
from .errors import ParticleError
from .rng import default_workers, replica_rng

CHUNK = 1 << 13
GROUP = 64


@dataclass
class ParticleSystem:
    N: int
    counts: np.ndarray
    step: int
    rng: np.random.Generator

    def __post_init__(self):
        if self.N < 2:
            raise ParticleError(f"need at least 2 particles, got N={self.N}")
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if np.any(self.counts < 0) or int(self.counts.sum()) != self.N:
            raise ParticleError("counts must be nonnegative and sum to N")

    @property
    def measure(self) -> np.ndarray:
        return self.counts / self.N


@dataclass(eq=False)
class InterpolatedPath:
    """Empirical measure on the time scale ``1/N``, linear between moves."""

    N: int
    times: np.ndarray
    values: np.ndarray

    def at(self, t: float) -> np.ndarray:
        if not 0 <= t <= self.times[-1]:
            raise ValueError(f"t={t} outside [0, {self.times[-1]}]")
        return np.array([np.interp(t, self.times, self.values[:, k]) for k in range(self.values.shape[1])])


def lattice_round(x0, N: int) -> np.ndarray:
    """Largest-remainder rounding of ``N * x0`` to integer counts summing to ``N``."""
    x0 = np.asarray(x0, dtype=float)
    target = N * x0
    counts = np.floor(target).astype(np.int64)
    short = N - int(counts.sum())
    frac = target - counts
    # ties broken by lowest index for reproducibility
    order = np.lexsort((np.arange(len(x0)), -frac))
    counts[order[:short]] += 1
    return counts


def init_system(chain: AbsorbedChain, N: int, x0=None, seed: int = 0, replica: int = 0) -> ParticleSystem:
    x0 = np.full(chain.d, 1.0 / chain.d) if x0 is None else as_simplex(x0, chain.d)
    return ParticleSystem(int(N), lattice_round(x0, int(N)), 0, replica_rng(seed, replica))


def mean_field_drift(chain: AbsorbedChain, x) -> np.ndarray:
    """Expected net share gained by each state per unit time (``1/N`` moves)."""
    x = np.asarray(x, dtype=float)
    return x @ chain.p_hat + x * (x @ chain.p0) - x


def mean_field_drift_pairwise(chain: AbsorbedChain, x) -> np.ndarray:
    """Same field from the move probabilities ``p_ij = x_i K[x]_ij``."""
    x = np.asarray(x, dtype=float)
    p = x[:, None] * (chain.p_hat + np.outer(chain.p0, x))
    np.fill_diagonal(p, 0.0)
    return p.sum(axis=0) - p.sum(axis=1)


def move_probabilities(chain: AbsorbedChain, x) -> np.ndarray:
    """``p[i, j]``: probability that the next move takes a particle from ``i`` to ``j``."""
    x = as_simplex(x, chain.d)
    return x[:, None] * kernel(chain, x)


def drift_jacobian(chain: AbsorbedChain, x) -> np.ndarray:
    """``J[j, k] = dF_j / dx_k``; affine in ``x``."""
    x = np.asarray(x, dtype=float)
    return chain.p_hat.T + (x @ chain.p0 - 1.0) * np.eye(chain.d) + np.outer(x, chain.p0)


def lipschitz_F(chain: AbsorbedChain) -> float:
    """l2 Lipschitz constant of the mean-field drift on the simplex.

    The Jacobian is affine in ``x`` and the operator norm convex, so the
    supremum over the simplex is reached at a vertex.
    """
    b = tangent_basis(chain.d)
    return max(float(np.linalg.norm(drift_jacobian(chain, vertex(chain.d, k)) @ b, 2)) for k in range(chain.d))


def _simplex_grid(d: int, m: int) -> np.ndarray:
    pts = []
    for bars in itertools.combinations(range(m + d - 1), d - 1):
        edges = np.diff(np.concatenate([[-1], bars, [m + d - 1]])) - 1
        pts.append(edges)
    return np.array(pts, dtype=float) / m


def grid_mesh(d: int, max_points: int = 200_000, mesh: int = 64) -> int:
    """Largest barycentric resolution ``<= mesh`` with at most ``max_points`` nodes."""
    while mesh > 1 and math.comb(mesh + d - 1, d - 1) > max_points:
        mesh -= 1
    return mesh


def sup_norm_F(chain: AbsorbedChain, mesh: int = 64, max_points: int = 200_000) -> tuple[float, int]:
    """``max ||F(x)||_2^2`` over a barycentric grid of the simplex, and the grid resolution used.

    Vertices are always on the grid.  The value is a lower estimate of the
    true supremum, exact when the maximum sits on a grid node.
    """
    m = grid_mesh(chain.d, max_points, mesh)
    pts = _simplex_grid(chain.d, m)
    F = pts @ chain.p_hat + pts * (pts @ chain.p0)[:, None] - pts
    return float((F**2).sum(axis=1).max()), m


def deviation_constant(chain: AbsorbedChain, T: float, l_F: float | None = None, F_sq: float | None = None) -> float:
    """Exponent constant ``c`` of the sup-deviation inequality over ``[0, T]``."""
    if not T > 0:
        raise ValueError("T must be > 0")
    l_F = lipschitz_F(chain) if l_F is None else l_F
    F_sq = sup_norm_F(chain)[0] if F_sq is None else F_sq
    return math.exp(-2.0 * l_F * T) / (8.0 * T * math.sqrt(math.sqrt(2.0) + F_sq))


@dataclass(frozen=True)
class DeviationBound:
    bound: float
    c: float
    l_F: float
    F_sq: float
    mesh: int

    @property
    def vacuous(self) -> bool:
        return self.bound >= 1.0


def deviation_bound(chain: AbsorbedChain, T: float, eps: float, N: int) -> DeviationBound:
    """``2 d exp(-c eps^2 N)``, bounding ``P(sup_t ||path - Psi|| >= eps)``."""
    if not eps > 0:
        raise ValueError("eps must be > 0")
    if N < 2:
        raise ParticleError("N must be >= 2")
    l_F = lipschitz_F(chain)
    F_sq, mesh = sup_norm_F(chain)
    c = deviation_constant(chain, T, l_F, F_sq)
    return DeviationBound(2.0 * chain.d * math.exp(-c * eps**2 * N), c, l_F, F_sq, mesh)


def fv_step(chain: AbsorbedChain, ps: ParticleSystem, backend: str | None = None) -> ParticleSystem:
    """One move, in place."""
    U = ps.rng.random((1, 1, 3))
    C = ps.counts[None, :].copy()
    rec = np.zeros((1, 0, chain.d), dtype=np.int64)
    acc = np.zeros((1, chain.d), dtype=np.int64)
    _kernels.get("fv", backend)(_kernels.cumulative_rows(chain.p_hat), chain.p0, C, ps.N, U, rec, acc)
    ps.counts = C[0]
    ps.step += 1
    return ps


def _fv_group(chain, N, steps, x0, seed, reps, backend, record, window):
    d = chain.d
    cum_rows = _kernels.cumulative_rows(chain.p_hat)
    p0 = np.ascontiguousarray(chain.p0)
    advance = _kernels.get("fv", backend)
    rngs = [replica_rng(seed, r) for r in reps]
    C = np.tile(lattice_round(x0, N), (len(reps), 1))
    R = len(reps)
    path = np.empty((R, steps + 1, d), dtype=np.int64) if record else None
    if record:
        path[:, 0] = C
    acc = np.zeros((R, d), dtype=np.int64)
    n = 0
    # moves n with window[0] < n <= window[1] are accumulated in the time average
    stops = sorted({steps, *(w for w in window if 0 < w < steps)})
    for stop in stops:
        while n < stop:
            m = int(min(CHUNK, stop - n))
            U = np.stack([g.random((m, 3)) for g in rngs])
            rec = path[:, n + 1 : n + 1 + m] if record else np.zeros((R, 0, d), dtype=np.int64)
            buf = np.empty((R, m, d), dtype=np.int64) if record else rec
            part = np.zeros((R, d), dtype=np.int64)
            advance(cum_rows, p0, C, N, U, buf, part)
            if record:
                rec[...] = buf
            if window[0] < n + 1 and n + m <= window[1]:
                acc += part
            n += m
    return C, path, acc


def run_fv_batch(
    chain: AbsorbedChain,
    N: int,
    T: float,
    x0=None,
    seed: int = 0,
    replicas=1,
    record: bool = True,
    window: tuple[int, int] = (0, 0),
    steps: int | None = None,
    workers: int | None = None,
    backend: str | None = None,
):
    """Run independent particle systems for ``ceil(N T)`` moves (or ``steps``).

    Returns ``(final_counts, paths, window_sums)``: ``paths`` has shape
    (replicas, moves + 1, d) when ``record`` is set, and ``window_sums`` holds
    the counts summed over moves ``window[0] < n <= window[1]``.
    """
    if N < 2:
        raise ParticleError(f"need at least 2 particles, got N={N}")
    if T < 0:
        raise ValueError("T must be >= 0")
    x0 = np.full(chain.d, 1.0 / chain.d) if x0 is None else as_simplex(x0, chain.d)
    steps = int(math.ceil(N * T - 1e-9)) if steps is None else int(steps)
    reps = np.arange(replicas) if np.isscalar(replicas) else np.asarray(replicas, dtype=np.int64)
    groups = [reps[i : i + GROUP] for i in range(0, len(reps), GROUP)]
    workers = workers or default_workers()
    job = lambda g: _fv_group(chain, int(N), steps, x0, seed, g, backend, record, window)  # noqa: E731
    if workers > 1 and len(groups) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, groups))
    else:
        parts = [job(g) for g in groups]
    final = np.concatenate([p[0] for p in parts])
    paths = np.concatenate([p[1] for p in parts]) if record else None
    sums = np.concatenate([p[2] for p in parts])
    return final, paths, sums


def run_fv(chain: AbsorbedChain, N: int, T: float, x0=None, seed: int = 0, replica: int = 0, backend: str | None = None) -> InterpolatedPath:
    """Single replica path, recorded at every knot ``n / N``."""
    _, paths, _ = run_fv_batch(chain, N, T, x0, seed, [replica], backend=backend)
    n = paths.shape[1]
    return InterpolatedPath(int(N), np.arange(n) / N, paths[0] / N)
