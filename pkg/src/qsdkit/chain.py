"""Absorbed finite Markov chains and the exact linear algebra around them.

States of the interior class are indexed ``0 .. d-1``; the absorbing state
is implicit and only enters through the absorption column ``p0``.  Measures
are row vectors, so a kernel acts on the right: ``x @ K``.
"""
from __future__ import annotations

import hashlib
import math
import warnings
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from .errors import (
    NegativeEntry,
    NoAbsorption,
    NotIrreducible,
    RowSumError,
    ShapeError,
    SimplexError,
    SingularMatrix,
    TooSmall,
)

ROW_SUM_TOL = 1e-12
SIMPLEX_TOL = 1e-12
COND_WARN = 1e12


@dataclass(frozen=True, eq=False)
class AbsorbedChain:
    """Validated transition data of a chain absorbed at a single state.

    Build instances with :func:`validate_chain`; the constructor itself does
    not check anything.
    """

    p_hat: np.ndarray
    p0: np.ndarray
    labels: tuple[str, ...] | None = None
    name: str | None = field(default=None, compare=False)

    @property
    def d(self) -> int:
        return self.p_hat.shape[0]

    @cached_property
    def green(self) -> np.ndarray:
        return _green(self.p_hat)

    @cached_property
    def absorption_time(self) -> np.ndarray:
        """Expected number of steps before absorption from each state."""
        return self.green.sum(axis=1)

    def digest(self) -> str:
        """SHA-256 of the exact float content, stable across runs."""
        h = hashlib.sha256()
        h.update(str(self.d).encode())
        for v in np.concatenate([self.p_hat.ravel(), self.p0]):
            h.update(float(v).hex().encode())
        return h.hexdigest()

    def to_json(self) -> dict:
        out = {"p_hat": self.p_hat.tolist(), "p0": self.p0.tolist()}
        if self.labels is not None:
            out["labels"] = list(self.labels)
        return out


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def _reach(adj: np.ndarray, start: int) -> np.ndarray:
    seen = np.zeros(adj.shape[0], dtype=bool)
    seen[start] = True
    queue = deque([start])
    while queue:
        i = queue.popleft()
        for j in np.flatnonzero(adj[i]):
            if not seen[j]:
                seen[j] = True
                queue.append(j)
    return seen


def validate_chain(p_hat, p0, labels=None, *, renormalize=False, name=None) -> AbsorbedChain:
    """Check the standing assumptions and return an :class:`AbsorbedChain`.

    Parameters
    ----------
    p_hat : array_like, shape (d, d)
        Transition probabilities between interior states.
    p0 : array_like, shape (d,)
        Absorption probabilities.
    labels : sequence of str, optional
        State names.
    renormalize : bool
        Divide each row of ``[p_hat | p0]`` by its sum before the row-sum
        check.  Off by default.

    Raises
    ------
    ShapeError, TooSmall, NegativeEntry, RowSumError, NoAbsorption, NotIrreducible
    """
    p_hat = np.asarray(p_hat, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    if p_hat.ndim != 2 or p_hat.shape[0] != p_hat.shape[1]:
        raise ShapeError(f"p_hat must be square, got shape {p_hat.shape}")
    d = p_hat.shape[0]
    if p0.shape != (d,):
        raise ShapeError(f"p0 must have shape ({d},), got {p0.shape}")
    if labels is not None:
        labels = tuple(str(s) for s in labels)
        if len(labels) != d:
            raise ShapeError(f"{len(labels)} labels for {d} states")
    if d < 2:
        raise TooSmall(f"need at least 2 interior states, got {d}")
    if not (np.all(np.isfinite(p_hat)) and np.all(np.isfinite(p0))):
        raise NegativeEntry("non-finite transition probability")
    neg = np.argwhere(p_hat < 0)
    if len(neg):
        i, j = neg[0]
        raise NegativeEntry(f"p_hat[{i}][{j}] = {p_hat[i, j]!r} < 0")
    neg = np.flatnonzero(p0 < 0)
    if len(neg):
        raise NegativeEntry(f"p0[{neg[0]}] = {p0[neg[0]]!r} < 0")

    if renormalize:
        tot = p_hat.sum(axis=1) + p0
        if np.any(tot <= 0):
            raise RowSumError(f"row {int(np.flatnonzero(tot <= 0)[0])} has zero mass")
        p_hat = p_hat / tot[:, None]
        p0 = p0 / tot
    for i in range(d):
        s = math.fsum(p_hat[i]) + p0[i]
        if abs(s - 1.0) > ROW_SUM_TOL:
            raise RowSumError(f"row {i} sums to {s!r}, off by {abs(s - 1.0):.3e} > {ROW_SUM_TOL:g}")
    if not np.any(p0 > 0):
        raise NoAbsorption("absorption column is identically zero")

    adj = p_hat > 0
    fwd = _reach(adj, 0)
    if not fwd.all():
        j = int(np.flatnonzero(~fwd)[0])
        raise NotIrreducible(f"state {j} is not reachable from state 0")
    bwd = _reach(adj.T, 0)
    if not bwd.all():
        j = int(np.flatnonzero(~bwd)[0])
        raise NotIrreducible(f"state 0 is not reachable from state {j}")

    return AbsorbedChain(_readonly(p_hat), _readonly(p0), labels, name)


def as_simplex(x, d: int | None = None, tol: float = SIMPLEX_TOL) -> np.ndarray:
    """Return ``x`` as a float array after checking it is a probability vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or (d is not None and x.shape[0] != d):
        raise SimplexError(f"expected a vector of length {d}, got shape {x.shape}")
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise SimplexError("simplex vector has negative or non-finite entries")
    s = math.fsum(x)
    if abs(s - 1.0) > tol:
        raise SimplexError(f"simplex vector sums to {s!r}")
    return x


def uniform(d: int) -> np.ndarray:
    return np.full(d, 1.0 / d)


def vertex(d: int, k: int) -> np.ndarray:
    e = np.zeros(d)
    e[k] = 1.0
    return e


def tangent_basis(d: int) -> np.ndarray:
    """Orthonormal basis of ``{u : sum(u) = 0}`` as the columns of a (d, d-1) array."""
    # the centring matrix has rank d-1; its leading singular vectors span the range
    u, _, _ = np.linalg.svd(np.eye(d) - 1.0 / d)
    return u[:, : d - 1]


def l1_operator_norm(m: np.ndarray) -> float:
    """Operator norm induced by the l1 norm on row vectors (``x -> x @ m``).

    This is the largest absolute row sum.
    """
    return float(np.abs(m).sum(axis=1).max())


def _green(p_hat: np.ndarray) -> np.ndarray:
    d = p_hat.shape[0]
    m = np.eye(d) - p_hat
    cond = np.linalg.cond(m, 1)
    if not np.isfinite(cond):
        raise SingularMatrix("I - p_hat is singular; absorption is not attainable")
    if cond > COND_WARN:
        warnings.warn(f"I - p_hat is ill-conditioned (cond_1 = {cond:.3e})", RuntimeWarning, stacklevel=3)
    lu = scipy.linalg.lu_factor(m)
    a = scipy.linalg.lu_solve(lu, np.eye(d))
    a.setflags(write=False)
    return a


def kernel(chain: AbsorbedChain, x) -> np.ndarray:
    """Resurrection kernel: absorbed mass is redistributed according to ``x``."""
    x = as_simplex(x, chain.d)
    return chain.p_hat + np.outer(chain.p0, x)


def green_function(chain: AbsorbedChain) -> np.ndarray:
    """``(I - p_hat)^{-1}``: expected visits to ``j`` before absorption, from ``i``."""
    return chain.green.copy()


def pi(chain: AbsorbedChain, x) -> np.ndarray:
    """Invariant distribution of ``kernel(chain, x)``, via the Green function."""
    x = as_simplex(x, chain.d)
    xa = x @ chain.green
    return xa / xa.sum()


def drift(chain: AbsorbedChain, x) -> np.ndarray:
    """Mean-field vector field ``pi(x) - x`` of the reinforced walk."""
    x = as_simplex(x, chain.d)
    return pi(chain, x) - x


def stationary_power(k: np.ndarray, tol: float = 1e-15, max_iter: int = 1_000_000) -> np.ndarray:
    """Invariant law of a stochastic matrix by power iteration on its lazy version.

    The lazy chain ``(I + K) / 2`` has the same invariant law and is aperiodic,
    so this also works for periodic kernels.
    """
    d = k.shape[0]
    lazy = 0.5 * (np.eye(d) + k)
    v = np.full(d, 1.0 / d)
    for _ in range(max_iter):
        w = v @ lazy
        w /= w.sum()
        if np.abs(w - v).sum() < tol:
            return w
        v = w
    return v


@dataclass(frozen=True, eq=False)
class DeviationMatrix:
    q: np.ndarray
    at_x: np.ndarray

    def residual(self, chain: AbsorbedChain) -> float:
        """Largest entry of ``|(I-K)Q - (I-Pi)|`` and ``|Q(I-K) - (I-Pi)|``."""
        k = kernel(chain, self.at_x)
        d = chain.d
        proj = np.eye(d) - np.tile(pi(chain, self.at_x), (d, 1))
        lhs = (np.eye(d) - k) @ self.q
        rhs = self.q @ (np.eye(d) - k)
        return float(max(np.abs(lhs - proj).max(), np.abs(rhs - proj).max()))


def deviation_matrix(chain: AbsorbedChain, x) -> DeviationMatrix:
    """Solution of the Poisson equation ``(I - K[x]) Q = Q (I - K[x]) = I - Pi(x)``.

    Computed through the fundamental-matrix identity
    ``Q = (I - K + Pi)^{-1} (I - Pi)`` where every row of ``Pi`` is ``pi(x)``.
    """
    x = as_simplex(x, chain.d)
    d = chain.d
    k = kernel(chain, x)
    proj = np.tile(pi(chain, x), (d, 1))
    lu = scipy.linalg.lu_factor(np.eye(d) - k + proj)
    q = scipy.linalg.lu_solve(lu, np.eye(d) - proj)
    return DeviationMatrix(q, x.copy())


def random_chain(rng: np.random.Generator, d: int, density: float = 0.6, absorb: float = 0.3) -> AbsorbedChain:
    """Random irreducible absorbed chain, for property tests and demos.

    A random cyclic permutation is always present so the interior class is
    irreducible; other edges appear with probability ``density``.  At least
    one state leaks to the absorbing state.
    """
    perm = rng.permutation(d)
    w = rng.random((d, d)) * (rng.random((d, d)) < density)
    for a, b in zip(perm, np.roll(perm, -1)):
        w[a, b] += 0.1 + rng.random()
    leak = rng.random(d) * (rng.random(d) < absorb)
    leak[rng.integers(d)] += 0.05 + rng.random()
    tot = w.sum(axis=1) + leak
    p_hat = w / tot[:, None]
    p0 = leak / tot
    return validate_chain(p_hat, p0)


def random_simplex(rng: np.random.Generator, d: int) -> np.ndarray:
    x = rng.dirichlet(np.ones(d))
    return x / x.sum()


S2 = dict(p_hat=[[0.0, 0.5], [0.5, 0.0]], p0=[0.5, 0.5])
A2 = dict(p_hat=[[0.0, 0.5], [1.0, 0.0]], p0=[0.5, 0.0])


def example_chain(name: str) -> AbsorbedChain:
    """The two hand-solvable 2-state chains used throughout the docs and tests."""
    table = {"S2": S2, "A2": A2}
    return validate_chain(**table[name], name=name)
