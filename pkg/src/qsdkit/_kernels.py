"""Inner loops of the two samplers.

Each kernel exists twice: a numba ``@njit`` version looping over replicas
then steps, and a pure-numpy version looping over steps and vectorised over
replicas.  Both consume the same pre-drawn uniforms and perform the same
floating-point operations in the same order, so they produce identical
results.  ``QSD_BACKEND=numpy`` selects the fallback; it is also used when
numba cannot be imported.
"""
from __future__ import annotations

import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False

RENORM_EVERY = 1 << 16


def default_backend() -> str:
    name = os.environ.get("QSD_BACKEND", "numba").strip().lower()
    if name not in ("numba", "numpy"):
        raise ValueError(f"QSD_BACKEND must be 'numba' or 'numpy', got {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        return "numpy"
    return name


def _jit(fn):
    if HAVE_NUMBA:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn


def cumulative_rows(p_hat: np.ndarray) -> np.ndarray:
    """Row-normalised cumulative sums of ``p_hat`` for inverse-CDF sampling.

    The last positive column of each row is pinned to exactly 1 so a
    uniform in ``[0, 1)`` always lands. Rows with no interior mass are zero
    and never consulted (absorption is then certain).
    """
    d = p_hat.shape[0]
    cum = np.zeros((d, d))
    for i in range(d):
        row = np.cumsum(p_hat[i])
        if row[-1] > 0:
            cum[i] = row / row[-1]
            last = int(np.flatnonzero(p_hat[i] > 0)[-1])
            cum[i, last:] = 1.0
    return cum


# --------------------------------------------------------------------- numba


@_jit
def _scan_float(x, u):
    total = 0.0
    for k in range(x.shape[0]):
        total += x[k]
    target = u * total
    acc = 0.0
    for k in range(x.shape[0]):
        acc += x[k]
        if target < acc:
            return k
    for k in range(x.shape[0] - 1, -1, -1):
        if x[k] > 0:
            return k
    return x.shape[0] - 1


@_jit
def _scan_row(cum, u):
    for k in range(cum.shape[0]):
        if u < cum[k]:
            return k
    return cum.shape[0] - 1


@_jit
def _scan_counts(counts, q):
    acc = 0
    for k in range(counts.shape[0]):
        acc += counts[k]
        if q < acc:
            return k
    return counts.shape[0] - 1


@_jit
def _draw_next_nb(cum_rows, p0, x, i, u1, u2):
    if u1 < p0[i]:
        return _scan_float(x, u2), True
    return _scan_row(cum_rows[i], u2), False


@_jit
def draw_next_nb(cum_rows, p0, x, i, U):
    out = np.empty(U.shape[0], dtype=np.int64)
    for t in range(U.shape[0]):
        j, _ = _draw_next_nb(cum_rows, p0, x, i, U[t, 0], U[t, 1])
        out[t] = j
    return out


@_jit
def sa_advance_nb(cum_rows, p0, X, cur, absorptions, gammas, U, n_start, renorm_every):
    """Advance every replica by ``len(gammas)`` reinforced steps in place.

    ``X`` (R, d) weighted occupation measures, ``cur`` (R,) current states,
    ``U`` (R, m, 2) uniforms; step ``t`` is global step ``n_start + t``.
    """
    R, d = X.shape
    m = gammas.shape[0]
    for r in range(R):
        x = X[r]
        i = cur[r]
        for t in range(m):
            j, dead = _draw_next_nb(cum_rows, p0, x, i, U[r, t, 0], U[r, t, 1])
            if dead:
                absorptions[r] += 1
            g = gammas[t]
            omg = 1.0 - g
            for k in range(d):
                x[k] = x[k] * omg
            x[j] += g
            if (n_start + t) % renorm_every == 0:
                s = 0.0
                for k in range(d):
                    s += x[k]
                for k in range(d):
                    x[k] = x[k] / s
            i = j
        cur[r] = i


@_jit
def fv_advance_nb(cum_rows, p0, C, N, U, rec, acc):
    """Advance every particle system by ``U.shape[1]`` moves in place.

    ``C`` (R, d) int64 counts; ``rec`` (R, m, d) receives the counts after each
    move when its second axis is nonempty; ``acc`` (R, d) accumulates counts
    summed over moves.
    """
    R, d = C.shape
    m = U.shape[1]
    record = rec.shape[1] > 0
    for r in range(R):
        c = C[r]
        for t in range(m):
            p = min(int(U[r, t, 0] * N), N - 1)
            i = _scan_counts(c, p)
            if U[r, t, 1] < p0[i]:
                q = min(int(U[r, t, 2] * N), N - 1)
                j = _scan_counts(c, q)
            else:
                j = _scan_row(cum_rows[i], U[r, t, 2])
            c[i] -= 1
            c[j] += 1
            for k in range(d):
                acc[r, k] += c[k]
            if record:
                for k in range(d):
                    rec[r, t, k] = c[k]


# --------------------------------------------------------------------- numpy


def _scan_float_np(X, u):
    cum = np.cumsum(X, axis=1)
    target = u * cum[:, -1]
    j = (cum <= target[:, None]).sum(axis=1)
    bad = j >= X.shape[1]
    if bad.any():
        pos = X[bad] > 0
        j[bad] = X.shape[1] - 1 - np.argmax(pos[:, ::-1], axis=1)
    return j


def _scan_row_np(cum_rows, i, u):
    rows = cum_rows[i]
    j = (rows <= u[:, None]).sum(axis=1)
    return np.minimum(j, cum_rows.shape[1] - 1)


def _scan_counts_np(C, q):
    cum = np.cumsum(C, axis=1)
    j = (cum <= q[:, None]).sum(axis=1)
    return np.minimum(j, C.shape[1] - 1)


def _draw_next_np(cum_rows, p0, X, i, u1, u2):
    dead = u1 < p0[i]
    j = _scan_row_np(cum_rows, i, u2)
    if dead.any():
        j[dead] = _scan_float_np(X[dead], u2[dead])
    return j, dead


def draw_next_np(cum_rows, p0, x, i, U):
    m = U.shape[0]
    X = np.broadcast_to(x, (m, x.shape[0]))
    j, _ = _draw_next_np(cum_rows, p0, X, np.full(m, i), U[:, 0], U[:, 1])
    return j


def sa_advance_np(cum_rows, p0, X, cur, absorptions, gammas, U, n_start, renorm_every):
    rows = np.arange(X.shape[0])
    for t in range(gammas.shape[0]):
        j, dead = _draw_next_np(cum_rows, p0, X, cur, U[:, t, 0], U[:, t, 1])
        absorptions += dead
        g = gammas[t]
        X *= 1.0 - g
        X[rows, j] += g
        if (n_start + t) % renorm_every == 0:
            X /= np.cumsum(X, axis=1)[:, -1:]
        cur[:] = j


def fv_advance_np(cum_rows, p0, C, N, U, rec, acc):
    rows = np.arange(C.shape[0])
    record = rec.shape[1] > 0
    for t in range(U.shape[1]):
        p = np.minimum((U[:, t, 0] * N).astype(np.int64), N - 1)
        i = _scan_counts_np(C, p)
        dead = U[:, t, 1] < p0[i]
        j = _scan_row_np(cum_rows, i, U[:, t, 2])
        if dead.any():
            q = np.minimum((U[dead, t, 2] * N).astype(np.int64), N - 1)
            j[dead] = _scan_counts_np(C[dead], q)
        C[rows, i] -= 1
        C[rows, j] += 1
        acc += C
        if record:
            rec[:, t, :] = C


KERNELS = {
    "numba": {"sa": sa_advance_nb, "fv": fv_advance_nb, "draw": draw_next_nb},
    "numpy": {"sa": sa_advance_np, "fv": fv_advance_np, "draw": draw_next_np},
}


def get(name: str, backend: str | None = None):
    backend = backend or default_backend()
    if backend == "numba" and not HAVE_NUMBA:
        backend = "numpy"
    return KERNELS[backend][name]
