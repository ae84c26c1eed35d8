"""Exact ground truth: the QSD, its eigenvalue, the rate constant and the flows.

Three deterministic flows live here:

* the nonlinear flow of the drift ``h(x) = pi(x) - x`` (RK4),
* its linear companion ``x exp(tA)`` normalised to the simplex, which has
  the same orbits up to a change of clock,
* the conditioned semigroup ``x exp(t(p_hat - I))`` normalised, the large-N
  limit of the Fleming-Viot particle system.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .chain import AbsorbedChain, as_simplex, pi, tangent_basis
from .errors import ConvergenceFailure, StepTooLarge

MAX_DT = 0.1


@dataclass(frozen=True, eq=False)
class SpectralSummary:
    nu: np.ndarray
    lam: float
    eigenvalues: np.ndarray
    R: float
    dh_nu_eigs: np.ndarray
    residual: float
    iterations: int

    def to_json(self) -> dict:
        return {
            "nu": self.nu.tolist(),
            "lambda": self.lam,
            "R": self.R,
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "dh_nu_eigs": [[float(z.real), float(z.imag)] for z in self.dh_nu_eigs],
            "residual": self.residual,
        }


def _sorted_spectrum(p_hat: np.ndarray) -> np.ndarray:
    ev = np.linalg.eigvals(p_hat).astype(complex)
    order = np.lexsort((-ev.imag, -ev.real, -np.round(np.abs(ev), 12)))
    return ev[order]


def rate_constant(lam: float, others) -> float:
    """``1 - (1 - lam) * max Re(1 / (1 - lam_i))`` over the subdominant eigenvalues."""
    others = np.asarray(others, dtype=complex)
    return float(1.0 - (1.0 - lam) * np.max((1.0 / (1.0 - others)).real))


def _perron_left(p_hat: np.ndarray, p0: np.ndarray, tol: float, max_iter: int):
    d = p_hat.shape[0]
    # shifting by I makes the Perron root strictly dominant even for periodic p_hat
    shifted = 0.5 * (np.eye(d) + p_hat)
    w, vl = scipy.linalg.eig(p_hat, left=True, right=False)
    v = np.abs(vl[:, int(np.argmax(w.real))].real)
    if not np.all(np.isfinite(v)) or v.sum() <= 0:
        v = np.full(d, 1.0 / d)
    v = v / v.sum()
    residual = math.inf
    for it in range(max_iter + 1):
        lam = 1.0 - float(v @ p0)
        residual = float(np.abs(v @ p_hat - lam * v).sum())
        if residual <= tol:
            return v, lam, residual, it
        v = v @ shifted
        v /= v.sum()
    raise ConvergenceFailure(
        f"power iteration did not reach residual {tol:g} in {max_iter} iterations (residual {residual:.3e})",
        residual=residual,
    )


def qsd_exact(chain: AbsorbedChain, tol: float = 1e-12, max_iter: int = 200_000) -> SpectralSummary:
    """Quasi-stationary distribution and spectral constants of ``chain``.

    Parameters
    ----------
    tol : float
        Target l1 residual of ``nu p_hat - lam nu``; must lie in (0, 1e-6].

    Raises
    ------
    ConvergenceFailure
        The power iteration could not reach ``tol``; the exception carries the
        last residual.
    """
    if not 0 < tol <= 1e-6:
        raise ValueError(f"tol must lie in (0, 1e-6], got {tol}")
    nu, lam, residual, iters = _perron_left(chain.p_hat, chain.p0, tol, max_iter)

    ev = _sorted_spectrum(chain.p_hat)
    k = int(np.argmin(np.abs(ev - lam)))
    others = np.delete(ev, k)
    eigenvalues = np.concatenate([[complex(lam, 0.0)], others])
    R = rate_constant(lam, others)

    # repeated eigenvalues at the maximiser make R depend on Jordan structure
    vals = (1.0 / (1.0 - others)).real
    top = others[int(np.argmax(vals))]
    if np.sum(np.abs(others - top) < 1e-8) > 1:
        warnings.warn(
            f"subdominant eigenvalue {top:.6g} attaining the rate constant is repeated; "
            "R assumes no Jordan coupling",
            RuntimeWarning,
            stacklevel=2,
        )

    return SpectralSummary(
        nu=nu,
        lam=lam,
        eigenvalues=eigenvalues,
        R=R,
        dh_nu_eigs=dh_tangent_eigs(chain, nu),
        residual=residual,
        iterations=iters,
    )


def jacobian_dh(chain: AbsorbedChain, x) -> np.ndarray:
    """Jacobian ``J[j, k] = d h_j / d x_k`` of the drift at ``x``.

    ``pi(x) = xA / <xA, 1>`` is differentiated with the quotient rule, so the
    matrix is valid on the whole positive orthant, not only on tangent
    directions.
    """
    x = np.asarray(x, dtype=float)
    a = chain.green
    xa = x @ a
    s = xa.sum()
    dpi = a.T / s - np.outer(xa, a.sum(axis=1)) / s**2
    return dpi - np.eye(chain.d)


def dh_tangent_eigs(chain: AbsorbedChain, x) -> np.ndarray:
    """Eigenvalues of the Jacobian restricted to the tangent space of the simplex."""
    b = tangent_basis(chain.d)
    ev = np.linalg.eigvals(b.T @ jacobian_dh(chain, x) @ b).astype(complex)
    return ev[np.argsort(-ev.real)]


def expm(m: np.ndarray) -> np.ndarray:
    return scipy.linalg.expm(m)


def _project(x: np.ndarray) -> np.ndarray:
    x = np.maximum(x, 0.0)
    return x / x.sum()


def _h(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    xa = x @ a
    return xa / xa.sum() - x


def _check_dt(dt: float) -> None:
    if not 0 < dt <= MAX_DT:
        raise StepTooLarge(f"dt must lie in (0, {MAX_DT}], got {dt}")


def phi_path(chain: AbsorbedChain, x0, times, dt: float = 0.01) -> np.ndarray:
    """Values of the drift flow at increasing ``times`` (one RK4 integration).

    Between consecutive output times the step is shrunk to land exactly on
    the next time; each RK4 step is followed by a clip-and-renormalise back
    onto the simplex.
    """
    _check_dt(dt)
    x = as_simplex(x0, chain.d).copy()
    a = chain.green
    times = np.asarray(times, dtype=float)
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("times must be nonnegative and nondecreasing")
    out = np.empty((len(times), chain.d))
    t = 0.0
    for idx, target in enumerate(times):
        span = target - t
        n = int(math.ceil(span / dt - 1e-12)) if span > 0 else 0
        step = span / n if n else 0.0
        for _ in range(n):
            k1 = _h(a, x)
            k2 = _h(a, _project(x + 0.5 * step * k1))
            k3 = _h(a, _project(x + 0.5 * step * k2))
            k4 = _h(a, _project(x + step * k3))
            x = _project(x + step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))
        t = target
        out[idx] = x
    return out


def flow_phi_ode(chain: AbsorbedChain, x0, t: float, dt: float = 0.01) -> np.ndarray:
    """Drift flow at time ``t`` from ``x0``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return phi_path(chain, x0, [t], dt)[0]


def _shifted_linear(chain: AbsorbedChain, lam: float | None):
    """Green function shifted by its Perron root ``1/(1 - lam)``."""
    if lam is None:
        lam = qsd_exact(chain).lam
    return chain.green - np.eye(chain.d) / (1.0 - lam)


def flow_phi2(chain: AbsorbedChain, x0, t: float, lam: float | None = None) -> np.ndarray:
    """``x0 exp(tA)`` normalised to the simplex.

    The exponential is taken of ``t(A - I/(1-lam))``; the dropped scalar factor
    cancels in the normalisation and would otherwise overflow for large ``t``.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    x0 = as_simplex(x0, chain.d)
    v = x0 @ expm(t * _shifted_linear(chain, lam))
    return v / v.sum()


def time_reparam(chain: AbsorbedChain, x0, t: float, dt: float = 0.01, lam: float | None = None) -> float:
    """Clock change ``s(t, x0)`` mapping the linear flow onto the drift flow.

    Composite Simpson rule for the integral of ``<Phi2(u, x0) A, 1>`` over
    ``[0, t]``, with at most ``dt`` between nodes.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return 0.0
    x0 = as_simplex(x0, chain.d)
    n = max(2, int(math.ceil(t / dt - 1e-12)))
    n += n % 2
    step = t / n
    prop = expm(step * _shifted_linear(chain, lam))
    rowsum = chain.green.sum(axis=1)
    vals = np.empty(n + 1)
    v = x0.copy()
    for i in range(n + 1):
        vals[i] = (v / v.sum()) @ rowsum
        v = v @ prop
        v /= v.sum()
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float(step / 3.0 * (w @ vals))


def flow_psi(chain: AbsorbedChain, x0, t: float, lam: float | None = None) -> np.ndarray:
    """Conditioned semigroup ``x0 exp(t(p_hat - I))`` normalised."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    x0 = as_simplex(x0, chain.d)
    if lam is None:
        lam = qsd_exact(chain).lam
    v = x0 @ expm(t * (chain.p_hat - lam * np.eye(chain.d)))
    return v / v.sum()


def psi_knots(chain: AbsorbedChain, x0, step: float, n: int) -> np.ndarray:
    """``flow_psi`` at times ``0, step, ..., n*step`` using a single one-step propagator."""
    x0 = as_simplex(x0, chain.d)
    lam = qsd_exact(chain).lam
    prop = expm(step * (chain.p_hat - lam * np.eye(chain.d)))
    out = np.empty((n + 1, chain.d))
    v = x0.copy()
    out[0] = v
    for i in range(1, n + 1):
        v = v @ prop
        v /= v.sum()
        out[i] = v
    return out


def decay_slope(chain: AbsorbedChain, x0, t_lo: float = 5.0, t_hi: float = 20.0, n: int = 61, dt: float = 0.01):
    """Least-squares slope of ``ln ||Phi(t, x0) - nu||_1`` over ``[t_lo, t_hi]``."""
    nu = qsd_exact(chain).nu
    times = np.linspace(t_lo, t_hi, n)
    path = phi_path(chain, x0, times, dt)
    err = np.abs(path - nu).sum(axis=1)
    return float(np.polyfit(times, np.log(err), 1)[0])
