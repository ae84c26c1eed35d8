"""Desk-scale reproductions of the convergence claims.

Every report carries the bounds it is judged against, computed from the
spectral oracle and the schedule's closed forms only, next to the fitted
quantities.  Replica statistics are medians unless stated otherwise.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .chain import AbsorbedChain
from .fleming_viot import deviation_bound, run_fv_batch
from .sa import run_sa_batch
from .schedules import StepSchedule, clt_condition, l_gamma
from .spectral import psi_knots, qsd_exact

RATE_SLACK = 0.15


def _meta(chain: AbsorbedChain, seed: int, schedule: StepSchedule | None = None, **extra) -> dict:
    out = {"chain_sha256": chain.digest(), "seed": int(seed), "version": __version__}
    if schedule is not None:
        out["schedule"] = schedule.descriptor()
    out.update(extra)
    return out


def median_halfwidth(values, z: float = 1.96) -> float:
    """Half-width of the distribution-free order-statistic interval for the median."""
    v = np.sort(np.asarray(values, dtype=float))
    n = len(v)
    if n < 2:
        return math.nan
    k = z * math.sqrt(n) / 2
    lo = max(int(math.floor(n / 2 - k)), 0)
    hi = min(int(math.ceil(n / 2 + k)), n - 1)
    return float((v[hi] - v[lo]) / 2)


def _slope(xs, ys) -> float:
    return float(np.polyfit(xs, ys, 1)[0])


# ------------------------------------------------------------------- rate


@dataclass
class RateReport:
    fitted_slope_vs_tau: float
    fitted_slope_vs_ln_n: float
    theoretical_bound: float | None
    theta_bound: float | None
    l_gamma: float
    R: float
    replicas: int
    halfwidth_tau: float
    halfwidth_ln_n: float
    no_rate_claim: bool
    within_bound: bool | None
    fit_window: tuple[int, int]
    slopes_tau: list = field(repr=False)
    slopes_ln_n: list = field(repr=False)
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = asdict(self)
        out.pop("slopes_tau")
        out.pop("slopes_ln_n")
        return out


def rate_experiment(
    chain: AbsorbedChain,
    schedule: StepSchedule,
    steps: int,
    replicas: int,
    seed: int,
    x0=None,
    X0="sample-from-x0",
    ratio: float = 1.25,
    decades: float = 2.0,
    workers: int | None = None,
    backend: str | None = None,
):
    """Fit the decay exponent of ``||x_n - nu||_1`` per replica.

    Slopes of ``ln err`` against ``tau_n`` and against ``ln n`` are fitted over
    checkpoints in ``[steps / 10**decades, steps]``.  The bound
    ``max(-R, l(gamma)/2)`` applies to the ``tau_n`` slope.

    Returns ``(report, batch)``.
    """
    spec = qsd_exact(chain)
    lg = l_gamma(schedule)
    no_claim = not lg < 0
    bound = None if no_claim else max(-spec.R, lg / 2)
    A = schedule.harmonic_constant()
    theta = min(spec.R * A, 0.5) if A is not None else None

    batch = run_sa_batch(chain, schedule, steps, x0, X0, seed, replicas, ratio=ratio, workers=workers, backend=backend)
    err = np.maximum(batch.err_l1(spec.nu), np.finfo(float).tiny)
    lo = steps / 10**decades
    w = (batch.n >= lo) & (batch.n >= 1)
    st = [_slope(batch.tau[w], np.log(e[w])) for e in err]
    sn = [_slope(np.log(batch.n[w]), np.log(e[w])) for e in err]
    med_tau = float(np.median(st))
    report = RateReport(
        fitted_slope_vs_tau=med_tau,
        fitted_slope_vs_ln_n=float(np.median(sn)),
        theoretical_bound=bound,
        theta_bound=theta,
        l_gamma=lg,
        R=spec.R,
        replicas=len(st),
        halfwidth_tau=median_halfwidth(st),
        halfwidth_ln_n=median_halfwidth(sn),
        no_rate_claim=no_claim,
        within_bound=None if bound is None else bool(med_tau <= bound + RATE_SLACK * abs(bound)),
        fit_window=(int(batch.n[w][0]), int(batch.n[w][-1])),
        slopes_tau=st,
        slopes_ln_n=sn,
        meta=_meta(chain, seed, schedule, steps=int(steps)),
    )
    return report, batch


# -------------------------------------------------------------------- CLT


@dataclass
class CltTarget:
    n: int
    gamma: float
    covariance: list
    row_sums: list
    row_sum_se: list
    scaled_l1_moment: float
    scaled_l1_moment_se: float


@dataclass
class CltReport:
    condition: str
    gamma_star_inv: float
    R: float
    replicas: int
    targets: list
    moment_ratios: list
    covariance_ratios: list
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)


def clt_experiment(
    chain: AbsorbedChain,
    schedule: StepSchedule,
    n_targets,
    replicas: int,
    seed: int,
    x0=None,
    X0="sample-from-x0",
    workers: int | None = None,
    backend: str | None = None,
):
    """Second-moment view of ``(x_n - nu) / sqrt(gamma_n)`` across replicas.

    Raises ``ConditionViolated`` when neither central-limit hypothesis holds
    for the schedule.  Returns ``(report, batch)``.
    """
    spec = qsd_exact(chain)
    cond, gstar = clt_condition(schedule, spec.R)
    n_targets = sorted(int(n) for n in n_targets)
    batch = run_sa_batch(
        chain, schedule, n_targets[-1], x0, X0, seed, replicas,
        checkpoints=n_targets, workers=workers, backend=backend,
    )
    targets = []
    for c, n in enumerate(batch.n):
        g = float(batch.gamma[c])
        Y = (batch.x[:, c] - spec.nu) / math.sqrt(g)
        R = Y.shape[0]
        V = np.cov(Y, rowvar=False)
        Yc = Y - Y.mean(axis=0)
        prods = Yc[:, :, None] * Yc[:, None, :]
        se = prods.std(axis=0, ddof=1) / math.sqrt(R)
        l1 = np.abs(Y).sum(axis=1)
        targets.append(
            CltTarget(
                n=int(n),
                gamma=g,
                covariance=V.tolist(),
                row_sums=V.sum(axis=1).tolist(),
                row_sum_se=np.sqrt((se**2).sum(axis=1)).tolist(),
                scaled_l1_moment=float(l1.mean()),
                scaled_l1_moment_se=float(l1.std(ddof=1) / math.sqrt(R)),
            )
        )
    mom = [b.scaled_l1_moment / a.scaled_l1_moment for a, b in zip(targets, targets[1:])]
    cov = [
        float(np.linalg.norm(b.covariance) / np.linalg.norm(a.covariance))
        for a, b in zip(targets, targets[1:])
    ]
    report = CltReport(
        condition=cond,
        gamma_star_inv=gstar,
        R=spec.R,
        replicas=int(replicas),
        targets=targets,
        moment_ratios=mom,
        covariance_ratios=cov,
        meta=_meta(chain, seed, schedule, n_targets=n_targets),
    )
    return report, batch


# -------------------------------------------------------------------- law


@dataclass
class LawPoint:
    n: int
    law: list
    distance: float
    se: float


@dataclass
class LawReport:
    replicas: int
    points: list
    non_increasing: bool
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)


def law_experiment(
    chain: AbsorbedChain,
    schedule: StepSchedule,
    n,
    replicas: int,
    seed: int,
    x0=None,
    X0="sample-from-x0",
    z: float = 3.0,
    workers: int | None = None,
    backend: str | None = None,
):
    """Distance between the empirical law of ``X_n`` over replicas and ``nu``.

    ``n`` may be one time or a list; the standard error is the binomial one,
    ``sqrt(sum_i p_i (1 - p_i) / replicas)``.  ``non_increasing`` allows each
    distance to exceed the previous one by ``z`` combined standard errors.
    Returns ``(report, batch)``.
    """
    spec = qsd_exact(chain)
    ns = sorted({int(k) for k in np.atleast_1d(n)})
    batch = run_sa_batch(
        chain, schedule, max(ns[-1], 1), x0, X0, seed, replicas,
        checkpoints=ns, workers=workers, backend=backend,
    )
    points = []
    for c, k in enumerate(batch.n):
        law = np.bincount(batch.current[:, c], minlength=chain.d) / replicas
        points.append(
            LawPoint(
                n=int(k),
                law=law.tolist(),
                distance=float(np.abs(law - spec.nu).sum()),
                se=float(math.sqrt((law * (1 - law)).sum() / replicas)),
            )
        )
    mono = all(
        b.distance <= a.distance + z * math.hypot(a.se, b.se) for a, b in zip(points, points[1:])
    )
    report = LawReport(int(replicas), points, bool(mono), _meta(chain, seed, schedule, n=ns))
    return report, batch


# --------------------------------------------------------- Fleming-Viot


@dataclass
class FvLevel:
    N: int
    median_sup_l1: float
    median_sup_l2: float
    halfwidth: float
    initial_deviation: float
    bound: float
    bound_c: float
    bound_vacuous: bool


@dataclass
class FvDeviationReport:
    T: float
    replicas: int
    levels: list
    fitted_exponent: float
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)


def fv_deviation_experiment(
    chain: AbsorbedChain,
    N_list,
    T: float,
    x0,
    replicas: int,
    seed: int,
    workers: int | None = None,
    backend: str | None = None,
):
    """Sup-distance between the interpolated particle path and the mean-field flow.

    The reference flow starts from ``x0`` itself, not from its lattice
    rounding.  The analytic bound is evaluated at ``eps`` equal to the
    observed median.  Returns ``(report, rows)`` where ``rows`` holds
    ``(N, replica, sup_l1)`` for every run.
    """
    x0 = np.asarray(x0, dtype=float)
    levels, rows = [], []
    for N in sorted(int(v) for v in N_list):
        _, paths, _ = run_fv_batch(chain, N, T, x0, seed, replicas, workers=workers, backend=backend)
        psi = psi_knots(chain, x0, 1.0 / N, paths.shape[1] - 1)
        diff = paths / N - psi
        sup1 = np.abs(diff).sum(axis=2).max(axis=1)
        sup2 = np.sqrt((diff**2).sum(axis=2)).max(axis=1)
        med = float(np.median(sup1))
        b = deviation_bound(chain, T, med, N)
        levels.append(
            FvLevel(
                N=N,
                median_sup_l1=med,
                median_sup_l2=float(np.median(sup2)),
                halfwidth=median_halfwidth(sup1),
                initial_deviation=float(np.abs(diff[:, 0]).sum(axis=1).max()),
                bound=b.bound,
                bound_c=b.c,
                bound_vacuous=b.vacuous,
            )
        )
        rows.extend((N, r, float(s)) for r, s in enumerate(sup1))
    Ns = np.array([lv.N for lv in levels], dtype=float)
    meds = np.array([lv.median_sup_l1 for lv in levels])
    expo = -_slope(np.log(Ns), np.log(meds)) if len(levels) > 1 else math.nan
    report = FvDeviationReport(float(T), int(replicas), levels, float(expo), _meta(chain, seed, N_list=[int(v) for v in Ns], x0=x0.tolist()))
    return report, rows


@dataclass
class FvEquilibriumReport:
    N: int
    window: tuple[int, int]
    averages: list
    distances: list
    median_distance: float
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)


def fv_equilibrium(
    chain: AbsorbedChain,
    N: int,
    window: tuple[int, int],
    replicas: int,
    seed: int,
    x0=None,
    workers: int | None = None,
    backend: str | None = None,
) -> FvEquilibriumReport:
    """Time average of ``counts / N`` over moves in ``(window[0], window[1]]``, against ``nu``."""
    spec = qsd_exact(chain)
    lo, hi = int(window[0]), int(window[1])
    _, _, sums = run_fv_batch(
        chain, N, 0.0, x0, seed, replicas, record=False, window=(lo, hi), steps=hi,
        workers=workers, backend=backend,
    )
    avg = sums / ((hi - lo) * N)
    dist = np.abs(avg - spec.nu).sum(axis=1)
    return FvEquilibriumReport(
        int(N), (lo, hi), avg.tolist(), dist.tolist(), float(np.median(dist)), _meta(chain, seed, N=int(N))
    )
