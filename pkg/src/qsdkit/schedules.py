"""Step-size schedules for the reinforced walk.

Indexing convention: the update producing ``x_n`` from ``x_{n-1}`` uses
``gamma(n)``, ``n >= 1``, and ``tau_n = gamma(1) + ... + gamma(n)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConditionViolated, ScheduleError, UnknownAsymptotics, UnsupportedWeights

CAP_HI = 1.0 - 1e-9
KINDS = ("power", "harmonic-shift", "weights", "custom")


@dataclass(frozen=True, eq=False)
class StepSchedule:
    """A family of gains ``gamma_n`` clamped into ``(0, 1)``.

    Build with :func:`power`, :func:`harmonic_shift`, :func:`weights_to_schedule`,
    :func:`custom` or :func:`parse_schedule`.
    """

    kind: str
    A: float = 1.0
    alpha: float = 1.0
    beta: float = 0.0
    a: float = 0.0
    func: Callable[[int], float] | None = None
    _cum: list = field(default_factory=lambda: [np.zeros(0)], repr=False, compare=False)

    # ------------------------------------------------------------------ values
    def _raw(self, n: np.ndarray) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        if self.kind == "power":
            with np.errstate(divide="ignore"):
                logs = np.log(n)
                val = self.A * n ** (-self.alpha)
                if self.beta:
                    val = val * np.where(logs > 0, logs, 0.0) ** (-self.beta)
            return val
        if self.kind == "harmonic-shift":
            return 1.0 / (n + 2.0)
        if self.kind == "weights":
            idx = n.astype(np.int64)
            cum = self._weight_cumsum(int(idx.max()) if idx.size else 0)
            return self._omega(idx) / cum[idx]
        return np.array([float(self.func(int(k))) for k in np.ravel(n)]).reshape(n.shape)

    def _omega(self, k: np.ndarray) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        w = np.empty_like(k)
        pos = k > 0
        w[pos] = k[pos] ** self.a
        # k = 0: 0**a for a >= 0, and a unit weight when a < 0
        w[~pos] = 0.0 ** self.a if self.a >= 0 else 1.0
        return w

    def _weight_cumsum(self, n_max: int) -> np.ndarray:
        cum = self._cum[0]
        if cum.size <= n_max:
            size = max(n_max + 1, 2 * cum.size, 1024)
            cum = np.cumsum(self._omega(np.arange(size)))
            self._cum[0] = cum
        return cum

    def gamma(self, n: int) -> float:
        """Gain used by step ``n`` (``n >= 1``; ``n = 0`` allowed for harmonic-shift)."""
        lo = 0 if self.kind == "harmonic-shift" else 1
        if n < lo:
            raise ValueError(f"gamma index must be >= {lo}, got {n}")
        return float(self.gammas(n, 1)[0])

    def gammas(self, start: int, count: int) -> np.ndarray:
        """Clamped gains for steps ``start, ..., start + count - 1``."""
        raw = self._raw(np.arange(start, start + count))
        return np.clip(raw, np.finfo(float).tiny, CAP_HI)

    # ------------------------------------------------------------- properties
    @property
    def parametric(self) -> bool:
        return self.kind != "custom"

    def clamp_horizon(self, search: int = 1 << 40) -> int:
        """First ``n`` from which no clamping happens; gains strictly decrease from there."""
        if self.kind == "custom":
            raise UnknownAsymptotics("custom schedules have no known clamp horizon")
        if self._raw(np.array([1.0]))[0] < CAP_HI:
            return 1
        lo, hi = 1, 2
        while self._raw(np.array([float(hi)]))[0] >= CAP_HI:
            lo, hi = hi, 2 * hi
            if hi > search:
                raise ScheduleError("gains never fall below 1")
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self._raw(np.array([float(mid)]))[0] >= CAP_HI:
                lo = mid
            else:
                hi = mid
        return hi

    def harmonic_constant(self) -> float | None:
        """``A`` when the gains behave like ``A / n``, otherwise ``None``."""
        if self.kind == "power" and self.alpha == 1 and self.beta == 0:
            return self.A
        if self.kind == "harmonic-shift":
            return 1.0
        if self.kind == "weights":
            return 1.0 + self.a
        return None

    def descriptor(self) -> str:
        if self.kind == "power":
            return f"power:A={self.A!r},alpha={self.alpha!r},beta={self.beta!r}"
        if self.kind == "weights":
            return f"weights:a={self.a!r}"
        if self.kind == "harmonic-shift":
            return "harmonic-shift"
        return f"custom:{getattr(self.func, '__name__', 'callable')}"


def power(A: float = 1.0, alpha: float = 1.0, beta: float = 0.0) -> StepSchedule:
    """``gamma_n = A n^-alpha ln(n)^-beta``.

    Rejects parameters for which the gains are not summable to infinity or
    ``gamma_n ln n`` does not vanish.
    """
    if not A > 0:
        raise ScheduleError(f"A must be > 0, got {A}")
    if not 0 < alpha <= 1:
        raise ScheduleError(f"alpha must lie in (0, 1], got {alpha}")
    if beta < 0:
        raise ScheduleError(f"beta must be >= 0, got {beta}")
    if alpha == 1 and beta > 1:
        raise ScheduleError("alpha = 1 requires beta <= 1 for the gains to sum to infinity")
    return StepSchedule("power", A=float(A), alpha=float(alpha), beta=float(beta))


def harmonic_shift() -> StepSchedule:
    return StepSchedule("harmonic-shift")


def custom(func: Callable[[int], float]) -> StepSchedule:
    return StepSchedule("custom", func=func)


def weights_to_schedule(a: float) -> StepSchedule:
    """Gains reproducing the weighted average with weights ``omega_k = k^a``.

    ``gamma_n = omega_n / (omega_0 + ... + omega_n)``; asymptotically
    ``(1 + a) / n``.
    """
    if not (isinstance(a, (int, float)) and math.isfinite(a) and a > -1):
        raise UnsupportedWeights(f"only power weights k^a with a > -1 are supported, got {a!r}")
    return StepSchedule("weights", a=float(a))


def gamma(schedule: StepSchedule, n: int) -> float:
    return schedule.gamma(n)


def l_gamma(schedule: StepSchedule) -> float:
    """``limsup ln(gamma_n) / tau_n`` in closed form (0, a negative number or -inf)."""
    if schedule.kind == "power":
        if schedule.alpha < 1:
            return 0.0
        return -1.0 / schedule.A if schedule.beta == 0 else -math.inf
    if schedule.kind == "harmonic-shift":
        return -1.0
    if schedule.kind == "weights":
        return -1.0 / (1.0 + schedule.a)
    raise UnknownAsymptotics("l(gamma) is only known in closed form for parametric schedules")


def asymptotic_tag(schedule: StepSchedule) -> str:
    c = schedule.harmonic_constant()
    if c is not None:
        return f"{c!r}/n"
    if schedule.kind == "power":
        return f"{schedule.A!r}*n^-{schedule.alpha!r}*ln(n)^-{schedule.beta!r}"
    return "unknown"


def clt_condition(schedule: StepSchedule, R: float) -> tuple[str, float]:
    """Which central-limit hypothesis the schedule meets.

    Returns ``("i", 0.0)`` or ``("ii", g)`` where ``g`` is the limit of
    ``ln(gamma_{k-1}/gamma_k) / gamma_k``.

    Raises
    ------
    ConditionViolated
        Neither hypothesis holds, including ``g >= 2R``.
    """
    if schedule.kind == "custom":
        raise UnknownAsymptotics("cannot check the CLT hypotheses for a custom schedule")
    if schedule.kind == "power":
        al, be = schedule.alpha, schedule.beta
        if not (al > 0.5 or (al == 0.5 and be > 0.5)):
            raise ConditionViolated("sum of squared gains diverges (need alpha > 1/2)")
        if al < 1:
            return "i", 0.0
        if be > 0:
            raise ConditionViolated("ln(gamma_{k-1}/gamma_k)/gamma_k diverges for alpha = 1, beta > 0")
    g = 1.0 / schedule.harmonic_constant()
    if not g < 2 * R:
        raise ConditionViolated(f"condition ii requires gamma_*^-1 = {g:.6g} < 2R = {2 * R:.6g}")
    return "ii", g


def parse_schedule(text: str) -> StepSchedule:
    """Parse ``"power:A=1,alpha=1,beta=0"``, ``"harmonic-shift"`` or ``"weights:a=0.5"``."""
    kind, _, rest = text.strip().partition(":")
    params = {}
    if rest:
        for item in rest.split(","):
            key, eq, val = item.partition("=")
            if not eq:
                raise ScheduleError(f"malformed schedule parameter {item!r}")
            params[key.strip()] = float(val)
    if kind == "power":
        unknown = set(params) - {"A", "alpha", "beta"}
        if unknown:
            raise ScheduleError(f"unknown power parameters {sorted(unknown)}")
        return power(**params)
    if kind == "harmonic-shift":
        if params:
            raise ScheduleError("harmonic-shift takes no parameters")
        return harmonic_shift()
    if kind == "weights":
        if set(params) != {"a"}:
            raise ScheduleError("weights schedule needs exactly the parameter a")
        return weights_to_schedule(params["a"])
    raise ScheduleError(f"unknown schedule family {kind!r}; expected one of {KINDS[:3]}")
