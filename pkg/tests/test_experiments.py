import math

import numpy as np
import pytest

from qsdkit import __version__, errors
from qsdkit.experiments import (
    clt_experiment,
    fv_deviation_experiment,
    fv_equilibrium,
    law_experiment,
    median_halfwidth,
    rate_experiment,
)
from qsdkit.schedules import power


def test_median_halfwidth():
    assert median_halfwidth(np.arange(101.0)) == pytest.approx(10.0, abs=1.0)
    assert math.isnan(median_halfwidth([1.0]))


def test_rate_bounds_from_closed_forms(s2):
    rep, _ = rate_experiment(s2, power(1, 1, 0), 20_000, replicas=4, seed=1)
    assert rep.theoretical_bound == pytest.approx(-0.5, abs=1e-12)
    assert rep.theta_bound == 0.5
    assert rep.R == pytest.approx(2 / 3, abs=1e-12)
    assert rep.replicas == 4 and rep.no_rate_claim is False
    assert rep.meta["chain_sha256"] == s2.digest()
    assert rep.meta["version"] == __version__
    assert rep.meta["schedule"] == "power:A=1.0,alpha=1.0,beta=0.0"
    rep3, _ = rate_experiment(s2, power(3, 1, 0), 20_000, replicas=2, seed=1)
    assert rep3.theoretical_bound == pytest.approx(-1 / 6, abs=1e-12)


def test_no_rate_claim(s2):
    rep, _ = rate_experiment(s2, power(1, 0.7, 0), 5000, replicas=2, seed=3)
    assert rep.no_rate_claim
    assert rep.theoretical_bound is None and rep.within_bound is None
    assert rep.l_gamma == 0.0


def test_rate_reproducible(a2):
    a, _ = rate_experiment(a2, power(1, 1, 0), 10_000, replicas=3, seed=4)
    b, _ = rate_experiment(a2, power(1, 1, 0), 10_000, replicas=3, seed=4)
    assert a.to_json() == b.to_json()


def test_clt_condition_refused(s2):
    # gamma_*^-1 = 1/0.7 > 2R = 4/3
    with pytest.raises(errors.ConditionViolated):
        clt_experiment(s2, power(0.7, 1, 0), [100, 1000], replicas=4, seed=0)


def test_clt_row_sums_vanish(a2):
    rep, _ = clt_experiment(a2, power(1, 1, 0), [1000, 10_000], replicas=64, seed=2)
    assert rep.condition == "ii" and rep.gamma_star_inv == 1.0
    for t in rep.targets:
        assert np.abs(t.row_sums).max() <= 1e-9
        assert t.scaled_l1_moment > 0
    assert len(rep.moment_ratios) == 1


def test_law_initial_anchor(a2):
    # n = 0: X_0 drawn from the uniform x0, so E[law] = (1/2, 1/2)
    rep, _ = law_experiment(a2, power(1, 1, 0), [0], replicas=10_000, seed=5)
    p = rep.points[0]
    nu = np.array([2 - math.sqrt(2), math.sqrt(2) - 1])
    target = np.abs(np.array([0.5, 0.5]) - nu).sum()
    assert p.n == 0
    assert abs(p.distance - target) <= 4 * math.sqrt(2 * 0.25 / 10_000)


def test_law_report_fields(s2):
    rep, b = law_experiment(s2, power(1, 1, 0), [10, 100], replicas=500, seed=1)
    assert [p.n for p in rep.points] == [10, 100]
    assert all(abs(sum(p.law) - 1) < 1e-12 for p in rep.points)
    assert isinstance(rep.non_increasing, bool)
    assert b.current.shape == (500, 2)


def test_fv_deviation_small(s2):
    rep, rows = fv_deviation_experiment(s2, [50, 200], 1.0, [0.5, 0.5], replicas=4, seed=0)
    assert [lv.N for lv in rep.levels] == [50, 200]
    assert len(rows) == 8
    for lv in rep.levels:
        assert lv.initial_deviation <= s2.d / (2 * lv.N)
        assert lv.median_sup_l2 <= lv.median_sup_l1
        assert lv.bound_c > 0
    assert math.isfinite(rep.fitted_exponent)


def test_fv_equilibrium_small(s2):
    rep = fv_equilibrium(s2, 100, (1000, 20_000), replicas=2, seed=0)
    assert len(rep.averages) == 2
    for a in rep.averages:
        assert abs(sum(a) - 1) <= 1e-12
    assert rep.median_distance < 0.2
