import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qsdkit import errors
from qsdkit.chain import drift, random_chain, random_simplex, validate_chain
from qsdkit.spectral import (
    decay_slope,
    dh_tangent_eigs,
    expm,
    flow_phi2,
    flow_phi_ode,
    flow_psi,
    jacobian_dh,
    phi_path,
    psi_knots,
    qsd_exact,
    rate_constant,
    time_reparam,
)

from conftest import chains

SQ2 = math.sqrt(2.0)


def test_s2_oracle(s2):
    s = qsd_exact(s2)
    np.testing.assert_allclose(s.nu, [0.5, 0.5], atol=1e-10)
    assert abs(s.lam - 0.5) <= 1e-10
    assert abs(s.R - 2 / 3) <= 1e-10
    np.testing.assert_allclose(s.eigenvalues, [0.5, -0.5], atol=1e-12)
    assert np.all(s.dh_nu_eigs.real <= -2 / 3 + 1e-8)


def test_a2_oracle(a2):
    # lam^2 = 1/2; nu proportional to (1, 1/(2 lam)) normalised
    s = qsd_exact(a2)
    lam = 1 / SQ2
    nu = np.array([1.0, 0.5 / lam])
    nu /= nu.sum()
    assert abs(s.lam - lam) <= 1e-8
    np.testing.assert_allclose(s.nu, nu, atol=1e-8)
    np.testing.assert_allclose(s.nu, [2 - SQ2, SQ2 - 1], atol=1e-12)
    assert abs(s.R - (1 - (1 - lam) / (1 + lam))) <= 1e-8
    assert abs(s.R - 0.8284271247461900) <= 1e-8


@pytest.mark.parametrize("chain", chains(40, seed=21))
def test_summary_invariants(chain):
    s = qsd_exact(chain, tol=1e-12)
    assert s.residual <= 1e-12
    assert np.abs(s.nu @ chain.p_hat - s.lam * s.nu).sum() <= 1e-10
    assert abs(s.lam - (1 - s.nu @ chain.p0)) <= 1e-10
    assert np.all(s.nu > 0)
    assert abs(s.nu.sum() - 1) <= 1e-12
    assert 0 < s.lam < 1
    # the Perron root dominates the spectrum in modulus
    assert np.all(np.abs(s.eigenvalues[1:]) <= s.lam + 1e-9)
    assert np.all(s.dh_nu_eigs.real <= -s.R + 1e-8)
    assert np.abs(drift(chain, s.nu)).sum() <= 1e-9


def test_rate_constant_two_routes(a2):
    s = qsd_exact(a2)
    # 2x2 closed form: other eigenvalue is -lam
    assert abs(rate_constant(s.lam, [-s.lam]) - s.R) <= 1e-10
    assert -np.max(s.dh_nu_eigs.real) >= s.R - 1e-8


def test_tol_bounds(s2):
    with pytest.raises(ValueError):
        qsd_exact(s2, tol=1e-5)
    with pytest.raises(ValueError):
        qsd_exact(s2, tol=0.0)


def test_convergence_failure_reports_residual():
    chain = random_chain(np.random.default_rng(9), 6)
    with pytest.raises(errors.ConvergenceFailure) as info:
        qsd_exact(chain, tol=1e-300, max_iter=5)
    assert info.value.residual > 0


def test_periodic_chain_accepted():
    # period-3 interior cycle; spectrum has a complex pair on the Perron circle
    c = validate_chain([[0, 0.9, 0], [0, 0, 0.9], [0.9, 0, 0]], [0.1, 0.1, 0.1])
    s = qsd_exact(c)
    np.testing.assert_allclose(s.nu, [1 / 3] * 3, atol=1e-10)
    assert abs(s.lam - 0.9) <= 1e-10
    assert np.allclose(np.abs(s.eigenvalues), 0.9)
    # Re 1/(1 - 0.9 w) with w a cube root of unity
    w = 0.9 * np.exp(2j * np.pi / 3)
    assert abs(s.R - (1 - 0.1 * (1 / (1 - w)).real)) <= 1e-10


def test_repeated_subdominant_eigenvalue_warns():
    c = validate_chain([[0, 0.3, 0.3], [0.3, 0, 0.3], [0.3, 0.3, 0]], [0.4, 0.4, 0.4])
    with pytest.warns(RuntimeWarning, match="repeated"):
        qsd_exact(c)


# ------------------------------------------------------------------ Jacobian


@pytest.mark.parametrize("chain", chains(50, seed=31))
def test_jacobian_matches_finite_differences(chain):
    x = random_simplex(np.random.default_rng(chain.d * 7 + 1), chain.d)
    x = 0.9 * x + 0.1 / chain.d
    j = jacobian_dh(chain, x)
    a = chain.green

    def h(y):
        ya = y @ a
        return ya / ya.sum() - y

    step = 1e-6
    fd = np.empty_like(j)
    for k in range(chain.d):
        e = np.zeros(chain.d)
        e[k] = step
        fd[:, k] = (h(x + e) - h(x - e)) / (2 * step)
    np.testing.assert_allclose(j, fd, atol=1e-5)


def test_dh_tangent_eigs_s2(s2):
    # on S2 the tangent space is 1-d: h is linear there with slope -2/3
    ev = dh_tangent_eigs(s2, [0.5, 0.5])
    np.testing.assert_allclose(ev, [-2 / 3], atol=1e-12)


# --------------------------------------------------------------------- flows


def test_phi_fixed_point(s2):
    np.testing.assert_allclose(flow_phi_ode(s2, [0.5, 0.5], 7.0), [0.5, 0.5], atol=1e-10)


def test_phi_attracts(s2):
    np.testing.assert_allclose(flow_phi_ode(s2, [1, 0], 30.0), [0.5, 0.5], atol=1e-6)


def test_phi_s2_closed_form(s2):
    # along the tangent line h(x) = -(2/3)(x - nu) exactly
    t = 2.0
    want = 0.5 + 0.5 * math.exp(-2 * t / 3)
    np.testing.assert_allclose(flow_phi_ode(s2, [1, 0], t), [want, 1 - want], atol=1e-9)


def test_phi_step_limit(s2):
    with pytest.raises(errors.StepTooLarge):
        flow_phi_ode(s2, [1, 0], 1.0, dt=0.2)


def test_phi2_identity_at_zero(s2):
    np.testing.assert_array_equal(flow_phi2(s2, [1, 0], 0.0), [1, 0])


def test_time_reparam_at_nu(s2):
    for t in (0.5, 1.0, 3.7):
        assert abs(time_reparam(s2, [0.5, 0.5], t) - 2 * t) <= 1e-12


@pytest.mark.parametrize("chain", chains(20, seed=41, d_max=6))
def test_orbit_equivalence(chain):
    rng = np.random.default_rng(chain.d + 100)
    lam = qsd_exact(chain).lam
    ts = [1.0, 2.0, 5.0, 10.0]
    for _ in range(5):
        x0 = random_simplex(rng, chain.d)
        s = [time_reparam(chain, x0, t, lam=lam) for t in ts]
        ode = phi_path(chain, x0, s)
        for t, y in zip(ts, ode):
            assert np.abs(y - flow_phi2(chain, x0, t, lam=lam)).sum() <= 1e-5


def test_decay_slope_s2(s2):
    # slope -R = -2/3 on S2
    assert decay_slope(s2, [1, 0]) <= -0.64


def test_psi_examples(s2):
    np.testing.assert_array_equal(flow_psi(s2, [1, 0], 0.0), [1, 0])
    np.testing.assert_allclose(flow_psi(s2, [1, 0], 20.0), [0.5, 0.5], atol=1e-6)
    np.testing.assert_allclose(flow_psi(s2, [0.5, 0.5], 4.0), [0.5, 0.5], atol=1e-12)


@pytest.mark.parametrize("chain", chains(5, seed=51))
def test_psi_knots_match_flow(chain):
    x0 = random_simplex(np.random.default_rng(3), chain.d)
    knots = psi_knots(chain, x0, 0.01, 300)
    for i in (0, 17, 300):
        np.testing.assert_allclose(knots[i], flow_psi(chain, x0, i * 0.01), atol=1e-11)


def test_psi_semigroup(a2):
    x0 = np.array([0.2, 0.8])
    direct = flow_psi(a2, x0, 3.0)
    composed = flow_psi(a2, flow_psi(a2, x0, 1.25), 1.75)
    np.testing.assert_allclose(direct, composed, atol=1e-12)


# ------------------------------------------------------- matrix exponential


def _expm_series(m, terms=80):
    out = np.eye(len(m))
    term = np.eye(len(m))
    for k in range(1, terms):
        term = term @ m / k
        out = out + term
    return out


@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_expm_against_series(seed, d):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(d, d))
    m *= rng.uniform(0.1, 2.0) / np.linalg.norm(m, 2)
    np.testing.assert_allclose(expm(m), _expm_series(m), atol=1e-10)
