import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from cranarq.errors import InvalidParameterError, NumericFailureError
from cranarq.fading import (bivariate_exp_density, build_fsmc, conditional_bin_masses,
                            exp_bin_edges, sample_gain_pair)


def test_edges_small_q():
    assert exp_bin_edges(1).tolist() == [0.0, math.inf]
    np.testing.assert_allclose(exp_bin_edges(2)[1], math.log(2), rtol=1e-15)
    np.testing.assert_allclose(exp_bin_edges(4)[1:4], [0.2876820725, 0.6931471806, 1.3862943611],
                               rtol=1e-9)


@pytest.mark.parametrize("q", [2, 4, 7, 16])
def test_edges_hold_equal_mass(q):
    e = exp_bin_edges(q)
    for lo, hi in zip(e[:-1], e[1:]):
        mass, _ = integrate.quad(lambda x: math.exp(-x), lo, hi)
        assert mass == pytest.approx(1 / q, abs=1e-12)


@pytest.mark.parametrize("q", [0, -1, 2.5])
def test_edges_reject_bad_q(q):
    with pytest.raises(InvalidParameterError):
        exp_bin_edges(q)


def test_density_closed_points():
    assert bivariate_exp_density(0.5, 0.7, 0.0) == pytest.approx(math.exp(-1.2), rel=1e-14)
    assert bivariate_exp_density(0.0, 0.0, 0.3) == pytest.approx(1 / 0.7, rel=1e-14)


@pytest.mark.parametrize("rho", [0.0, 0.3, 0.9])
def test_density_integrates_to_one_with_exponential_marginal(rho):
    total, _ = integrate.dblquad(lambda y, x: bivariate_exp_density(x, y, rho), 0, 40, 0, 40,
                                 epsabs=1e-10)
    assert total == pytest.approx(1.0, abs=1e-7)
    marg, _ = integrate.quad(lambda y: bivariate_exp_density(0.8, y, rho), 0, 60)
    assert marg == pytest.approx(math.exp(-0.8), rel=1e-8)


def test_density_no_overflow_for_large_gains():
    v = bivariate_exp_density(400.0, 400.0, 0.99)
    assert np.isfinite(v) and v > 0


@given(st.floats(0, 20), st.floats(0, 20), st.floats(0, 0.95))
def test_density_symmetric_nonnegative(x, y, rho):
    a = bivariate_exp_density(x, y, rho)
    assert a >= 0
    assert a == pytest.approx(bivariate_exp_density(y, x, rho), rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("rho", [-0.1, 1.0, float("nan")])
def test_density_rejects_rho(rho):
    with pytest.raises(InvalidParameterError):
        bivariate_exp_density(1.0, 1.0, rho)


@given(st.floats(0, 15), st.floats(0, 0.95))
def test_conditional_masses_against_quadrature(x, rho):
    e = exp_bin_edges(4)
    got = conditional_bin_masses(x, e, rho)
    assert got.sum() == pytest.approx(1.0, abs=1e-12)
    dens = lambda y: bivariate_exp_density(x, y, rho) / math.exp(-x)
    ref, _ = integrate.quad(dens, e[1], e[2], epsabs=1e-11)
    assert got[1] == pytest.approx(ref, abs=1e-8)


# q * joint bin mass, from 2-D adaptive quadrature of the density
DBLQUAD_Q4_RHO03 = {(0, 0): 0.3215008110953664, (0, 3): 0.15404105298207088,
                    (3, 3): 0.3985709160257407, (1, 2): 0.24900404908648452}


def test_fsmc_entries_match_2d_quadrature():
    P = build_fsmc(4, 0.3).transition
    for (i, j), ref in DBLQUAD_Q4_RHO03.items():
        assert P[i, j] == pytest.approx(ref, abs=1e-8)


@pytest.mark.parametrize("q", [1, 2, 5, 8])
@pytest.mark.parametrize("rho", [0.0, 0.3, 0.7, 0.95])
def test_fsmc_stochastic_symmetric_uniform(q, rho):
    P = build_fsmc(q, rho).transition
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(P >= 0)
    np.testing.assert_allclose(P, P.T, atol=1e-7)
    u = np.full(q, 1 / q)
    np.testing.assert_allclose(u @ P, u, atol=1e-7)


def test_fsmc_trivial_cases():
    assert build_fsmc(1, 0.3).transition.tolist() == [[1.0]]
    np.testing.assert_array_equal(build_fsmc(4, 0.0).transition, np.full((4, 4), 0.25))


def test_fsmc_correlation_concentrates_diagonal():
    d = [np.trace(build_fsmc(6, r).transition) for r in (0.0, 0.3, 0.7, 0.95)]
    assert all(a < b for a, b in zip(d, d[1:]))


def test_fsmc_bad_tol():
    with pytest.raises(InvalidParameterError):
        build_fsmc(4, 0.3, tol=0.0)


def test_fsmc_quadrature_failure_is_reported(monkeypatch):
    from scipy import integrate as integ

    real = integ.quad_vec

    def broken(*a, **k):
        val, err, info = real(*a, **k)
        return val, 1.0, info

    monkeypatch.setattr(integ, "quad_vec", broken)
    with pytest.raises(NumericFailureError, match="bin pair"):
        build_fsmc(4, 0.3)


def test_sampler_moments():
    rng = np.random.default_rng(1)
    a, b = sample_gain_pair(0.6, rng, size=400_000)
    assert a.mean() == pytest.approx(1.0, abs=0.01)
    assert b.mean() == pytest.approx(1.0, abs=0.01)
    assert np.corrcoef(a, b)[0, 1] == pytest.approx(0.6, abs=0.01)


def test_bin_index():
    cm = build_fsmc(8, 0.3)
    assert cm.bin_index(0.0) == 1
    assert cm.bin_index(1.01) == 6
    assert cm.bin_index(cm.edges[3]) == 4
    assert cm.bin_index(1e9) == 8
