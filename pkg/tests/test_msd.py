import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bayesur import analytic
from bayesur import channels as ch
from bayesur import fock
from bayesur.estimation import Estimator, Povm
from bayesur.fock import FockSpace, TruncationError
from bayesur.msd import (
    GainSpec,
    GaussianPrior,
    MeasurementModel,
    msd_choi,
    msd_monte_carlo,
    msd_quadrature,
    mse_pair,
    prior_nodes,
)

D = 40


@pytest.fixture(scope="module")
def xp():
    return fock.quadratures(FockSpace(D))


@pytest.fixture(scope="module")
def identity_model(xp):
    return MeasurementModel(ch.identity_channel(D), *xp)


def _halfbs_model(eta, s, lam, d=D):
    sp = FockSpace(d, 2)
    x0, _ = fock.quadratures(sp, 0)
    _, p1 = fock.quadratures(sp, 1)
    c = analytic.halfbs_saturating_scale(eta, lam)
    return MeasurementModel(ch.half_bs_channel(d), c * np.sqrt(s) * x0, c / np.sqrt(s) * p1)


def test_prior_nodes_normalized_and_second_moment():
    alphas, w = prior_nodes(GaussianPrior(0.7))
    assert abs(w.sum() - 1) < 1e-12
    assert abs(w @ np.abs(alphas) ** 2 - 1 / 0.7) < 1e-10


def test_prior_rejects_uniform_and_low_order():
    with pytest.raises(ValueError):
        prior_nodes(GaussianPrior(0.0))
    with pytest.raises(ValueError):
        prior_nodes(GaussianPrior(1.0), order=6)
    with pytest.raises(ValueError):
        GaussianPrior(-1.0)


def test_gain_spec_parametrizations():
    g = GainSpec.from_gr(2.0, 0.3)
    assert np.isclose(g.G, 2.0) and np.isclose(g.R, 0.3)
    assert np.isclose(g.eta_x, 2.0 * np.exp(-0.6))
    assert np.isclose(g.s, np.exp(-0.6))
    assert np.allclose(g.tau(1.0), (g.eta_x / 2, g.eta_p / 2))
    h = GainSpec.from_gs(1.5, 2.0)
    assert np.isclose(h.eta_x, 3.0) and np.isclose(h.eta_p, 0.75)


@pytest.mark.parametrize("lam", [0.5, 1.0, 4.0])
def test_identity_quadrature(identity_model, lam):
    r = msd_quadrature(identity_model, GainSpec(1, 1), GaussianPrior(lam))
    assert np.allclose(r.pair, (0.5, 0.5), atol=1e-6)


def test_broad_prior_needs_larger_cutoff(identity_model):
    with pytest.raises(TruncationError):
        msd_quadrature(identity_model, GainSpec(1, 1), GaussianPrior(0.3))
    x, p = fock.quadratures(FockSpace(70))
    r = msd_quadrature(MeasurementModel(ch.identity_channel(70), x, p), GainSpec(1, 1), GaussianPrior(0.3))
    assert np.allclose(r.pair, (0.5, 0.5), atol=1e-6)


def test_halfbs_quadrature_values():
    r = msd_quadrature(_halfbs_model(1.0, 2.0, 1.0), GainSpec.from_gs(1.0, 2.0), GaussianPrior(1.0))
    assert np.allclose(r.pair, (1.0, 0.25), atol=1e-6)


def test_loss_quadrature(xp):
    model = MeasurementModel(ch.loss_channel(0.5, D), *xp)
    r = msd_quadrature(model, GainSpec(0.5, 0.5), GaussianPrior(1.0))
    assert np.allclose(r.pair, (0.5, 0.5), atol=1e-6)


def test_identity_monte_carlo(identity_model):
    r = msd_monte_carlo(identity_model, GainSpec(1, 1), GaussianPrior(1.0), 10_000, seed=5)
    assert abs(r.v_m_x - 0.5) <= 3 * r.stat_error_m + 1e-9
    assert r.extra["n_samples"] == 10_000


def test_halfbs_monte_carlo_within_three_sigma():
    model = _halfbs_model(1.0, 1.0, 1.0)
    r = msd_monte_carlo(model, GainSpec(1, 1), GaussianPrior(1.0), 10_000, seed=11)
    assert abs(r.v_m_x - 0.5) < 3 * r.stat_error_m
    assert abs(r.v_n_p - 0.5) < 3 * r.stat_error_n


def test_monte_carlo_single_point_at_vacuum(xp):
    chan = ch.amplifier_channel(1.5, 20, 40)
    xo, po = fock.quadratures(FockSpace(40))
    model = MeasurementModel(chan, xo, po)
    r = msd_monte_carlo(model, GainSpec(1.5, 1.5), GaussianPrior(1.0), alphas=[0.0])
    vac = np.zeros((20, 20))
    vac[0, 0] = 1.0
    out = chan.apply(vac)
    assert np.isclose(r.v_m_x, fock.expectation(xo @ xo, out).real, atol=1e-12)
    assert r.stat_error == 0.0


def test_monte_carlo_requires_seed(identity_model):
    with pytest.raises(ValueError):
        msd_monte_carlo(identity_model, GainSpec(1, 1), GaussianPrior(1.0))
    with pytest.raises(ValueError):
        msd_monte_carlo(identity_model, GainSpec(1, 1), GaussianPrior(1.0), n_samples=10, seed=1)


def test_monte_carlo_deterministic(identity_model):
    model = _halfbs_model(1.0, 1.0, 1.0, d=20)
    a = msd_monte_carlo(model, GainSpec(1, 1), GaussianPrior(1.0), 2000, seed=9)
    b = msd_monte_carlo(model, GainSpec(1, 1), GaussianPrior(1.0), 2000, seed=9)
    assert a == b


def test_choi_identity(identity_model):
    r = msd_choi(identity_model, GainSpec(1, 1), GaussianPrior(1.0))
    assert np.allclose(r.pair, (0.5, 0.5), atol=1e-5)
    assert r.method == "choi"


def test_choi_halfbs_s1():
    r = msd_choi(_halfbs_model(1.0, 1.0, 1.0), GainSpec(1, 1), GaussianPrior(1.0))
    assert np.allclose(r.pair, (0.5, 0.5), atol=1e-6)


@pytest.mark.parametrize("lam", [0.5, 2.0])
def test_zero_observables_both_routes(lam):
    chan = ch.loss_channel(0.7, D)
    zero = np.zeros((D, D))
    model = MeasurementModel(chan, zero, zero)
    gain = GainSpec(0.8, 1.3)
    q = msd_quadrature(model, gain, GaussianPrior(lam))
    c = msd_choi(model, gain, GaussianPrior(lam))
    tau_x, tau_p = gain.tau(lam)
    # tau (<x^2>_thermal + 1/2) with <x^2>_thermal = 1/lam + 1/2
    assert np.isclose(c.v_m_x, tau_x * (1 / lam + 1), atol=1e-6)
    assert np.isclose(q.v_m_x, 0.8 / lam, atol=1e-6)
    assert np.isclose(q.v_n_p, c.v_n_p, atol=1e-6)


def test_choi_momentum_sign_regression(xp):
    """The reference momentum enters with a plus sign; a minus sign breaks route agreement."""
    x, p = xp
    model = MeasurementModel(ch.identity_channel(D), x, p)
    gain, prior = GainSpec(1, 1), GaussianPrior(1.0)
    c = msd_choi(model, gain, prior)
    q = msd_quadrature(model, gain, prior)
    assert abs(c.v_n_p - q.v_n_p) < 1e-6
    # recompute with the opposite sign and check that it no longer agrees
    J = ch.choi_state(model.channel, 1.0)
    _, p_b = fock.quadratures(FockSpace(J.ref_dim))
    tau = 0.5
    e0, _, _, en, enn = model.moments
    wrong = (J.expect_heisenberg(enn) - 2 * np.sqrt(tau) * J.expect_heisenberg(en, p_b)
             + tau * J.expect_heisenberg(e0, p_b @ p_b)).real + tau / 2
    assert abs(wrong - q.v_n_p) > 0.5


@settings(max_examples=15, deadline=None)
@given(lam=st.floats(0.5, 3.0), eta_x=st.floats(0.1, 2.0), eta_p=st.floats(0.1, 2.0), T=st.floats(0.2, 1.0))
def test_routes_agree_and_match_closed_form_on_loss(lam, eta_x, eta_p, T):
    x, p = fock.quadratures(FockSpace(D))
    model = MeasurementModel(ch.loss_channel(T, D), x, p)
    gain, prior = GainSpec(eta_x, eta_p), GaussianPrior(lam)
    q = msd_quadrature(model, gain, prior)
    c = msd_choi(model, gain, prior)
    oracle = analytic.pair(analytic.loss(T), eta_x, eta_p, lam)
    assert np.allclose(q.pair, c.pair, atol=1e-4)
    assert np.allclose(q.pair, oracle, atol=1e-4)


def test_truncation_budget(xp):
    x, p = fock.quadratures(FockSpace(8))
    model = MeasurementModel(ch.identity_channel(8), x, p)
    with pytest.raises(TruncationError):
        msd_quadrature(model, GainSpec(1, 1), GaussianPrior(0.5))


def test_numeric_routes_reject_uniform_prior(identity_model):
    for fn in (msd_quadrature, msd_choi):
        with pytest.raises(ValueError):
            fn(identity_model, GainSpec(1, 1), GaussianPrior(0.0))


def test_observable_validation():
    with pytest.raises(ValueError):
        MeasurementModel(ch.identity_channel(4), np.triu(np.ones((4, 4))), np.eye(4))
    with pytest.raises(ValueError):
        MeasurementModel(ch.identity_channel(4), np.eye(3), np.eye(4))


def _trivial_estimator(d=30):
    return Estimator(Povm.from_elements(np.eye(d)[None]), [0.0], [0.0])


def test_mse_single_outcome_is_prior_variance():
    r = mse_pair(_trivial_estimator(), 1.0, 0.0, GaussianPrior(1.0))
    assert np.allclose(r.pair, (1.0, 1.0), atol=1e-9)
    r = mse_pair(_trivial_estimator(), 1.0, 0.0, GaussianPrior(2.5))
    assert np.allclose(r.pair, (1 / 2.5, 1 / 2.5), atol=1e-9)


def test_mse_rejects_incomplete_povm():
    est = _trivial_estimator(10)
    est.povm.factors = est.povm.factors * 0.9
    est.povm.trusted_levels = 0
    with pytest.raises(ValueError):
        mse_pair(est, 1.0, 0.0, GaussianPrior(1.0))


def test_result_dict_fields(identity_model):
    r = msd_quadrature(identity_model, GainSpec(1, 1), GaussianPrior(1.0))
    d = r.as_dict()
    assert d["method"] == "quadrature" and d["lambda"] == 1.0 and d["eta_x"] == 1.0
