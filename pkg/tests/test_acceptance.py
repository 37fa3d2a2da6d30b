"""End-to-end acceptance checks; each test records one PASS/FAIL line."""

import time
from fractions import Fraction

import numpy as np

from bayesur import analytic
from bayesur import bounds as bd
from bayesur import channels as ch
from bayesur import estimation as est
from bayesur import fock
from bayesur import scenarios as sc
from bayesur.fock import FockSpace
from bayesur.msd import GainSpec, GaussianPrior, MeasurementModel, msd_choi, msd_monte_carlo, msd_quadrature, mse_pair

D = 40
GRID = ch.PhaseSpaceGrid(0.15, 6.0)

# every BoundReport produced anywhere in this module, for the soundness gate
REPORTS: list[bd.BoundReport] = []


def _keep(*reports):
    REPORTS.extend(reports)
    return reports[0] if len(reports) == 1 else reports


def _halfbs_model(eta, s, lam, d=D):
    sp = FockSpace(d, 2)
    x0, _ = fock.quadratures(sp, 0)
    _, p1 = fock.quadratures(sp, 1)
    c = analytic.halfbs_saturating_scale(eta, lam)
    return MeasurementModel(ch.half_bs_channel(d), c * np.sqrt(s) * x0, c / np.sqrt(s) * p1)


# exact oracles, written independently of bayesur.bounds
def _b1(k):
    return (k + abs(k - 1)) ** 2 / 4


def _b3(k):
    return k * k


def _b2(k):
    return (2 * k + 1) ** 2 / 4


def test_ac1_unit_gain_constants(acceptance):
    start = time.perf_counter()
    got = (bd.bound_channel(1, 0), bd.bound_joint(1, 0), bd.bound_eb(1, 0))
    elapsed = time.perf_counter() - start
    k = Fraction(1)
    exact = (_b1(k), _b3(k), _b2(k))
    want = (Fraction(1, 4), Fraction(1), Fraction(9, 4))
    ok = exact == want and all(Fraction(g) == w for g, w in zip(got, want)) and elapsed < 1e-3
    assert acceptance("AC1", ok, f"B1, B3, B2 = {got} (exact {[str(v) for v in exact]}), {elapsed * 1e6:.0f} us")


def test_ac2_route_agreement(acceptance):
    start = time.perf_counter()
    x, p = fock.quadratures(FockSpace(D))
    xa, pa = fock.quadratures(FockSpace(80))
    worst, worst_case = 0.0, None
    for lam in (0.5, 1.0, 2.0):
        prior = GaussianPrior(lam)
        cases = [
            ("identity", MeasurementModel(ch.identity_channel(D), x, p), GainSpec(1, 1)),
            ("loss", MeasurementModel(ch.loss_channel(0.5, D), x, p), GainSpec(0.5, 0.5)),
            ("heterodyne-mp", MeasurementModel(ch.heterodyne_mp_channel(1 / (1 + lam), GRID, D), x, p),
             GainSpec(1, 1)),
            ("heterodyne-mp g=1", MeasurementModel(ch.heterodyne_mp_channel(1.0, GRID, D), x, p), GainSpec(1, 1)),
            ("half-bs", _halfbs_model(1.0, 2.0, lam), GainSpec.from_gs(1.0, 2.0)),
            ("amplifier", MeasurementModel(ch.amplifier_channel(1.5, D, 80), xa, pa), GainSpec(1.5, 1.5)),
        ]
        for name, model, gain in cases:
            q = msd_quadrature(model, gain, prior)
            c = msd_choi(model, gain, prior)
            diff = max(abs(q.v_m_x - c.v_m_x), abs(q.v_n_p - c.v_n_p))
            if diff >= worst:
                worst, worst_case = diff, f"{name} lam={lam}"
    elapsed = time.perf_counter() - start
    ok = worst < 1e-4 and elapsed < 120
    assert acceptance("AC2", ok, f"max |choi - quad| = {worst:.2e} ({worst_case}), {elapsed:.1f} s total")


def test_ac3_halfbs_saturation(acceptance):
    worst = 0.0
    all_saturated = True
    for lam in (0.5, 1.0):
        for eta in (0.5, 1.0):
            for s in (0.5, 1.0, 2.0):
                r = msd_quadrature(_halfbs_model(eta, s, lam), GainSpec.from_gs(eta, s), GaussianPrior(lam))
                k = eta / (1 + lam)
                worst = max(worst, abs(r.v_m_x - k * s), abs(r.v_n_p - k / s))
                rep = _keep(bd.sur2_check(r))
                all_saturated &= rep.saturated
    ok = worst < 1e-4 and all_saturated
    assert acceptance("AC3", ok, f"12 settings, max deviation from eta/(1+lam)(s, 1/s) = {worst:.2e}, "
                                 f"sur2 saturated everywhere: {all_saturated}")


def test_ac4_corollary(acceptance):
    het = est.scaled_heterodyne_estimator(1.0, 1.0, GRID, D)
    r = mse_pair(het, 1.0, 0.0, GaussianPrior(1.0))
    het_dev = max(abs(r.v_m_x - 0.5), abs(r.v_n_p - 0.5))
    _keep(bd.corollary_check(r), bd.corollary_check(r, rescaled=True))

    rng = np.random.default_rng(2024)
    violations, min_slack = 0, np.inf
    for i in range(1000):
        dim = int(rng.integers(1, 7))
        n = int(rng.integers(1, 7))
        lam = float(rng.uniform(0.5, 3.0))
        G = float(rng.uniform(0.1, 3.0))
        R = float(rng.uniform(-0.5, 0.5))
        prior = GaussianPrior(lam)
        povm = est.random_povm(n, dim, D, rng)
        if i % 2:
            x, p = est.bayes_values(povm, G, R, prior)
        else:
            x, p = rng.normal(scale=2.0, size=n), rng.normal(scale=2.0, size=n)
        res = mse_pair(est.Estimator(povm, x, p), G, R, prior)
        rep = _keep(bd.make_report("corollary", res.product, (G / (1 + lam)) ** 2, atol=1e-6))
        violations += rep.violated
        min_slack = min(min_slack, rep.slack / rep.rhs)
    ok = het_dev < 1e-3 and violations == 0
    assert acceptance("AC4", ok, f"scaled heterodyne off by {het_dev:.1e}; 1000 random POVMs, {violations} "
                                 f"violations, min relative slack {min_slack:.3f}")


def _pair_close(a, b):
    diff = max(abs(a.v_m_x - b.v_m_x), abs(a.v_n_p - b.v_n_p))
    return diff, diff < 1e-5 + a.trunc_error + b.trunc_error


def test_ac5_round_trip(acceptance):
    prior = GaussianPrior(1.0)
    rows = []

    # model -> estimator -> model on the joint-measurement models
    for eta, s in ((1.0, 1.0), (0.5, 2.0)):
        model = _halfbs_model(eta, s, 1.0)
        gain = GainSpec.from_gs(eta, s)
        m0 = msd_quadrature(model, gain, prior)
        e1 = est.model_to_estimator(model)
        m1 = mse_pair(e1, gain.G, gain.R, prior)
        m2 = msd_quadrature(est.estimator_to_model(e1), gain, prior)
        rows.append((f"half-bs s={s}", *_pair_close(m0, m1)))
        rows.append((f"half-bs s={s} back", *_pair_close(m0, m2)))

    # estimator -> model -> estimator
    rng = np.random.default_rng(5)
    estimators = {
        "scaled-heterodyne": est.scaled_heterodyne_estimator(1.0, 1.0, GRID, D),
        "single-outcome": est.Estimator(est.Povm.from_elements(np.eye(D)[None]), [0.0], [0.0]),
    }
    proj = np.zeros((D, D))
    proj[0, 0] = 1.0
    estimators["two-outcome"] = est.Estimator(est.Povm.from_elements(np.stack([proj, np.eye(D) - proj])),
                                              [1.0, -1.0], [0.5, 0.0])
    for i in range(3):
        povm = est.random_povm(4, 5, D, rng)
        estimators[f"random-{i}"] = est.Estimator(povm, rng.normal(size=4), rng.normal(size=4))
    for name, e in estimators.items():
        e0 = mse_pair(e, 1.0, 0.0, prior)
        model = est.estimator_to_model(e)
        m1 = msd_quadrature(model, GainSpec(1, 1), prior)
        e2 = mse_pair(est.model_to_estimator(model), 1.0, 0.0, prior)
        rows.append((name, *_pair_close(e0, m1)))
        rows.append((f"{name} back", *_pair_close(e0, e2)))

    worst = max(rows, key=lambda r: r[1])
    ok = all(r[2] for r in rows)
    assert acceptance("AC5", ok, f"{len(rows)} round trips over commuting-readout models and estimators, "
                                 f"worst {worst[1]:.2e} ({worst[0]})")


def test_ac6_hierarchy_grid(acceptance):
    Gs = [Fraction(4 * i, 50) for i in range(1, 51)]
    lams = [Fraction(4 * j, 49) for j in range(50)]
    broken = []
    float_mismatch = 0
    for G in Gs:
        for lam in lams:
            k = G / (1 + lam)
            b1, b3, b2 = _b1(k), _b3(k), _b2(k)
            if not (b1 < b3 < b2):
                broken.append((G, lam, k))
            got = (bd.bound_channel(float(G), float(lam)), bd.bound_joint(float(G), float(lam)),
                   bd.bound_eb(float(G), float(lam)))
            float_mismatch += any(abs(g - float(v)) > 1e-12 for g, v in zip(got, (b1, b3, b2)))
    in_region = all(k <= Fraction(1, 2) for _, _, k in broken)
    ex = broken[0] if broken else None
    detail = (f"{len(broken)}/2500 grid points have B1 >= B3, all with G/(1+lam) <= 1/2: {in_region}; "
              f"first at G={float(ex[0])}, lam={float(ex[1]):.4f}" if broken else "strict everywhere")
    assert acceptance("AC6", not broken and float_mismatch == 0, detail + f"; float/exact mismatches {float_mismatch}")


def test_ac7_tangency(acceptance):
    worst_closed = 0.0
    for s in (0.25, 0.5, 1.0, 2.0, 4.0):
        lhs = bd.tangent_lhs(s, 1 / s, eta=1.0, s=s, lam=0.0, t=1 / s)
        worst_closed = max(worst_closed, abs(lhs - 1.0))
    worst_numeric = 0.0
    lam = 0.5
    for s in (0.5, 1.0, 2.0):
        r = msd_quadrature(_halfbs_model(1.0, s, lam), GainSpec.from_gs(1.0, s), GaussianPrior(lam))
        rep = _keep(bd.tangent_check(r, t=1 / s))
        worst_numeric = max(worst_numeric, abs(rep.lhs / rep.rhs - 1.0))
    ok = worst_closed < 1e-9 and worst_numeric < 1e-3
    assert acceptance("AC7", ok, f"closed-form |LHS - 1| <= {worst_closed:.1e}; numeric at lam=0.5 "
                                 f"relative {worst_numeric:.1e}")


def test_ac8_monte_carlo(acceptance):
    x, p = fock.quadratures(FockSpace(D))
    model = MeasurementModel(ch.identity_channel(D), x, p)
    inside, worst = 0, 0.0
    for seed in range(100):
        r = msd_monte_carlo(model, GainSpec(1, 1), GaussianPrior(1.0), 10_000, seed=seed)
        _keep(bd.channel_check(r))
        dev = abs(r.v_m_x - 0.5)
        worst = max(worst, dev)
        # identity readout has zero per-sample spread; 1e-9 absorbs rounding
        inside += dev <= 3 * r.stat_error_m + 1e-9
    assert acceptance("AC8", inside >= 97, f"{inside}/100 seeds within 3 stat_error of 0.5 "
                                           f"(max deviation {worst:.1e})")


def test_ac9_no_false_violations(acceptance):
    rows = []
    for name in sc.builtin_names():
        rows += sc.evaluate(sc.load_config(name))["checks"]
    flagged = [r for r in rows if r["violated"]] + [r for r in REPORTS if r.violated]
    detail = f"{len(rows)} scenario checks and {len(REPORTS)} suite reports, {len(flagged)} violated"
    assert acceptance("AC9", not flagged, detail)
