import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
from oracles import collider_conditional, frailty_hr_by_integration, survivor_frailty_mean_by_integration
from scipy.optimize import isotonic_regression

from causalab.dynamics import (
    FrailtyParams,
    SurvivorAnalysis,
    collider_report,
    cross_section_regression,
    gamma_frailty_marginal_hr,
    hr_curve,
    increment_regression,
    late_entry,
    marginal_hazard,
    naive_hr,
    simulate_frailty_cohort,
    simulate_process_system,
    step_halving_check,
    survivor_bias_report,
    survivor_mean_frailty,
    window_hazard,
)
from causalab.scenarios import builtin_spec
from causalab.specio import SpecError, parse_system

SHARED = FrailtyParams(lambda0=1.0, r=2.0, delta0=1.0, delta1=1.0, horizon=3.0)
CROSSING = FrailtyParams(lambda0=1.0, r=2.0, delta0=0.0, delta1=2.0, horizon=2.0)
NONE = FrailtyParams(lambda0=1.0, r=2.0, delta0=0.0, delta1=0.0, horizon=2.0)


@pytest.fixture(scope="module")
def shared_cohort():
    return simulate_frailty_cohort(SHARED, 500_000, 11)


@pytest.fixture(scope="module")
def crossing_cohort():
    return simulate_frailty_cohort(CROSSING, 500_000, 12)


# ---------------------------------------------------------------- closed form

@pytest.mark.parametrize("params", [
    SHARED, CROSSING,
    FrailtyParams(lambda0=0.3, r=1.7, delta0=0.4, delta1=2.5),
    FrailtyParams(lambda0=2.0, r=0.5, delta0=1.5, delta1=0.0),
])
@pytest.mark.parametrize("t", [0.0, 0.25, 0.5, 1.0, 2.0, 7.5])
def test_closed_form_matches_integration(params, t):
    ref = frailty_hr_by_integration(params.lambda0, params.r, params.delta0, params.delta1, t)
    assert abs(gamma_frailty_marginal_hr(params, t) - ref) < 1e-8


def test_shared_frailty_values():
    assert gamma_frailty_marginal_hr(SHARED, 1.0) == pytest.approx(4 / 3, abs=1e-15)
    assert gamma_frailty_marginal_hr(SHARED, 0.0) == 2.0
    assert abs(gamma_frailty_marginal_hr(SHARED, 1e9) - 1) < 1e-8
    t = np.linspace(0, 50, 2001)
    hr = gamma_frailty_marginal_hr(SHARED, t)
    assert np.all(np.diff(hr) < 0) and np.all(hr > 1)


def test_no_frailty_keeps_proportional_hazards():
    assert np.all(gamma_frailty_marginal_hr(NONE, np.linspace(0, 10, 11)) == 2.0)


def test_crossing_closed_form():
    t = np.linspace(0, 5, 101)
    assert np.allclose(gamma_frailty_marginal_hr(CROSSING, t), 2 / (1 + 4 * t), atol=1e-15)
    assert gamma_frailty_marginal_hr(CROSSING, 0.25) == pytest.approx(1.0, abs=1e-15)
    assert gamma_frailty_marginal_hr(CROSSING, 1.0) == pytest.approx(0.4, abs=1e-15)


def test_survivor_frailty_closed_form():
    for t in (0.0, 0.5, 2.0):
        assert survivor_mean_frailty(CROSSING, 1, t) == pytest.approx(
            survivor_frailty_mean_by_integration(2.0, 2.0, t), abs=1e-9)
    assert marginal_hazard(CROSSING, 0, 1.3) == 1.0


def test_invalid_params():
    with pytest.raises(ValueError):
        FrailtyParams(delta0=-1)
    with pytest.raises(ValueError):
        FrailtyParams(lambda0=0)


# ---------------------------------------------------------------- cohorts

def test_exponential_mean_without_frailty():
    p = FrailtyParams(lambda0=1.5, r=2.0, delta0=0.0, delta1=0.0, horizon=60.0)
    d = simulate_frailty_cohort(p, 100_000, 3)
    t0 = d.time[d.group == 0]
    assert d.event.all()
    assert abs(t0.mean() - 1 / 1.5) < 3 * (1 / 1.5) / math.sqrt(len(t0))


def test_cohort_reproducible_and_worker_independent():
    a = simulate_frailty_cohort(SHARED, 20_000, 5)
    b = simulate_frailty_cohort(SHARED, 20_000, 5, workers=3)
    for f in ("group", "time", "event", "frailty"):
        assert getattr(a, f).tobytes() == getattr(b, f).tobytes()


def test_shared_frailty_hr_at_one(shared_cohort):
    # narrow window around t = 1, compared with the exact window expectation
    c = hr_curve(shared_cohort, [0.9, 1.1], SHARED)
    expected = window_hazard(SHARED, 1, 0.9, 1.1) / window_hazard(SHARED, 0, 0.9, 1.1)
    assert abs(expected - 4 / 3) < 2e-3
    assert abs(c.hr[0] - expected) < 2 * c.se[0]
    assert abs(c.hr[0] - 4 / 3) < 2 * c.se[0]


def test_window_curve_monotone_toward_one(shared_cohort):
    grid = np.round(np.arange(0.0, 3.0001, 0.25), 12)
    c = hr_curve(shared_cohort, grid, SHARED)
    iso = isotonic_regression(c.hr, weights=1 / c.se**2, increasing=False).x
    assert np.all(np.abs(c.hr - iso) <= 2 * c.se)
    assert iso[0] > iso[-1] > 1
    assert c.hr[-1] < 1.25


def test_narrow_windows_match_midpoints(shared_cohort):
    mids = np.array([0.5, 1.0, 1.5, 2.0, 2.5])
    for m in mids:
        c = hr_curve(shared_cohort, [m - 0.05, m + 0.05], SHARED)
        assert abs(c.hr[0] - c.closed_form[0]) < 2 * c.se[0], m


def test_no_frailty_windows_hold_r():
    d = simulate_frailty_cohort(NONE, 200_000, 13)
    c = hr_curve(d, [0, 0.25, 0.5, 1.0, 2.0])
    assert np.all(np.abs(c.hr - 2.0) < 3 * c.se)


def test_all_censored_windows_flagged():
    p = FrailtyParams(horizon=1e-9)
    d = simulate_frailty_cohort(p, 50, 1)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        c = hr_curve(d, [0.0, 5e-10, 1e-9])
    assert c.flagged.all() and np.isnan(c.hr).all()


def test_crossing_windows_below_one(crossing_cohort):
    grid = np.round(np.arange(0.0, 2.0001, 0.25), 12)
    c = hr_curve(crossing_cohort, grid, CROSSING)
    late = c.t_low >= 0.25
    assert np.all(c.hr[late] * np.exp(2 * c.se_log_hr[late]) < 1)
    assert c.hr[0] > 1
    w = hr_curve(crossing_cohort, [0.5, 1.0])
    assert w.hr[0] < 1


def test_late_entry_reverses_effect(crossing_cohort):
    late = late_entry(crossing_cohort, 0.5)
    hr, lo, hi = naive_hr(late, 0.5, CROSSING.horizon)
    assert hi < 1 < CROSSING.r
    assert np.all(late.entry == 0.5) and np.all(late.time > 0.5)


def test_late_entry_at_zero_is_identity(crossing_cohort):
    same = late_entry(crossing_cohort, 0.0)
    assert np.array_equal(same.time, crossing_cohort.time)
    assert np.array_equal(same.entry, crossing_cohort.entry)
    with pytest.raises(ValueError):
        late_entry(crossing_cohort, 5.0)


@pytest.mark.parametrize("t0", [0.25, 0.5, 1.0])
def test_survivors_are_less_frail(crossing_cohort, t0):
    d = crossing_cohort
    exposed = d.group == 1
    alive = exposed & (d.time > t0)
    z = d.frailty[alive]
    oracle = survivor_frailty_mean_by_integration(2.0, 2.0, t0)
    assert abs(z.mean() - oracle) < 3 * z.std() / math.sqrt(len(z))
    assert z.mean() < d.frailty[exposed].mean()


# ---------------------------------------------------------------- collider

def test_collider_enumeration_exact():
    rep = collider_report(builtin_spec("collider.sys"), "Y", 1.0, ("V", "G"))
    assert rep.v_given_g_collider[1.0][1.0] == Fraction(9, 14)
    assert rep.v_given_g_collider[0.0][1.0] == Fraction(5, 6)
    oracle = collider_conditional()
    assert rep.v_given_g_collider[1.0][1.0] == oracle[1]
    assert rep.v_given_g_collider[0.0][1.0] == oracle[0]
    assert rep.v_given_g[1.0][1.0] == rep.v_given_g[0.0][1.0] == Fraction(1, 2)
    assert rep.marginally_independent and not rep.conditionally_independent


def test_collider_report_is_reproducible():
    a = collider_report(builtin_spec("collider.sys"), "Y", 1.0, ("V", "G"))
    b = collider_report(builtin_spec("collider.sys"), "Y", 1.0, ("V", "G"))
    assert a.conditional == b.conditional


def test_no_edges_into_collider_keeps_independence():
    s = parse_system('system "n"\nnode V kind=exposure dist=bernoulli(p=0.5)\n'
                     'node G kind=covariate dist=bernoulli(p=0.3)\n'
                     'node Y kind=outcome dist=bernoulli(p=0.2)\n')
    rep = collider_report(s, "Y", 1.0, ("V", "G"))
    assert rep.conditionally_independent


def test_conditioning_on_root_keeps_independence():
    s = parse_system('system "n"\nnode R kind=covariate dist=bernoulli(p=0.4)\n'
                     'node V kind=exposure given=(R) dist=table{R=0: bernoulli(p=0.2); R=1: bernoulli(p=0.6)}\n'
                     'node G kind=covariate dist=bernoulli(p=0.3)\n')
    rep = collider_report(s, "R", 1.0, ("V", "G"))
    assert rep.marginally_independent and rep.conditionally_independent


def test_collider_needs_discrete_system():
    s = parse_system('system "g"\nnode V kind=covariate dist=gaussian(mean=0, var=1)\n'
                     'node G kind=covariate dist=bernoulli(p=0.5)\n'
                     'node Y kind=outcome given=(V,G) dist=bernoulli(logit=0, b_V=1, b_G=1)\n')
    with pytest.raises(SpecError):
        collider_report(s, "Y", 1.0)


# ---------------------------------------------------------------- process systems

WALK = ('system "w"\nnode V kind=process dist=linear-gaussian-step(init=0, init_sd=0, drift=0, sd=1)\n'
        'node D kind=death given=(V) dist=exponential-hazard(rate=0, b_V=0)\n')


def test_plain_random_walk():
    p = simulate_process_system(parse_system(WALK), 20_000, 2.0, 0.05, 1)
    assert p.censored.all() and np.all(p.death_time == 2.0)
    v = p.values["V"]
    assert not np.isnan(v).any()
    end = v[:, -1]
    assert abs(end.var() - 2.0) < 4 * 2.0 * math.sqrt(2 / len(end))
    assert abs(end.mean()) < 4 * math.sqrt(2 / len(end))


def test_process_cycle_simulates():
    s = parse_system('system "c"\n'
                     'node Y kind=process given=(V) dist=linear-gaussian-step(init=0, sd=1, b_V=0.5)\n'
                     'node V kind=process given=(Y) dist=linear-gaussian-step(init=0, sd=1, b_Y=-0.5)\n')
    p = simulate_process_system(s, 1000, 1.0, 0.01, 2)
    assert set(p.values) == {"Y", "V"}


def test_no_observation_after_death():
    p = simulate_process_system(builtin_spec("truncation.sys"), 5000, 4.0, 0.05, 3, require_death=True)
    assert (~p.censored).any()
    for name, v in p.values.items():
        observed = ~np.isnan(v)
        assert np.all(p.times[None, :] * observed <= np.where(observed, p.death_time[:, None], np.inf))
        # once missing, always missing
        assert np.all(np.diff(observed.astype(int), axis=1) <= 0)


def test_process_simulation_deterministic_across_workers():
    s = builtin_spec("obesity.sys")
    a = simulate_process_system(s, 3000, 1.0, 0.02, 4)
    b = simulate_process_system(s, 3000, 1.0, 0.02, 4, workers=4)
    assert a.death_time.tobytes() == b.death_time.tobytes()
    for k in a.values:
        assert a.values[k].tobytes() == b.values[k].tobytes()


def test_step_must_divide_horizon():
    with pytest.raises(ValueError):
        simulate_process_system(parse_system(WALK), 10, 1.0, 0.3, 0)


def test_step_halving_converges():
    chk = step_halving_check(builtin_spec("truncation.sys"), 50_000, 2.0, 0.05, 6)
    assert chk.converged()
    assert 0 < chk.value < 1


@pytest.fixture(scope="module")
def truncation_panel():
    return simulate_process_system(builtin_spec("truncation.sys"), 50_000, 4.0, 0.05, 9,
                                   require_death=True)


def test_increment_regression_recovers_drift(truncation_panel):
    fit = increment_regression(truncation_panel, "Y", ["V", "G"])
    assert abs(fit.coef["V"] - 0.5) < 3 * fit.se["V"]
    assert abs(fit.coef["G"] - 0.3) < 3 * fit.se["G"]


def test_survivor_cross_section_is_attenuated(truncation_panel):
    h = truncation_panel.horizon
    cs = cross_section_regression(truncation_panel, "Y", ["V", "G"])
    slope, se = cs.coef["V"] / h, cs.se["V"] / h
    assert 0 < slope < 0.5 - 3 * se


@pytest.fixture(scope="module")
def obesity_panel():
    return simulate_process_system(builtin_spec("obesity.sys"), 200_000, 4.0, 0.02, 5,
                                   record_every=5, require_death=True)


def test_obesity_sign_reversal(obesity_panel):
    rep = survivor_bias_report(obesity_panel, SurvivorAnalysis("V", "Y", start=3.0))
    assert rep.truth > 0
    assert rep.naive + 3 * rep.naive_se < 0
    assert rep.adjusted - 3 * rep.adjusted_se > 0
    assert rep.sign_reversal
    assert rep.cross_sectional_ci[1] < 1


def test_reversal_strengthens_with_follow_up(obesity_panel):
    short = survivor_bias_report(obesity_panel, SurvivorAnalysis("V", "Y", 0.0, 1.0))
    long = survivor_bias_report(obesity_panel, SurvivorAnalysis("V", "Y", 0.0, 4.0))
    assert long.naive + 3 * long.naive_se < short.naive - 3 * short.naive_se


def test_decoupled_severity_has_no_paradox():
    s = parse_system('system "d"\n'
                     'node Y kind=process dist=linear-gaussian-step(init=0, init_sd=1, drift=0.2, sd=0.4)\n'
                     'node V kind=process dist=linear-gaussian-step(init=0, init_sd=1, drift=0, sd=0.3)\n'
                     'node D kind=death given=(Y,V) dist=exponential-hazard(rate=0.05, b_Y=0.3, b_V=0.3)\n')
    # a mild severity effect keeps the attenuation from omitting Y negligible
    p = simulate_process_system(s, 100_000, 3.0, 0.02, 8, record_every=5)
    rep = survivor_bias_report(p, SurvivorAnalysis("V", "Y", start=2.0))
    assert not rep.sign_reversal
    assert rep.naive > 0 and rep.adjusted > 0
    assert abs(rep.adjusted - rep.truth) < 3 * rep.adjusted_se + 0.02
    assert abs(rep.naive - rep.truth) < 3 * rep.naive_se + 0.02


def test_report_requires_known_nodes(obesity_panel):
    with pytest.raises(KeyError):
        survivor_bias_report(obesity_panel, SurvivorAnalysis("Q", "Y"))
