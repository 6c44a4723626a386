"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``ACCEPTANCE <k> PASS|FAIL`` line before asserting,
so the verdicts are visible in the captured ``pytest -v`` log.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest
from oracles import (
    S1_TEXT,
    S1_TRUTH,
    collider_conditional,
    frailty_hr_by_integration,
    s1_joint,
    s1_stabilized_weight,
)
from scipy.optimize import isotonic_regression
from strategies import random_confounded_system

from causalab.dynamics import (
    FrailtyParams,
    SurvivorAnalysis,
    collider_report,
    cross_section_regression,
    gamma_frailty_marginal_hr,
    hr_curve,
    increment_regression,
    late_entry,
    naive_hr,
    simulate_frailty_cohort,
    simulate_process_system,
    survivor_bias_report,
)
from causalab.estimators import MarginalModel, exact_effects, fit_wgee, g_formula_plugin, ipw_mean
from causalab.measures import exact_conditional_change, exact_weight_table, fit_propensity, true_weights
from causalab.scenarios import REGISTRY, ScenarioConfig, builtin_spec, run_scenario
from causalab.sim import sample
from causalab.specio import parse_system

SHARED = FrailtyParams(lambda0=1.0, r=2.0, delta0=1.0, delta1=1.0, horizon=3.0)
CROSSING = FrailtyParams(lambda0=1.0, r=2.0, delta0=0.0, delta1=2.0, horizon=2.0)


@pytest.fixture
def verdict(capsys):
    def report(k, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {k:>2} {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return report


# ---------------------------------------------------------------- 1

def _gformula_se(d, a):
    """Influence-function SE of the standardized mean with one discrete covariate."""
    A, Y, C = d["A"], d["Y"], d["C"]
    m = np.zeros(d.n)
    pa = np.zeros(d.n)
    for c in np.unique(C):
        at_c = C == c
        m[at_c] = Y[at_c & (A == a)].mean()
        pa[at_c] = np.mean(A[at_c] == a)
    psi = m.mean()
    inf = (A == a) / pa * (Y - m) + m - psi
    return inf.std(ddof=1) / math.sqrt(d.n)


def test_criterion_01_oracle_triple_agreement(verdict):
    t0 = time.perf_counter()
    s1 = parse_system(S1_TEXT)
    gaps = []
    for method, est in exact_effects(s1).items():
        for a in (0, 1):
            gaps.append(abs(est.means[float(a)] - float(S1_TRUTH[a])))
    for a in (0, 1):
        gaps.append(abs(exact_conditional_change(s1, "Y", float(a)) - float(S1_TRUTH[a])))
    exact_ok = max(gaps) < 1e-12

    d = sample(s1, 200_000, 7)
    wv = true_weights(s1, d)
    z = []
    for a in (0, 1):
        at = d["A"] == a
        terms = wv.ws[at] * d["Y"][at]
        se_ipw = terms.std(ddof=1) / math.sqrt(at.sum())
        z.append(abs(ipw_mean(d, wv, float(a)) - float(S1_TRUTH[a])) / se_ipw)
        z.append(abs(g_formula_plugin(d, float(a), "A", "Y", ["C"]) - float(S1_TRUTH[a]))
                 / _gformula_se(d, a))
    elapsed = time.perf_counter() - t0
    ok = exact_ok and max(z) < 3 and elapsed < 10
    verdict(1, ok, f"exact max gap {max(gaps):.1e}; sampled max |z| {max(z):.2f}; {elapsed:.1f}s")


# ---------------------------------------------------------------- 2

def test_criterion_02_stabilized_weight_mean(verdict):
    s1 = parse_system(S1_TEXT)
    table, wv = exact_weight_table(s1)
    exact = float(np.sum(np.asarray(table.prob, dtype=float) * wv.ws))
    rational = sum(p * s1_stabilized_weight(a, c) for (c, a, y), p in s1_joint().items())
    ws = true_weights(s1, sample(s1, 200_000, 7)).ws
    z = abs(ws.mean() - 1) / (ws.std(ddof=1) / math.sqrt(len(ws)))
    ok = abs(exact - 1) < 1e-12 and rational == 1 and z < 3
    verdict(2, ok, f"exact |E[W]-1| {abs(exact - 1):.1e}; sampled mean {ws.mean():.5f} (|z| {z:.2f})")


# ---------------------------------------------------------------- 3

def test_criterion_03_saturated_wgee_reduces_to_ipw(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for i in range(50):
        spec = random_confounded_system(rng, i)
        covs = [nd.name for nd in spec.nodes if nd.kind == "covariate"]
        d = sample(spec, 20_000, 500 + i)
        wv = fit_propensity(d, "A", covs).weights(d)
        levels = tuple(float(v) for v in np.unique(d["A"]))
        fit = fit_wgee(d, wv, MarginalModel.saturated(levels))
        for j, a in enumerate(levels):
            worst = max(worst, abs(fit.beta[j] - ipw_mean(d, wv, a)))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-10 and elapsed < 60
    verdict(3, ok, f"50 systems, max |WGEE - IPW| {worst:.1e}; {elapsed:.1f}s")


# ---------------------------------------------------------------- 4

def test_criterion_04_estimating_function_unbiased(verdict):
    s1 = parse_system(S1_TEXT)
    table, wv = exact_weight_table(s1)
    cells, prob = table.as_dataset()[0], np.asarray(table.prob, dtype=float)
    a, y = cells["A"], cells["Y"]
    logit = lambda p: math.log(p / (1 - p))  # noqa: E731
    models = [
        (MarginalModel.saturated((0.0, 1.0)), [0.35, 0.60]),
        (MarginalModel.linear(), [0.35, 0.25]),
        (MarginalModel.logistic(), [logit(0.35), logit(0.6) - logit(0.35)]),
    ]
    worst = 0.0
    for model, beta in models:
        beta = np.array(beta)
        resid = y - model.g(a, beta)
        dg = model.dg(a, beta)
        for lev in (0.0, 1.0):
            at = a == lev
            val = np.sum((prob * wv.ws * resid)[at][:, None] * dg[at], axis=0)
            worst = max(worst, float(np.max(np.abs(val))))
    verdict(4, worst < 1e-12, f"max |E[W D (Y - g)]| per level over 3 forms {worst:.1e}")


# ---------------------------------------------------------------- 5

def test_criterion_05_gamma_frailty_closed_form(verdict):
    closed = gamma_frailty_marginal_hr(SHARED, 1.0)
    integ = frailty_hr_by_integration(1.0, 2.0, 1.0, 1.0, 1.0)
    cohort = simulate_frailty_cohort(SHARED, 500_000, 11)
    c1 = hr_curve(cohort, [0.9, 1.1], SHARED)
    z = abs(c1.hr[0] - 4 / 3) / c1.se[0]
    grid = np.round(np.arange(0.0, 3.0001, 0.25), 12)
    c = hr_curve(cohort, grid, SHARED)
    iso = isotonic_regression(c.hr, weights=1 / c.se**2, increasing=False).x
    monotone = bool(np.all(np.abs(c.hr - iso) <= 2 * c.se)) and iso[0] > iso[-1] > 1
    ok = abs(closed - 4 / 3) < 1e-15 and abs(closed - integ) < 1e-8 and z < 2 and monotone
    verdict(5, ok, f"HR(1) closed {closed:.12f}, integrated {integ:.12f}, "
                   f"simulated {c1.hr[0]:.4f} (|z| {z:.2f}); curve {c.hr[0]:.3f} -> {c.hr[-1]:.3f}")


# ---------------------------------------------------------------- 6

def test_criterion_06_crossing_and_late_entry(verdict):
    cohort = simulate_frailty_cohort(CROSSING, 500_000, 12)
    grid = np.round(np.arange(0.0, 2.0001, 0.25), 12)
    c = hr_curve(cohort, grid, CROSSING)
    late_windows = c.hr[c.t_low >= 0.25]
    hr, lo, hi = naive_hr(late_entry(cohort, 0.5), 0.5, CROSSING.horizon)
    ok = bool(np.all(late_windows < 1)) and hi < 1 < CROSSING.r
    verdict(6, ok, f"max window HR past 0.25 {late_windows.max():.3f}; "
                   f"late-entry HR {hr:.3f} ({lo:.3f}, {hi:.3f}) vs conditional {CROSSING.r}")


# ---------------------------------------------------------------- 7

def test_criterion_07_collider_enumeration(verdict):
    rep = collider_report(builtin_spec("collider.sys"), "Y", 1.0, ("V", "G"))
    g1, g0 = rep.v_given_g_collider[1.0][1.0], rep.v_given_g_collider[0.0][1.0]
    oracle = collider_conditional()
    ok = (g1 == Fraction(9, 14) == oracle[1] and g0 == Fraction(5, 6) == oracle[0]
          and rep.marginally_independent)
    verdict(7, ok, f"P(V=1|G=1,Y=1)={g1}, P(V=1|G=0,Y=1)={g0}, "
                   f"marginally independent={rep.marginally_independent}")


# ---------------------------------------------------------------- 8

def test_criterion_08_obesity_sign_reversal(verdict):
    panel = simulate_process_system(builtin_spec("obesity.sys"), 200_000, 4.0, 0.02, 5,
                                    record_every=5, require_death=True)
    rep = survivor_bias_report(panel, SurvivorAnalysis("V", "Y", start=3.0))
    ok = (rep.truth > 0 and rep.naive + 3 * rep.naive_se < 0
          and rep.adjusted - 3 * rep.adjusted_se > 0 and rep.cross_sectional_ci[1] < 1)
    verdict(8, ok, f"generating log-HR {rep.truth:+.2f}; naive {rep.naive:+.3f} +/- {rep.naive_se:.3f}; "
                   f"adjusted {rep.adjusted:+.3f} +/- {rep.adjusted_se:.3f}; "
                   f"cross-sectional HR {rep.cross_sectional_hr:.3f}")


# ---------------------------------------------------------------- 9

def test_criterion_09_truncation_by_death(verdict):
    panel = simulate_process_system(builtin_spec("truncation.sys"), 50_000, 4.0, 0.05, 9,
                                    require_death=True)
    inc = increment_regression(panel, "Y", ["V", "G"])
    cs = cross_section_regression(panel, "Y", ["V", "G"])
    slope, se = cs.coef["V"] / panel.horizon, cs.se["V"] / panel.horizon
    ok = abs(inc.coef["V"] - 0.5) < 3 * inc.se["V"] and 0 < slope < 0.5 - 3 * se
    verdict(9, ok, f"increment {inc.coef['V']:.4f} +/- {inc.se['V']:.4f} (truth 0.5); "
                   f"survivor cross-section {slope:.4f} +/- {se:.4f}")


# ---------------------------------------------------------------- 10

def _artifacts(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_criterion_10_determinism(verdict, tmp_path):
    mismatched = []
    for name, sc in REGISTRY.items():
        # default size without record exports, and a small run with them
        for n, export in ((None, False), (min(sc.default_n, 20_000), True)):
            runs = []
            for tag, workers in (("a", 1), ("b", 1), ("c", 4)):
                out = tmp_path / f"{name}-{n}-{tag}"
                run_scenario(ScenarioConfig(scenario=name, n=n, out=str(out),
                                            workers=workers, export_data=export))
                runs.append(_artifacts(out))
            if not runs[0] == runs[1] == runs[2]:
                mismatched.append(f"{name}(n={n})")
    verdict(10, not mismatched,
            f"{len(REGISTRY)} scenarios x 2 sizes, rerun and workers 1/4 identical"
            if not mismatched else f"differences in {mismatched}")
