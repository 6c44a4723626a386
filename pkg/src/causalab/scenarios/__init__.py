"""Built-in scenarios and the scenario runner behind the command line."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import platform
import sys
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np
import scipy

from ..dynamics import (
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
from ..estimators import (
    EffectEstimate,
    MarginalModel,
    bootstrap_ci,
    contrast,
    exact_effects,
    fit_wgee,
    g_formula_plugin,
    gformula_estimator,
    ipw_estimator,
    ipw_mean,
    naive_estimator,
    naive_mean,
)
from ..measures import exposure_node, fit_propensity, true_weights, weight_diagnostics
from ..sim import sample
from ..specio import SystemSpec, is_discrete, load_system, parse_system, spec_hash, support

OUT_ENV = "CAUSALAB_OUT"
ESTIMATORS = ("naive", "ipw", "ipw-estimated", "gformula", "wgee", "exact")


def builtin_spec(filename: str) -> SystemSpec:
    text = resources.files(__name__).joinpath(filename).read_text(encoding="utf-8")
    return parse_system(text)


@dataclass
class ScenarioConfig:
    scenario: str | None = None
    spec: str | None = None
    n: int | None = None
    seed: int | None = None
    out: str | None = None
    estimators: tuple[str, ...] = ESTIMATORS
    weight_cap: float | None = None
    workers: int = 1
    bootstrap: int = 0
    export_data: bool = False

    def validate(self) -> None:
        if (self.scenario is None) == (self.spec is None):
            raise ValueError("give exactly one of a built-in scenario or a spec file")
        if self.scenario is not None and self.scenario not in REGISTRY:
            raise ValueError(f"unknown scenario {self.scenario!r}; see --list")
        if self.n is not None and self.n < 1:
            raise ValueError("n must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.weight_cap is not None and self.weight_cap <= 0:
            raise ValueError("weight cap must be positive")
        if self.bootstrap and self.bootstrap < 100:
            raise ValueError("bootstrap needs at least 100 replicates")
        bad = [e for e in self.estimators if e not in ESTIMATORS]
        if bad:
            raise ValueError(f"unknown estimators {bad}; choose from {', '.join(ESTIMATORS)}")

    def manifest_view(self) -> dict:
        # worker count does not change any output and is left out
        d = asdict(self)
        d.pop("workers")
        d.pop("out")
        d["estimators"] = list(self.estimators)
        return d


_INT_KEYS = {"n", "seed", "workers", "bootstrap"}


def parse_config(text: str) -> dict:
    """``key=value`` lines; ``#`` comments; keys as in :class:`ScenarioConfig`."""
    names = {f.name for f in fields(ScenarioConfig)}
    out: dict = {}
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in names:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        try:
            if key in _INT_KEYS:
                out[key] = int(value)
            elif key == "weight_cap":
                out[key] = float(value)
            elif key == "estimators":
                out[key] = tuple(e.strip() for e in value.split(",") if e.strip())
            elif key == "export_data":
                out[key] = value.lower() in ("1", "true", "yes")
            else:
                out[key] = value
        except ValueError:
            raise ValueError(f"config line {lineno}: bad value for {key}: {value!r}") from None
    return out


# ---------------------------------------------------------------- output

def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g") if math.isfinite(v) else ""
    return str(v)


RECORD_KEYS = ("method", "level", "estimate", "se", "ci_low", "ci_high")


def write_estimates(out: Path, records: list[dict], extra: dict | None = None) -> None:
    """``estimates.json`` (records plus extras) and ``estimates.csv`` (records)."""
    payload = {"estimates": records}
    payload.update(extra or {})
    _write_json(out / "estimates.json", payload)
    with open(out / "estimates.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_KEYS)
        for r in records:
            w.writerow([_fmt(r.get(k)) for k in RECORD_KEYS])


def _record(method, level, estimate, se=None, lo=None, hi=None) -> dict:
    return {"method": method, "level": level, "estimate": estimate, "se": se,
            "ci_low": lo, "ci_high": hi}


# ---------------------------------------------------------------- runners

@dataclass
class RunResult:
    records: list[dict]
    extra: dict = field(default_factory=dict)
    spec_hash: str | None = None
    files: list[str] = field(default_factory=list)


def _confounding(cfg: ScenarioConfig, spec: SystemSpec, out: Path, n: int, seed: int) -> RunResult:
    node = exposure_node(spec)
    exposure = node.name
    outs = spec.of_kind("outcome")
    if len(outs) != 1:
        raise ValueError("system needs exactly one outcome node")
    outcome = outs[0].name
    covariates = node.parents
    data = sample(spec, n, seed, cfg.workers)
    levels = tuple(sorted(float(v) for v in np.unique(data[exposure])))
    records: list[dict] = []
    extra: dict = {}
    effects: dict[str, EffectEstimate] = {}
    cap = cfg.weight_cap
    est_set = set(cfg.estimators)

    def boot(fn):
        if not cfg.bootstrap:
            return None
        return bootstrap_ci(fn, data, cfg.bootstrap, seed, cfg.workers)

    def add(method, means, fn=None):
        b = boot(fn) if fn is not None else None
        est = EffectEstimate(method, dict(means))
        if b is not None:
            est.se = {k: b.se[k] for k in means}
            est.ci = {k: (b.ci_low[k], b.ci_high[k]) for k in means}
        effects[method] = est
        records.extend(est.records())

    if "exact" in est_set and is_discrete(spec):
        for method, est in exact_effects(spec, levels, exposure, outcome).items():
            effects[method] = est
            records.extend(est.records())
    if "naive" in est_set:
        add("naive", {a: naive_mean(data, a, exposure, outcome) for a in levels},
            naive_estimator(levels, exposure, outcome))
    wv_true = None
    if est_set & {"ipw", "wgee"}:
        wv_true = true_weights(spec, data, exposure)
        if cap is not None:
            wv_true = wv_true.capped(cap)
        extra["weights"] = asdict(weight_diagnostics(wv_true))
    if "ipw" in est_set:
        add("ipw", {a: ipw_mean(data, wv_true, a, exposure, outcome) for a in levels},
            ipw_estimator(levels, exposure, outcome, spec=spec, cap=cap))
    if "ipw-estimated" in est_set:
        wv = fit_propensity(data, exposure, covariates).weights(data)
        if cap is not None:
            wv = wv.capped(cap)
        add("ipw-estimated", {a: ipw_mean(data, wv, a, exposure, outcome) for a in levels},
            ipw_estimator(levels, exposure, outcome, covariates=covariates, cap=cap))
    if "gformula" in est_set:
        add("g-formula", {a: g_formula_plugin(data, a, exposure, outcome, covariates) for a in levels},
            gformula_estimator(levels, exposure, outcome, covariates))
    if "wgee" in est_set:
        wv = fit_propensity(data, exposure, covariates).weights(data)
        if cap is not None:
            wv = wv.capped(cap)
        sat = fit_wgee(data, wv, MarginalModel.saturated(levels), exposure, outcome)
        effects["wgee-saturated"] = EffectEstimate("wgee-saturated", dict(zip(levels, sat.beta)))
        records.extend(effects["wgee-saturated"].records())
        lin = fit_wgee(data, wv_true, MarginalModel.linear(), exposure, outcome)
        effects["wgee-linear"] = EffectEstimate(
            "wgee-linear", {a: float(np.atleast_1d(lin.g(a))[0]) for a in levels})
        records.extend(effects["wgee-linear"].records())
        extra["wgee_linear_beta"] = list(lin.beta)
    if len(levels) >= 2:
        a0, a1 = levels[0], levels[-1]
        extra["contrasts"] = [
            {"method": m, "a1": a1, "a0": a0,
             "difference": contrast(e, a1, a0)[0], "ratio": contrast(e, a1, a0)[1]}
            for m, e in effects.items() if e.means.get(a0)
        ]
    extra["weight_cap"] = cap
    files = []
    if cfg.export_data:
        cols = {}
        if wv_true is not None:
            cols = {"w": wv_true.w, "ws": wv_true.ws}
        data.to_csv(out / "dataset.csv", cols)
        files += ["dataset.csv", "dataset.csv.meta.json"]
    return RunResult(records, extra, spec_hash(spec), files)


def run_confounding_s1(cfg, out, n, seed):
    return _confounding(cfg, builtin_spec("s1.sys"), out, n, seed)


def run_collider(cfg, out, n, seed):
    spec = builtin_spec("collider.sys")
    rep = collider_report(spec, "Y", 1.0, ("V", "G"))
    records = []
    for g, law in rep.v_given_g.items():
        records.append(_record("marginal", f"P(V=1|G={g:g})", float(law[1.0])))
    for g, law in rep.v_given_g_collider.items():
        records.append(_record("given-collider", f"P(V=1|G={g:g},Y=1)", float(law[1.0])))
    from ..sim import exact_joint

    table = exact_joint(spec)
    for v in (0.0, 1.0):
        risk = table.expectation(lambda r: r["D"], lambda r, v=v: r["V"] == v and r["Y"] == 1)
        records.append(_record("death-risk-among-diabetics", f"P(D=1|V={v:g},Y=1)", float(risk)))
    extra = {
        "marginally_independent": rep.marginally_independent,
        "conditionally_independent": rep.conditionally_independent,
        "odds_ratio_given_collider": rep.odds_ratio,
        "exact": {f"P(V=1|G={g:g},Y=1)": str(law[1.0]) for g, law in rep.v_given_g_collider.items()},
    }
    return RunResult(records, extra, spec_hash(spec))


FRAILTY_DECREASING = FrailtyParams(lambda0=1.0, r=2.0, delta0=1.0, delta1=1.0, horizon=3.0)
FRAILTY_CROSSING = FrailtyParams(lambda0=1.0, r=2.0, delta0=0.0, delta1=2.0, horizon=2.0)


def _params_hash(p: FrailtyParams) -> str:
    return hashlib.sha256(json.dumps(asdict(p), sort_keys=True).encode()).hexdigest()


def _frailty(p: FrailtyParams, cfg, out, n, seed, width=0.25):
    data = simulate_frailty_cohort(p, n, seed, cfg.workers)
    grid = np.round(np.arange(0.0, p.horizon + 1e-9, width), 12)
    curve = hr_curve(data, grid, p)
    curve.to_csv(out / "hr_curve.csv")
    records = []
    for j, mid in enumerate(curve.midpoints):
        hr, se = curve.hr[j], curve.se_log_hr[j]
        records.append(_record("window-hr", float(mid), hr, curve.se[j],
                               hr * np.exp(-1.96 * se), hr * np.exp(1.96 * se)))
        records.append(_record("closed-form-hr", float(mid), float(curve.closed_form[j])))
    extra = {"params": asdict(p), "hr_at_1": gamma_frailty_marginal_hr(p, 1.0)}
    files = ["hr_curve.csv"]
    if cfg.export_data:
        data.to_csv(out / "cohort.csv")
        files.append("cohort.csv")
    return data, RunResult(records, extra, _params_hash(p), files)


def run_frailty_decreasing(cfg, out, n, seed):
    return _frailty(FRAILTY_DECREASING, cfg, out, n, seed)[1]


def run_frailty_crossing(cfg, out, n, seed):
    return _frailty(FRAILTY_CROSSING, cfg, out, n, seed)[1]


def run_late_entry(cfg, out, n, seed, t0=0.5):
    p = FRAILTY_CROSSING
    data, res = _frailty(p, cfg, out, n, seed)
    full = naive_hr(data, 0.0, p.horizon)
    late = naive_hr(late_entry(data, t0), t0, p.horizon)
    res.records.append(_record("naive-hr-from-origin", f"(0, {p.horizon:g}]", *_hr_fields(full)))
    res.records.append(_record("naive-hr-late-entry", f"({t0:g}, {p.horizon:g}]", *_hr_fields(late)))
    res.extra["conditional_hr"] = p.r
    res.extra["entry_time"] = t0
    return res


def _hr_fields(hr_tuple):
    hr, lo, hi = hr_tuple
    se = (math.log(hi) - math.log(lo)) / (2 * 1.96) * hr
    return hr, se, lo, hi


def run_obesity(cfg, out, n, seed, horizon=4.0, step=0.02, start=3.0):
    spec = builtin_spec("obesity.sys")
    panel = simulate_process_system(spec, n, horizon, step, seed, cfg.workers, record_every=5,
                                    require_death=True)
    rep = survivor_bias_report(panel, SurvivorAnalysis("V", "Y", start=start))
    records = [
        _record("naive-log-hr-per-unit-V", "survivors", rep.naive, rep.naive_se),
        _record("adjusted-log-hr-per-unit-V", "survivors", rep.adjusted, rep.adjusted_se),
        _record("generating-coefficient", "truth", rep.truth),
        _record("cross-sectional-hr-high-vs-low-V", "survivors",
                rep.cross_sectional_hr, None, *rep.cross_sectional_ci),
    ]
    extra = {"sign_reversal": rep.sign_reversal, "n_at_start": rep.n_at_start,
             "horizon": horizon, "step": step, "start": start}
    files = []
    if cfg.export_data:
        panel.to_csv(out / "panel_long.csv", out / "events.csv")
        files += ["panel_long.csv", "events.csv"]
    return RunResult(records, extra, spec_hash(spec), files)


def run_truncation(cfg, out, n, seed, horizon=4.0, step=0.05):
    spec = builtin_spec("truncation.sys")
    panel = simulate_process_system(spec, n, horizon, step, seed, cfg.workers, require_death=True)
    inc = increment_regression(panel, "Y", ["V", "G"])
    cs = cross_section_regression(panel, "Y", ["V", "G"])
    truth = spec.node("Y").dist.coefficients["V"]
    records = [
        _record("increment-regression", "b_V", inc.coef["V"], inc.se["V"]),
        _record("survivor-cross-section", "b_V", cs.coef["V"] / horizon, cs.se["V"] / horizon),
        _record("generating-coefficient", "b_V", truth),
    ]
    extra = {"deaths": int((~panel.censored).sum()), "horizon": horizon, "step": step}
    files = []
    if cfg.export_data:
        panel.to_csv(out / "panel_long.csv", out / "events.csv")
        files += ["panel_long.csv", "events.csv"]
    return RunResult(records, extra, spec_hash(spec), files)


@dataclass(frozen=True)
class Scenario:
    name: str
    tag: str
    description: str
    default_n: int
    default_seed: int
    run: Callable


REGISTRY: dict[str, Scenario] = {
    s.name: s
    for s in [
        Scenario("confounding-s1", "confounding: g-formula / IPW / weighted GEE",
                 "binary confounder; naive vs weighted vs standardized marginal means",
                 200_000, 7, run_confounding_s1),
        Scenario("collider", "collider bias: diabetes as collider",
                 "exact enumeration of obesity-confounder association among diabetics",
                 1, 0, run_collider),
        Scenario("frailty-decreasing", "frailty selection: shared gamma frailty",
                 "marginal hazard ratio decreasing from r toward 1",
                 500_000, 11, run_frailty_decreasing),
        Scenario("frailty-crossing", "frailty selection: exposed-only frailty",
                 "marginal hazard ratio crossing 1 at t = 0.25",
                 500_000, 12, run_frailty_crossing),
        Scenario("late-entry-reversal", "frailty selection: late entry",
                 "cohort entered at t0 = 0.5 shows a reversed effect",
                 500_000, 12, run_late_entry),
        Scenario("obesity-feedback", "feedback: severity lowers weight and raises mortality",
                 "naive survivor analysis reverses the harmful weight effect",
                 200_000, 5, run_obesity),
        Scenario("truncation-by-death", "truncation by death: marker until death",
                 "increment regression among the alive vs survivor cross-section",
                 50_000, 9, run_truncation),
    ]
}


def list_scenarios() -> list[dict]:
    return [{"name": s.name, "tag": s.tag, "description": s.description,
             "default_n": s.default_n, "default_seed": s.default_seed} for s in REGISTRY.values()]


def versions() -> dict:
    from .. import __version__

    return {"causalab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def default_out(name: str) -> Path:
    root = os.environ.get(OUT_ENV, "causalab-out")
    return Path(root) / name


def run_scenario(cfg: ScenarioConfig) -> Path:
    """Run one scenario and write its artifacts; returns the output directory."""
    cfg.validate()
    if cfg.scenario is not None:
        sc = REGISTRY[cfg.scenario]
        name = sc.name
        n = sc.default_n if cfg.n is None else cfg.n
        seed = sc.default_seed if cfg.seed is None else cfg.seed
        runner = sc.run
    else:
        spec = load_system(cfg.spec)
        name = Path(cfg.spec).stem
        n = 100_000 if cfg.n is None else cfg.n
        seed = 0 if cfg.seed is None else cfg.seed

        def runner(c, o, n_, s_):
            return _confounding(c, spec, o, n_, s_)

    out = Path(cfg.out) if cfg.out else default_out(name)
    out.mkdir(parents=True, exist_ok=True)
    res = runner(cfg, out, n, seed)
    write_estimates(out, res.records, {"scenario": name, **res.extra})
    manifest = {
        "scenario": name,
        "spec_hash": res.spec_hash,
        "seed": seed,
        "n": n,
        "config": cfg.manifest_view(),
        "versions": versions(),
        "files": sorted(["estimates.json", "estimates.csv", "manifest.json", *res.files]),
    }
    _write_json(out / "manifest.json", manifest)
    return out
