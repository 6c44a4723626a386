"""Dynamic selection: frailty cohorts, colliders, and process systems with death.

Gamma frailty with mean 1 and variance ``delta`` turns a conditional hazard
``Z * lam(t)`` into the population hazard ``lam(t) / (1 + delta * Lam(t))``.
With a conditional hazard ratio ``r`` between exposed and unexposed, and
group-specific frailty variances, the marginal hazard ratio is::

    HR(t) = r * (1 + delta0 * lambda0 * t) / (1 + delta1 * r * lambda0 * t)

which starts at ``r`` and decreases; it crosses 1 whenever ``delta1 * r > delta0``
and ``r > 1`` leave room for it, i.e. when the exposed are selected harder.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import rng
from .measures import newton
from .sim import draw_node, exact_joint, hazard_rate
from .specio import SpecError, SystemSpec, is_discrete, spec_hash, validate

VARIABLE_KINDS = ("covariate", "exposure", "outcome", "frailty")


# ---------------------------------------------------------------- frailty

@dataclass(frozen=True)
class FrailtyParams:
    lambda0: float = 1.0
    r: float = 2.0
    delta0: float = 1.0
    delta1: float = 1.0
    horizon: float = 2.0
    p_exposed: float = 0.5

    def __post_init__(self):
        if self.lambda0 <= 0 or self.r <= 0:
            raise ValueError("lambda0 and r must be > 0")
        if self.delta0 < 0 or self.delta1 < 0:
            raise ValueError("frailty variances must be >= 0")
        if self.horizon <= 0:
            raise ValueError("horizon must be > 0")
        if not 0 < self.p_exposed < 1:
            raise ValueError("p_exposed must be in (0, 1)")

    def delta(self, group: int) -> float:
        return self.delta1 if group else self.delta0

    def rate(self, group: int) -> float:
        return self.lambda0 * (self.r if group else 1.0)


def gamma_frailty_marginal_hr(p: FrailtyParams, t):
    """Marginal (population) hazard ratio of exposed vs unexposed at time ``t``."""
    t = np.asarray(t, dtype=float)
    cum0 = p.lambda0 * t
    hr = p.r * (1 + p.delta0 * cum0) / (1 + p.delta1 * p.r * cum0)
    return float(hr) if hr.ndim == 0 else hr


def marginal_survival(p: FrailtyParams, group: int, t):
    cum = p.rate(group) * np.asarray(t, dtype=float)
    d = p.delta(group)
    return np.exp(-cum) if d == 0 else (1 + d * cum) ** (-1 / d)


def marginal_hazard(p: FrailtyParams, group: int, t):
    return p.rate(group) / (1 + p.delta(group) * p.rate(group) * np.asarray(t, dtype=float))


def survivor_mean_frailty(p: FrailtyParams, group: int, t):
    """Mean frailty among group members still alive at ``t`` (gamma conjugacy)."""
    return 1 / (1 + p.delta(group) * p.rate(group) * np.asarray(t, dtype=float))


def window_hazard(p: FrailtyParams, group: int, lo: float, hi: float) -> float:
    """Expected occurrence/exposure rate over ``(lo, hi]`` for a full cohort."""
    from scipy.integrate import quad

    s = lambda t: marginal_survival(p, group, t)  # noqa: E731
    exposure, _ = quad(s, lo, hi, epsabs=1e-13, epsrel=1e-12)
    return float((s(lo) - s(hi)) / exposure)


@dataclass
class SurvivalData:
    group: np.ndarray
    time: np.ndarray
    event: np.ndarray
    entry: np.ndarray
    horizon: float
    frailty: np.ndarray | None = None
    seed: int | None = None

    @property
    def n(self) -> int:
        return len(self.time)

    def subset(self, mask) -> "SurvivalData":
        fr = None if self.frailty is None else self.frailty[mask]
        return SurvivalData(self.group[mask], self.time[mask], self.event[mask],
                            self.entry[mask], self.horizon, fr, self.seed)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["subject", "group", "entry", "time", "event"])
            for i in range(self.n):
                w.writerow([i, int(self.group[i]), format(self.entry[i], ".17g"),
                            format(self.time[i], ".17g"), int(self.event[i])])


def simulate_frailty_cohort(p: FrailtyParams, n: int, seed: int, workers: int = 1) -> SurvivalData:
    """Gamma-frailty exponential cohort, censored at the horizon.

    Subject ``i`` draws group, frailty and event time from slots 0, 1 and 2 of
    stream ``derive(seed, i)``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")

    def chunk(start, stop):
        s = rng.record_streams(seed, start, stop)
        g = (rng.uniform(s, 0) < p.p_exposed).astype(np.int8)
        z = np.where(g == 1, rng.gamma_mean_one(s, 1, p.delta1), rng.gamma_mean_one(s, 1, p.delta0))
        rate = z * p.lambda0 * np.where(g == 1, p.r, 1.0)
        t = rng.exponential(s, 2) / rate
        return g, z, t

    parts = rng.map_chunks(chunk, n, workers)
    g = np.concatenate([x[0] for x in parts])
    z = np.concatenate([x[1] for x in parts])
    t = np.concatenate([x[2] for x in parts])
    event = t <= p.horizon
    time = np.where(event, t, p.horizon)
    return SurvivalData(g, time, event, np.zeros(n), p.horizon, z, seed)


@dataclass
class HazardCurve:
    t_low: np.ndarray
    t_high: np.ndarray
    events0: np.ndarray
    events1: np.ndarray
    exposure0: np.ndarray
    exposure1: np.ndarray
    hazard0: np.ndarray
    hazard1: np.ndarray
    hr: np.ndarray
    se_log_hr: np.ndarray
    se: np.ndarray
    flagged: np.ndarray
    closed_form: np.ndarray | None = None

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.t_low + self.t_high)

    def to_csv(self, path) -> None:
        cols = ["t_low", "t_high", "hazard0", "hazard1", "hr", "se"]
        if self.closed_form is not None:
            cols.append("closed_form")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for j in range(len(self.t_low)):
                w.writerow([format(float(getattr(self, c)[j]), ".17g") for c in cols])


def hr_curve(data: SurvivalData, grid: Sequence[float], params: FrailtyParams | None = None) -> HazardCurve:
    """Piecewise-constant occurrence/exposure hazards per group and their ratio.

    Windows are ``(grid[k], grid[k+1]]``.  A window where either group has no
    person-time or no events is flagged and its ratio is NaN.
    """
    if data.n == 0:
        raise ValueError("empty survival data")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be increasing with at least two points")
    if grid[0] < 0 or grid[-1] > data.horizon + 1e-12:
        raise ValueError("grid windows must lie within (0, horizon]")
    lo, hi = grid[:-1], grid[1:]
    k = len(lo)
    ev = np.zeros((2, k))
    pt = np.zeros((2, k))
    for g in (0, 1):
        m = data.group == g
        t, e, s = data.time[m], data.event[m], data.entry[m]
        for j in range(k):
            pt[g, j] = np.sum(np.clip(np.minimum(t, hi[j]) - np.maximum(s, lo[j]), 0, None))
            ev[g, j] = np.sum(e & (t > lo[j]) & (t <= hi[j]) & (t > s))
    with np.errstate(divide="ignore", invalid="ignore"):
        haz = np.where(pt > 0, ev / pt, np.nan)
        flagged = (pt[0] == 0) | (pt[1] == 0) | (ev[0] == 0) | (ev[1] == 0)
        hr = np.where(flagged, np.nan, haz[1] / haz[0])
        se_log = np.where(flagged, np.nan, np.sqrt(1 / ev[1] + 1 / ev[0]))
    closed = None if params is None else gamma_frailty_marginal_hr(params, 0.5 * (lo + hi))
    return HazardCurve(lo, hi, ev[0], ev[1], pt[0], pt[1], haz[0], haz[1], hr, se_log,
                       hr * se_log, flagged, closed)


def naive_hr(data: SurvivalData, t_low: float | None = None, t_high: float | None = None):
    """Single-window hazard ratio with a 95% interval, ``(hr, lo, hi)``."""
    t_low = float(np.min(data.entry)) if t_low is None else t_low
    t_high = data.horizon if t_high is None else t_high
    c = hr_curve(data, [t_low, t_high])
    hr, se = float(c.hr[0]), float(c.se_log_hr[0])
    return hr, hr * np.exp(-1.96 * se), hr * np.exp(1.96 * se)


def late_entry(data: SurvivalData, t0: float) -> SurvivalData:
    """Left-truncate at ``t0``: keep subjects still at risk and enter them at ``t0``."""
    if t0 >= data.horizon:
        raise ValueError(f"entry time {t0} is not before the horizon {data.horizon}")
    if t0 <= 0:
        return data.subset(np.ones(data.n, dtype=bool))
    keep = data.time > t0
    out = data.subset(keep)
    out.entry = np.maximum(out.entry, t0)
    return out


# ---------------------------------------------------------------- collider

@dataclass
class ColliderReport:
    pair: tuple[str, str]
    collider: str
    level: float
    marginal: dict            # P(V=v, G=g)
    conditional: dict         # P(V=v, G=g | collider=level)
    v_given_g: dict           # P(V=v | G=g)
    v_given_g_collider: dict  # P(V=v | G=g, collider=level)
    marginally_independent: bool
    conditionally_independent: bool
    odds_ratio: float | None = None


def _independent(joint: dict, tol) -> bool:
    pv, pg = {}, {}
    for (v, g), p in joint.items():
        pv[v] = pv.get(v, 0) + p
        pg[g] = pg.get(g, 0) + p
    return all(abs(p - pv[v] * pg[g]) <= tol for (v, g), p in joint.items())


def _v_given_g(joint: dict) -> dict:
    pg: dict = {}
    for (v, g), p in joint.items():
        pg[g] = pg.get(g, 0) + p
    return {g: {v: joint[(v, g2)] / pg[g] for (v, g2) in joint if g2 == g} for g in sorted(pg)}


def collider_report(spec: SystemSpec, collider: str, level: float,
                    pair: tuple[str, str] | None = None) -> ColliderReport:
    """Exact association between two nodes, marginally and given ``collider = level``.

    Probabilities are exact rationals whenever every parameter is given as a
    plain probability.
    """
    if not is_discrete(spec):
        raise SpecError("collider_report needs a fully discrete system")
    if pair is None:
        parents = spec.node(collider).parents
        if len(parents) != 2:
            raise ValueError("name the pair explicitly when the collider lacks exactly two parents")
        pair = (parents[0], parents[1])
    v, g = pair
    uses_logit = any(
        d.get("logit") is not None
        for n in spec.nodes
        for d in ([n.dist] + [r for _, r in n.dist.rows])
    )
    table = exact_joint(spec, exact=not uses_logit)
    joint = table.marginal([v, g])
    cond_all = table.marginal([v, g, collider])
    den = sum(p for (_, _, c), p in cond_all.items() if c == level)
    if den == 0:
        raise ZeroDivisionError(f"P({collider}={level}) = 0")
    cond = {(a, b): p / den for (a, b, c), p in cond_all.items() if c == level}
    tol = 0 if not uses_logit else 1e-12
    vg = _v_given_g(joint)
    vgc = _v_given_g(cond)
    odds = None
    keys = {(a, b) for a, b in cond}
    if keys == {(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)}:
        num = cond[(1.0, 1.0)] * cond[(0.0, 0.0)]
        dd = cond[(1.0, 0.0)] * cond[(0.0, 1.0)]
        odds = float(num / dd) if dd != 0 else float("inf")
    return ColliderReport(pair, collider, level, joint, cond, vg, vgc,
                          _independent(joint, tol), _independent(cond, tol), odds)


# ---------------------------------------------------------------- process systems

@dataclass
class PanelData:
    """Per-subject trajectories recorded on a time grid, truncated at death.

    ``values[name][i, m]`` is the value of process ``name`` for subject ``i``
    at ``times[m]``; it is NaN once the subject has died.
    """

    times: np.ndarray
    values: dict[str, np.ndarray]
    static: dict[str, np.ndarray]
    death_time: np.ndarray
    censored: np.ndarray
    horizon: float
    step: float
    seed: int | None = None
    spec: SystemSpec | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.death_time)

    def alive(self, m: int) -> np.ndarray:
        """Subjects observed at ``times[m]``."""
        return (self.death_time > self.times[m]) | self.censored

    def to_csv(self, long_path, events_path) -> None:
        """Long format ``(subject, time, node, value)`` plus the events file."""
        with open(long_path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["subject", "time", "node", "value"])
            for i in range(self.n):
                for name, col in self.static.items():
                    w.writerow([i, "0", name, format(float(col[i]), ".17g")])
                for m, t in enumerate(self.times):
                    if self.death_time[i] <= t:
                        break
                    ts = format(float(t), ".17g")
                    for name, arr in self.values.items():
                        w.writerow([i, ts, name, format(float(arr[i, m]), ".17g")])
        with open(events_path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["subject", "death_time", "censored"])
            for i in range(self.n):
                w.writerow([i, format(float(self.death_time[i]), ".17g"), int(self.censored[i])])


_STATIC_SLOT = 0
_INIT_SLOT = 1 << 10
_STEP_SLOT = 1 << 12


def simulate_process_system(spec: SystemSpec, n: int, horizon: float, step: float = 0.01,
                            seed: int = 0, workers: int = 1, record_every: int = 1,
                            require_death: bool = False) -> PanelData:
    """Euler simulation of process nodes with death truncation.

    Static (random-variable) nodes are drawn at time 0.  Over each step the
    death hazard is evaluated at the step-start values and a death time is
    drawn from the exponential law with that rate; processes move by
    ``(drift + sum b_p x_p) * step + sd * sqrt(step) * N(0, 1)`` using
    step-start values of their parents, so feedback cycles are legal.
    Values are recorded every ``record_every`` steps while the subject is
    alive.
    """
    if step <= 0:
        raise ValueError("step must be > 0")
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    if n < 1:
        raise ValueError("n must be >= 1")
    errors = [d for d in validate(spec) if d.severity == "error"]
    if errors:
        raise SpecError(f"invalid spec: {errors[0]}", errors)
    k_steps = int(round(horizon / step))
    if k_steps < 1 or abs(k_steps * step - horizon) > 1e-9 * max(1.0, horizon):
        raise ValueError("step must divide the horizon")
    statics = [nd for nd in spec.nodes if nd.kind in VARIABLE_KINDS]
    procs = [nd for nd in spec.nodes if nd.kind == "process"]
    deaths = [nd for nd in spec.nodes if nd.kind == "death"]
    if len(deaths) > 1:
        raise SpecError("at most one death node is supported")
    if require_death and not deaths:
        raise SpecError("truncation requested but the system has no death node")
    death = deaths[0] if deaths else None
    n_rec = k_steps // record_every + 1
    rec_idx = np.arange(n_rec) * record_every
    times = rec_idx * step
    sqrt_h = np.sqrt(step)

    def chunk(start, stop):
        streams = rng.record_streams(seed, start, stop)
        size = stop - start
        vals: dict[str, np.ndarray] = {}
        for nd in statics:
            vals[nd.name] = draw_node(spec, nd, vals, streams, _STATIC_SLOT + spec.index(nd.name))
        static = dict(vals)
        cur = {}
        for nd in procs:
            d = nd.dist
            cur[nd.name] = d.get("init", 0.0) + d.get("init_sd", 0.0) * rng.normal(
                streams, _INIT_SLOT + spec.index(nd.name))
        rec = {nd.name: np.full((size, n_rec), np.nan) for nd in procs}
        for nd in procs:
            rec[nd.name][:, 0] = cur[nd.name]
        dtime = np.full(size, np.inf)
        frail = []
        if death is not None:
            frail = [static[p] for p in death.parents if spec.node(p).kind == "frailty"]
        width = len(procs) + 1
        for k in range(k_steps):
            t = k * step
            env = {**static, **cur}
            alive = dtime == np.inf
            base = _STEP_SLOT + k * width
            if death is not None:
                rate = hazard_rate(death.dist, env, size, frail)
                with np.errstate(divide="ignore"):
                    wait = rng.exponential(streams, base + len(procs)) / rate
                dies = alive & (wait < step)
                dtime[dies] = t + wait[dies]
            new = {}
            for p_i, nd in enumerate(procs):
                d = nd.dist
                drift = np.full(size, d.get("drift", 0.0))
                for par, c in d.coefficients.items():
                    drift = drift + c * env[par]
                noise = d.get("sd", 0.0) * sqrt_h * rng.normal(streams, base + p_i)
                new[nd.name] = cur[nd.name] + drift * step + noise
            cur = new
            if (k + 1) % record_every == 0:
                m = (k + 1) // record_every
                obs = dtime > (k + 1) * step
                for nd in procs:
                    rec[nd.name][obs, m] = cur[nd.name][obs]
        return static, rec, dtime

    parts = rng.map_chunks(chunk, n, workers)
    static = {nd.name: np.concatenate([p[0][nd.name] for p in parts]) for nd in statics}
    values = {nd.name: np.concatenate([p[1][nd.name] for p in parts]) for nd in procs}
    dtime = np.concatenate([p[2] for p in parts])
    censored = ~np.isfinite(dtime)
    dtime = np.where(censored, horizon, dtime)
    return PanelData(times, values, static, dtime, censored, horizon, step, seed, spec,
                     {"spec_hash": spec_hash(spec), "record_every": record_every})


@dataclass
class StepCheck:
    step: float
    value: float
    half_value: float
    se: float

    @property
    def gap(self) -> float:
        return abs(self.value - self.half_value)

    def converged(self, z: float = 3.0) -> bool:
        """True when the two runs differ by less than ``z`` combined standard errors."""
        return self.gap <= z * self.se


def step_halving_check(spec: SystemSpec, n: int, horizon: float, step: float, seed: int = 0,
                       statistic=None, workers: int = 1) -> StepCheck:
    """Rerun a process simulation at ``step / 2`` and compare a per-subject statistic.

    ``statistic(panel)`` returns one value per subject; the default is the
    indicator of death before the horizon.  The two runs use independent
    draws, so the comparison is against their combined Monte Carlo error.
    """
    if statistic is None:
        statistic = lambda panel: (~panel.censored).astype(float)  # noqa: E731
    vals = []
    for h, rec in ((step, 1), (step / 2, 2)):
        panel = simulate_process_system(spec, n, horizon, h, seed, workers, record_every=rec)
        vals.append(np.asarray(statistic(panel), dtype=float))
    se = float(np.sqrt(vals[0].var(ddof=1) / len(vals[0]) + vals[1].var(ddof=1) / len(vals[1])))
    return StepCheck(step, float(vals[0].mean()), float(vals[1].mean()), se)


# ---------------------------------------------------------------- analyses

@dataclass
class Regression:
    coef: dict[str, float]
    se: dict[str, float]
    n_obs: int


def _ols(xtx, xty, yty, n_obs, names) -> Regression:
    beta = np.linalg.solve(xtx, xty)
    rss = yty - 2 * beta @ xty + beta @ xtx @ beta
    sigma2 = rss / (n_obs - len(beta))
    cov = sigma2 * np.linalg.inv(xtx)
    return Regression(dict(zip(names, beta)), dict(zip(names, np.sqrt(np.diag(cov)))), n_obs)


def _regressor(panel: PanelData, name: str, m: int) -> np.ndarray:
    if name in panel.values:
        return panel.values[name][:, m]
    if name in panel.static:
        return panel.static[name]
    raise KeyError(f"panel has no node {name!r}")


def increment_regression(panel: PanelData, target: str, regressors: Sequence[str]) -> Regression:
    """OLS of ``(X(t+dt) - X(t)) / dt`` on regressor values at ``t``, among the alive.

    Uses every recorded interval at whose end the subject is still observed.
    Coefficients estimate the drift coefficients of ``target``.
    """
    names = ["const", *regressors]
    p = len(names)
    xtx, xty, yty, n_obs = np.zeros((p, p)), np.zeros(p), 0.0, 0
    y_arr = panel.values[target]
    for m in range(len(panel.times) - 1):
        dt = panel.times[m + 1] - panel.times[m]
        ok = panel.alive(m + 1)
        if not ok.any():
            continue
        y = (y_arr[ok, m + 1] - y_arr[ok, m]) / dt
        x = np.column_stack([np.ones(ok.sum())] + [_regressor(panel, r, m)[ok] for r in regressors])
        xtx += x.T @ x
        xty += x.T @ y
        yty += y @ y
        n_obs += len(y)
    return _ols(xtx, xty, yty, n_obs, names)


def cross_section_regression(panel: PanelData, target: str, regressors: Sequence[str],
                             m: int = -1) -> Regression:
    """OLS of ``target`` on regressors at recording index ``m`` among survivors."""
    m = m % len(panel.times)
    ok = panel.alive(m)
    y = _regressor(panel, target, m)[ok]
    x = np.column_stack([np.ones(ok.sum())] + [_regressor(panel, r, m)[ok] for r in regressors])
    return _ols(x.T @ x, x.T @ y, y @ y, len(y), ["const", *regressors])


def poisson_hazard_regression(panel: PanelData, covariates: Sequence[str], start: float = 0.0,
                              stop: float | None = None, baseline: bool = False,
                              tol: float = 1e-10, max_iter: int = 100) -> Regression:
    """Piecewise-exponential model ``log hazard = b0 + sum b_k x_k`` fitted by Newton.

    Person-time is split on the recording grid over ``[start, stop)``;
    covariates enter with their values at the start of each interval, or at
    ``start`` when ``baseline`` is true.
    """
    stop = panel.horizon if stop is None else stop
    m0 = int(np.searchsorted(panel.times, start - 1e-12))
    blocks = []
    for m in range(m0, len(panel.times) - 1):
        lo, hi = panel.times[m], min(panel.times[m + 1], stop)
        if lo >= stop - 1e-12:
            break
        at_risk = panel.alive(m)
        if not at_risk.any():
            continue
        dtm = panel.death_time[at_risk]
        died = (~panel.censored[at_risk]) & (dtm <= hi)
        expo = np.minimum(dtm, hi) - lo
        src = m0 if baseline else m
        x = np.column_stack([np.ones(at_risk.sum())]
                            + [_regressor(panel, c, src)[at_risk] for c in covariates])
        blocks.append((x, died.astype(float), expo))
    if not blocks:
        raise ValueError("no person-time in the analysis window")
    total_d = sum(b[1].sum() for b in blocks)
    total_e = sum(b[2].sum() for b in blocks)
    n_rows = sum(len(b[1]) for b in blocks)
    p = len(covariates) + 1

    def score(beta):
        g = np.zeros(p)
        for x, d, e in blocks:
            g += x.T @ (d - e * np.exp(x @ beta))
        return g / n_rows

    def info(beta):
        h = np.zeros((p, p))
        for x, d, e in blocks:
            mu = e * np.exp(x @ beta)
            h += (x * mu[:, None]).T @ x
        return h

    def negll(beta):
        s = 0.0
        for x, d, e in blocks:
            eta = x @ beta
            s += np.sum(e * np.exp(eta) - d * eta)
        return s / n_rows

    beta0 = np.zeros(p)
    beta0[0] = np.log(total_d / total_e) if total_d > 0 else 0.0
    beta, _, _ = newton(score, lambda b: -info(b) / n_rows, beta0, tol, max_iter, negll,
                        "Poisson hazard fit")
    cov = np.linalg.inv(info(beta))
    names = ["const", *covariates]
    return Regression(dict(zip(names, beta)), dict(zip(names, np.sqrt(np.diag(cov)))), n_rows)


@dataclass(frozen=True)
class SurvivorAnalysis:
    """Cohort of survivors at ``start`` followed to ``stop``."""

    exposure: str = "V"
    severity: str = "Y"
    start: float = 0.0
    stop: float | None = None


@dataclass
class SurvivorBiasReport:
    naive: float
    naive_se: float
    adjusted: float
    adjusted_se: float
    truth: float
    cross_sectional_hr: float
    cross_sectional_ci: tuple[float, float]
    n_at_start: int
    sign_reversal: bool

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def survivor_bias_report(panel: PanelData, analysis: SurvivorAnalysis) -> SurvivorBiasReport:
    """Naive vs severity-adjusted hazard analyses of survivors, against the truth.

    ``naive`` is the log hazard ratio per unit of the (time-updated) exposure
    without the severity process; ``adjusted`` adds the severity process;
    ``truth`` is the exposure coefficient of the generating death node.
    ``cross_sectional_hr`` compares survivors above vs below the median
    exposure at ``start``.
    """
    spec = panel.spec
    for name in (analysis.exposure, analysis.severity):
        if name not in panel.values and name not in panel.static:
            raise KeyError(f"analysis references absent node {name!r}")
    deaths = [] if spec is None else spec.of_kind("death")
    if not deaths:
        raise SpecError("panel carries no generating death node")
    truth = float(deaths[0].dist.coefficients.get(analysis.exposure, 0.0))
    naive = poisson_hazard_regression(panel, [analysis.exposure], analysis.start, analysis.stop)
    adj = poisson_hazard_regression(panel, [analysis.exposure, analysis.severity],
                                    analysis.start, analysis.stop)
    m0 = int(np.searchsorted(panel.times, analysis.start - 1e-12))
    alive = panel.alive(m0)
    x0 = _regressor(panel, analysis.exposure, m0)
    high = x0 > np.median(x0[alive])
    stop = panel.horizon if analysis.stop is None else analysis.stop
    surv = SurvivalData(
        high[alive].astype(np.int8),
        np.minimum(panel.death_time[alive], stop),
        (~panel.censored[alive]) & (panel.death_time[alive] <= stop),
        np.full(alive.sum(), panel.times[m0]),
        stop,
    )
    hr, lo, hi = naive_hr(surv, panel.times[m0], stop)
    b_naive, b_adj = naive.coef[analysis.exposure], adj.coef[analysis.exposure]
    reversal = bool(np.sign(b_naive) != np.sign(truth) and np.sign(b_adj) == np.sign(truth))
    return SurvivorBiasReport(
        float(b_naive), float(naive.se[analysis.exposure]),
        float(b_adj), float(adj.se[analysis.exposure]), truth,
        hr, (lo, hi), int(alive.sum()), reversal,
    )
