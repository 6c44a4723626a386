"""Marginal effect estimators: g-formula, inverse weighting, weighted GEE.

All three target ``E_ex[Y | A = a]``, the mean outcome under the measure in
which the exposure no longer listens to its confounders.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import expit

from . import rng
from .measures import (
    ConvergenceError,
    PositivityError,
    WeightVector,
    exact_conditional_change,
    exposure_node,
    fit_propensity,
    newton,
    true_weights,
)
from .sim import Dataset, apply_do, exact_joint, observational_marginal
from .specio import DistSpec, SystemSpec

QUADRATURE_POINTS = 128


class SupportError(ValueError):
    """The outcome model is not available on the covariate support."""


# ---------------------------------------------------------------- g-formula

@dataclass(frozen=True)
class BoundedDensity:
    """A one-dimensional covariate density on ``[low, high]``."""

    pdf: Callable[[np.ndarray], np.ndarray]
    low: float
    high: float


def _cond_value(cond, a, c):
    if callable(cond):
        return cond(a, c)
    try:
        return cond[(a, c)]
    except KeyError:
        raise SupportError(f"outcome model has no value at A={a}, C={c}") from None


def g_formula(cond, cov, a) -> float:
    """Standardized mean ``sum_c E[Y | A=a, C=c] P(C=c)``.

    Parameters
    ----------
    cond : callable ``(a, c) -> E[Y | A=a, C=c]`` or mapping keyed by ``(a, c)``
    cov : mapping ``c -> P(C=c)`` for discrete covariates, or a
        :class:`BoundedDensity`; the integral is then a fixed 128-point
        Gauss-Legendre rule on the declared support.
    a : exposure value
    """
    if isinstance(cov, BoundedDensity):
        if not (math.isfinite(cov.low) and math.isfinite(cov.high)) or cov.high <= cov.low:
            raise ValueError("g-formula quadrature needs a bounded covariate support")
        x, w = np.polynomial.legendre.leggauss(QUADRATURE_POINTS)
        half = 0.5 * (cov.high - cov.low)
        c = cov.low + half * (x + 1.0)
        dens = np.asarray(cov.pdf(c), dtype=float)
        mass = half * np.sum(w * dens)
        if abs(mass - 1.0) > 1e-6:
            raise SupportError(f"covariate density integrates to {mass:.8f} on its support")
        vals = np.array([_cond_value(cond, a, ci) for ci in c], dtype=float)
        return float(half * np.sum(w * dens * vals))
    total = math.fsum(cov.values())
    if abs(total - 1.0) > 1e-9:
        raise SupportError(f"covariate probabilities sum to {total}")
    return float(math.fsum(_cond_value(cond, a, c) * p for c, p in cov.items() if p > 0))


def _roles(spec: SystemSpec, exposure: str | None, outcome: str | None):
    node = exposure_node(spec, exposure)
    if outcome is None:
        outs = spec.of_kind("outcome")
        if len(outs) != 1:
            raise ValueError("name the outcome node explicitly")
        outcome = outs[0].name
    return node.name, outcome, node.parents


def g_formula_exact(spec: SystemSpec, a: float, exposure: str | None = None,
                    outcome: str | None = None) -> float:
    """g-formula evaluated on the exact joint, adjusting for the exposure's parents."""
    exposure, outcome, cov_names = _roles(spec, exposure, outcome)
    table = exact_joint(spec)
    cov = {k: float(v) for k, v in table.marginal(cov_names).items()}

    def cond(a_, c):
        given = dict(zip(cov_names, c))
        given[exposure] = a_
        law = table.conditional(outcome, given)
        return sum(y * p for y, p in law.items())

    return g_formula(cond, cov, a)


def g_formula_plugin(data: Dataset, a: float, exposure: str, outcome: str,
                     covariates: Sequence[str]) -> float:
    """g-formula with cell-frequency estimates of ``E[Y | A, C]`` and ``P(C)``."""
    covariates = tuple(covariates)
    if covariates:
        cv = np.column_stack([data[c] for c in covariates])
        keys, inv = np.unique(cv, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
    else:
        keys, inv = np.zeros((1, 0)), np.zeros(data.n, dtype=int)
    at = data[exposure] == a
    y = data[outcome]
    cov, cond = {}, {}
    for j, key in enumerate(keys):
        c = tuple(float(v) for v in key)
        rows = inv == j
        cov[c] = rows.sum() / data.n
        cell = rows & at
        if cell.any():
            cond[(a, c)] = float(y[cell].mean())
    return g_formula(cond, cov, a)


def post_surgery_mean(spec: SystemSpec, a: float, exposure: str | None = None,
                      outcome: str | None = None, marginal: DistSpec | None = None) -> float:
    """``E_ex[Y | A=a]`` from the exact joint of the intervened system."""
    exposure, outcome, _ = _roles(spec, exposure, outcome)
    marginal = marginal or observational_marginal(spec, exposure)
    table = exact_joint(apply_do(spec, exposure, marginal))
    law = table.conditional(outcome, {exposure: a})
    return float(sum(y * p for y, p in law.items()))


# ---------------------------------------------------------------- IPW

def naive_mean(data: Dataset, a: float, exposure: str = "A", outcome: str = "Y") -> float:
    at = data[exposure] == a
    if not at.any():
        raise ValueError(f"no records with {exposure}={a}")
    return float(data[outcome][at].mean())


def ipw_mean(data: Dataset, wv: WeightVector, a: float, exposure: str = "A",
             outcome: str = "Y") -> float:
    """``(1 / #{A_i = a}) * sum_{A_i = a} Z_i Y_i`` with ``Z`` the stabilized weight."""
    at = data[exposure] == a
    count = int(at.sum())
    if count == 0:
        raise ValueError(f"no records with {exposure}={a}")
    z = wv.ws[at]
    if not np.all(np.isfinite(z)) or np.any(z <= 0):
        raise PositivityError("non-finite or non-positive weights among exposed records")
    return float(np.sum(z * data[outcome][at]) / count)


# ---------------------------------------------------------------- weighted GEE

@dataclass(frozen=True)
class MarginalModel:
    """Marginal mean model ``E_ex[Y | A=a] = g(a; beta)`` and its gradient ``D``."""

    form: str
    levels: tuple[float, ...] = ()
    beta: np.ndarray | None = field(default=None, compare=False)
    g_fn: Callable | None = field(default=None, compare=False)
    dg_fn: Callable | None = field(default=None, compare=False)
    n_params: int = 0
    iterations: int = field(default=0, compare=False)
    norm: float = field(default=float("nan"), compare=False)

    @classmethod
    def saturated(cls, levels: Sequence[float]) -> "MarginalModel":
        return cls("saturated-discrete", tuple(float(v) for v in levels), n_params=len(levels))

    @classmethod
    def linear(cls) -> "MarginalModel":
        return cls("linear", n_params=2)

    @classmethod
    def logistic(cls) -> "MarginalModel":
        return cls("logistic", n_params=2)

    @classmethod
    def custom(cls, g: Callable, n_params: int, dg: Callable | None = None) -> "MarginalModel":
        """User form ``g(a_array, beta) -> means``; ``dg`` defaults to finite differences."""
        return cls("custom", g_fn=g, dg_fn=dg, n_params=n_params)

    @property
    def dim(self) -> int:
        return self.n_params

    def _beta(self, beta):
        b = self.beta if beta is None else beta
        if b is None:
            raise ValueError("model has no parameters yet")
        return np.asarray(b, dtype=float)

    def g(self, a, beta=None) -> np.ndarray:
        a = np.atleast_1d(np.asarray(a, dtype=float))
        b = self._beta(beta)
        if self.form == "saturated-discrete":
            out = np.full(a.shape, np.nan)
            for j, lev in enumerate(self.levels):
                out[a == lev] = b[j]
            return out
        if self.form == "linear":
            return b[0] + b[1] * a
        if self.form == "logistic":
            return expit(b[0] + b[1] * a)
        return np.asarray(self.g_fn(a, b), dtype=float)

    def dg(self, a, beta=None) -> np.ndarray:
        """Gradient of ``g`` in ``beta``, one row per exposure value."""
        a = np.atleast_1d(np.asarray(a, dtype=float))
        b = self._beta(beta)
        if self.form == "saturated-discrete":
            return (a[:, None] == np.asarray(self.levels)[None, :]).astype(float)
        if self.form == "linear":
            return np.column_stack([np.ones_like(a), a])
        if self.form == "logistic":
            p = expit(b[0] + b[1] * a)
            v = p * (1 - p)
            return np.column_stack([v, v * a])
        if self.dg_fn is not None:
            return np.asarray(self.dg_fn(a, b), dtype=float)
        cols = []
        for j in range(len(b)):
            h = 1e-6 * (1 + abs(b[j]))
            up, dn = b.copy(), b.copy()
            up[j] += h
            dn[j] -= h
            cols.append((self.g(a, up) - self.g(a, dn)) / (2 * h))
        return np.column_stack(cols)


def estimating_function(data: Dataset, wv: WeightVector, model: MarginalModel, beta,
                        exposure: str = "A", outcome: str = "Y") -> np.ndarray:
    """``(1/n) sum_i W_S,i D(A_i; beta) [Y_i - g(A_i; beta)]``."""
    a, y = data[exposure], data[outcome]
    resid = wv.ws * (y - model.g(a, beta))
    return model.dg(a, beta).T @ resid / data.n


def fit_wgee(data: Dataset, wv: WeightVector, model: MarginalModel, exposure: str = "A",
             outcome: str = "Y", tol: float = 1e-10, max_iter: int = 200) -> MarginalModel:
    """Solve the weighted estimating equation by damped Newton.

    Converged when the norm of the (per-record) estimating function drops
    below ``tol``.  Raises :class:`ConvergenceError` otherwise, or when the
    Jacobian is singular.
    """
    a, y = data[exposure], data[outcome]
    ws = wv.ws
    if np.any(~np.isfinite(ws)) or np.any(ws <= 0):
        raise PositivityError("weights must be finite and positive")
    if model.form == "saturated-discrete":
        beta0 = []
        for lev in model.levels:
            at = a == lev
            if not at.any():
                raise ConvergenceError(f"level {lev} not observed: model not identifiable")
            beta0.append(y[at].mean())
        beta0 = np.array(beta0)
    else:
        beta0 = np.zeros(model.dim)

    def score(b):
        return estimating_function(data, wv, model, b, exposure, outcome)

    if model.form == "custom":
        def jac(b):
            cols = []
            for j in range(len(b)):
                h = 1e-6 * (1 + abs(b[j]))
                up, dn = b.copy(), b.copy()
                up[j] += h
                dn[j] -= h
                cols.append((score(up) - score(dn)) / (2 * h))
            return np.column_stack(cols)
    else:
        def jac(b):
            d = model.dg(a, b)
            return -(d * ws[:, None]).T @ d / data.n

    beta, it, norm = newton(score, jac, beta0, tol, max_iter, what="weighted GEE")
    return replace(model, beta=beta, iterations=it, norm=norm)


# ---------------------------------------------------------------- contrasts

@dataclass
class EffectEstimate:
    method: str
    means: dict[float, float]
    se: dict[float, float] = field(default_factory=dict)
    ci: dict[float, tuple[float, float]] = field(default_factory=dict)

    def difference(self, a1, a0) -> float:
        return contrast(self, a1, a0)[0]

    def ratio(self, a1, a0) -> float:
        return contrast(self, a1, a0)[1]

    def records(self) -> list[dict]:
        out = []
        for lev in sorted(self.means):
            lo, hi = self.ci.get(lev, (None, None))
            out.append({
                "method": self.method,
                "level": lev,
                "estimate": self.means[lev],
                "se": self.se.get(lev),
                "ci_low": lo,
                "ci_high": hi,
            })
        return out


def contrast(est: EffectEstimate, a1, a0) -> tuple[float, float]:
    """Difference and ratio of the marginal means at ``a1`` and ``a0``."""
    for lev in (a1, a0):
        if lev not in est.means:
            raise KeyError(f"level {lev} missing from {est.method} estimate")
    m1, m0 = est.means[a1], est.means[a0]
    if m0 == 0:
        raise ZeroDivisionError(f"ratio undefined: mean at {a0} is zero")
    return m1 - m0, m1 / m0


def exact_effects(spec: SystemSpec, levels: Sequence[float] | None = None,
                  exposure: str | None = None, outcome: str | None = None) -> dict[str, EffectEstimate]:
    """The three exact routes to ``E_ex[Y | A=a]`` on a discrete system."""
    exposure, outcome, _ = _roles(spec, exposure, outcome)
    if levels is None:
        from .specio import support

        levels = support(spec, exposure)
    out = {}
    out["g-formula-exact"] = EffectEstimate(
        "g-formula-exact", {a: g_formula_exact(spec, a, exposure, outcome) for a in levels})
    out["change-of-measure-exact"] = EffectEstimate(
        "change-of-measure-exact",
        {a: exact_conditional_change(spec, outcome, a, exposure) for a in levels})
    out["post-surgery-exact"] = EffectEstimate(
        "post-surgery-exact", {a: post_surgery_mean(spec, a, exposure, outcome) for a in levels})
    return out


# ---------------------------------------------------------------- bootstrap

class BootstrapError(RuntimeError):
    pass


@dataclass
class BootstrapResult:
    estimate: dict
    se: dict
    ci_low: dict
    ci_high: dict
    replicates: np.ndarray
    keys: tuple
    failures: int = 0

    def interval(self, key=None) -> tuple[float, float]:
        key = self.keys[0] if key is None else key
        return self.ci_low[key], self.ci_high[key]


def resample_indices(n: int, seed: int, b: int) -> np.ndarray:
    """Record indices of bootstrap replicate ``b`` (stream ``derive(seed, b)``)."""
    stream = rng.derive(seed, b)
    u = rng.uniform(rng.derive(stream, np.arange(n, dtype=np.uint64)), 0)
    return np.minimum((u * n).astype(np.int64), n - 1)


_RECOVERABLE = (ValueError, ArithmeticError, ConvergenceError, np.linalg.LinAlgError)


def _as_mapping(value) -> dict:
    if isinstance(value, Mapping):
        return {k: float(v) for k, v in value.items()}
    if isinstance(value, EffectEstimate):
        return dict(value.means)
    if np.ndim(value) == 1:
        return {j: float(v) for j, v in enumerate(value)}
    return {0: float(value)}


def bootstrap_ci(estimator: Callable[[Dataset], object], data: Dataset, B: int, seed: int,
                 workers: int = 1, level: float = 0.95, max_failure: float = 0.01) -> BootstrapResult:
    """Nonparametric bootstrap with percentile intervals.

    ``estimator`` maps a dataset to a number, a sequence, or a mapping of
    named values; it must refit any estimated weights itself.
    """
    if B < 100:
        raise ValueError("bootstrap needs B >= 100")
    full = _as_mapping(estimator(data))
    keys = tuple(full)

    def run(start, stop):
        rows, fails = [], 0
        for b in range(start, stop):
            try:
                est = _as_mapping(estimator(data.take(resample_indices(data.n, seed, b))))
                rows.append([est[k] for k in keys])
            except _RECOVERABLE:
                fails += 1
                rows.append([np.nan] * len(keys))
        return rows, fails

    parts = rng.map_chunks(run, B, workers)
    reps = np.array([r for p in parts for r in p[0]], dtype=float).reshape(B, len(keys))
    failures = sum(p[1] for p in parts)
    if failures > max_failure * B:
        raise BootstrapError(f"estimator failed in {failures} of {B} replicates")
    ok = reps[~np.isnan(reps).any(axis=1)]
    alpha = (1 - level) / 2
    lo = np.percentile(ok, 100 * alpha, axis=0)
    hi = np.percentile(ok, 100 * (1 - alpha), axis=0)
    sd = ok.std(axis=0, ddof=1)
    return BootstrapResult(
        full,
        {k: float(sd[j]) for j, k in enumerate(keys)},
        {k: float(lo[j]) for j, k in enumerate(keys)},
        {k: float(hi[j]) for j, k in enumerate(keys)},
        reps,
        keys,
        failures,
    )


# estimator factories for bootstrap_ci --------------------------------------

def naive_estimator(levels, exposure="A", outcome="Y"):
    def est(d: Dataset):
        return {a: naive_mean(d, a, exposure, outcome) for a in levels}
    return est


def ipw_estimator(levels, exposure="A", outcome="Y", spec: SystemSpec | None = None,
                  covariates: Sequence[str] = (), form: str = "frequency-table",
                  cap: float | None = None):
    """IPW means; weights from ``spec`` when given, else refit on each sample."""
    def est(d: Dataset):
        if spec is not None:
            wv = true_weights(spec, d, exposure)
        else:
            wv = fit_propensity(d, exposure, covariates, form).weights(d)
        if cap is not None:
            wv = wv.capped(cap)
        return {a: ipw_mean(d, wv, a, exposure, outcome) for a in levels}
    return est


def gformula_estimator(levels, exposure="A", outcome="Y", covariates: Sequence[str] = ()):
    def est(d: Dataset):
        return {a: g_formula_plugin(d, a, exposure, outcome, covariates) for a in levels}
    return est


def wgee_estimator(model: MarginalModel, exposure="A", outcome="Y", spec: SystemSpec | None = None,
                   covariates: Sequence[str] = (), form: str = "frequency-table"):
    def est(d: Dataset):
        if spec is not None:
            wv = true_weights(spec, d, exposure)
        else:
            wv = fit_propensity(d, exposure, covariates, form).weights(d)
        return fit_wgee(d, wv, model, exposure, outcome).beta
    return est
