"""Weights and change of probability measure.

For an exposure ``A`` with parents ``C`` the unstabilized weight is
``W = 1 / f(A | C)`` and the stabilized weight is ``W_S = f(A) / f(A | C)``.
When the interventional exposure law equals the observational marginal,
``W_S`` is the density of the interventional measure with respect to the
observational one, so ``E_obs[W_S] = 1`` and ``E_ex[Q | A] = E_obs[W_S Q | A]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import stats
from scipy.special import expit

from .sim import (
    Dataset,
    JointTable,
    bernoulli_prob,
    exact_joint,
    observational_marginal,
)
from .specio import TABLE, DistSpec, NodeSpec, SpecError, SystemSpec, dist_support, support


class PositivityError(ValueError):
    """Some record has zero probability of its own exposure level."""


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, norm: float = float("nan"), iterations: int = 0):
        super().__init__(message)
        self.norm = norm
        self.iterations = iterations


@dataclass
class WeightVector:
    w: np.ndarray
    ws: np.ndarray
    source: str = "true-model"
    cap: float | None = None

    def __len__(self) -> int:
        return len(self.ws)

    @property
    def z(self) -> np.ndarray:
        """Radon-Nikodym values; equal to the stabilized weights."""
        return self.ws

    def take(self, idx) -> "WeightVector":
        return WeightVector(self.w[idx], self.ws[idx], self.source, self.cap)

    def capped(self, cap: float) -> "WeightVector":
        """Truncate both weight columns at ``cap`` (recorded on the result)."""
        if cap <= 0:
            raise ValueError("weight cap must be positive")
        return WeightVector(np.minimum(self.w, cap), np.minimum(self.ws, cap), self.source, cap)


def exposure_node(spec: SystemSpec, exposure: str | None = None) -> NodeSpec:
    if exposure is not None:
        return spec.node(exposure)
    found = spec.of_kind("exposure")
    if len(found) != 1:
        raise SpecError(f"expected exactly one exposure node, found {len(found)}")
    return found[0]


def _density(dist: DistSpec, x: np.ndarray, values: Mapping[str, np.ndarray]) -> np.ndarray:
    size = len(x)
    fam = dist.family
    if fam == "bernoulli":
        p = bernoulli_prob(dist, values, size)
        return np.where(x == 1, p, np.where(x == 0, 1 - p, 0.0))
    if fam == "categorical":
        out = np.zeros(size)
        for v, p in zip(dist_support(dist), dist.get("p")):
            out[x == v] += p
        return out
    if fam == "gaussian":
        mean = np.full(size, dist.get("mean", 0.0))
        for k, c in dist.coefficients.items():
            mean = mean + c * values[k]
        sd = np.sqrt(dist.get("var", 1.0))
        if sd == 0:
            return np.where(x == mean, np.inf, 0.0)
        return stats.norm.pdf(x, mean, sd)
    raise SpecError(f"no density for family {fam}")


def conditional_density(spec: SystemSpec, name: str, data: Dataset) -> np.ndarray:
    """``f(x_i | parents_i)`` for each record, from the system's declared law."""
    node = spec.node(name)
    values = {k: data[k] for k in node.parents}
    x = data[name]
    if node.dist.family != TABLE:
        return _density(node.dist, x, values)
    out = np.zeros(data.n)
    pv = np.column_stack([values[p] for p in node.parents])
    for pat, row in node.dist.rows:
        mask = np.all(pv == np.asarray(pat), axis=1)
        if mask.any():
            out[mask] = _density(row, x[mask], {k: v[mask] for k, v in values.items()})
    return out


def _gaussian_marginal(spec: SystemSpec, name: str,
                       fixed: Mapping[str, float] | None = None) -> tuple[float, float]:
    """Mean and variance of a node in a linear-Gaussian ancestor system.

    Nodes in ``fixed`` are held at the given values (zero variance).
    """
    fixed = fixed or {}
    order = list(spec.ancestors(name)) + [name]
    mean: dict[str, float] = {}
    cov: dict[tuple[str, str], float] = {}
    for k in order:
        if k in fixed:
            mean[k] = float(fixed[k])
            for j in list(mean):
                cov[(k, j)] = cov[(j, k)] = 0.0
            continue
        node = spec.node(k)
        if node.dist.family != "gaussian":
            raise SpecError(
                f"implied marginal of {name} needs discrete or linear-Gaussian ancestors; "
                f"{k} is {node.dist.family}"
            )
        b = node.dist.coefficients
        mean[k] = node.dist.get("mean", 0.0) + sum(c * mean[p] for p, c in b.items())
        for j in mean:
            if j == k:
                continue
            cov[(k, j)] = cov[(j, k)] = sum(c * cov[(p, j)] for p, c in b.items())
        cov[(k, k)] = node.dist.get("var", 1.0) + sum(
            ci * cj * cov[(pi, pj)] for pi, ci in b.items() for pj, cj in b.items()
        )
    return mean[name], cov[(name, name)]


def marginal_density(spec: SystemSpec, name: str, x: np.ndarray) -> np.ndarray:
    """Implied observational marginal ``f(x)`` of a node, evaluated at ``x``.

    Discrete nodes use exact enumeration.  A Gaussian node whose discrete
    ancestors have only discrete ancestors of their own is a finite mixture
    of normals, one per configuration of those discrete ancestors.
    """
    x = np.asarray(x, dtype=float)
    keep = list(spec.ancestors(name)) + [name]
    if all(support(spec, k) is not None for k in keep):
        return _density(observational_marginal(spec, name), x, {})
    disc = [k for k in keep[:-1] if support(spec, k) is not None]
    if not disc:
        m, v = _gaussian_marginal(spec, name)
        return stats.norm.pdf(x, m, np.sqrt(v))
    closure = set(disc)
    for k in disc:
        closure.update(spec.ancestors(k))
    if any(support(spec, k) is None for k in closure):
        raise SpecError(f"implied marginal of {name}: a discrete ancestor depends on a continuous node")
    sub = SystemSpec(spec.name, tuple(n for n in spec.nodes if n.name in closure))
    table = exact_joint(sub)
    out = np.zeros_like(x)
    for cfg, p in table.marginal(disc).items():
        if p == 0:
            continue
        m, v = _gaussian_marginal(spec, name, dict(zip(disc, cfg)))
        out += float(p) * stats.norm.pdf(x, m, np.sqrt(v))
    return out


def true_weights(spec: SystemSpec, data: Dataset, exposure: str | None = None,
                 marginal: DistSpec | None = None) -> WeightVector:
    """Weights from the data-generating spec.

    ``marginal`` is the interventional exposure law; by default it is the
    implied observational marginal, which makes ``ws`` the stabilized weight.
    """
    node = exposure_node(spec, exposure)
    a = data[node.name]
    fac = conditional_density(spec, node.name, data)
    if np.any(fac <= 0):
        i = int(np.flatnonzero(fac <= 0)[0])
        cell = {p: float(data[p][i]) for p in node.parents}
        raise PositivityError(
            f"positivity violated: f({node.name}={a[i]:g} | {cell}) = 0 at record {i}"
        )
    if marginal is None:
        fa = marginal_density(spec, node.name, a)
    else:
        fa = _density(marginal, a, {})
    return WeightVector(1.0 / fac, fa / fac, "true-model")


def exact_weight_table(spec: SystemSpec, exposure: str | None = None) -> tuple[JointTable, WeightVector]:
    """Weights on every cell of the exact joint of a discrete system."""
    table = exact_joint(spec)
    cells, _ = table.as_dataset()
    return table, true_weights(spec, cells, exposure)


def exact_conditional_change(spec: SystemSpec, q: str, a: float, exposure: str | None = None) -> float:
    """``E_obs[Z Q | A = a]`` by enumeration."""
    node = exposure_node(spec, exposure)
    table, wv = exact_weight_table(spec, node.name)
    prob = np.asarray(table.prob, dtype=float)
    at = table.column(node.name) == a
    den = prob[at].sum()
    if den == 0:
        raise ZeroDivisionError(f"P({node.name}={a}) = 0")
    return float(np.sum(prob[at] * wv.ws[at] * table.column(q)[at]) / den)


# ---------------------------------------------------------------- estimation

@dataclass
class PropensityModel:
    form: str
    exposure: str
    covariates: tuple[str, ...]
    levels: tuple[float, ...]
    marginal: dict[float, float]
    cells: dict[tuple, dict[float, float]] = field(default_factory=dict)
    coef: np.ndarray | None = None
    fitted_on: str | None = None
    iterations: int = 0

    def prob(self, data: Dataset) -> np.ndarray:
        """Fitted ``f(A_i | C_i)``."""
        a = data[self.exposure]
        if self.form == "frequency-table":
            out = np.zeros(data.n)
            if self.covariates:
                cv = np.column_stack([data[c] for c in self.covariates])
                keys, inv = np.unique(cv, axis=0, return_inverse=True)
                inv = inv.reshape(-1)
            else:
                keys, inv = np.zeros((1, 0)), np.zeros(data.n, dtype=int)
            for j, key in enumerate(keys):
                law = self.cells.get(tuple(float(v) for v in key))
                if law is None:
                    raise PositivityError(f"covariate cell {dict(zip(self.covariates, key))} unseen in fit")
                rows = inv == j
                for lev, p in law.items():
                    out[rows & (a == lev)] = p
            return out
        x = np.column_stack([np.ones(data.n)] + [data[c] for c in self.covariates])
        p1 = expit(x @ self.coef)
        return np.where(a == self.levels[1], p1, 1 - p1)

    def marginal_prob(self, data: Dataset) -> np.ndarray:
        a = data[self.exposure]
        out = np.zeros(data.n)
        for lev, p in self.marginal.items():
            out[a == lev] = p
        return out

    def weights(self, data: Dataset) -> WeightVector:
        fac = self.prob(data)
        if np.any(fac <= 0):
            i = int(np.flatnonzero(fac <= 0)[0])
            raise PositivityError(f"estimated f(A|C) = 0 at record {i}")
        return WeightVector(1.0 / fac, self.marginal_prob(data) / fac, "estimated")


def newton(score, jacobian, beta0, tol: float, max_iter: int, objective=None, what="Newton"):
    """Damped Newton on ``score(beta) = 0``.

    The step is halved until ``objective`` (default: the score norm)
    improves.  Returns ``(beta, iterations, final_norm)``.
    """
    beta = np.asarray(beta0, dtype=float).copy()
    objective = objective or (lambda b: np.linalg.norm(score(b)))
    g = score(beta)
    norm = float(np.linalg.norm(g))
    obj = objective(beta)
    for it in range(max_iter + 1):
        if norm < tol:
            return beta, it, norm
        if it == max_iter:
            break
        jac = jacobian(beta)
        try:
            step = np.linalg.solve(jac, -g)
        except np.linalg.LinAlgError:
            raise ConvergenceError(f"{what}: singular Jacobian (collinear design)", norm, it) from None
        if not np.all(np.isfinite(step)):
            raise ConvergenceError(f"{what}: singular Jacobian (collinear design)", norm, it)
        t = 1.0
        for _ in range(60):
            cand = beta + t * step
            cand_obj = objective(cand)
            cand_g = score(cand)
            cand_norm = float(np.linalg.norm(cand_g))
            if np.isfinite(cand_obj) and cand_obj < obj:
                break
            # objective flat at rounding level: fall back to the score norm
            if cand_obj <= obj + 1e-13 * abs(obj) and cand_norm < norm:
                break
            t *= 0.5
        else:
            raise ConvergenceError(f"{what}: line search failed, norm {norm:.3e}", norm, it)
        beta, obj, g, norm = cand, cand_obj, cand_g, cand_norm
    raise ConvergenceError(f"{what}: no convergence after {max_iter} iterations, norm {norm:.3e}",
                           norm, max_iter)


def _fit_logistic(x: np.ndarray, y: np.ndarray, tol: float = 1e-10, max_iter: int = 100):
    n = len(y)

    def score(b):
        return x.T @ (y - expit(x @ b)) / n

    def jac(b):
        p = expit(x @ b)
        return -(x * (p * (1 - p))[:, None]).T @ x / n

    def negloglik(b):
        eta = x @ b
        return float(np.sum(np.logaddexp(0, eta) - y * eta) / n)

    return newton(score, jac, np.zeros(x.shape[1]), tol, max_iter, negloglik, "logistic fit")


def fit_propensity(data: Dataset, exposure: str, covariates: Sequence[str] = (),
                   form: str = "frequency-table", levels: Sequence[float] | None = None) -> PropensityModel:
    """Estimate ``f(A | C)`` and ``f(A)`` from a sample.

    ``frequency-table`` uses cell proportions and needs every exposure level
    in every covariate cell; ``logistic-linear`` is the maximum-likelihood
    logistic regression on ``[1, C]`` for a binary exposure.
    """
    covariates = tuple(covariates)
    a = data[exposure]
    levels = tuple(sorted(float(v) for v in (np.unique(a) if levels is None else levels)))
    if len(levels) < 2:
        raise PositivityError(
            f"exposure {exposure} takes the single level {levels[0] if levels else None}; "
            "no contrast is identifiable"
        )
    marginal = {lev: float(np.mean(a == lev)) for lev in levels}
    ident = f"seed={data.seed},n={data.n}"
    if form == "frequency-table":
        cells: dict[tuple, dict[float, float]] = {}
        if covariates:
            cv = np.column_stack([data[c] for c in covariates])
            keys, inv = np.unique(cv, axis=0, return_inverse=True)
            inv = inv.reshape(-1)
        else:
            keys, inv = np.zeros((1, 0)), np.zeros(data.n, dtype=int)
        for j, key in enumerate(keys):
            rows = inv == j
            total = rows.sum()
            law = {}
            for lev in levels:
                count = int(np.sum(rows & (a == lev)))
                if count == 0:
                    cell = dict(zip(covariates, (float(v) for v in key)))
                    raise PositivityError(f"empty cell: no records with {exposure}={lev:g} in {cell}")
                law[lev] = float(count / total)
            cells[tuple(float(v) for v in key)] = law
        return PropensityModel(form, exposure, covariates, levels, marginal, cells=cells, fitted_on=ident)
    if form == "logistic-linear":
        if len(levels) != 2:
            raise ValueError("logistic-linear propensity needs a binary exposure")
        x = np.column_stack([np.ones(data.n)] + [data[c] for c in covariates])
        y = (a == levels[1]).astype(float)
        coef, it, _ = _fit_logistic(x, y)
        p = expit(x @ coef)
        if np.any(p <= 0) or np.any(p >= 1):
            raise PositivityError("fitted propensities reach 0 or 1 (separation)")
        return PropensityModel(form, exposure, covariates, levels, marginal, coef=coef,
                               fitted_on=ident, iterations=it)
    raise ValueError(f"unknown propensity form {form!r}")


def estimated_weights(data: Dataset, exposure: str, covariates: Sequence[str] = (),
                      form: str = "frequency-table") -> WeightVector:
    return fit_propensity(data, exposure, covariates, form).weights(data)


# ---------------------------------------------------------------- change of measure

def reweighted_expectation(data: Dataset, wv: WeightVector, q: str | np.ndarray, a: float,
                           exposure: str = "A") -> float:
    """Normalized weighted mean of ``q`` among records with ``exposure == a``."""
    at = data[exposure] == a
    if not at.any():
        raise ValueError(f"no records with {exposure}={a}")
    qv = data[q] if isinstance(q, str) else np.asarray(q, dtype=float)
    ws = wv.ws[at]
    return float(np.sum(ws * qv[at]) / np.sum(ws))


@dataclass
class WeightReport:
    n: int
    mean: float
    max: float
    min: float
    ess: float
    cap: float | None = None


def weight_diagnostics(wv: WeightVector, freq: np.ndarray | None = None) -> WeightReport:
    """Mean, extremes and effective sample size ``(sum ws)^2 / sum ws^2`` of ``ws``.

    ``freq`` gives record frequencies (for instance cell probabilities of an
    exact joint); the mean is then frequency weighted.
    """
    ws = np.asarray(wv.ws, dtype=float)
    if len(ws) == 0:
        raise ValueError("empty weight vector")
    f = np.ones_like(ws) if freq is None else np.asarray(freq, dtype=float)
    mean = float(np.sum(f * ws) / np.sum(f))
    ess = float(np.sum(f * ws) ** 2 / np.sum(f * ws**2))
    return WeightReport(len(ws), mean, float(ws.max()), float(ws.min()), ess, wv.cap)
