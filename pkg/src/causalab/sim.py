"""Sampling and exact enumeration of structural systems.

Random draws come from :mod:`causalab.rng`: record ``i`` uses the stream
``derive(seed, i)`` and node number ``j`` (declaration order) consumes draw
``j`` of that stream.  A dataset is therefore a pure function of
``(spec, n, seed)``, however the records are split across workers.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import expit

from . import rng
from .specio import (
    TABLE,
    DistSpec,
    NodeSpec,
    SpecError,
    SystemSpec,
    dist_support,
    spec_hash,
    support,
    validate,
)

VARIABLE_KINDS = ("covariate", "exposure", "outcome", "frailty")


@dataclass
class Dataset:
    """Rectangular i.i.d. sample, one column per node."""

    columns: dict[str, np.ndarray]
    n: int
    seed: int | None = None
    regime: str = "observational"
    spec_hash: str | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, col in self.columns.items():
            if len(col) != self.n:
                raise ValueError(f"column {name} has length {len(col)}, expected {self.n}")

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise KeyError(f"dataset has no column {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self.columns

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.columns)

    def take(self, idx: np.ndarray) -> "Dataset":
        idx = np.asarray(idx)
        cols = {k: v[idx] for k, v in self.columns.items()}
        return Dataset(cols, len(idx), self.seed, self.regime, self.spec_hash, dict(self.meta))

    def with_columns(self, **cols) -> "Dataset":
        new = dict(self.columns)
        new.update({k: np.asarray(v) for k, v in cols.items()})
        return Dataset(new, self.n, self.seed, self.regime, self.spec_hash, dict(self.meta))

    def metadata(self) -> dict:
        md = {"spec_hash": self.spec_hash, "seed": self.seed, "n": self.n, "regime": self.regime}
        md.update(self.meta)
        return md

    def to_csv(self, path, extra: Mapping[str, np.ndarray] | None = None) -> None:
        """Write the dataset (plus optional extra columns) and a ``.meta.json`` sidecar."""
        cols = dict(self.columns)
        if extra:
            cols.update(extra)
        names = list(cols)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names)
            arrays = [np.asarray(cols[k], dtype=float) for k in names]
            for row in zip(*arrays):
                w.writerow([format(x, ".17g") for x in row])
        md = self.metadata()
        if extra:
            md["extra_columns"] = sorted(extra)
        with open(str(path) + ".meta.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(md, fh, indent=2, sort_keys=True)
            fh.write("\n")


def read_csv(path) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    names, body = rows[0], rows[1:]
    arr = np.array(body, dtype=float).reshape(len(body), len(names))
    cols = {k: arr[:, j] for j, k in enumerate(names)}
    meta = {}
    try:
        with open(str(path) + ".meta.json", encoding="utf-8") as fh:
            meta = json.load(fh)
    except FileNotFoundError:
        pass
    return Dataset(
        cols, len(body), meta.pop("seed", None), meta.pop("regime", "observational"),
        meta.pop("spec_hash", None), {k: v for k, v in meta.items() if k != "n"},
    )


# ---------------------------------------------------------------- surgery

def apply_do(spec: SystemSpec, exposure: str, marginal: DistSpec) -> SystemSpec:
    """Graph surgery: cut every arrow into ``exposure`` and give it ``marginal``.

    All other nodes are returned untouched; the regime becomes experimental.
    """
    try:
        node = spec.node(exposure)
    except KeyError:
        raise SpecError(f"unknown node {exposure}") from None
    if node.kind != "exposure":
        raise SpecError(f"node {exposure} is a {node.kind}, not an exposure")
    if marginal.family == TABLE or marginal.coefficients:
        raise SpecError("the interventional marginal cannot depend on other nodes")
    new = NodeSpec(node.name, node.kind, (), marginal)
    intervened = spec.intervened if exposure in spec.intervened else spec.intervened + (exposure,)
    out = SystemSpec(spec.name, spec.replace_node(new).nodes, "experimental", intervened)
    errors = [d for d in validate(out) if d.severity == "error"]
    if errors:
        raise SpecError(f"surgery produced an invalid system: {errors[0]}", errors)
    return out


@lru_cache(maxsize=64)
def observational_marginal(spec: SystemSpec, name: str) -> DistSpec:
    """Marginal law of a discrete node implied by the system (``f_A`` of ``f_{A|C}``)."""
    keep = set(spec.ancestors(name)) | {name}
    sub = SystemSpec(spec.name, tuple(n for n in spec.nodes if n.name in keep))
    table = exact_joint(sub)
    pmf = table.marginal([name])
    values = sorted(v[0] for v in pmf)
    probs = [float(pmf[(v,)]) for v in values]
    if values == [0.0, 1.0]:
        return DistSpec.make("bernoulli", p=probs[1])
    return DistSpec.make("categorical", p=probs, values=values)


# ---------------------------------------------------------------- sampling

def _linear(dist: DistSpec, values: Mapping[str, np.ndarray], base: float, size: int) -> np.ndarray:
    eta = np.full(size, base, dtype=float)
    for parent, coef in dist.coefficients.items():
        eta = eta + coef * values[parent]
    return eta


def bernoulli_prob(dist: DistSpec, values: Mapping[str, np.ndarray], size: int) -> np.ndarray:
    if "p" in dist.param:
        return np.full(size, dist.get("p"), dtype=float)
    return expit(_linear(dist, values, dist.get("logit"), size))


def hazard_rate(dist: DistSpec, values: Mapping[str, np.ndarray], size: int,
                multipliers: Sequence[np.ndarray] = ()) -> np.ndarray:
    """``rate * exp(sum b_p x_p)`` times any multiplicative frailty terms."""
    rate = dist.get("rate") * np.exp(_linear(dist, values, 0.0, size))
    for m in multipliers:
        rate = rate * m
    return rate


def _draw(dist: DistSpec, values, streams, slot, size, multipliers=()) -> np.ndarray:
    fam = dist.family
    if fam == "bernoulli":
        u = rng.uniform(streams, slot)
        return (u < bernoulli_prob(dist, values, size)).astype(float)
    if fam == "categorical":
        p = np.asarray(dist.get("p"), dtype=float)
        vals = np.asarray(dist_support(dist), dtype=float)
        cum = np.cumsum(p)
        u = rng.uniform(streams, slot) * cum[-1]
        idx = np.minimum(np.searchsorted(cum, u, side="right"), len(p) - 1)
        return vals[idx]
    if fam == "gaussian":
        mean = _linear(dist, values, dist.get("mean", 0.0), size)
        return mean + np.sqrt(dist.get("var", 1.0)) * rng.normal(streams, slot)
    if fam == "exponential-hazard":
        rate = hazard_rate(dist, values, size, multipliers)
        with np.errstate(divide="ignore"):
            # zero hazard: the event never occurs
            return rng.exponential(streams, slot) / rate
    if fam == "gamma-frailty":
        return rng.gamma_mean_one(streams, slot, dist.get("var", 0.0))
    raise SpecError(f"family {fam} cannot be sampled as a random variable")


def draw_node(spec: SystemSpec, node: NodeSpec, values: Mapping[str, np.ndarray],
              streams: np.ndarray, slot: int) -> np.ndarray:
    """Draw one node for every stream given already drawn parent values."""
    size = len(streams)
    mult = [values[p] for p in node.parents if spec.node(p).kind == "frailty"]
    if node.dist.family != TABLE:
        return _draw(node.dist, values, streams, slot, size, mult)
    out = np.full(size, np.nan)
    parent_vals = np.column_stack([values[p] for p in node.parents]) if node.parents else None
    done = np.zeros(size, dtype=bool)
    for pat, row in node.dist.rows:
        mask = np.all(parent_vals == np.asarray(pat), axis=1)
        if mask.any():
            sub_vals = {k: v[mask] for k, v in values.items()}
            sub_mult = [m[mask] for m in mult]
            out[mask] = _draw(row, sub_vals, streams[mask], slot, int(mask.sum()), sub_mult)
            done |= mask
    if not done.all():
        bad = parent_vals[~done][0]
        raise SpecError(f"node {node.name}: no table row for parents={tuple(bad)}")
    return out


def _require_valid(spec: SystemSpec):
    errors = [d for d in validate(spec) if d.severity == "error"]
    if errors:
        raise SpecError(f"invalid spec: {errors[0]}", errors)


def sample(spec: SystemSpec, n: int, seed: int, workers: int = 1) -> Dataset:
    """Draw ``n`` records ancestrally, in declaration order.

    Deterministic in ``(spec, n, seed)`` and independent of ``workers``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    _require_valid(spec)
    bad = [nd.name for nd in spec.nodes if nd.kind not in VARIABLE_KINDS]
    if bad:
        raise SpecError(
            f"nodes {bad} are processes; use dynamics.simulate_process_system"
        )

    def chunk(start, stop):
        streams = rng.record_streams(seed, start, stop)
        values: dict[str, np.ndarray] = {}
        for j, node in enumerate(spec.nodes):
            values[node.name] = draw_node(spec, node, values, streams, j)
        return values

    parts = rng.map_chunks(chunk, n, workers)
    cols = {name: np.concatenate([p[name] for p in parts]) for name in spec.names}
    return Dataset(cols, n, seed, spec.regime, spec_hash(spec))


# ---------------------------------------------------------------- enumeration

def _exact(x: float) -> Fraction:
    return Fraction(repr(float(x)))


def pmf(dist: DistSpec, parent_values: Mapping[str, float], exact: bool = False) -> dict:
    """Probability mass function of a discrete distribution given parent values."""
    num = _exact if exact else float
    fam = dist.family
    if fam == "bernoulli":
        if "p" in dist.param:
            p = num(dist.get("p"))
        else:
            eta = dist.get("logit") + sum(c * parent_values[k] for k, c in dist.coefficients.items())
            p = float(expit(eta))
        return {0.0: 1 - p, 1.0: p}
    if fam == "categorical":
        out: dict = {}
        for v, p in zip(dist_support(dist), dist.get("p")):
            out[v] = out.get(v, 0) + num(p)
        return out
    raise SpecError(f"family {fam} is not discrete")


def node_pmf(node: NodeSpec, parent_values: Mapping[str, float], exact: bool = False) -> dict:
    dist = node.dist
    if dist.family == TABLE:
        dist = dist.row(tuple(parent_values[p] for p in node.parents))
    return pmf(dist, parent_values, exact)


@dataclass
class JointTable:
    """Exact joint law of a discrete system: one probability per full assignment."""

    names: tuple[str, ...]
    support: list[tuple[float, ...]]
    prob: np.ndarray

    def __len__(self) -> int:
        return len(self.support)

    def column(self, name: str) -> np.ndarray:
        j = self.names.index(name)
        return np.array([s[j] for s in self.support], dtype=float)

    def as_dataset(self) -> tuple[Dataset, np.ndarray]:
        """The support as a dataset plus the cell probabilities (enumeration weights)."""
        cols = {k: self.column(k) for k in self.names}
        return Dataset(cols, len(self.support)), np.asarray(self.prob, dtype=float)

    def marginal(self, names: Sequence[str]) -> dict[tuple, object]:
        idx = [self.names.index(k) for k in names]
        out: dict[tuple, object] = {}
        for s, p in zip(self.support, self.prob):
            key = tuple(s[i] for i in idx)
            out[key] = out.get(key, 0) + p
        return out

    def probability(self, event: Callable[[dict], bool]):
        total = 0
        for s, p in zip(self.support, self.prob):
            if event(dict(zip(self.names, s))):
                total = total + p
        return total

    def expectation(self, fn: Callable[[dict], object], given: Callable[[dict], bool] | None = None):
        """``E[fn | given]`` by summation over the table."""
        num = den = 0
        for s, p in zip(self.support, self.prob):
            row = dict(zip(self.names, s))
            if given is None or given(row):
                num = num + p * fn(row)
                den = den + p
        if den == 0:
            raise ZeroDivisionError("conditioning event has probability zero")
        return num / den

    def conditional(self, target: str, given: Mapping[str, float]) -> dict:
        """Law of ``target`` given an assignment of other nodes."""
        def match(row):
            return all(row[k] == v for k, v in given.items())
        den = self.probability(match)
        if den == 0:
            raise ZeroDivisionError(f"P({given}) = 0")
        out: dict = {}
        j = self.names.index(target)
        for s, p in zip(self.support, self.prob):
            row = dict(zip(self.names, s))
            if match(row):
                out[s[j]] = out.get(s[j], 0) + p
        return {k: v / den for k, v in sorted(out.items())}


def exact_joint(spec: SystemSpec, exact: bool = False) -> JointTable:
    """Enumerate the joint law through the ancestral factorization.

    With ``exact=True`` probabilities are :class:`fractions.Fraction` built
    from the decimal form of each parameter, so sums are exact rationals.
    Systems with any continuous node are refused.
    """
    _require_valid(spec)
    continuous = [n for n in spec.names if support(spec, n) is None]
    if continuous:
        raise SpecError(f"exact_joint needs a discrete system; continuous nodes: {continuous}")
    cells: list[tuple[tuple[float, ...], object]] = [((), Fraction(1) if exact else 1.0)]
    for node in spec.nodes:
        nxt = []
        idx = [spec.index(p) for p in node.parents]
        for values, p in cells:
            parent_values = {spec.names[i]: values[i] for i in idx}
            law = node_pmf(node, parent_values, exact)
            for v in support(spec, node.name):
                nxt.append((values + (v,), p * law.get(v, 0)))
        cells = nxt
    support_list = [c[0] for c in cells]
    if exact:
        prob = np.empty(len(cells), dtype=object)
        prob[:] = [c[1] for c in cells]
    else:
        prob = np.array([c[1] for c in cells], dtype=float)
    return JointTable(spec.names, support_list, prob)


def enumerate_supports(spec: SystemSpec, names: Sequence[str]) -> list[tuple[float, ...]]:
    return [tuple(c) for c in product(*(support(spec, k) for k in names))]
