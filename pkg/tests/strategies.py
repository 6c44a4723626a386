"""Random system generators for property tests."""

from itertools import product

import numpy as np
from hypothesis import strategies as st

from causalab.specio import DistSpec, NodeSpec, SystemSpec, dist_support

probs = st.floats(0.0, 1.0, allow_nan=False)
reals = st.floats(-5.0, 5.0, allow_nan=False, allow_infinity=False)


@st.composite
def categorical_dists(draw, k=None):
    k = draw(st.integers(2, 4)) if k is None else k
    raw = draw(st.lists(st.integers(1, 20), min_size=k, max_size=k))
    p = [x / sum(raw) for x in raw]
    p[-1] = 1.0 - sum(p[:-1])
    values = draw(st.lists(st.integers(-3, 6), min_size=k, max_size=k, unique=True))
    return DistSpec.make("categorical", p=[max(x, 0.0) for x in p], values=values)


@st.composite
def row_dists(draw):
    if draw(st.booleans()):
        return DistSpec.make("bernoulli", p=draw(probs))
    return draw(categorical_dists())


@st.composite
def systems(draw, allow_continuous=True, max_nodes=5):
    """Valid systems: discrete nodes with tables, optional Gaussian and process nodes."""
    n_nodes = draw(st.integers(0, max_nodes))
    nodes: list[NodeSpec] = []
    discrete: dict[str, tuple] = {}
    for i in range(n_nodes):
        name = f"X{i}"
        kind = draw(st.sampled_from(("covariate", "exposure", "outcome")))
        choice = draw(st.integers(0, 3 if allow_continuous else 2))
        if choice == 0 or (not discrete and choice in (1, 2)):
            dist = draw(row_dists())
            parents = ()
        elif choice == 1 and discrete:
            # logit-linear bernoulli on any earlier nodes
            parents = tuple(draw(st.sets(st.sampled_from(sorted(discrete)), max_size=2)))
            parents = tuple(sorted(parents))
            coefs = {f"b_{p}": draw(reals) for p in parents}
            dist = DistSpec.make("bernoulli", logit=draw(reals), **coefs)
        elif choice == 2:
            parents = tuple(sorted(draw(st.sets(st.sampled_from(sorted(discrete)),
                                                 min_size=1, max_size=2))))
            rows = {}
            for combo in product(*(discrete[p] for p in parents)):
                rows[combo] = draw(row_dists())
            dist = DistSpec.table(rows)
        else:
            parents = tuple(sorted(draw(st.sets(st.sampled_from([n.name for n in nodes] or ["_"]),
                                                 max_size=2)) - {"_"}))
            coefs = {f"b_{p}": draw(reals) for p in parents}
            dist = DistSpec.make("gaussian", mean=draw(reals),
                                 var=draw(st.floats(0.0, 4.0)), **coefs)
        node = NodeSpec(name, kind, parents, dist)
        nodes.append(node)
        sup = dist_support(dist)
        if sup is not None:
            discrete[name] = sup
    if allow_continuous and draw(st.booleans()):
        nodes.append(NodeSpec("P0", "process", ("P0",),
                              DistSpec.make("linear-gaussian-step", init=draw(reals), init_sd=1.0,
                                            drift=draw(reals), sd=0.5, b_P0=draw(reals))))
        nodes.append(NodeSpec("D", "death", ("P0",),
                              DistSpec.make("exponential-hazard", rate=0.1, b_P0=draw(reals))))
    name = draw(st.text("abcdefgh-_ 0123456789", min_size=1, max_size=12))
    return SystemSpec(name, tuple(nodes))


def random_confounded_system(rng: np.random.Generator, index: int) -> SystemSpec:
    """Discrete covariates -> exposure -> outcome with random tables (rows kept away from 0/1)."""
    nodes = []
    covs = []
    for j in range(int(rng.integers(1, 3))):
        k = int(rng.integers(2, 4))
        p = rng.dirichlet(np.full(k, 3.0))
        p[-1] = 1.0 - p[:-1].sum()
        nodes.append(NodeSpec(f"C{j}", "covariate", (),
                              DistSpec.make("categorical", p=list(p), values=list(range(k)))))
        covs.append((f"C{j}", tuple(float(v) for v in range(k))))
    names = tuple(c for c, _ in covs)
    k_a = int(rng.integers(2, 4))
    rows = {}
    for combo in product(*(s for _, s in covs)):
        p = rng.dirichlet(np.full(k_a, 2.0)) * 0.8 + 0.2 / k_a
        p[-1] = 1.0 - p[:-1].sum()
        rows[combo] = DistSpec.make("categorical", p=list(p), values=list(range(k_a)))
    nodes.append(NodeSpec("A", "exposure", names, DistSpec.table(rows)))
    rows = {}
    for combo in product(range(k_a), *(s for _, s in covs)):
        rows[combo] = DistSpec.make("bernoulli", p=float(rng.uniform(0.05, 0.95)))
    nodes.append(NodeSpec("Y", "outcome", ("A",) + names, DistSpec.table(rows)))
    return SystemSpec(f"random-{index}", tuple(nodes))
