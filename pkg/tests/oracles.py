"""Independent reference values, computed without the library.

Everything here is written from the model definitions directly: hand
enumeration in exact rationals for the discrete systems and numerical
integration against the gamma density for the frailty model.
"""

from fractions import Fraction as F
from itertools import product

import numpy as np
from scipy import integrate, stats

# ---------------------------------------------------------------- system S1

S1_TEXT = """\
system "confounding-s1"
node C kind=covariate dist=bernoulli(p=0.5)
node A kind=exposure given=(C) dist=table{C=0: bernoulli(p=0.3); C=1: bernoulli(p=0.7)}
node Y kind=outcome given=(A,C) dist=table{A=0,C=0: bernoulli(p=0.2); A=0,C=1: bernoulli(p=0.5); A=1,C=0: bernoulli(p=0.4); A=1,C=1: bernoulli(p=0.8)}
"""

P_C1 = F(1, 2)
P_A1_GIVEN_C = {0: F(3, 10), 1: F(7, 10)}
P_Y1_GIVEN_AC = {(0, 0): F(2, 10), (0, 1): F(5, 10), (1, 0): F(4, 10), (1, 1): F(8, 10)}


def _bern(p1, x):
    return p1 if x == 1 else 1 - p1


def s1_joint() -> dict:
    """``P(C=c, A=a, Y=y)`` for the 8 cells."""
    out = {}
    for c, a, y in product((0, 1), repeat=3):
        out[(c, a, y)] = (_bern(P_C1, c) * _bern(P_A1_GIVEN_C[c], a)
                          * _bern(P_Y1_GIVEN_AC[(a, c)], y))
    return out


def s1_interventional_mean(a: int) -> F:
    """``E[Y]`` after setting A to ``a`` for everyone."""
    return sum(_bern(P_C1, c) * P_Y1_GIVEN_AC[(a, c)] for c in (0, 1))


def s1_naive_mean(a: int) -> F:
    j = s1_joint()
    num = sum(p for (c, aa, y), p in j.items() if aa == a and y == 1)
    den = sum(p for (c, aa, y), p in j.items() if aa == a)
    return num / den


def s1_p_a1() -> F:
    return sum(_bern(P_C1, c) * P_A1_GIVEN_C[c] for c in (0, 1))


def s1_stabilized_weight(a: int, c: int) -> F:
    pa = s1_p_a1()
    return _bern(pa, a) / _bern(P_A1_GIVEN_C[c], a)


S1_TRUTH = {0: F(7, 20), 1: F(3, 5)}
S1_NAIVE = {0: F(29, 100), 1: F(68, 100)}


# ---------------------------------------------------------------- collider

def collider_conditional() -> dict:
    """``P(V=1 | G=g, Y=1)`` for V, G ~ Bern(1/2), P(Y=1|V,G) = 1/10 + 4V/10 + 4G/10."""
    out = {}
    for g in (0, 1):
        num = F(1, 2) * (F(1, 10) + F(4, 10) + F(4, 10) * g)
        den = num + F(1, 2) * (F(1, 10) + F(4, 10) * g)
        out[g] = num / den
    return out


# ---------------------------------------------------------------- gamma frailty

def _frailty_moments(delta, cum):
    """``(E[Z e^{-Z cum}], E[e^{-Z cum}])`` for Z ~ Gamma(mean 1, variance delta)."""
    if delta == 0:
        return np.exp(-cum), np.exp(-cum)
    dens = stats.gamma(a=1 / delta, scale=delta).pdf

    def integral(f):
        # split at 1: the density is singular at 0 when delta > 1
        opts = dict(epsabs=1e-14, epsrel=1e-13, limit=200)
        return integrate.quad(f, 0, 1, **opts)[0] + integrate.quad(f, 1, np.inf, **opts)[0]

    num = integral(lambda z: z * np.exp(-z * cum) * dens(z))
    den = integral(lambda z: np.exp(-z * cum) * dens(z))
    return num, den


def frailty_population_hazard(lam, delta, t):
    """Hazard of the survivors' mixture when the individual hazard is ``Z * lam``."""
    num, den = _frailty_moments(delta, lam * t)
    return lam * num / den


def frailty_hr_by_integration(lambda0, r, delta0, delta1, t):
    return (frailty_population_hazard(r * lambda0, delta1, t)
            / frailty_population_hazard(lambda0, delta0, t))


def survivor_frailty_mean_by_integration(lam, delta, t):
    num, den = _frailty_moments(delta, lam * t)
    return num / den
