"""Structural systems, change-of-measure estimators and dynamic selection scenarios."""

__version__ = "0.1.0"

from .specio import (
    Diagnostic,
    DistSpec,
    NodeSpec,
    SpecError,
    SpecSyntaxError,
    SystemSpec,
    load_system,
    parse_system,
    serialize,
    spec_hash,
    validate,
)
from .sim import Dataset, JointTable, apply_do, exact_joint, sample
from .measures import (
    ConvergenceError,
    PositivityError,
    WeightVector,
    estimated_weights,
    fit_propensity,
    reweighted_expectation,
    true_weights,
    weight_diagnostics,
)
from .estimators import (
    EffectEstimate,
    MarginalModel,
    bootstrap_ci,
    contrast,
    exact_effects,
    fit_wgee,
    g_formula,
    g_formula_exact,
    g_formula_plugin,
    ipw_mean,
    naive_mean,
    post_surgery_mean,
)
from .dynamics import (
    FrailtyParams,
    collider_report,
    gamma_frailty_marginal_hr,
    hr_curve,
    late_entry,
    simulate_frailty_cohort,
    simulate_process_system,
    survivor_bias_report,
)
