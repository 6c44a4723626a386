"""
A marker that stops at death
============================

A marker Y drifts upward at a rate that depends on a baseline factor V, and
a high marker raises the risk of death. After death the marker does not
exist. Regressing each observed increment on V among those still alive
recovers the drift. Regressing the marker at the end of follow-up on V,
using only survivors, does not: the survivors with high V are those whose
marker happened to stay low.

Run with ``python demos/05_truncation.py``.
"""

# %%
from causalab.dynamics import cross_section_regression, increment_regression, simulate_process_system
from causalab.scenarios import builtin_spec

spec = builtin_spec("truncation.sys")
panel = simulate_process_system(spec, 50_000, 4.0, 0.05, seed=9, require_death=True)

inc = increment_regression(panel, "Y", ["V", "G"])
cs = cross_section_regression(panel, "Y", ["V", "G"])
h = panel.horizon

print(f"{'':<32}{'V':>10}{'se':>10}")
print(f"{'increments among the alive':<32}{inc.coef['V']:10.4f}{inc.se['V']:10.4f}")
print(f"{'survivors at the end, per unit t':<32}{cs.coef['V'] / h:10.4f}{cs.se['V'] / h:10.4f}")
print("generating drift coefficient: 0.5")
