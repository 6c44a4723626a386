"""
Selecting on a common effect
============================

Obesity V and an unmeasured genetic factor G are independent in the
population. Both raise the chance of diabetes Y, and G also raises the risk
of death D. Among diabetics the two become negatively associated, so a
diabetic without obesity is more likely to carry G. That alone can make
obesity look protective for survival among diabetics.

Run with ``python demos/02_collider.py``.
"""

# %%
from causalab.dynamics import collider_report
from causalab.scenarios import builtin_spec
from causalab.sim import exact_joint

spec = builtin_spec("collider.sys")
for node in spec.nodes:
    print(node.name, node.kind, node.parents)

# %% [markdown]
# Exact enumeration, in rationals.

# %%
rep = collider_report(spec, "Y", 1.0, ("V", "G"))
for g in (0.0, 1.0):
    print(f"P(V=1 | G={g:.0f})        = {rep.v_given_g[g][1.0]}")
for g in (0.0, 1.0):
    print(f"P(V=1 | G={g:.0f}, Y=1)   = {rep.v_given_g_collider[g][1.0]}")
print("independent overall:", rep.marginally_independent)
print("independent among diabetics:", rep.conditionally_independent)

# %% [markdown]
# The consequence for mortality among diabetics.

# %%
joint = exact_joint(spec)
for v in (0.0, 1.0):
    risk = joint.expectation(lambda r: r["D"], lambda r, v=v: r["V"] == v and r["Y"] == 1)
    print(f"P(D=1 | V={v:.0f}, Y=1) = {float(risk):.4f}")
