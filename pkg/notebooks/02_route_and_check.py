"""
Routing a testcell and reading its violations
=============================================

Builds the testcell for the planted cell, routes it on two layers with and
without power straps, and prints what the checker finds and whom it blames.
"""

# %%
from pinaccess import synthetic
from pinaccess.drc import attribute, check_drc
from pinaccess.router import build_grid, extract_connectivity, plan_straps, route
from pinaccess.testgen import aa_row, assign_connectivity

rules, cells = synthetic.planted_library()
cells = {c.name: c for c in cells}
spec = aa_row("PLNTX1", cells, rules)
print(spec.id, spec.die_area)

# %%
# Aligned connectivity ties same-named pins of every instance together.
# Random connectivity pairs outputs with inputs of other instances, so the
# router has to jog through the vertical layer more often.
for strategy in ("aligned", "random"):
    wired = assign_connectivity(spec, cells, strategy, seed=7)
    print(strategy, [(n.name, n.terminals) for n in wired.nets if not n.unconnected])

# %%
# Route both ways. Straps are wide VDD/VSS wires dropped at random offsets;
# they take tracks away from the router and block via landings.
wired = assign_connectivity(spec, cells, "random", seed=7)
for straps in (False, True):
    plan = plan_straps(wired.die_area, rules, seed=7, enabled=straps, key=wired.id)
    grid = build_grid(wired, cells, rules, plan)
    db = route(wired, grid, rules)
    found = attribute(check_drc(wired, db, cells, rules), wired, cells, rules)
    print(f"straps={straps}: {len(plan.straps)} straps, statuses {db.statuses()}")
    for v in found:
        print("   ", v.display_name, v.layer, v.marker, "->", ", ".join(v.masters) or "(nobody)")

# %%
# The connectivity extractor rebuilds nets from geometry alone and must agree
# with what the router believes it did.
ex = extract_connectivity(db)
print("extracted:", ex.verdicts, "shorts:", sorted(map(sorted, ex.shorts)))
