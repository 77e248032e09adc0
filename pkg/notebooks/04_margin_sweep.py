"""
Tightening the rules
====================

Routes the demo library once per seed and re-checks the same geometry with
its width/spacing/enclosure rules scaled up. A deck that is stricter than
the one used for routing shows which cells have no slack left.
"""

# %%
from collections import Counter
from fractions import Fraction

from pinaccess import synthetic
from pinaccess.drc import attribute, check_drc
from pinaccess.router import build_grid, plan_straps, route
from pinaccess.techlib import profile_library, scale_rules
from pinaccess.testgen import assign_connectivity, enumerate_testcells

rules, cells = synthetic.planted_library()
profile = profile_library(cells)
cells = profile.by_name
scales = [Fraction(1), Fraction(11, 10), Fraction(5, 4), Fraction(3, 2)]
print({str(s): scale_rules(rules, s).layer("V1").min_enclosure for s in scales}, "(V1 enclosure, DBU)")

# %%
# Route each testcell once, then check it against every deck.
routed = []
for seed in (1, 2, 3):
    for spec in enumerate_testcells(profile, rules, "proposed", "all"):
        wired = assign_connectivity(spec, cells, "random", seed)
        plan = plan_straps(wired.die_area, rules, seed, True, wired.id)
        routed.append((wired, route(wired, build_grid(wired, cells, rules, plan), rules)))

for s in scales:
    deck = scale_rules(rules, s)
    per_master = Counter()
    per_rule = Counter()
    for wired, db in routed:
        for v in attribute(check_drc(wired, db, cells, deck), wired, cells, rules):
            per_master.update(v.masters)
            per_rule[v.display_name] += 1
    print(f"scale {str(s):>5}: {sum(per_rule.values()):4d} violations  {dict(per_rule)}")
    print("            by cell:", dict(sorted(per_master.items())))
