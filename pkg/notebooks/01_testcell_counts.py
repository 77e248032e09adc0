"""
How many cells does it take to test a library?
==============================================

Walks through the three ways of building abutment testcells and how their
instance counts grow with library size, then checks on a small library that
the compact arrangement still reaches every left/right edge pairing.
"""

# %%
# Instance counts per method. The conventional layout tries all four
# orientations for every ordered pair, the Synopsys-style one uses a
# three-wide two-row block, and the proposed rows reuse each seam.
import numpy as np

from pinaccess import synthetic
from pinaccess.techlib import profile_library
from pinaccess.testgen import aa_row, ab_row, boundary_classes, count_instances, enumerate_testcells

sizes = np.array([1, 2, 10, 100, 1000])
table = np.array([[count_instances(int(n), m) for m in ("conventional", "synopsys", "proposed")]
                  for n in sizes])
for n, row in zip(sizes, table):
    print(f"N={n:5d}  conventional={row[0]:>10,}  synopsys={row[1]:>10,}  proposed={row[2]:>10,}")
print("conventional / proposed at N=1000:", round(table[-1, 0] / table[-1, 2], 3))

# %%
# The ratio tends to 8/2.5 = 3.2 as N grows, since both counts are
# quadratic and only the leading coefficients matter.
ratios = table[:, 0] / table[:, 2]
print(np.round(ratios, 3))

# %%
# One of each proposed row on the demo library. Orientation N is the cell
# as drawn and FN its mirror image, so a row N FN FN N pairs the edges
# in every combination a single cell allows.
rules, cells = synthetic.planted_library()
by_name = {c.name: c for c in cells}
row = aa_row("INVX1", by_name, rules)
print([(i.name, i.orientation, i.origin) for i in row.instances])
print(sorted(str(c) for c in boundary_classes(row, by_name, rules)))

pair = ab_row("INVX1", "NAND2X1", by_name, rules)
print([(i.master, i.orientation) for i in pair.instances])
print(sorted(str(c) for c in boundary_classes(pair, by_name, rules)))

# %%
# Coverage check: the edge pairings seen by all proposed testcells equal
# those seen by the exhaustive conventional layout, including a
# double-height cell.
rules, cells = synthetic.random_library(4, seed=2, n_multi=1)
profile = profile_library(cells)


def seen(method):
    out = set()
    for spec in enumerate_testcells(profile, rules, method, "cell_by_cell_only"):
        out |= boundary_classes(spec, profile.by_name, rules)
    return out


print(len(seen("proposed")), "classes;", "identical" if seen("proposed") == seen("conventional") else "DIFFERENT")
