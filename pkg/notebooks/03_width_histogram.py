"""
Cell width distribution
=======================

Most cells in a production library are narrow. This script profiles a
synthetic library shaped like that and prints the width histogram in units
of the narrowest cell.
"""

# %%
import numpy as np

from pinaccess import synthetic
from pinaccess.report import cumulative_fraction, width_histogram
from pinaccess.techlib import profile_library

rules, cells = synthetic.library1_like(n=108, seed=1)
profile = profile_library(cells)
print(len(profile), "cells; narrowest", min(c.width for c in cells), "DBU")

# %%
# Fractions are exact rationals; they are printed as floats with a text bar.
hist = width_histogram(profile)
for edge, frac in hist:
    print(f"<= {str(edge):>3} x min  {float(frac):6.3f}  {'#' * round(60 * float(frac))}")
print("sum of fractions:", sum(f for _, f in hist))

# %%
# Share of cells at most ten times the minimum width.
print("within 10x:", float(cumulative_fraction(hist, 10)))

# %%
# The same numbers straight from numpy, for comparison.
widths = np.array([c.width for c in cells]) / min(c.width for c in cells)
print("numpy check:", np.mean(widths <= 10))
