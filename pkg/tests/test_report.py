import math
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from pinaccess import synthetic
from pinaccess.drc import DISPLAY_NAMES, DrcViolation
from pinaccess.geometry import Rect
from pinaccess.report import (TestcellResult, collect_metrics, cumulative_fraction, histogram_csv,
                              metrics_csv, render_summary, summary_csv, width_histogram)
from pinaccess.techlib import profile_library

HEADER = "Cell                DRC count  Master Cells with DRC                DRC Types"


def violation(rule="same_net_cut_spacing", masters=("PLNTX1",)):
    return DrcViolation(rule, "V1", Rect(0, 0, 8, 8), ("n",), masters)


def test_banners_and_layout():
    results = [TestcellResult(f"scell_C{k}") for k in range(4)] + [
        TestcellResult("scell_PLNTX1_INVX1", (violation(),))]
    lines = render_summary(results).splitlines()
    assert lines[:3] == ["=====", "SCRIPT-Info: Printing DRC Summary ...", "====="]
    assert lines[3] == "##### 4 cells without DRC errors #####"
    assert lines[5] == HEADER
    assert lines[7] == "scell_C0            0"
    assert "##### 1 cells with DRC errors #####" in lines
    assert lines[-1] == ("scell_PLNTX1_INVX1".ljust(20) + "1".ljust(11) + "PLNTX1".ljust(37)
                         + "{Same net via-cut spacing}")


def test_zero_testcells():
    text = render_summary([])
    assert "##### 0 cells without DRC errors #####" in text
    assert "##### 0 cells with DRC errors #####" in text
    assert text.splitlines()[-1] == "##### 0 cells with DRC errors #####"


def test_type_set_is_sorted_and_deduplicated():
    r = TestcellResult("t", (violation("short"), violation("open"), violation("short")))
    assert r.types == ("Open", "Short")
    assert render_summary([r]).splitlines()[-1].endswith("{Open} {Short}")


result_st = st.builds(
    lambda tid, rules: TestcellResult(tid, tuple(violation(r, ("A",)) for r in rules)),
    st.text("abc_", min_size=1, max_size=6), st.lists(st.sampled_from(sorted(DISPLAY_NAMES)), max_size=3))


@given(st.lists(result_st, max_size=4), st.lists(result_st, max_size=4))
@settings(max_examples=200)
def test_render_is_injective(a, b):
    def key(rs):
        # the report groups clean rows before dirty ones, keeping order within each group
        rows = [(r.id, r.drc_count, r.masters, r.types) for r in rs]
        return [row for row in rows if row[1] == 0], [row for row in rows if row[1]]
    if key(a) != key(b):
        assert render_summary(a) != render_summary(b)


def test_summary_csv():
    text = summary_csv([TestcellResult("a"), TestcellResult("b", (violation(),))])
    assert text.splitlines() == ["testcell_id,drc_count,masters,types", "a,0,,",
                                 "b,1,PLNTX1,Same net via-cut spacing"]


# --------------------------------------------------------------------------- histogram


def test_equal_widths_give_one_bucket():
    cells = [synthetic.make_cell(f"C{k}", 3, [("A", "input", 1, 2, 4)]) for k in range(5)]
    assert width_histogram(profile_library(cells)) == [(Fraction(1), Fraction(1))]


def test_empty_library_histogram_fails():
    with pytest.raises(ValueError):
        width_histogram(profile_library([]))


def test_library1_like_cumulative_fraction():
    _, cells = synthetic.library1_like()
    profile = profile_library(cells)
    hist = width_histogram(profile)
    assert cumulative_fraction(hist, 10) >= Fraction(8, 10)
    # independent count
    smallest = min(c.width for c in cells)
    counts = Counter(math.ceil(Fraction(c.width, smallest)) for c in cells)
    assert hist == [(Fraction(k), Fraction(n, len(cells))) for k, n in sorted(counts.items())]
    assert sum(f for _, f in hist) == 1
    assert histogram_csv(hist).splitlines()[0] == "bucket,fraction"


# --------------------------------------------------------------------------- metrics


def test_metrics_empty():
    s = collect_metrics([], 0.0, 0, 0)
    assert s.cells_with_violations == 0 and s.per_cell == {} and s.output_bytes == 0
    assert metrics_csv(s).splitlines() == ["metric,value", "wall_time_seconds,0.000", "output_bytes,0",
                                           "cells_with_violations,0"]


def test_metrics_aggregation():
    results = [TestcellResult("a", (violation(masters=("A", "B")), violation(masters=("B",)))),
               TestcellResult("b", (violation(masters=()),))]
    s = collect_metrics(results, 1.5, 10, 6)
    assert s.per_cell == {"A": 1, "B": 2}
    assert sum(s.per_cell.values()) == s.total_attributions
    assert s.cells_with_violations == 2
    with pytest.raises(ValueError):
        collect_metrics(results, library_size=1)
