from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from pinaccess import synthetic
from pinaccess.geometry import Rect
from pinaccess.techlib import LibraryError, parse_library, profile_library, scale_rules, serialize_library

TINY = synthetic.TECH_TEXT + """\
CELL INVX1
SIZE 144 1
PIN A IN RECT 60 64 84 176
PIN Y OUT RECT 60 256 84 368
RAIL VSS RECT 0 0 144 20
RAIL VDD RECT 0 412 144 432
END
"""


def test_parse_tiny_library():
    rules, cells = parse_library(TINY)
    assert [layer.name for layer in rules.layers] == ["M1", "V1", "M2", "V2", "M3"]
    assert rules.layer("M2").dp_spacing == 24
    assert rules.layer("V1").same_net_cut_spacing == 32
    (inv,) = cells
    assert inv.width == 144 and inv.height_rows == 1
    assert inv.pin("A").shapes == (Rect(60, 64, 84, 176),)
    assert inv.pin("Y").is_output


@given(st.integers(1, 6), st.integers(0, 2), st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_serialize_round_trip(n, n_multi, seed):
    rules, cells = synthetic.random_library(n, seed, n_multi)
    again = parse_library(serialize_library(rules, cells))
    assert again == (rules, cells)


@pytest.mark.parametrize("text, line, fragment", [
    (TINY + "CELL INVX1\nSIZE 144 1\nEND\n", 18, "duplicate cell"),
    (TINY.replace("SIZE 144 1", "SIZE 144 1\nFOO 1"), 13, "unknown keyword"),
    (TINY.replace("RECT 60 64 84 176", "RECT 60 64 84"), 13, ""),
    (TINY.replace("PIN A IN", "PIN A SIDEWAYS"), 13, "direction"),
    (TINY.replace("DBU 1000", "DBU x"), 2, ""),
], ids=["duplicate", "keyword", "short-rect", "direction", "bad-int"])
def test_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(LibraryError) as err:
        parse_library(text)
    assert err.value.line == line
    assert fragment in str(err.value)


def test_unterminated_and_missing_sections():
    with pytest.raises(LibraryError):
        parse_library(TINY.rstrip().rsplit("\n", 1)[0])
    with pytest.raises(LibraryError):
        parse_library("CELL X\nEND\n")


def test_profile_splits_heights_and_normalizes_widths():
    rules, cells = synthetic.random_library(4, 3, n_multi=2)
    profile = profile_library(cells)
    assert len(profile.single_height) == 4 and len(profile.multi_height) == 2
    assert min(profile.normalized_widths.values()) == 1
    assert all(isinstance(v, Fraction) for v in profile.normalized_widths.values())
    with pytest.raises(ValueError):
        profile_library([])


def test_scale_rules_rounds_up_and_keeps_pitch():
    rules = synthetic.tech()
    scaled = scale_rules(rules, 1.1)
    assert scaled.margin_scale == Fraction(11, 10)
    assert scaled.layer("M2").min_width == 18  # ceil(16 * 1.1)
    assert scaled.layer("V1").min_spacing == 49  # ceil(44 * 1.1)
    assert scaled.layer("M2").pitch == rules.layer("M2").pitch
    assert scaled.layer("M2").dp_spacing == rules.layer("M2").dp_spacing
    assert scale_rules(rules, 1) == rules
    with pytest.raises(ValueError):
        scale_rules(rules, Fraction(9, 10))
