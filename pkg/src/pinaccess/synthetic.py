"""Synthetic rule deck and cell libraries.

Real 14 nm decks and libraries are proprietary, so the flow is exercised on
generated ones. Cells are drawn on a 48 DBU grid: M2 tracks sit at
``24 + 48*k`` and M3 tracks at the same x offsets, which puts every site
boundary halfway between two tracks. A single-height row is 9 tracks tall.

Well-formed cells keep their pins at least one full column away from the
cell edge and at least two columns away from each other. The planted defect
cell breaks exactly that: its output pin is a single-access-point pad one
track from the right edge, so mirrored abutment lands two V1 cuts on adjacent
tracks.
"""

from __future__ import annotations

import numpy as np

from .geometry import Rect
from .techlib import CellMaster, Pin, TechRules, parse_library, serialize_library

PITCH = 48
HALF = PITCH // 2
TRACKS_PER_ROW = 9
ROW = PITCH * TRACKS_PER_ROW
PIN_HALF_WIDTH = 12
RAIL = 20

TECH_TEXT = """\
TECH
DBU 1000
SITE 48
ROW 432
LAYER M1 metal H PITCH 48 WIDTH 16 SPACING 16
LAYER V1 via WIDTH 8 SPACING 44 CUTSPACING 32 ENCLOSURE 4
LAYER M2 metal H PITCH 48 WIDTH 16 SPACING 16 DPSPACING 24
LAYER V2 via WIDTH 8 SPACING 28 CUTSPACING 28 ENCLOSURE 4
LAYER M3 metal V PITCH 48 WIDTH 16 SPACING 16
END
"""

# track bands (per row) that stay clear of the rails
LOW_BAND = (1, 3)
HIGH_BAND = (5, 7)


def tech() -> TechRules:
    rules, _ = parse_library(TECH_TEXT)
    return rules


def track(k: int) -> int:
    return HALF + PITCH * k


def pin_bar(column: int, t_lo: int, t_hi: int, half_width: int = PIN_HALF_WIDTH) -> Rect:
    """Vertical M1 bar centred on an M3 column, covering tracks t_lo..t_hi."""
    x = track(column)
    return Rect(x - half_width, track(t_lo) - 8, x + half_width, track(t_hi) + 8)


def rails(width: int, rows: int) -> tuple[tuple[str, Rect], ...]:
    out = [("VSS", Rect(0, 0, width, RAIL))]
    for k in range(1, rows):
        out.append(("VDD" if k % 2 else "VSS", Rect(0, k * ROW - RAIL // 2, width, k * ROW + RAIL // 2)))
    out.append(("VDD" if rows % 2 else "VSS", Rect(0, rows * ROW - RAIL, width, rows * ROW)))
    return tuple(out)


def make_cell(name: str, sites: int, pins, rows: int = 1, obstructions=()) -> CellMaster:
    """`pins` is a list of (name, direction, column, t_lo, t_hi) or (name, direction, Rect)."""
    width = sites * PITCH
    built = []
    for spec in pins:
        if len(spec) == 3:
            pname, direction, rect = spec
        else:
            pname, direction, column, t_lo, t_hi = spec
            rect = pin_bar(column, t_lo, t_hi)
        built.append(Pin(pname, direction, (rect,)))
    return CellMaster(name, width, rows, tuple(built), rails(width, rows), tuple(obstructions))


def planted_cell(name: str = "PLNTX1") -> CellMaster:
    """Four-site cell whose output pin has one access point next to its right edge."""
    y_pad = Rect(track(3) - 8, track(4) - 8, track(3) + 8, track(4) + 8)
    return make_cell(name, 4, [("A", "input", 1, *LOW_BAND), ("Y", "output", y_pad)])


def clean_cells() -> list[CellMaster]:
    return [
        make_cell("INVX1", 3, [("A", "input", 1, *LOW_BAND), ("Y", "output", 1, *HIGH_BAND)]),
        make_cell("BUFX2", 5, [("A", "input", 1, 2, 6), ("Y", "output", 3, 2, 6)]),
        make_cell("NAND2X1", 5, [("A", "input", 1, *LOW_BAND), ("B", "input", 1, *HIGH_BAND),
                                 ("Y", "output", 3, 2, 6)]),
        make_cell("NOR2X1", 5, [("A", "input", 1, 2, 6), ("B", "input", 3, *LOW_BAND),
                                ("Y", "output", 3, *HIGH_BAND)]),
        make_cell("AOI21X1", 7, [("A0", "input", 1, 2, 6), ("A1", "input", 3, 2, 6),
                                 ("B", "input", 5, *LOW_BAND), ("Y", "output", 5, *HIGH_BAND)]),
    ]


def multi_height_cell(name: str = "DFFM2X1") -> CellMaster:
    """Two-row cell with one pin per row band."""
    return make_cell(name, 5, [
        ("D", "input", 1, *LOW_BAND),
        ("CK", "input", 3, 2, 6),
        ("Q", "output", 1, TRACKS_PER_ROW + 1, TRACKS_PER_ROW + 3),
        ("QN", "output", 3, TRACKS_PER_ROW + 5, TRACKS_PER_ROW + 7),
    ], rows=2)


def planted_library() -> tuple[TechRules, list[CellMaster]]:
    """Six cells, five clean and one with a boundary via conflict."""
    cells = clean_cells()
    cells.insert(3, planted_cell())
    return tech(), cells


def toy_clean_library() -> tuple[TechRules, list[CellMaster]]:
    return tech(), clean_cells()[:3]


def random_cell(name: str, rng: np.random.Generator, rows: int = 1) -> CellMaster:
    """A well-formed cell with 2-4 pins on legal slots."""
    n_pins = int(rng.integers(2, 5))
    columns_needed = (n_pins + 1) // 2
    min_sites = 2 * columns_needed + 1
    sites = min_sites + int(rng.integers(0, 4))
    columns = [c for c in range(1, sites - 1, 2)]
    slots = [(c, band) for c in columns for band in (LOW_BAND, HIGH_BAND)]
    chosen = rng.choice(len(slots), size=n_pins, replace=False)
    pins = []
    for k, idx in enumerate(sorted(int(i) for i in chosen)):
        column, (lo, hi) = slots[idx]
        row = int(rng.integers(0, rows))
        t_lo = lo + int(rng.integers(0, 2)) + row * TRACKS_PER_ROW
        t_hi = max(t_lo + 1, hi - int(rng.integers(0, 2)) + row * TRACKS_PER_ROW)
        direction = "output" if k == n_pins - 1 else "input"
        pins.append((f"P{k}" if direction == "input" else "Y", direction, column, t_lo, t_hi))
    return make_cell(name, sites, pins, rows=rows)


def random_library(n: int, seed: int, n_multi: int = 0) -> tuple[TechRules, list[CellMaster]]:
    rng = np.random.default_rng(seed)
    cells = [random_cell(f"C{i}", rng) for i in range(n)]
    cells += [random_cell(f"M{i}", rng, rows=2) for i in range(n_multi)]
    return tech(), cells


def library1_like(n: int = 108, seed: int = 1) -> tuple[TechRules, list[CellMaster]]:
    """All single-height, with most cells within ten times the narrowest width."""
    rng = np.random.default_rng(seed)
    cells = []
    for i in range(n):
        cell = random_cell(f"L1_{i:03d}", rng)
        # a minority of wide cells (flops, large drivers); 3 sites is the narrowest
        if i % 6 == 5:
            extra = int(rng.integers(28, 40)) - cell.width // PITCH
            cell = CellMaster(cell.name, cell.width + extra * PITCH, 1, cell.pins,
                              rails(cell.width + extra * PITCH, 1))
        cells.append(cell)
    cells[0] = make_cell("L1_000", 3, [("A", "input", 1, *LOW_BAND), ("Y", "output", 1, *HIGH_BAND)])
    return tech(), cells


def library_text(rules: TechRules, cells) -> str:
    return serialize_library(rules, cells)
