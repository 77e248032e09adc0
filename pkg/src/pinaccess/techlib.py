"""Technology rule deck and library cell model, with their text format.

The library file is a small line-oriented grammar::

    TECH
    DBU 1000
    SITE 48
    ROW 432
    LAYER M1 metal H PITCH 48 WIDTH 16 SPACING 16
    LAYER V1 via WIDTH 8 SPACING 44 CUTSPACING 32 ENCLOSURE 4
    ...
    END
    CELL INVX1
    SIZE 144 1
    PIN A IN RECT 60 64 84 176
    RAIL VSS RECT 0 0 144 20
    RAIL VDD RECT 0 412 144 432
    END

Everything is in DBU. ``#`` starts a comment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .geometry import Rect


class LibraryError(ValueError):
    """Malformed library text or a violated library invariant."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


METAL = "metal"
VIA = "via"
HORIZONTAL = "horizontal"
VERTICAL = "vertical"
NO_DIRECTION = "none"

_DIRECTION_TOKENS = {"H": HORIZONTAL, "V": VERTICAL}
_PIN_DIRECTIONS = {"IN": "input", "OUT": "output", "INOUT": "inout"}


@dataclass(frozen=True)
class LayerRule:
    name: str
    kind: str
    direction: str = NO_DIRECTION
    pitch: int = 0
    min_width: int = 0
    min_spacing: int = 0
    same_net_cut_spacing: int = 0
    min_enclosure: int = 0
    dp_spacing: Optional[int] = None

    @property
    def is_metal(self) -> bool:
        return self.kind == METAL

    def validate(self) -> None:
        if self.kind not in (METAL, VIA):
            raise LibraryError(f"layer {self.name}: unknown kind {self.kind!r}")
        if self.is_metal:
            if self.direction not in (HORIZONTAL, VERTICAL):
                raise LibraryError(f"layer {self.name}: metal needs a direction")
            values = {"PITCH": self.pitch, "WIDTH": self.min_width, "SPACING": self.min_spacing}
            if self.dp_spacing is not None:
                values["DPSPACING"] = self.dp_spacing
        else:
            values = {"WIDTH": self.min_width, "SPACING": self.min_spacing,
                      "CUTSPACING": self.same_net_cut_spacing, "ENCLOSURE": self.min_enclosure}
        for key, value in values.items():
            if value <= 0:
                raise LibraryError(f"layer {self.name}: {key} must be positive, got {value}")
        if self.is_metal and self.min_width > self.pitch:
            raise LibraryError(f"layer {self.name}: WIDTH {self.min_width} exceeds PITCH {self.pitch}")


@dataclass(frozen=True)
class TechRules:
    layers: tuple[LayerRule, ...]
    site_width: int
    row_height: int
    dbu_per_micron: int = 1000
    margin_scale: Fraction = Fraction(1)

    def __post_init__(self):
        if self.dbu_per_micron <= 0:
            raise LibraryError("DBU must be positive")
        if self.site_width <= 0 or self.row_height <= 0:
            raise LibraryError("SITE and ROW must be positive")
        if not self.layers or len(self.layers) % 2 == 0:
            raise LibraryError("layers must alternate metal/via, starting and ending with metal")
        for i, layer in enumerate(self.layers):
            expected = METAL if i % 2 == 0 else VIA
            if layer.kind != expected:
                raise LibraryError(f"layer {layer.name} at index {i} should be {expected}")
            layer.validate()
        names = [layer.name for layer in self.layers]
        if len(set(names)) != len(names):
            raise LibraryError("duplicate layer name")

    def layer(self, name: str) -> LayerRule:
        for layer in self.layers:
            if layer.name == name:
                return layer
        raise KeyError(name)

    def index(self, name: str) -> int:
        for i, layer in enumerate(self.layers):
            if layer.name == name:
                return i
        raise KeyError(name)

    @property
    def metals(self) -> tuple[LayerRule, ...]:
        return self.layers[::2]


@dataclass(frozen=True)
class Pin:
    name: str
    direction: str
    shapes: tuple[Rect, ...]

    @property
    def is_output(self) -> bool:
        return self.direction == "output"


@dataclass(frozen=True)
class CellMaster:
    name: str
    width: int
    height_rows: int
    pins: tuple[Pin, ...]
    power_rails: tuple[tuple[str, Rect], ...]
    obstructions: tuple[tuple[int, Rect], ...] = ()

    def pin(self, name: str) -> Pin:
        for p in self.pins:
            if p.name == name:
                return p
        raise KeyError(f"{self.name}.{name}")

    def height(self, rules: TechRules) -> int:
        return self.height_rows * rules.row_height

    @property
    def pin_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.pins)

    def validate(self, rules: TechRules) -> None:
        where = f"cell {self.name}"
        if self.width <= 0 or self.width % rules.site_width:
            raise LibraryError(f"{where}: width {self.width} is not a positive multiple of SITE {rules.site_width}")
        if self.height_rows < 1:
            raise LibraryError(f"{where}: height_rows must be >= 1")
        outline = Rect(0, 0, self.width, self.height(rules))
        if not self.pins:
            raise LibraryError(f"{where}: needs at least one signal pin")
        names = self.pin_names
        if len(set(names)) != len(names):
            raise LibraryError(f"{where}: duplicate pin name")
        for p in self.pins:
            if not p.shapes:
                raise LibraryError(f"{where}: pin {p.name} has no shapes")
            for r in p.shapes:
                if r.area <= 0 or not outline.contains_rect(r):
                    raise LibraryError(f"{where}: pin {p.name} shape {tuple(r)} outside cell")
        nets = {net for net, _ in self.power_rails}
        if nets != {"VDD", "VSS"}:
            raise LibraryError(f"{where}: needs VDD and VSS rails")
        for net, r in self.power_rails:
            if r.x1 != 0 or r.x2 != self.width or r.area <= 0 or not outline.contains_rect(r):
                raise LibraryError(f"{where}: {net} rail must span the full cell width")
        for layer, r in self.obstructions:
            if not 0 <= layer < len(rules.layers):
                raise LibraryError(f"{where}: obstruction on unknown layer index {layer}")
            if r.area <= 0 or not outline.contains_rect(r):
                raise LibraryError(f"{where}: obstruction {tuple(r)} outside cell")


# --------------------------------------------------------------------------- parsing


def _ints(tokens: Sequence[str], lineno: int) -> list[int]:
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise LibraryError(f"expected integers, got {' '.join(tokens)!r}", lineno) from None


def _rect(tokens: Sequence[str], lineno: int) -> Rect:
    if len(tokens) != 5 or tokens[0] != "RECT":
        raise LibraryError("expected RECT x1 y1 x2 y2", lineno)
    x1, y1, x2, y2 = _ints(tokens[1:], lineno)
    if x1 >= x2 or y1 >= y2:
        raise LibraryError("RECT must have x1 < x2 and y1 < y2", lineno)
    return Rect(x1, y1, x2, y2)


_METAL_KEYS = {"PITCH", "WIDTH", "SPACING", "DPSPACING"}
_VIA_KEYS = {"WIDTH", "SPACING", "CUTSPACING", "ENCLOSURE"}


def _parse_layer(tokens: list[str], lineno: int) -> LayerRule:
    if len(tokens) < 3:
        raise LibraryError("LAYER needs a name and a kind", lineno)
    name, kind = tokens[1], tokens[2]
    rest = tokens[3:]
    direction = NO_DIRECTION
    if kind == METAL:
        if not rest or rest[0] not in _DIRECTION_TOKENS:
            raise LibraryError(f"metal layer {name} needs H or V", lineno)
        direction = _DIRECTION_TOKENS[rest[0]]
        rest = rest[1:]
        allowed, required = _METAL_KEYS, {"PITCH", "WIDTH", "SPACING"}
    elif kind == VIA:
        allowed, required = _VIA_KEYS, _VIA_KEYS
    else:
        raise LibraryError(f"unknown layer kind {kind!r}", lineno)
    if len(rest) % 2:
        raise LibraryError("LAYER attributes must be KEY VALUE pairs", lineno)
    values: dict[str, int] = {}
    for key, value in zip(rest[::2], rest[1::2]):
        if key not in allowed:
            raise LibraryError(f"unknown keyword {key!r} for {kind} layer", lineno)
        if key in values:
            raise LibraryError(f"repeated keyword {key}", lineno)
        values[key] = _ints([value], lineno)[0]
    missing = required - values.keys()
    if missing:
        raise LibraryError(f"layer {name} missing {', '.join(sorted(missing))}", lineno)
    rule = LayerRule(
        name=name, kind=kind, direction=direction,
        pitch=values.get("PITCH", 0), min_width=values["WIDTH"], min_spacing=values["SPACING"],
        same_net_cut_spacing=values.get("CUTSPACING", 0), min_enclosure=values.get("ENCLOSURE", 0),
        dp_spacing=values.get("DPSPACING"),
    )
    try:
        rule.validate()
    except LibraryError as exc:
        raise LibraryError(str(exc), lineno) from None
    return rule


def parse_library(text: str) -> tuple[TechRules, list[CellMaster]]:
    """Parse library text into a rule deck and the cells in declaration order."""
    rules: Optional[TechRules] = None
    cells: list[CellMaster] = []
    seen: set[str] = set()
    section = None
    tech: dict = {}
    layers: list[LayerRule] = []
    cell: dict = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split("#", 1)[0].split()
        if not tokens:
            continue
        key = tokens[0]
        if section is None:
            if key == "TECH" and len(tokens) == 1:
                if rules is not None:
                    raise LibraryError("second TECH section", lineno)
                section = "tech"
            elif key == "CELL" and len(tokens) == 2:
                if rules is None:
                    raise LibraryError("CELL before TECH", lineno)
                name = tokens[1]
                if name in seen:
                    raise LibraryError(f"duplicate cell {name}", lineno)
                seen.add(name)
                section = "cell"
                cell = {"name": name, "line": lineno, "size": None, "pins": {}, "rails": [], "obs": []}
            else:
                raise LibraryError(f"unexpected {raw.strip()!r}", lineno)
            continue

        if key == "END" and len(tokens) == 1:
            if section == "tech":
                for k in ("DBU", "SITE", "ROW"):
                    if k not in tech:
                        raise LibraryError(f"TECH missing {k}", lineno)
                try:
                    rules = TechRules(layers=tuple(layers), site_width=tech["SITE"],
                                      row_height=tech["ROW"], dbu_per_micron=tech["DBU"])
                except LibraryError as exc:
                    raise LibraryError(str(exc), lineno) from None
            else:
                cells.append(_finish_cell(cell, rules, lineno))
            section = None
            continue

        if section == "tech":
            if key in ("DBU", "SITE", "ROW") and len(tokens) == 2:
                tech[key] = _ints(tokens[1:], lineno)[0]
            elif key == "LAYER":
                layers.append(_parse_layer(tokens, lineno))
            else:
                raise LibraryError(f"unknown keyword {key!r} in TECH", lineno)
        else:
            if key == "SIZE" and len(tokens) == 3:
                if cell["size"] is not None:
                    raise LibraryError("repeated SIZE", lineno)
                cell["size"] = tuple(_ints(tokens[1:], lineno))
            elif key == "PIN" and len(tokens) >= 3:
                pname, pdir = tokens[1], tokens[2]
                if pdir not in _PIN_DIRECTIONS:
                    raise LibraryError(f"pin direction must be IN, OUT or INOUT, got {pdir!r}", lineno)
                entry = cell["pins"].setdefault(pname, [_PIN_DIRECTIONS[pdir], []])
                if entry[0] != _PIN_DIRECTIONS[pdir]:
                    raise LibraryError(f"pin {pname} declared with two directions", lineno)
                entry[1].append(_rect(tokens[3:], lineno))
            elif key == "OBS" and len(tokens) >= 2:
                try:
                    index = rules.index(tokens[1])
                except KeyError:
                    raise LibraryError(f"unknown layer {tokens[1]!r}", lineno) from None
                cell["obs"].append((index, _rect(tokens[2:], lineno)))
            elif key == "RAIL" and len(tokens) >= 2:
                if tokens[1] not in ("VDD", "VSS"):
                    raise LibraryError("RAIL net must be VDD or VSS", lineno)
                cell["rails"].append((tokens[1], _rect(tokens[2:], lineno)))
            else:
                raise LibraryError(f"unknown keyword {key!r} in CELL", lineno)

    if section is not None:
        raise LibraryError(f"unterminated {section.upper()} section at end of file")
    if rules is None:
        raise LibraryError("no TECH section")
    return rules, cells


def _finish_cell(cell: dict, rules: TechRules, lineno: int) -> CellMaster:
    if cell["size"] is None:
        raise LibraryError(f"cell {cell['name']}: missing SIZE", lineno)
    width, rows = cell["size"]
    master = CellMaster(
        name=cell["name"], width=width, height_rows=rows,
        pins=tuple(Pin(n, d, tuple(shapes)) for n, (d, shapes) in cell["pins"].items()),
        power_rails=tuple(cell["rails"]), obstructions=tuple(cell["obs"]),
    )
    master.validate(rules)
    return master


def serialize_library(rules: TechRules, cells: Iterable[CellMaster]) -> str:
    """Inverse of :func:`parse_library` (margin_scale is not stored)."""
    direction_token = {HORIZONTAL: "H", VERTICAL: "V"}
    dir_token = {v: k for k, v in _PIN_DIRECTIONS.items()}
    lines = ["TECH", f"DBU {rules.dbu_per_micron}", f"SITE {rules.site_width}", f"ROW {rules.row_height}"]
    for layer in rules.layers:
        if layer.is_metal:
            words = [f"LAYER {layer.name} metal {direction_token[layer.direction]}",
                     f"PITCH {layer.pitch} WIDTH {layer.min_width} SPACING {layer.min_spacing}"]
            if layer.dp_spacing is not None:
                words.append(f"DPSPACING {layer.dp_spacing}")
        else:
            words = [f"LAYER {layer.name} via WIDTH {layer.min_width} SPACING {layer.min_spacing}",
                     f"CUTSPACING {layer.same_net_cut_spacing} ENCLOSURE {layer.min_enclosure}"]
        lines.append(" ".join(words))
    lines.append("END")
    for cell in cells:
        lines.append(f"CELL {cell.name}")
        lines.append(f"SIZE {cell.width} {cell.height_rows}")
        for p in cell.pins:
            for r in p.shapes:
                lines.append(f"PIN {p.name} {dir_token[p.direction]} RECT {r.x1} {r.y1} {r.x2} {r.y2}")
        for layer, r in cell.obstructions:
            lines.append(f"OBS {rules.layers[layer].name} RECT {r.x1} {r.y1} {r.x2} {r.y2}")
        for net, r in cell.power_rails:
            lines.append(f"RAIL {net} RECT {r.x1} {r.y1} {r.x2} {r.y2}")
        lines.append("END")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------- profiling


@dataclass(frozen=True)
class LibraryProfile:
    """Width/height tables and the single/multi-height split of a library."""

    cells: tuple[CellMaster, ...]
    widths: dict[str, int] = field(compare=False)
    height_rows: dict[str, int] = field(compare=False)
    single_height: tuple[str, ...]
    multi_height: tuple[str, ...]
    min_width: int
    normalized_widths: dict[str, Fraction] = field(compare=False)
    pin_counts: dict[str, int] = field(compare=False)

    def cell(self, name: str) -> CellMaster:
        for c in self.cells:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def by_name(self) -> dict[str, CellMaster]:
        return {c.name: c for c in self.cells}

    def __len__(self) -> int:
        return len(self.cells)


def profile_library(cells: Sequence[CellMaster]) -> LibraryProfile:
    if not cells:
        raise ValueError("cannot profile an empty library")
    min_width = min(c.width for c in cells)
    return LibraryProfile(
        cells=tuple(cells),
        widths={c.name: c.width for c in cells},
        height_rows={c.name: c.height_rows for c in cells},
        single_height=tuple(c.name for c in cells if c.height_rows == 1),
        multi_height=tuple(c.name for c in cells if c.height_rows > 1),
        min_width=min_width,
        normalized_widths={c.name: Fraction(c.width, min_width) for c in cells},
        pin_counts={c.name: len(c.pins) for c in cells},
    )


# --------------------------------------------------------------------------- margins


def _as_fraction(value) -> Fraction:
    if isinstance(value, float):
        # 1.1 should mean 11/10, not the nearest binary double
        return Fraction(repr(value))
    return Fraction(value)


def scale_rules(rules: TechRules, factor) -> TechRules:
    """Tighten the width/spacing/enclosure rules by `factor`, rounding up.

    Pitches and double-patterning spacing are left alone.
    """
    factor = _as_fraction(factor)
    if factor < 1:
        raise ValueError(f"margin factor must be >= 1, got {factor}")

    def up(v: int) -> int:
        return math.ceil(v * factor) if v else 0

    layers = tuple(
        replace(layer, min_width=up(layer.min_width), min_spacing=up(layer.min_spacing),
                same_net_cut_spacing=up(layer.same_net_cut_spacing),
                min_enclosure=up(layer.min_enclosure))
        for layer in rules.layers
    )
    return replace(rules, layers=layers, margin_scale=rules.margin_scale * factor)
