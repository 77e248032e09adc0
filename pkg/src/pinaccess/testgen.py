"""Abutment testcell enumeration and pin connectivity assignment."""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .geometry import Rect
from .techlib import CellMaster, LibraryProfile, TechRules

log = logging.getLogger(__name__)

ORIENTATIONS = ("N", "FN", "S", "FS")
METHODS = ("conventional", "synopsys", "proposed")
MODES = ("single_cell_only", "cell_by_cell_only", "all_combo_in_one_cell_only", "all")
STRATEGIES = ("aligned", "random")

class UnsupportedAbutment(ValueError):
    pass


def transform_point(x: int, y: int, width: int, height: int, orient: str) -> tuple[int, int]:
    """Cell-local point to placed-local point (origin not yet added)."""
    if orient == "N":
        return x, y
    if orient == "FN":
        return width - x, y
    if orient == "S":
        return width - x, height - y
    if orient == "FS":
        return x, height - y
    raise ValueError(f"unknown orientation {orient!r}")


def transform_rect(r: Rect, width: int, height: int, orient: str, origin=(0, 0)) -> Rect:
    x1, y1 = transform_point(r.x1, r.y1, width, height, orient)
    x2, y2 = transform_point(r.x2, r.y2, width, height, orient)
    return Rect.normalized(x1, y1, x2, y2).translated(*origin)


def mirrored_x(orient: str) -> bool:
    return orient in ("FN", "S")


@dataclass(frozen=True)
class Instance:
    name: str
    master: str
    origin: tuple[int, int]
    orientation: str


@dataclass(frozen=True)
class Net:
    name: str
    terminals: tuple[tuple[str, str], ...]
    unconnected: bool = False


@dataclass(frozen=True)
class TestcellSpec:
    id: str
    kind: str
    instances: tuple[Instance, ...]
    die_area: Rect
    nets: tuple[Net, ...] = ()
    # (sub-testcell id, instance names) for concatenated placements
    blocks: tuple[tuple[str, tuple[str, ...]], ...] = ()

    __test__ = False  # not a pytest class

    def instance(self, name: str) -> Instance:
        for inst in self.instances:
            if inst.name == name:
                return inst
        raise KeyError(name)

    @property
    def masters(self) -> tuple[str, ...]:
        return tuple(sorted({i.master for i in self.instances}))

    def net_of(self) -> dict[tuple[str, str], str]:
        return {t: net.name for net in self.nets for t in net.terminals}


def instance_bbox(inst: Instance, cell: CellMaster, rules: TechRules) -> Rect:
    x, y = inst.origin
    return Rect(x, y, x + cell.width, y + cell.height(rules))


def placed_pin_shapes(inst: Instance, cell: CellMaster, rules: TechRules, pin: str) -> tuple[Rect, ...]:
    h = cell.height(rules)
    return tuple(transform_rect(r, cell.width, h, inst.orientation, inst.origin)
                 for r in cell.pin(pin).shapes)


# --------------------------------------------------------------------------- counting


def count_instances(n: int, method: str) -> int:
    """Instances needed to cover every abutment of an n-cell single-height library."""
    if n < 1:
        raise ValueError("library size must be >= 1")
    if method == "conventional":
        return 8 * n + 8 * (n - 1) * n
    if method == "synopsys":
        return 6 * n + 6 * (n - 1) * n
    if method == "proposed":
        # 2.5 per ordered pair == 5 per unordered pair; n(n-1) is even
        return 4 * n + 5 * n * (n - 1) // 2
    raise ValueError(f"unknown method {method!r}")


# --------------------------------------------------------------------------- placement


class _Placer:
    def __init__(self, cells: Mapping[str, CellMaster], rules: TechRules):
        self.cells = cells
        self.rules = rules
        self.instances: list[Instance] = []

    def put(self, master: str, x: int, y: int, orient: str) -> int:
        self.instances.append(Instance(f"U{len(self.instances) + 1}", master, (x, y), orient))
        return x + self.cells[master].width

    def row(self, items: Sequence[tuple[str, str]], x: int = 0, y: int = 0) -> int:
        for master, orient in items:
            x = self.put(master, x, y, orient)
        return x

    def spec(self, tid: str, kind: str) -> TestcellSpec:
        x2 = max(i.origin[0] + self.cells[i.master].width for i in self.instances)
        y2 = max(i.origin[1] + self.cells[i.master].height(self.rules) for i in self.instances)
        return TestcellSpec(tid, kind, tuple(self.instances), Rect(0, 0, x2, y2))


def _gap(rules: TechRules) -> int:
    """Two routing pitches, rounded up to whole sites so tracks stay aligned."""
    pitch = max(m.pitch for m in rules.metals)
    sites = -(-2 * pitch // rules.site_width)
    return sites * rules.site_width


def _vgap(rules: TechRules) -> int:
    horizontal = [m.pitch for m in rules.metals if m.direction == "horizontal"]
    return 2 * (horizontal[-1] if horizontal else rules.metals[0].pitch)


def aa_row(a: str, cells, rules) -> TestcellSpec:
    p = _Placer(cells, rules)
    p.row([(a, "N"), (a, "FN"), (a, "FN"), (a, "N")])
    return p.spec(f"scell_{a}", "aa_row")


def ab_row(a: str, b: str, cells, rules) -> TestcellSpec:
    p = _Placer(cells, rules)
    p.row([(b, "N"), (a, "N"), (b, "FN"), (a, "FN"), (b, "N")])
    return p.spec(f"scell_{a}_{b}", "ab_row")


def mh_ab(a: str, b: str, cells, rules) -> TestcellSpec:
    """Multi-height `a` flanked by stacked single-height `b` columns, then mirrored."""
    rows = cells[a].height_rows
    if cells[b].height_rows != 1:
        raise UnsupportedAbutment(f"{b} is not single-height")
    row_h = rules.row_height
    p = _Placer(cells, rules)

    def column(x, flip):
        for k in range(rows):
            if flip:
                orient = "S" if k % 2 else "FN"
            else:
                orient = "FS" if k % 2 else "N"
            end = p.put(b, x, k * row_h, orient)
        return end

    # same parity as ab_row, so all four facing-edge pairings appear
    x = column(0, False)
    x = p.put(a, x, 0, "N")
    x = column(x, True)
    x = p.put(a, x, 0, "FN")
    column(x, False)
    return p.spec(f"mcell_{a}_{b}", "mh_ab")


def _pair_height(a: str, b: str, cells, rules) -> int:
    return max(cells[a].height(rules), cells[b].height(rules))


def synopsys_pair(a: str, b: str, cells, rules) -> TestcellSpec:
    p = _Placer(cells, rules)
    p.row([(b, "N"), (a, "N"), (b, "N")])
    # second row kept clear of the first so VDD/VSS rails never meet
    p.row([(b, "FN"), (a, "N"), (b, "FN")], y=_pair_height(a, b, cells, rules) + _vgap(rules))
    return p.spec(f"pcell_{a}_{b}", "synopsys_pair")


def conventional_pair(a: str, b: str, cells, rules) -> TestcellSpec:
    """Every side-edge pairing of (a, b) using all four orientations."""
    gap = _gap(rules)
    h = _pair_height(a, b, cells, rules)
    p = _Placer(cells, rules)
    x = p.row([(a, "N"), (b, "N")])
    p.row([(a, "FN"), (b, "FN")], x=x + gap)
    x = p.row([(a, "FS"), (b, "S")], y=h)
    p.row([(a, "S"), (b, "FS")], x=x + gap, y=h)
    return p.spec(f"ccell_{a}_{b}", "conventional_pair")


def combine(specs: Sequence[TestcellSpec], cells, rules, tid: str) -> TestcellSpec:
    """Concatenate testcells left to right, two pitches apart, keeping nets disjoint."""
    gap = _gap(rules)
    instances: list[Instance] = []
    nets: list[Net] = []
    blocks = []
    x0 = 0
    for spec in specs:
        rename = {}
        for inst in spec.instances:
            new = f"U{len(instances) + 1}"
            rename[inst.name] = new
            instances.append(Instance(new, inst.master, (inst.origin[0] + x0, inst.origin[1]), inst.orientation))
        for net in spec.nets:
            nets.append(Net(f"{spec.id}__{net.name}",
                            tuple((rename[i], pin) for i, pin in net.terminals), net.unconnected))
        blocks.append((spec.id, tuple(rename.values())))
        x0 += spec.die_area.x2 + gap
    height = max(s.die_area.y2 for s in specs)
    return TestcellSpec(tid, "combo", tuple(instances), Rect(0, 0, x0 - gap, height), tuple(nets), tuple(blocks))


# --------------------------------------------------------------------------- enumeration


def enumerate_testcells(profile: LibraryProfile, rules: TechRules, method: str = "proposed",
                        mode: str = "all") -> list[TestcellSpec]:
    """Testcells covering the library's abutments for one method and mode.

    ``all`` returns the same testcells as ``cell_by_cell_only``: the combined
    placement of ``all_combo_in_one_cell_only`` spaces its members apart and so
    contains no seam that the individual testcells lack.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    cells = profile.by_name
    single = list(profile.single_height)
    multi = list(profile.multi_height)
    out: list[TestcellSpec] = []

    if method == "proposed":
        for name in single + multi:
            out.append(aa_row(name, cells, rules))
        if mode != "single_cell_only":
            for i, a in enumerate(single):
                for b in single[i + 1:]:
                    out.append(ab_row(a, b, cells, rules))
            for a in multi:
                for b in single:
                    out.append(mh_ab(a, b, cells, rules))
            if len(multi) > 1:
                log.warning("skipping %d multi-height/multi-height pairs (unsupported)",
                            len(multi) * (len(multi) - 1) // 2)
    else:
        build = synopsys_pair if method == "synopsys" else conventional_pair
        names = single + multi
        skipped = 0
        for a in names:
            for b in names:
                if a != b and (mode == "single_cell_only" or (a in multi and b in multi)):
                    skipped += a != b and mode != "single_cell_only"
                    continue
                out.append(build(a, b, cells, rules))
        if skipped:
            log.warning("skipping %d multi-height/multi-height pairs (unsupported)", skipped // 2)

    if mode == "all_combo_in_one_cell_only":
        return [combine(out, cells, rules, f"allcombo_{method}")]
    return out


def pair_testcell(a: CellMaster, b: CellMaster, rules: TechRules) -> TestcellSpec:
    """The proposed arrangement for one pair; multi/multi pairs are rejected."""
    cells = {a.name: a, b.name: b}
    if a.height_rows > 1 and b.height_rows > 1:
        raise UnsupportedAbutment(f"{a.name}/{b.name}: multi-height with multi-height is not supported")
    if a.height_rows > 1:
        return mh_ab(a.name, b.name, cells, rules)
    if b.height_rows > 1:
        return mh_ab(b.name, a.name, cells, rules)
    if a.name == b.name:
        return aa_row(a.name, cells, rules)
    return ab_row(a.name, b.name, cells, rules)


# --------------------------------------------------------------------------- boundary classes


@dataclass(frozen=True, order=True)
class BoundaryClass:
    left_master: str
    left_edge: str
    right_master: str
    right_edge: str
    canonical: bool = False

    @classmethod
    def of(cls, left_master, left_edge, right_master, right_edge) -> "BoundaryClass":
        # mirroring the whole layout swaps the sides; the facing edges are unchanged
        a = (left_master, left_edge, right_master, right_edge)
        b = (right_master, right_edge, left_master, left_edge)
        return cls(*min(a, b), canonical=True)

    def __str__(self):
        return f"({self.left_master}.{self.left_edge}|{self.right_master}.{self.right_edge})"


def boundary_classes(spec: TestcellSpec, cells: Mapping[str, CellMaster], rules: TechRules) -> set[BoundaryClass]:
    """Canonical edge pairing of every interior vertical seam."""
    boxes = [(inst, instance_bbox(inst, cells[inst.master], rules)) for inst in spec.instances]
    out = set()
    for left, lb in boxes:
        for right, rb in boxes:
            if lb.x2 != rb.x1 or min(lb.y2, rb.y2) <= max(lb.y1, rb.y1):
                continue
            left_edge = "L" if mirrored_x(left.orientation) else "R"
            right_edge = "R" if mirrored_x(right.orientation) else "L"
            out.add(BoundaryClass.of(left.master, left_edge, right.master, right_edge))
    return out


# --------------------------------------------------------------------------- connectivity


def derive_seed(seed: int, *keys: str) -> np.random.SeedSequence:
    """Independent stream per (seed, key...) regardless of enumeration order."""
    words = [seed & 0xFFFFFFFFFFFFFFFF]
    for key in keys:
        digest = hashlib.blake2b(key.encode(), digest_size=8).digest()
        words.append(int.from_bytes(digest, "little"))
    return np.random.SeedSequence(words)


def make_rng(seed: int, *keys: str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *keys)))


def _aligned(instances: Sequence[Instance], cells, prefix: str = "") -> list[Net]:
    groups: dict[tuple[str, str], list] = {}
    for inst in instances:
        for pin in cells[inst.master].pins:
            groups.setdefault((inst.master, pin.name), []).append((inst.name, pin.name))
    return [Net(f"{prefix}{m}_{p}", tuple(t), unconnected=len(t) < 2) for (m, p), t in groups.items()]


def _random(instances: Sequence[Instance], cells, rng: np.random.Generator, prefix: str = "") -> list[Net]:
    outputs, inputs = [], []
    for inst in instances:
        for pin in cells[inst.master].pins:
            (outputs if pin.is_output else inputs).append((inst.name, pin.name))
    order = [inputs[i] for i in rng.permutation(len(inputs))]
    fanout = [int(f) for f in rng.integers(1, 4, size=len(outputs))]
    taken: list[list] = [[] for _ in outputs]

    def grab(k: int) -> bool:
        for idx, term in enumerate(order):
            if term[0] != outputs[k][0]:
                taken[k].append(order.pop(idx))
                return True
        return False

    # every output first gets one sink, then extra sinks up to its fanout
    for k in range(len(outputs)):
        grab(k)
    for k in range(len(outputs)):
        while len(taken[k]) < fanout[k] and grab(k):
            pass
    nets = []
    for k, out in enumerate(outputs):
        nets.append(Net(f"{prefix}n{k + 1}", (out, *taken[k]), unconnected=not taken[k]))
    if order:
        nets.append(Net(f"{prefix}dump", tuple(order), unconnected=len(order) < 2))
    return nets


def assign_connectivity(spec: TestcellSpec, cells: Mapping[str, CellMaster], strategy: str = "aligned",
                        seed: int = 0) -> TestcellSpec:
    """Return `spec` with every signal pin placed on exactly one net.

    The random strategy draws from a stream keyed by (seed, testcell id), so a
    testcell's nets do not depend on which other testcells were generated.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown connectivity strategy {strategy!r}")
    if not any(cells[i.master].pins for i in spec.instances):
        raise ValueError(f"{spec.id}: no signal pins to connect")
    by_name = {i.name: i for i in spec.instances}
    blocks = spec.blocks or ((spec.id, tuple(by_name)),)
    nets: list[Net] = []
    for block_id, names in blocks:
        members = [by_name[n] for n in names]
        prefix = f"{block_id}__" if spec.blocks else ""
        if strategy == "aligned":
            nets += _aligned(members, cells, prefix)
        else:
            nets += _random(members, cells, make_rng(seed, "connectivity", block_id), prefix)
    return replace(spec, nets=tuple(nets))


def net_pin_centers(spec: TestcellSpec, cells, rules) -> dict[str, list[tuple[int, int]]]:
    """Placed centre of each terminal's first pin shape, per net."""
    out = {}
    for net in spec.nets:
        pts = []
        for inst_name, pin in net.terminals:
            inst = spec.instance(inst_name)
            r = placed_pin_shapes(inst, cells[inst.master], rules, pin)[0]
            pts.append(((r.x1 + r.x2) // 2, (r.y1 + r.y2) // 2))
        out[net.name] = pts
    return out


def hpwl(points: Iterable[tuple[int, int]]) -> int:
    pts = list(points)
    if not pts:
        return 0
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    return (max(xs) - min(xs)) + (max(ys) - min(ys))


def check_spec(spec: TestcellSpec, cells: Mapping[str, CellMaster], rules: TechRules,
               require_nets: bool = True) -> None:
    """Raise ValueError when a testcell breaks its placement or net invariants."""
    boxes = [instance_bbox(i, cells[i.master], rules) for i in spec.instances]
    for k, (inst, box) in enumerate(zip(spec.instances, boxes)):
        if not spec.die_area.contains_rect(box):
            raise ValueError(f"{spec.id}: {inst.name} outside die area")
        for other, obox in zip(spec.instances[k + 1:], boxes[k + 1:]):
            if box.overlaps(obox):
                raise ValueError(f"{spec.id}: {inst.name} overlaps {other.name}")
    if spec.die_area.y2 != max(b.y2 for b in boxes):
        raise ValueError(f"{spec.id}: die height differs from the stack height")
    if not require_nets:
        return
    seen: dict[tuple[str, str], str] = {}
    for net in spec.nets:
        if len(net.terminals) < 2 and not net.unconnected:
            raise ValueError(f"{spec.id}: net {net.name} has fewer than two terminals")
        for t in net.terminals:
            if t in seen:
                raise ValueError(f"{spec.id}: pin {t} on nets {seen[t]} and {net.name}")
            seen[t] = net.name
    for inst in spec.instances:
        for pin in cells[inst.master].pins:
            if (inst.name, pin.name) not in seen:
                raise ValueError(f"{spec.id}: pin {inst.name}.{pin.name} is on no net")
    names = [n.name for n in spec.nets]
    if len(set(names)) != len(names):
        raise ValueError(f"{spec.id}: duplicate net name")
