"""Geometric rule checks over a routed testcell and per-master attribution.

Routed geometry is turned into rectangles first (`materialize`), then checked
layer by layer. Pairwise rules run over an x-sorted sweep with a window as
wide as the largest spacing of the layer; `tests/test_drc.py` holds the
all-pairs oracle it is compared against.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Optional, Sequence

from .geometry import Rect, UnionFind, bbox, covered, distance2, gap_marker, square
from .router import RouteDB
from .techlib import CellMaster, TechRules
from .testgen import TestcellSpec, instance_bbox, transform_rect

RULES = ("diff_net_spacing", "same_net_cut_spacing", "min_width", "min_enclosure",
         "dp_odd_cycle", "short", "open")

DISPLAY_NAMES = {
    "diff_net_spacing": "Diff net spacing",
    "same_net_cut_spacing": "Same net via-cut spacing",
    "min_width": "Minimum width",
    "min_enclosure": "Enclosure",
    "dp_odd_cycle": "Double pattern odd cycle",
    "short": "Short",
    "open": "Open",
}

# names accepted in an ignore list that have no check behind them
RECOGNIZED_ONLY = frozenset({
    "End of line spacing", "Diff net var rule spacing", "Same net spacing",
    "Same net var rule spacing", "Less than minimum area", "Less than minimum edge length",
})

_ALIASES = {
    "Diff net via-cut spacing": "diff_net_spacing",
    "Self aligned via cut spacing": "same_net_cut_spacing",
    "Local double pattern cycle": "dp_odd_cycle",
    "Less than minimum width": "min_width",
    "Needs fat contact": "min_enclosure",
}


def normalize_ignore(names: Iterable[str]) -> frozenset[str]:
    """Map display names or aliases onto rule keys.

    Unknown names raise ValueError; names that are only recognized are dropped.
    """
    by_display = {v.lower(): k for k, v in DISPLAY_NAMES.items()}
    by_display.update({k.lower(): v for k, v in _ALIASES.items()})
    known = {n.lower() for n in RECOGNIZED_ONLY}
    out = set()
    for name in names:
        key = name.strip()
        if key in RULES:
            out.add(key)
        elif key.lower() in by_display:
            out.add(by_display[key.lower()])
        elif key.lower() not in known:
            raise ValueError(f"unknown DRC rule {name!r}")
    return frozenset(out)


@dataclass(frozen=True, order=True)
class DrcViolation:
    rule: str
    layer: str
    marker: Rect
    nets: tuple[str, ...] = ()
    masters: tuple[str, ...] = ()

    @property
    def display_name(self) -> str:
        return DISPLAY_NAMES[self.rule]


@dataclass(frozen=True)
class Shape:
    layer: str
    rect: Rect
    net: str
    owner: Optional[str] = None  # instance name for library geometry
    is_cut: bool = False


# --------------------------------------------------------------------------- materialization


def _wire(seg, width: int, horizontal: bool) -> Rect:
    half = width // 2
    if horizontal:
        return Rect(seg.lo - half, seg.track - half, seg.hi - half + width, seg.track - half + width)
    return Rect(seg.track - half, seg.lo - half, seg.track - half + width, seg.hi - half + width)


def materialize(spec: TestcellSpec, db: RouteDB, cells: Mapping[str, CellMaster],
                rules: TechRules) -> list[Shape]:
    """Library geometry plus the routed wires and vias.

    Wires are drawn at each layer's minimum width and extended by half a width
    past their end points. Vias get a cut at the cut layer's width and a pad of
    cut plus twice the enclosure on each enclosing routing layer (M1 is only
    ever enclosed by the pin itself). Straps are not materialized.
    """
    names = [layer.name for layer in rules.layers]
    m1 = names[0]
    m2, m3, v1, v2 = db.layer_names
    net_of = spec.net_of()
    shapes: list[Shape] = []
    for inst in spec.instances:
        cell = cells[inst.master]
        h = cell.height(rules)
        for pin in cell.pins:
            net = net_of.get((inst.name, pin.name), f"{inst.name}.{pin.name}")
            for r in pin.shapes:
                shapes.append(Shape(m1, transform_rect(r, cell.width, h, inst.orientation, inst.origin),
                                    net, inst.name))
        for net, r in cell.power_rails:
            shapes.append(Shape(m1, transform_rect(r, cell.width, h, inst.orientation, inst.origin),
                                net, inst.name))
        for layer_index, r in cell.obstructions:
            shapes.append(Shape(names[layer_index], transform_rect(r, cell.width, h, inst.orientation, inst.origin),
                                f"{inst.name}.OBS", inst.name, rules.layers[layer_index].kind == "via"))
    w2, w3 = rules.layer(m2).min_width, rules.layer(m3).min_width
    for name in sorted(db.nets):
        net = db.nets[name]
        for seg in net.segments:
            if seg.layer == m2:
                shapes.append(Shape(m2, _wire(seg, w2, True), name))
            else:
                shapes.append(Shape(m3, _wire(seg, w3, False), name))
        for via in net.vias:
            cut = rules.layer(via.kind)
            shapes.append(Shape(via.kind, square(via.x, via.y, cut.min_width), name, is_cut=True))
            pad = cut.min_width + 2 * cut.min_enclosure
            above = [m2] if via.kind == v1 else [m2, m3]
            for metal in above:
                size = max(pad, rules.layer(metal).min_width)
                shapes.append(Shape(metal, square(via.x, via.y, size), name))
    del m1
    return shapes


# --------------------------------------------------------------------------- pairwise checks


def _pair_violation(a: Shape, b: Shape, spacing: int, cut_spacing: int) -> Optional[DrcViolation]:
    if a.owner is not None and a.owner == b.owner:
        return None  # cell-internal geometry is the library's own business
    d2 = distance2(a.rect, b.rect)
    nets = tuple(sorted({a.net, b.net}))
    if a.net != b.net:
        if d2 == 0:
            return DrcViolation("short", a.layer, gap_marker(a.rect, b.rect), nets)
        if d2 < spacing * spacing:
            return DrcViolation("diff_net_spacing", a.layer, gap_marker(a.rect, b.rect), nets)
        return None
    if a.is_cut and b.is_cut and 0 < d2 < cut_spacing * cut_spacing:
        return DrcViolation("same_net_cut_spacing", a.layer, gap_marker(a.rect, b.rect), nets)
    return None


def pair_reach(spacing: int, cut_spacing: int) -> int:
    return max(spacing, cut_spacing, 0)


def check_pairs_bruteforce(shapes: Sequence[Shape], rules: TechRules) -> list[DrcViolation]:
    """All-pairs reference for `check_shapes`' pairwise rules."""
    out = []
    for i, a in enumerate(shapes):
        layer = rules.layer(a.layer)
        for b in shapes[i + 1:]:
            if b.layer != a.layer:
                continue
            v = _pair_violation(a, b, layer.min_spacing, layer.same_net_cut_spacing)
            if v is not None:
                out.append(v)
    return sorted(set(out))


def check_shapes(shapes: Sequence[Shape], rules: TechRules) -> list[DrcViolation]:
    """Pairwise spacing checks plus minimum width over materialized shapes."""
    out = set()
    by_layer: dict[str, list[Shape]] = {}
    for s in shapes:
        by_layer.setdefault(s.layer, []).append(s)
    for name, group in by_layer.items():
        layer = rules.layer(name)
        reach = pair_reach(layer.min_spacing, layer.same_net_cut_spacing)
        group = sorted(group, key=lambda s: (s.rect.x1, s.rect))
        active: list[Shape] = []
        for b in group:
            # anything whose right edge is `reach` or more to the left is out of range
            active = [a for a in active if b.rect.x1 - a.rect.x2 < max(reach, 1)]
            for a in active:
                v = _pair_violation(a, b, layer.min_spacing, layer.same_net_cut_spacing)
                if v is not None:
                    out.add(v)
            active.append(b)
        for s in group:
            if layer.min_width and min(s.rect.width, s.rect.height) < layer.min_width and not s.net.endswith(".OBS"):
                out.add(DrcViolation("min_width", name, s.rect, (s.net,)))
    return sorted(out)


def check_enclosure(shapes: Sequence[Shape], rules: TechRules) -> list[DrcViolation]:
    """Every cut grown by its enclosure must sit inside same-net metal above and below."""
    names = [layer.name for layer in rules.layers]
    metal: dict[tuple[str, str], list[Rect]] = {}
    for s in shapes:
        if not s.is_cut:
            metal.setdefault((s.layer, s.net), []).append(s.rect)
    out = []
    for s in shapes:
        if not s.is_cut or s.net.endswith(".OBS"):
            continue
        idx = names.index(s.layer)
        need = s.rect.expanded(rules.layers[idx].min_enclosure)
        for neighbour in (names[idx - 1], names[idx + 1] if idx + 1 < len(names) else None):
            if neighbour is None:
                continue
            if not covered(need, metal.get((neighbour, s.net), [])):
                out.append(DrcViolation("min_enclosure", s.layer, need, (s.net,)))
                break
    return out


# --------------------------------------------------------------------------- double patterning


def _odd_cycle(adj: list[list[int]], component: list[int]) -> Optional[list[int]]:
    """Shortest odd cycle (as a node list) inside one component, or None."""
    best: Optional[list[int]] = None
    for root in component:
        dist = {root: 0}
        parent = {root: -1}
        queue = deque([root])
        found = None
        while queue and found is None:
            v = queue.popleft()
            for w in adj[v]:
                if w not in dist:
                    dist[w] = dist[v] + 1
                    parent[w] = v
                    queue.append(w)
                elif dist[w] == dist[v]:
                    found = (v, w)
                    break
        if found is None:
            continue
        v, w = found
        left, right = [v], [w]
        while parent[left[-1]] != -1:
            left.append(parent[left[-1]])
        while parent[right[-1]] != -1:
            right.append(parent[right[-1]])
        # trim the shared tail so only the cycle remains
        while len(left) > 1 and len(right) > 1 and left[-2] == right[-2]:
            left.pop()
            right.pop()
        cycle = left + right[-2::-1]
        if best is None or len(cycle) < len(best):
            best = cycle
        if len(best) == 3:
            break
    return best


def is_bipartite(adj: list[list[int]], component: list[int]) -> bool:
    color = {component[0]: 0}
    queue = deque([component[0]])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w not in color:
                color[w] = 1 - color[v]
                queue.append(w)
            elif color[w] == color[v]:
                return False
    return True


def check_dp_odd_cycle(shapes: Sequence[Shape], dp_spacing: int, layer: str = "") -> list[DrcViolation]:
    """One violation per non-two-colourable conflict component.

    Touching same-net shapes are merged into one feature first. Two features
    conflict when any of their shapes are closer than `dp_spacing`. The marker
    is the bounding box of the shortest odd cycle found in the component.
    """
    if dp_spacing is None or dp_spacing <= 0:
        return []
    shapes = list(shapes)
    n = len(shapes)
    uf = UnionFind(n)
    order = sorted(range(n), key=lambda k: shapes[k].rect.x1)
    for ai, a in enumerate(order):
        for b in order[ai + 1:]:
            if shapes[b].rect.x1 - shapes[a].rect.x2 > dp_spacing:
                continue
            if shapes[a].net == shapes[b].net and shapes[a].rect.touches(shapes[b].rect):
                uf.union(a, b)
    roots = sorted({uf.find(k) for k in range(n)})
    index = {r: i for i, r in enumerate(roots)}
    feature = [index[uf.find(k)] for k in range(n)]
    members: list[list[int]] = [[] for _ in roots]
    for k in range(n):
        members[feature[k]].append(k)
    adj_sets: list[set] = [set() for _ in roots]
    limit = dp_spacing * dp_spacing
    for ai, a in enumerate(order):
        for b in order[ai + 1:]:
            if shapes[b].rect.x1 - shapes[a].rect.x2 >= dp_spacing:
                continue
            fa, fb = feature[a], feature[b]
            if fa != fb and distance2(shapes[a].rect, shapes[b].rect) < limit:
                adj_sets[fa].add(fb)
                adj_sets[fb].add(fa)
    adj = [sorted(s) for s in adj_sets]
    seen = [False] * len(roots)
    out = []
    for start in range(len(roots)):
        if seen[start]:
            continue
        component = []
        queue = deque([start])
        seen[start] = True
        while queue:
            v = queue.popleft()
            component.append(v)
            for w in adj[v]:
                if not seen[w]:
                    seen[w] = True
                    queue.append(w)
        if len(component) < 3 or is_bipartite(adj, component):
            continue
        cycle = _odd_cycle(adj, sorted(component))
        rects = [shapes[k].rect for f in cycle for k in members[f]]
        nets = tuple(sorted({shapes[k].net for f in cycle for k in members[f]}))
        out.append(DrcViolation("dp_odd_cycle", layer or shapes[0].layer, bbox(rects), nets))
    return sorted(out)


# --------------------------------------------------------------------------- entry points


def open_violations(spec: TestcellSpec, db: RouteDB) -> list[DrcViolation]:
    out = []
    for name in sorted(db.nets):
        net = db.nets[name]
        if net.status != "open":
            continue
        missing = net.unreached or net.terminals
        rects = [r for t in missing for r in db.pin_shapes.get(t, ())]
        if rects:
            out.append(DrcViolation("open", db.layer_names[0], bbox(rects), (name,)))
    return out


def check_drc(spec: TestcellSpec, db: RouteDB, cells: Mapping[str, CellMaster], rules: TechRules,
              ignore: Iterable[str] = ()) -> list[DrcViolation]:
    """All checks on one routed testcell, minus the rules in `ignore`."""
    skip = normalize_ignore(ignore)
    shapes = materialize(spec, db, cells, rules)
    found = set(check_shapes(shapes, rules))
    found.update(check_enclosure(shapes, rules))
    for layer in rules.layers:
        if layer.is_metal and layer.dp_spacing:
            found.update(check_dp_odd_cycle([s for s in shapes if s.layer == layer.name],
                                            layer.dp_spacing, layer.name))
    found.update(open_violations(spec, db))
    return sorted(v for v in found if v.rule not in skip)


def attribute(violations: Iterable[DrcViolation], spec: TestcellSpec, cells: Mapping[str, CellMaster],
              rules: TechRules, halo: Optional[int] = None) -> list[DrcViolation]:
    """Fill `masters` with every master whose halo-grown instance box meets the marker."""
    if halo is None:
        halo = rules.layers[2].pitch if len(rules.layers) > 2 else 0
    if halo < 0:
        raise ValueError("halo must be non-negative")
    boxes = [(inst.master, instance_bbox(inst, cells[inst.master], rules).expanded(halo))
             for inst in spec.instances]
    out = []
    for v in violations:
        masters = tuple(sorted({m for m, box in boxes if box.touches(v.marker)}))
        out.append(replace(v, masters=masters))
    return out
