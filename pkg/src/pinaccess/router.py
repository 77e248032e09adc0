"""Two-layer track-grid router with random power-strap blockage.

Routing happens on the horizontal M2 tracks and vertical M3 tracks only.
Pins on M1 are reached through V1 cuts dropped at access points; M2 and M3
meet through V2. Nets are routed PathFinder style: every net is searched
with A*, nets may share a grid node at a price, and shared nodes accumulate
history cost until the sharing disappears or the iteration budget runs out.
Only opens and shorts are repaired; the router knows nothing of spacing
rules other than the keep-out it leaves around fixed blockages.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional

import numpy as np

from .geometry import Rect, UnionFind, covered, square
from .techlib import HORIZONTAL, VERTICAL, CellMaster, TechRules
from .testgen import TestcellSpec, hpwl, make_rng, placed_pin_shapes, transform_rect

M2, M3 = 0, 1
ROUTING_LAYER_INDEX = (2, 4)  # M2 and M3 in the rule deck


def routing_layers(rules: TechRules):
    if len(rules.layers) < 5:
        raise ValueError("routing needs at least M1/V1/M2/V2/M3")
    m2, v1, m3, v2 = rules.layers[2], rules.layers[1], rules.layers[4], rules.layers[3]
    if m2.direction != HORIZONTAL or m3.direction != VERTICAL:
        raise ValueError("expected horizontal M2 and vertical M3")
    return m2, m3, v1, v2


# --------------------------------------------------------------------------- straps


@dataclass(frozen=True)
class Strap:
    layer: str
    direction: str
    offset: int
    width: int
    step: int
    net: str
    rect: Rect


@dataclass(frozen=True)
class StrapPlan:
    straps: tuple[Strap, ...] = ()
    seed: int = 0


def draw_strap_dims(rng: np.random.Generator, dbu_per_micron: int = 1000) -> tuple[Fraction, Fraction]:
    """One (width, step) draw in microns: floor(u*100)/500 and floor(u'*100)/50.

    Zero draws are redrawn so that every strap has positive width and step.
    """
    while True:
        width = Fraction(int(rng.random() * 100), 500)
        if width:
            break
    while True:
        step = Fraction(int(rng.random() * 100), 50)
        if step:
            break
    return width, step


def _to_dbu(microns: Fraction, dbu: int) -> int:
    return max(1, int(microns * dbu))


def plan_straps(die: Rect, rules: TechRules, seed: int, enabled: bool = True, key: str = "") -> StrapPlan:
    if not enabled:
        return StrapPlan((), seed)
    if die.area <= 0:
        raise ValueError("die must have positive area")
    rng = make_rng(seed, "straps", key)
    straps = []
    for layer in routing_layers(rules)[:2]:
        width_um, step_um = draw_strap_dims(rng, rules.dbu_per_micron)
        width = _to_dbu(width_um, rules.dbu_per_micron)
        step = _to_dbu(step_um, rules.dbu_per_micron)
        horizontal = layer.direction == HORIZONTAL
        stop = die.y2 if horizontal else die.x2
        start = die.y1 if horizontal else die.x1
        k = 0
        while start + k * step <= stop:
            # straps are centred on start + k*step and clipped to the die
            offset = start + k * step
            lo, hi = max(start, offset - width // 2), min(stop, offset - width // 2 + width)
            if horizontal:
                rect = Rect(die.x1, lo, die.x2, hi)
            else:
                rect = Rect(lo, die.y1, hi, die.y2)
            if rect.area > 0:
                straps.append(Strap(layer.name, layer.direction, offset, width, step,
                                    "VDD" if k % 2 == 0 else "VSS", rect))
            k += 1
    return StrapPlan(tuple(straps), seed)


# --------------------------------------------------------------------------- grid


@dataclass
class RoutingGrid:
    die: Rect
    xs: tuple[int, ...]  # M3 track x coordinates
    ys: tuple[int, ...]  # M2 track y coordinates
    blocked: set  # (layer name, track index, (lo, hi)) along-track extents
    node_blocked: np.ndarray  # bool [layer, i, j]
    via2_blocked: np.ndarray  # bool [i, j]
    access_points: dict  # (inst, pin) -> tuple of (x, y)
    pin_shapes: dict  # (inst, pin) -> tuple of placed M1 rects
    layer_names: tuple[str, str, str, str] = ("M2", "M3", "V1", "V2")
    straps: StrapPlan = field(default_factory=StrapPlan)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.xs), len(self.ys)

    def node_xy(self, i: int, j: int) -> tuple[int, int]:
        return self.xs[i], self.ys[j]


def _tracks(lo: int, hi: int, pitch: int) -> tuple[int, ...]:
    return tuple(lo + pitch // 2 + k * pitch for k in range((hi - lo) // pitch))


def _block(grid_blocked: np.ndarray, layer: int, xs, ys, shape: Rect, keepout: int, pad: int) -> None:
    """Mark nodes whose pad, grown by `keepout`, overlaps `shape`."""
    grow = pad // 2 + keepout
    xa = np.asarray(xs)
    ya = np.asarray(ys)
    ix = np.nonzero((xa - grow < shape.x2) & (xa + (pad - pad // 2) + keepout > shape.x1))[0]
    iy = np.nonzero((ya - grow < shape.y2) & (ya + (pad - pad // 2) + keepout > shape.y1))[0]
    if len(ix) and len(iy):
        grid_blocked[layer][np.ix_(ix, iy)] = True


def build_grid(spec: TestcellSpec, cells: Mapping[str, CellMaster], rules: TechRules,
               straps: Optional[StrapPlan] = None) -> RoutingGrid:
    """Routing tracks with their blockages, plus pin access points, for one testcell."""
    straps = straps or StrapPlan()
    m2, m3, v1, v2 = routing_layers(rules)
    die = spec.die_area
    if die.width < m3.pitch or die.height < m2.pitch:
        raise ValueError(f"{spec.id}: die smaller than one routing pitch")
    xs = _tracks(die.x1, die.x2, m3.pitch)
    ys = _tracks(die.y1, die.y2, m2.pitch)
    node_blocked = np.zeros((2, len(xs), len(ys)), dtype=bool)
    via2_blocked = np.zeros((len(xs), len(ys)), dtype=bool)
    blocked: set = set()
    metal = {2: (M2, m2), 4: (M3, m3)}

    def record(layer_name: str, shape: Rect):
        layer = rules.layer(layer_name)
        if layer.direction == HORIZONTAL:
            for j, y in enumerate(ys):
                if abs(y - (shape.y1 + shape.y2) / 2) * 2 < shape.height + layer.min_width + 2 * layer.min_spacing:
                    blocked.add((layer_name, j, (max(shape.x1, die.x1), min(shape.x2, die.x2))))
        elif layer.direction == VERTICAL:
            for i, x in enumerate(xs):
                if abs(x - (shape.x1 + shape.x2) / 2) * 2 < shape.width + layer.min_width + 2 * layer.min_spacing:
                    blocked.add((layer_name, i, (max(shape.y1, die.y1), min(shape.y2, die.y2))))

    access: dict = {}
    pin_shapes: dict = {}
    enclosure_size = v1.min_width + 2 * v1.min_enclosure
    for inst in spec.instances:
        cell = cells[inst.master]
        h = cell.height(rules)
        for net, rail in cell.power_rails:
            record(rules.layers[0].name, transform_rect(rail, cell.width, h, inst.orientation, inst.origin))
        for layer_index, obs in cell.obstructions:
            shape = transform_rect(obs, cell.width, h, inst.orientation, inst.origin)
            if layer_index in metal:
                k, layer = metal[layer_index]
                _block(node_blocked, k, xs, ys, shape, layer.min_spacing, layer.min_width)
                record(layer.name, shape)
            elif layer_index == 3:
                tmp = np.zeros((1, len(xs), len(ys)), dtype=bool)
                _block(tmp, 0, xs, ys, shape, v2.min_spacing, v2.min_width)
                via2_blocked |= tmp[0]
        for pin in cell.pins:
            shapes = placed_pin_shapes(inst, cell, rules, pin.name)
            pin_shapes[(inst.name, pin.name)] = shapes
            pts = []
            for i, x in enumerate(xs):
                for j, y in enumerate(ys):
                    target = square(x, y, enclosure_size)
                    if any(r.touches(target) for r in shapes) and covered(target, shapes):
                        pts.append((x, y))
            access[(inst.name, pin.name)] = tuple(pts)

    # A strap blocks its own layer outright. On the crossing layer wires may
    # pass underneath, but no V2 can land inside the strap's footprint; those
    # crossing intervals are recorded under the via layer's name.
    for strap in straps.straps:
        own, layer = (M2, m2) if strap.layer == m2.name else (M3, m3)
        _block(node_blocked, own, xs, ys, strap.rect, layer.min_spacing, layer.min_width)
        record(layer.name, strap.rect)
        tmp = np.zeros((1, len(xs), len(ys)), dtype=bool)
        _block(tmp, 0, xs, ys, strap.rect, v2.min_spacing, v2.min_width)
        via2_blocked |= tmp[0]
        if layer.direction == HORIZONTAL:
            for i in range(len(xs)):
                blocked.add((v2.name, i, (strap.rect.y1, strap.rect.y2)))
        else:
            for j in range(len(ys)):
                blocked.add((v2.name, j, (strap.rect.x1, strap.rect.x2)))

    return RoutingGrid(die, xs, ys, blocked, node_blocked, via2_blocked, access, pin_shapes,
                       (m2.name, m3.name, v1.name, v2.name), straps)


# --------------------------------------------------------------------------- route database


@dataclass(frozen=True, order=True)
class Segment:
    layer: str
    track: int  # y for horizontal layers, x for vertical ones
    lo: int
    hi: int


@dataclass(frozen=True, order=True)
class Via:
    kind: str
    x: int
    y: int


@dataclass(frozen=True)
class NetRoute:
    name: str
    terminals: tuple[tuple[str, str], ...]
    segments: tuple[Segment, ...] = ()
    vias: tuple[Via, ...] = ()
    status: str = "routed"
    unconnected: bool = False
    unreached: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class RouteDB:
    testcell: str
    nets: dict  # name -> NetRoute
    pin_shapes: dict  # (inst, pin) -> tuple[Rect]
    layer_names: tuple[str, str, str, str] = ("M2", "M3", "V1", "V2")
    iterations: int = 0

    def statuses(self) -> dict[str, str]:
        return {name: n.status for name, n in sorted(self.nets.items())}

    def dump(self) -> str:
        lines = [f"# testcell {self.testcell}"]
        for name in sorted(self.nets):
            net = self.nets[name]
            lines.append(f"NET {name} {net.status}")
            for s in net.segments:
                lines.append(f"  SEG {s.layer} {s.track} {s.lo} {s.hi}")
            for v in net.vias:
                lines.append(f"  VIA {v.kind} {v.x} {v.y}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class RouteConfig:
    max_iterations: int = 20
    worker_count: int = 1
    via_cost: int = 3
    present_factor: float = 0.5
    present_growth: float = 1.8
    history_increment: float = 1.0
    search_margin: int = 4


# --------------------------------------------------------------------------- search


class _Graph:
    def __init__(self, grid: RoutingGrid, via_cost: int):
        self.nx, self.ny = grid.shape
        self.size = 2 * self.nx * self.ny
        self.blocked = grid.node_blocked.reshape(-1).tolist()
        self.via_blocked = grid.via2_blocked.reshape(-1).tolist()
        self.via_cost = via_cost

    def node(self, layer: int, i: int, j: int) -> int:
        return (layer * self.nx + i) * self.ny + j

    def split(self, v: int) -> tuple[int, int, int]:
        layer, rest = divmod(v, self.nx * self.ny)
        i, j = divmod(rest, self.ny)
        return layer, i, j

    def neighbours(self, v: int, box):
        layer, i, j = self.split(v)
        i0, i1, j0, j1 = box
        plane = self.nx * self.ny
        if layer == M2:
            if i > i0:
                yield v - self.ny, 1
            if i < i1:
                yield v + self.ny, 1
            if not self.via_blocked[v]:
                yield v + plane, self.via_cost
        else:
            if j > j0:
                yield v - 1, 1
            if j < j1:
                yield v + 1, 1
            if not self.via_blocked[v - plane]:
                yield v - plane, self.via_cost


def _astar(graph: _Graph, sources, targets: set, cost, box) -> Optional[list[int]]:
    ti = [graph.split(t)[1] for t in targets]
    tj = [graph.split(t)[2] for t in targets]
    ti0, ti1, tj0, tj1 = min(ti), max(ti), min(tj), max(tj)

    def h(v):
        _, i, j = graph.split(v)
        return max(0, ti0 - i, i - ti1) + max(0, tj0 - j, j - tj1)

    g = {}
    parent = {}
    heap = []
    for s in sorted(sources):
        g[s] = 0.0
        parent[s] = -1
        heapq.heappush(heap, (h(s), 0.0, s))
    blocked = graph.blocked
    closed = set()
    while heap:
        f, gv, v = heapq.heappop(heap)
        if v in closed:
            continue
        closed.add(v)
        if v in targets:
            path = [v]
            while parent[path[-1]] != -1:
                path.append(parent[path[-1]])
            return path[::-1]
        for w, base in graph.neighbours(v, box):
            if blocked[w] or w in closed:
                continue
            gw = gv + cost(w, base)
            if gw < g.get(w, float("inf")):
                g[w] = gw
                parent[w] = v
                heapq.heappush(heap, (gw + h(w), gw, w))
    return None


@dataclass
class _NetState:
    name: str
    terminals: list  # [(terminal, [node ids])]
    nodes: set = field(default_factory=set)
    edges: set = field(default_factory=set)
    chosen: dict = field(default_factory=dict)
    unreached: list = field(default_factory=list)


def _route_net(graph: _Graph, state: _NetState, cost, margin: int) -> None:
    state.nodes, state.edges, state.chosen = set(), set(), {}
    pending = [(t, [n for n in nodes if not graph.blocked[n]]) for t, nodes in state.terminals]
    state.unreached = [t for t, nodes in pending if not nodes]
    pending = [(t, nodes) for t, nodes in pending if nodes]
    if len(pending) < 2:
        state.unreached += [t for t, _ in pending]
        return
    all_nodes = [n for _, nodes in pending for n in nodes]
    ij = [graph.split(n)[1:] for n in all_nodes]
    bounds = (min(i for i, _ in ij), max(i for i, _ in ij), min(j for _, j in ij), max(j for _, j in ij))
    root, root_nodes = pending[0]
    remaining = pending[1:]
    sources = set(root_nodes)
    while remaining:
        targets = {}
        for t, nodes in remaining:
            for n in nodes:
                targets.setdefault(n, t)
        path = None
        for m in (margin, None):
            if m is None:
                box = (0, graph.nx - 1, 0, graph.ny - 1)
            else:
                box = (max(0, bounds[0] - m), min(graph.nx - 1, bounds[1] + m),
                       max(0, bounds[2] - m), min(graph.ny - 1, bounds[3] + m))
            inside = {t for t in targets if box[0] <= graph.split(t)[1] <= box[1]
                      and box[2] <= graph.split(t)[2] <= box[3]}
            src = {s for s in sources if box[0] <= graph.split(s)[1] <= box[1]
                   and box[2] <= graph.split(s)[2] <= box[3]}
            if inside and src:
                path = _astar(graph, src, inside, cost, box)
            if path is not None:
                break
        if path is None:
            state.unreached += [t for t, _ in remaining]
            break
        if not state.nodes:
            state.chosen[root] = path[0]
        reached = targets[path[-1]]
        state.chosen[reached] = path[-1]
        state.nodes.update(path)
        state.edges.update((min(a, b), max(a, b)) for a, b in zip(path, path[1:]))
        remaining = [(t, nodes) for t, nodes in remaining if t != reached]
        sources = state.nodes
    if not state.nodes:
        state.unreached = [t for t, _ in state.terminals]


def _net_geometry(graph: _Graph, grid: RoutingGrid, state: _NetState):
    plane = graph.nx * graph.ny
    runs: dict = {}
    vias = set()
    for a, b in state.edges:
        la, ia, ja = graph.split(a)
        lb, ib, jb = graph.split(b)
        if la != lb:
            x, y = grid.node_xy(ia, ja)
            vias.add(Via(grid.layer_names[3], x, y))
        elif la == M2:
            runs.setdefault((M2, ja), []).append((ia, ib))
        else:
            runs.setdefault((M3, ia), []).append((ja, jb))
    segments = []
    for (layer, track), spans in runs.items():
        spans.sort()
        lo, hi = spans[0]
        merged = []
        for a, b in spans[1:]:
            if a <= hi:
                hi = max(hi, b)
            else:
                merged.append((lo, hi))
                lo, hi = a, b
        merged.append((lo, hi))
        for lo, hi in merged:
            if layer == M2:
                segments.append(Segment(grid.layer_names[0], grid.ys[track], grid.xs[lo], grid.xs[hi]))
            else:
                segments.append(Segment(grid.layer_names[1], grid.xs[track], grid.ys[lo], grid.ys[hi]))
    for node in state.chosen.values():
        _, i, j = graph.split(node)
        x, y = grid.node_xy(i, j)
        vias.add(Via(grid.layer_names[2], x, y))
    del plane
    return tuple(sorted(segments)), tuple(sorted(vias))


def route(spec: TestcellSpec, grid: RoutingGrid, rules: TechRules,
          config: Optional[RouteConfig] = None) -> RouteDB:
    """Negotiated-congestion routing of every net in `spec`.

    Failures never raise: each net ends up ``routed``, ``open`` or ``shorted``.
    """
    config = config or RouteConfig()
    graph = _Graph(grid, config.via_cost)
    node_of = {}
    for i, x in enumerate(grid.xs):
        for j, y in enumerate(grid.ys):
            node_of[(x, y)] = graph.node(M2, i, j)

    states: list[_NetState] = []
    skipped = []
    for net in spec.nets:
        if net.unconnected or len(net.terminals) < 2:
            skipped.append(net)
            continue
        terms = [(t, [node_of[p] for p in grid.access_points.get(t, ())]) for t in net.terminals]
        states.append(_NetState(net.name, terms))

    def length(st: _NetState) -> int:
        pts = [p for t, _ in st.terminals for p in grid.access_points.get(t, ())[:1]]
        if not pts:
            pts = [((r.x1 + r.x2) // 2, (r.y1 + r.y2) // 2) for t, _ in st.terminals for r in grid.pin_shapes[t][:1]]
        return hpwl(pts)

    states.sort(key=lambda st: (-length(st), st.name))

    occ = [0] * graph.size
    hist = [0.0] * graph.size
    present = config.present_factor

    def cost(v, base):
        return (base + hist[v]) * (1.0 + present * occ[v])

    iterations = 0
    dirty = {st.name for st in states}
    for iterations in range(1, config.max_iterations + 1):
        for st in states:
            if st.name not in dirty:
                continue
            for v in st.nodes:
                occ[v] -= 1
            _route_net(graph, st, cost, config.search_margin)
            for v in st.nodes:
                occ[v] += 1
        overused = {v for st in states for v in st.nodes if occ[v] > 1}
        if not overused:
            break
        for v in overused:
            hist[v] += config.history_increment * (occ[v] - 1)
        present *= config.present_growth
        dirty = {st.name for st in states if st.nodes & overused}

    nets = {}
    for st in states:
        segments, vias = _net_geometry(graph, grid, st)
        if any(occ[v] > 1 for v in st.nodes):
            status = "shorted"
        elif st.unreached:
            status = "open"
        else:
            status = "routed"
        terminals = tuple(t for t, _ in st.terminals)
        nets[st.name] = NetRoute(st.name, terminals, segments, vias, status,
                                 unreached=tuple(sorted(st.unreached)))
    for net in skipped:
        nets[net.name] = NetRoute(net.name, net.terminals, unconnected=True)
    return RouteDB(spec.id, nets, dict(grid.pin_shapes), grid.layer_names, iterations)


# --------------------------------------------------------------------------- extraction


@dataclass(frozen=True)
class Extraction:
    verdicts: dict  # net -> routed/open/shorted
    shorts: frozenset  # frozenset({net_a, net_b}) pairs
    opens: frozenset


def extract_connectivity(db: RouteDB) -> Extraction:
    """Rebuild connectivity from the stored geometry alone.

    Routed geometry and pin shapes are unioned whenever they touch; a component
    holding more than one net is a short and a net whose terminals fall into
    several components is open.
    """
    m2, m3, v1, v2 = db.layer_names
    uf = UnionFind()
    owner: list[str] = []

    def item(net: str) -> int:
        owner.append(net)
        return uf.add()

    by_track: dict = {}
    via_items: list = []
    term_items: dict = {}
    for name in sorted(db.nets):
        net = db.nets[name]
        for seg in net.segments:
            by_track.setdefault((seg.layer, seg.track), []).append((seg.lo, seg.hi, item(name)))
        for via in net.vias:
            via_items.append((via, item(name)))
        for t in net.terminals:
            term_items[t] = item(name)

    for spans in by_track.values():
        spans.sort()
        reach, first = spans[0][1], spans[0][2]
        for lo, hi, k in spans[1:]:
            if lo <= reach:
                uf.union(first, k)
                reach = max(reach, hi)
            else:
                reach, first = hi, k

    def touching(layer, track, pos):
        return [k for lo, hi, k in by_track.get((layer, track), ()) if lo <= pos <= hi]

    at_point: dict = {}
    for via, k in via_items:
        at_point.setdefault((via.x, via.y), []).append(k)
        for other in touching(m2, via.y, via.x):
            uf.union(k, other)
        if via.kind == v2:
            for other in touching(m3, via.x, via.y):
                uf.union(k, other)
        else:
            for t, shapes in db.pin_shapes.items():
                if t in term_items and any(r.contains_point(via.x, via.y) for r in shapes):
                    uf.union(k, term_items[t])
    for ks in at_point.values():
        for k in ks[1:]:
            uf.union(ks[0], k)

    comp_nets: dict = {}
    for k, net in enumerate(owner):
        comp_nets.setdefault(uf.find(k), set()).add(net)
    shorts = set()
    shorted = set()
    for nets in comp_nets.values():
        if len(nets) > 1:
            shorted |= nets
            ordered = sorted(nets)
            for a_i, a in enumerate(ordered):
                for b in ordered[a_i + 1:]:
                    shorts.add(frozenset((a, b)))
    opens = set()
    verdicts = {}
    for name in sorted(db.nets):
        net = db.nets[name]
        if name in shorted:
            verdicts[name] = "shorted"
            continue
        if not net.unconnected and len(net.terminals) > 1:
            roots = {uf.find(term_items[t]) for t in net.terminals}
            if len(roots) > 1:
                opens.add(name)
                verdicts[name] = "open"
                continue
        verdicts[name] = "routed"
    return Extraction(verdicts, frozenset(shorts), frozenset(opens))
