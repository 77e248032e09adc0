from fractions import Fraction

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pinaccess import synthetic
from pinaccess.geometry import Rect
from pinaccess.router import (M2, M3, NetRoute, RouteConfig, RouteDB, Segment, Strap, StrapPlan, Via,
                              build_grid, draw_strap_dims, extract_connectivity, plan_straps, route)
from pinaccess.synthetic import PITCH, track
from pinaccess.techlib import profile_library
from pinaccess.testgen import Instance, Net, TestcellSpec, assign_connectivity, enumerate_testcells, make_rng


def pad(column, t):
    return Rect(track(column) - 8, track(t) - 8, track(column) + 8, track(t) + 8)


def two_pad_spec(t_a, t_b, columns=(1, 1)):
    """Two 4-site cells, each with one single-access pad, on one net."""
    cell_a = synthetic.make_cell("PA", 4, [("Y", "output", pad(columns[0], t_a))])
    cell_b = synthetic.make_cell("PB", 4, [("A", "input", pad(columns[1], t_b))])
    cells = {"PA": cell_a, "PB": cell_b}
    w = cell_a.width
    instances = (Instance("U1", "PA", (0, 0), "N"), Instance("U2", "PB", (2 * w, 0), "N"))
    spec = TestcellSpec("t", "hand", instances, Rect(0, 0, 3 * w, synthetic.ROW),
                        (Net("n1", (("U1", "Y"), ("U2", "A"))),))
    return spec, cells


# --------------------------------------------------------------------------- grid


def test_empty_die_has_one_track_per_pitch(rules):
    spec = TestcellSpec("empty", "hand", (), Rect(0, 0, 10 * PITCH, 10 * PITCH))
    grid = build_grid(spec, {}, rules)
    assert len(grid.ys) == 10 and len(grid.xs) == 10
    assert grid.blocked == set()
    assert not grid.node_blocked.any() and not grid.via2_blocked.any()


def test_die_smaller_than_a_pitch_is_rejected(rules):
    with pytest.raises(ValueError):
        build_grid(TestcellSpec("tiny", "hand", (), Rect(0, 0, 40, 400)), {}, rules)


def test_vertical_strap_blocks_its_tracks_and_crossing_vias(rules):
    die = Rect(0, 0, 10 * PITCH, 10 * PITCH)
    rect = Rect(100, 0, 160, die.y2)  # wider than one M3 pitch
    plan = StrapPlan((Strap("M3", "vertical", 130, 60, 1000, "VDD", rect),), 0)
    grid = build_grid(TestcellSpec("s", "hand", (), die), {}, rules, plan)
    m3, v2 = rules.layer("M3"), rules.layer("V2")
    for i, x in enumerate(grid.xs):
        own = x - 8 - m3.min_spacing < rect.x2 and x + 8 + m3.min_spacing > rect.x1
        via = x - 4 - v2.min_spacing < rect.x2 and x + 4 + v2.min_spacing > rect.x1
        for j in range(len(grid.ys)):
            assert grid.node_blocked[M3, i, j] == own
            assert grid.via2_blocked[i, j] == via
            assert not grid.node_blocked[M2, i, j]  # M2 may pass underneath
    # every M2 track records the crossing interval
    assert {j for (layer, j, span) in grid.blocked if layer == "V2" and span == (100, 160)} == set(range(10))
    assert any(layer == "M3" for layer, _, _ in grid.blocked)


def test_access_points_need_full_enclosure(rules):
    spec, cells = two_pad_spec(4, 4)
    grid = build_grid(spec, cells, rules)
    assert grid.access_points[("U1", "Y")] == ((track(1), track(4)),)
    bar = synthetic.make_cell("BAR", 3, [("A", "input", 1, 1, 3)])
    spec2 = TestcellSpec("b", "hand", (Instance("U1", "BAR", (0, 0), "N"),), Rect(0, 0, 144, 432))
    pts = build_grid(spec2, {"BAR": bar}, rules).access_points[("U1", "A")]
    assert pts == tuple((track(1), track(t)) for t in (1, 2, 3))


# --------------------------------------------------------------------------- straps


def test_strap_dimension_range():
    rng = np.random.default_rng(0)
    draws = [draw_strap_dims(rng) for _ in range(10_000)]
    widths = [w for w, _ in draws]
    steps = [s for _, s in draws]
    assert min(widths) >= Fraction(1, 500) and max(widths) == Fraction(99, 500)
    assert min(steps) >= Fraction(1, 50) and max(steps) == Fraction(99, 50)


def test_plan_straps(rules):
    die = Rect(0, 0, 2000, 864)
    assert plan_straps(die, rules, 3, enabled=False).straps == ()
    plan = plan_straps(die, rules, 3, key="x")
    assert plan == plan_straps(die, rules, 3, key="x")
    assert plan != plan_straps(die, rules, 4, key="x")
    for layer, direction in (("M2", "horizontal"), ("M3", "vertical")):
        straps = [s for s in plan.straps if s.layer == layer]
        assert straps and all(s.direction == direction for s in straps)
        assert all(s.width > 0 and s.step > 0 and s.width % 2 == 0 and s.step % 20 == 0 for s in straps)
        assert [s.net for s in straps] == ["VDD", "VSS"] * (len(straps) // 2) + ["VDD"] * (len(straps) % 2)
        assert all(die.contains_rect(s.rect) for s in straps)


# --------------------------------------------------------------------------- routing


def test_same_track_pins_route_straight(rules):
    spec, cells = two_pad_spec(4, 4)
    db = route(spec, build_grid(spec, cells, rules), rules)
    net = db.nets["n1"]
    assert net.status == "routed"
    assert len(net.segments) == 1 and net.segments[0].layer == "M2"
    assert sorted(v.kind for v in net.vias) == ["V1", "V1"]


def _oracle_cost(grid, src, dst, via_cost):
    g = nx.Graph()
    nx_, ny_ = grid.shape
    for i in range(nx_):
        for j in range(ny_):
            for layer in (M2, M3):
                if grid.node_blocked[layer, i, j]:
                    continue
                if layer == M2 and i + 1 < nx_ and not grid.node_blocked[M2, i + 1, j]:
                    g.add_edge((M2, i, j), (M2, i + 1, j), weight=1)
                if layer == M3 and j + 1 < ny_ and not grid.node_blocked[M3, i, j + 1]:
                    g.add_edge((M3, i, j), (M3, i, j + 1), weight=1)
            if not grid.via2_blocked[i, j] and not grid.node_blocked[:, i, j].any():
                g.add_edge((M2, i, j), (M3, i, j), weight=via_cost)
    return nx.shortest_path_length(g, (M2, *src), (M2, *dst), weight="weight")


def test_jogged_route_is_a_shortest_path(rules):
    spec, cells = two_pad_spec(2, 6, columns=(1, 2))
    grid = build_grid(spec, cells, rules)
    config = RouteConfig()
    db = route(spec, grid, rules, config)
    net = db.nets["n1"]
    assert net.status == "routed"
    m3 = [s for s in net.segments if s.layer == "M3"]
    assert len(m3) == 1
    assert len(net.vias) >= 2
    length = sum(s.hi - s.lo for s in net.segments) // PITCH
    cost = length + config.via_cost * sum(v.kind == "V2" for v in net.vias)
    index = {x: i for i, x in enumerate(grid.xs)}, {y: j for j, y in enumerate(grid.ys)}
    (ax, ay), = grid.access_points[("U1", "Y")]
    (bx, by), = grid.access_points[("U2", "A")]
    expected = _oracle_cost(grid, (index[0][ax], index[1][ay]), (index[0][bx], index[1][by]), config.via_cost)
    assert cost == expected


def test_blocked_access_point_gives_open_without_geometry(rules):
    spec, cells = two_pad_spec(4, 4)
    strap = Strap("M2", "horizontal", track(4), 40, 1000, "VDD", Rect(0, track(4) - 20, spec.die_area.x2, track(4) + 20))
    db = route(spec, build_grid(spec, cells, rules, StrapPlan((strap,), 0)), rules)
    net = db.nets["n1"]
    assert net.status == "open"
    assert net.segments == () and net.vias == ()
    assert extract_connectivity(db).verdicts["n1"] == "open"


def test_unconnected_nets_are_skipped(planted):
    rules, cells = planted
    spec = TestcellSpec("u", "hand", (Instance("U1", "INVX1", (0, 0), "N"),), Rect(0, 0, 144, 432),
                        (Net("INVX1_A", (("U1", "A"),), True), Net("INVX1_Y", (("U1", "Y"),), True)))
    db = route(spec, build_grid(spec, cells, rules), rules)
    assert all(n.unconnected and n.status == "routed" and not n.segments for n in db.nets.values())


def test_route_is_deterministic_and_layer_restricted(planted_profile):
    rules, profile = planted_profile
    cells = profile.by_name
    for spec in enumerate_testcells(profile, rules, "proposed", "cell_by_cell_only")[:6]:
        wired = assign_connectivity(spec, cells, "random", 5)
        plan = plan_straps(wired.die_area, rules, 5, key=wired.id)
        a = route(wired, build_grid(wired, cells, rules, plan), rules)
        b = route(wired, build_grid(wired, cells, rules, plan), rules)
        assert a.dump() == b.dump()
        for net in a.nets.values():
            assert {s.layer for s in net.segments} <= {"M2", "M3"}
            assert {v.kind for v in net.vias} <= {"V1", "V2"}


# --------------------------------------------------------------------------- extraction


def test_extractor_reports_a_constructed_short():
    nets = {
        "a": NetRoute("a", (("U1", "A"), ("U2", "A")), (Segment("M2", 72, 24, 216),), (), "routed"),
        "b": NetRoute("b", (("U1", "B"), ("U2", "B")), (Segment("M2", 72, 120, 312),), (), "routed"),
        "c": NetRoute("c", (("U3", "A"), ("U4", "A")), (Segment("M2", 168, 24, 216),), (), "routed"),
    }
    ex = extract_connectivity(RouteDB("h", nets, {}))
    assert ex.shorts == frozenset({frozenset({"a", "b"})})
    assert ex.verdicts["a"] == ex.verdicts["b"] == "shorted"


def test_extractor_agrees_with_clean_router(rules):
    spec, cells = two_pad_spec(2, 6, columns=(1, 2))
    db = route(spec, build_grid(spec, cells, rules), rules)
    ex = extract_connectivity(db)
    assert ex.verdicts == db.statuses() == {"n1": "routed"}
    assert not ex.shorts and not ex.opens


@given(st.integers(1, 4), st.integers(0, 10_000), st.booleans())
@settings(max_examples=15, deadline=None)
def test_extractor_matches_router_on_random_testcells(n, seed, straps):
    rules, cells = synthetic.random_library(n, seed, n_multi=seed % 2)
    profile = profile_library(cells)
    cells = profile.by_name
    specs = enumerate_testcells(profile, rules, "proposed", "cell_by_cell_only")
    spec = specs[int(make_rng(seed, "pick").integers(len(specs)))]
    wired = assign_connectivity(spec, cells, "random", seed)
    db = route(wired, build_grid(wired, cells, rules, plan_straps(wired.die_area, rules, seed, straps, wired.id)),
               rules)
    ex = extract_connectivity(db)
    assert ex.verdicts == db.statuses()
    if all(s == "routed" for s in db.statuses().values()):
        assert not ex.shorts and not ex.opens


def test_straps_never_make_routing_easier_on_average(planted_profile):
    from pinaccess.drc import check_drc
    rules, profile = planted_profile
    cells = profile.by_name
    specs = enumerate_testcells(profile, rules, "proposed", "all")

    def problems(seed, straps):
        total = 0
        for spec in specs:
            wired = assign_connectivity(spec, cells, "random", seed)
            plan = plan_straps(wired.die_area, rules, seed, straps, wired.id)
            total += len(check_drc(wired, route(wired, build_grid(wired, cells, rules, plan), rules), cells, rules))
        return total

    seeds = range(1, 21)
    assert sum(problems(s, True) for s in seeds) >= sum(problems(s, False) for s in seeds)
