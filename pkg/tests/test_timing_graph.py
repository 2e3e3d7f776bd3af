import random

import pytest

from conftest import random_design
from stagesta import timing_graph as tg
from stagesta.errors import CyclicGraph
from stagesta.timing_graph import ClockSpec, RegisterTiming, TimingEdge, TimingGraph, TimingNode


def reg(i, stage="EX", pos=(0, 0)):
    return TimingNode(i, f"r{i}", "Register", stage, placement=pos)


def cell(i, pos=(0, 0)):
    return TimingNode(i, f"c{i}", "CombCell", "EX", "Lut", 1, "SVT", pos)


def simple(nodes, pairs, grid=(4, 4)):
    edges = []
    kinds = {n.id: n.kind for n in nodes}
    for i, (s, d) in enumerate(pairs):
        edges.append(TimingEdge(i, s, d, "CellArc" if kinds[s] == "CombCell" else "Net"))
    rt = {n.id: RegisterTiming() for n in nodes if n.kind == "Register"}
    return TimingGraph(nodes, edges, rt, ClockSpec(1000), grid)


def rules(graph):
    return [v.rule for v in tg.validate(graph)]


def test_valid_three_node():
    assert tg.validate(simple([reg(0), cell(1), reg(2)], [(0, 1), (1, 2)])) == []


def test_comb_cycle_reported():
    g = simple([reg(0), cell(1), cell(2), reg(3)], [(0, 1), (1, 2), (2, 1), (2, 3)])
    cyc = [v for v in tg.validate(g) if v.rule == "CombinationalCycle"]
    assert len(cyc) == 1 and cyc[0].subjects == (1, 2)
    with pytest.raises(CyclicGraph):
        tg.topological_order(g)
    with pytest.raises(CyclicGraph):
        tg.comb_order(g)


def test_untagged_register():
    g = simple([TimingNode(0, "r0", "Register"), cell(1), reg(2)], [(0, 1), (1, 2)])
    assert "UntaggedRegister" in rules(g)


@pytest.mark.parametrize(
    "mutate, rule",
    [
        (lambda n, e: (n + [reg(0)], e), "DuplicateId"),
        (lambda n, e: ([reg(0, pos=(9, 0))] + n[1:], e), "PlacementOutOfGrid"),
        (lambda n, e: (n, e + [TimingEdge(9, 0, 42, "Net")]), "DanglingEdge"),
        (lambda n, e: (n, e + [TimingEdge(9, 0, 2, "Net", logic_ps=(1, 2))]), "NetWithLogic"),
        (lambda n, e: (n, e + [TimingEdge(9, 0, 2, "Net", routing_ps=(3, 2))]), "DelayOrder"),
        (lambda n, e: (n, e + [TimingEdge(9, 0, 2, "CellArc")]), "CellArcFromNonCell"),
        (lambda n, e: (n, e + [TimingEdge(9, 0, 2, "Net", hop_count=-1)]), "NegativeHops"),
        (lambda n, e: (n, e + [TimingEdge(9, 0, 2, "Net", congestion_weight=11)]), "CongestionRange"),
        (lambda n, e: (n + [cell(5)], e), "UnanchoredCell"),
        (lambda n, e: (n + [TimingNode(5, "x", "Widget")], e), "UnknownKind"),
    ],
)
def test_violation_rules(mutate, rule):
    nodes, edges = mutate([reg(0), cell(1), reg(2)], [TimingEdge(0, 0, 1, "Net"), TimingEdge(1, 1, 2, "CellArc")])
    rt = {n.id: RegisterTiming() for n in nodes if n.kind == "Register"}
    assert rule in rules(TimingGraph(nodes, edges, rt, ClockSpec(1000), (4, 4)))


def test_register_timing_rules():
    g = simple([reg(0), cell(1), reg(2)], [(0, 1), (1, 2)])
    bad = g.replace(register_timing={0: RegisterTiming(1, 2, 0, 0), 2: RegisterTiming(-1, -1, 0, 0)})
    assert {"ClkToQOrder", "NegativeRegisterTiming"} <= set(rules(bad))
    missing = g.replace(register_timing={0: RegisterTiming()})
    assert "MissingRegisterTiming" in rules(missing)


def test_clock_rules():
    g = simple([reg(0), cell(1), reg(2)], [(0, 1), (1, 2)])
    assert "ClockPeriod" in rules(g.replace(clock=ClockSpec(0)))
    assert "NegativeInsertion" in rules(g.replace(clock=ClockSpec(10, 0, 0, {0: -1})))
    c = ClockSpec(10, 0, 0, {0: 3.0, 2: 7.5})
    assert c.skew(0, 2) == 4.5 and c.skew(2, 2) == 0.0


def test_topological_chain_and_diamond():
    chain = simple([reg(0), cell(1), reg(2)], [(0, 1), (1, 2)])
    assert tg.topological_order(chain) == [0, 1, 2]
    diamond = simple([reg(0), cell(1), cell(2), cell(3), reg(4)], [(0, 2), (0, 1), (1, 3), (2, 3), (3, 4)])
    assert tg.topological_order(diamond) == [0, 1, 2, 3, 4]


def test_topological_sequential_loop():
    # r0 -> c1 -> r0 closes a register loop, which is allowed
    g = simple([reg(0), cell(1), reg(2)], [(0, 1), (1, 0), (1, 2)])
    assert tg.validate(g) == []
    order = tg.topological_order(g)
    assert sorted(order) == [0, 1, 2]
    assert order.index(0) < order.index(1) < order.index(2)


def test_topological_random_dags():
    rnd = random.Random(2)
    for _ in range(200):
        g = random_design(rnd).graph
        order = tg.comb_order(g)
        pos = {v: i for i, v in enumerate(order)}
        for e in g.edges:
            if e.src in pos and e.dst in pos:
                assert pos[e.src] < pos[e.dst]
        full = tg.topological_order(g)
        assert sorted(full) == sorted(n.id for n in g.nodes)
        assert full == tg.topological_order(g)
        idx = {v: i for i, v in enumerate(full)}
        regs = {n.id for n in g.nodes if n.kind == "Register"}
        for e in g.edges:
            if e.dst not in regs:
                assert idx[e.src] < idx[e.dst]


def test_json_round_trip(default_graph, tmp_path):
    text = tg.dumps(default_graph)
    back = tg.loads(text)
    assert back == default_graph
    assert tg.dumps(back) == text
    path = tmp_path / "g.json"
    tg.save(default_graph, path)
    assert tg.load(path) == default_graph
    d = tg.to_dict(default_graph)
    assert {"nodes", "edges", "clock", "fabric_grid", "schema_version"} <= set(d)


def test_role_from_name():
    assert TimingNode(0, "ex.fwd_a.s0", "CombCell").role == "fwd"
    assert TimingNode(0, "mem.dmem.s3", "CombCell").role == "dmem"
