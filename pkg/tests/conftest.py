"""Shared fixtures: a random DAG generator and a brute-force path oracle."""

import random

import numpy as np
import pytest

from stagesta.fabric_models import RealizedDesign
from stagesta.pipeline_gen import build_rv32i_graph
from stagesta.timing_graph import (
    STAGES,
    ClockSpec,
    RegisterTiming,
    TimingEdge,
    TimingGraph,
    TimingNode,
)


def random_design(rnd, n_regs=None, n_comb=None, skew=True, uncertainty=True):
    """A small random register/comb DAG with random per-edge delays.

    Registers may both launch and capture; combinational nodes are ordered
    so every comb-to-comb edge points forward, which keeps the comb part
    acyclic. Every comb node gets at least one fan-in and one fan-out.
    """
    n_regs = n_regs or rnd.randint(2, 5)
    n_comb = n_comb if n_comb is not None else rnd.randint(0, 12)
    nodes = []
    for i in range(n_regs):
        nodes.append(TimingNode(i, f"r{i}", "Register", stage_tag=rnd.choice(STAGES)))
    comb = list(range(n_regs, n_regs + n_comb))
    for c in comb:
        nodes.append(TimingNode(c, f"c{c}", "CombCell", stage_tag="EX", cell_class="Lut",
                                drive_strength=1, vt_class="SVT"))
    pairs = set()
    regs = list(range(n_regs))
    for j, c in enumerate(comb):
        preds = regs + comb[:j]
        for _ in range(rnd.randint(1, 2)):
            pairs.add((rnd.choice(preds), c))
    for j, c in enumerate(comb):
        succs = regs + comb[j + 1:]
        for _ in range(rnd.randint(1, 2)):
            pairs.add((c, rnd.choice(succs)))
    for _ in range(rnd.randint(0, 2)):
        pairs.add((rnd.choice(regs), rnd.choice(regs)))
    pairs = sorted(pairs)

    edges, lmin, lmax, rmin, rmax = [], [], [], [], []
    for i, (s, d) in enumerate(pairs):
        is_cell = s >= n_regs
        edges.append(TimingEdge(i, s, d, "CellArc" if is_cell else "Net"))
        lo = rnd.uniform(5, 80) if is_cell else 0.0
        ro = rnd.uniform(1, 120)
        lmin.append(lo * rnd.uniform(0.6, 1.0))
        lmax.append(lo)
        rmin.append(ro * rnd.uniform(0.6, 1.0))
        rmax.append(ro)

    timing = {}
    for r in regs:
        late = rnd.uniform(20, 120)
        setup = rnd.uniform(5, 60)
        timing[r] = RegisterTiming(late, late * rnd.uniform(0.5, 1.0), setup, setup * rnd.uniform(0.2, 1.0))
    ins = {r: (rnd.uniform(0, 50) if skew else 0.0) for r in regs}
    clock = ClockSpec(period_ps=rnd.uniform(300, 1500),
                      uncertainty_ps=rnd.uniform(0, 40) if uncertainty else 0.0,
                      insertion_delay_ps=ins)
    graph = TimingGraph(nodes, edges, timing, clock, fabric_grid=(1, 1))
    return RealizedDesign(graph, lmin, lmax, rmin, rmax,
                          [rnd.randint(0, 4) for _ in edges], [rnd.random() for _ in edges],
                          timing, clock, {"fabric": "synthetic"})


def enumerate_paths(design):
    """Every register-to-register path by depth-first search.

    Returns (nodes, edges, setup_slack, hold_slack, consumption) tuples with
    the slack formulas written out directly, independent of the engine.
    """
    g = design.graph
    clk = design.clock
    rt = design.register_timing
    is_reg = {n.id: n.kind == "Register" for n in g.nodes}
    out_edges = {}
    for i, e in enumerate(g.edges):
        out_edges.setdefault(e.src, []).append((i, e.dst))

    found = []

    def walk(nodes, edges):
        for i, w in out_edges.get(nodes[-1], []):
            if is_reg[w]:
                found.append((nodes + (w,), edges + (i,)))
            else:
                walk(nodes + (w,), edges + (i,))

    for r in sorted(v for v, reg in is_reg.items() if reg):
        walk((r,), ())

    rows = []
    for nodes, edges in found:
        launch, capture = nodes[0], nodes[-1]
        ins_l = clk.insertion_delay_ps.get(launch, 0.0)
        ins_c = clk.insertion_delay_ps.get(capture, 0.0)
        dmax = sum(design.logic_max[i] + design.routing_max[i] for i in edges)
        dmin = sum(design.logic_min[i] + design.routing_min[i] for i in edges)
        arrival_late = rt[launch].clk_to_q_late_ps + dmax
        arrival_early = rt[launch].clk_to_q_early_ps + dmin
        setup = clk.period_ps + ins_c - ins_l - clk.uncertainty_ps - arrival_late - rt[capture].setup_ps
        hold = arrival_early - rt[capture].hold_ps - (ins_c - ins_l) - clk.uncertainty_ps
        rows.append((nodes, edges, setup, hold, clk.period_ps - setup))
    return rows


def brute_arrivals(design):
    """Per-node (max, min) arrival over every register-launched partial path."""
    g = design.graph
    clk = design.clock
    rt = design.register_timing
    is_reg = {n.id: n.kind == "Register" for n in g.nodes}
    out_edges = {}
    for i, e in enumerate(g.edges):
        out_edges.setdefault(e.src, []).append((i, e.dst))
    arr = {}

    def walk(v, hi, lo):
        for i, w in out_edges.get(v, []):
            h = hi + design.logic_max[i] + design.routing_max[i]
            l = lo + design.logic_min[i] + design.routing_min[i]
            a, b = arr.get(w, (-np.inf, np.inf))
            arr[w] = (max(a, h), min(b, l))
            if not is_reg[w]:
                walk(w, h, l)

    for r in sorted(v for v, reg in is_reg.items() if reg):
        ins = clk.insertion_delay_ps.get(r, 0.0)
        walk(r, ins + rt[r].clk_to_q_late_ps, ins + rt[r].clk_to_q_early_ps)
    return arr


@pytest.fixture
def rnd():
    return random.Random(20240611)


@pytest.fixture(scope="session")
def default_graph():
    return build_rv32i_graph()
