"""Static timing analysis over realized designs.

Paths run from a launch register through combinational cells to a capture
register. Path "consumption" is the part of the clock period a path uses:

    consumption = clk_to_q_late(L) + sum(max delays) + setup(C)
                  + uncertainty - (insertion(C) - insertion(L))

so that ``setup_slack = period - consumption`` and ``Fmax = 1e6 / max consumption``
(ps -> MHz).
"""

import heapq
import math
from dataclasses import dataclass, replace

from .errors import Unclassifiable, UnknownRegister
from .timing_graph import comb_order

TRANSITIONS = ("IF→ID", "ID→EX", "EX→MEM", "MEM→WB")
WB_TO_RF = "WB→RF"
ALL_TRANSITIONS = TRANSITIONS + (WB_TO_RF,)
PATH_CLASSES = ("RegToAlu", "AluToMem", "RegfileAccess", "BypassHazard", "ControlProp")

_ALU_ROLES = {"alu", "agu", "cmp", "resmux", "brt"}
_OPERAND_MUX_ROLES = {"opsel", "fwd"}


def canonical_transition(tag):
    """Accept ``IF->ID`` style ASCII spellings as well as the arrow form."""
    t = tag.replace("->", "→")
    if t not in ALL_TRANSITIONS:
        raise ValueError(f"unknown transition {tag!r}")
    return t


@dataclass(frozen=True)
class DelayDecomposition:
    logic_ps: float
    routing_ps: float
    clocking_ps: float

    @property
    def total_ps(self):
        return self.logic_ps + self.routing_ps + self.clocking_ps

    @property
    def fractions(self):
        t = self.total_ps
        if t <= 0:
            return (0.0, 0.0, 0.0)
        return (self.logic_ps / t, self.routing_ps / t, self.clocking_ps / t)

    @property
    def logic_fraction(self):
        return self.fractions[0]

    @property
    def routing_fraction(self):
        return self.fractions[1]

    @property
    def clocking_fraction(self):
        return self.fractions[2]


@dataclass(frozen=True)
class TimingPath:
    launch: int
    capture: int
    nodes: tuple
    edges: tuple
    clk_to_q_late_ps: float
    clk_to_q_early_ps: float
    setup_ps: float
    hold_ps: float
    logic_max_ps: float
    logic_min_ps: float
    routing_max_ps: float
    routing_min_ps: float
    decomposition: DelayDecomposition | None = None
    transition: str | None = None
    path_class: str | None = None
    setup_slack_ps: float = math.nan
    hold_slack_ps: float = math.nan
    logic_levels: int = 0
    hop_count: int = 0
    congestion_mean: float = 0.0

    @property
    def data_delay_max_ps(self):
        return self.clk_to_q_late_ps + self.logic_max_ps + self.routing_max_ps

    @property
    def data_delay_min_ps(self):
        return self.clk_to_q_early_ps + self.logic_min_ps + self.routing_min_ps


def _insertion(clock, reg):
    if clock.insertion_delay_ps and reg not in clock.insertion_delay_ps:
        raise UnknownRegister(f"register {reg} has no clock insertion delay")
    return clock.insertion(reg)


def setup_slack(path, clock):
    """Setup slack with skew and uncertainty; positive when the setup check holds."""
    skew = _insertion(clock, path.capture) - _insertion(clock, path.launch)
    required = clock.period_ps + skew - clock.uncertainty_ps
    return required - (path.clk_to_q_late_ps + path.logic_max_ps + path.routing_max_ps + path.setup_ps)


def hold_slack(path, clock):
    """Hold slack with skew and uncertainty; positive when the hold check holds."""
    skew = _insertion(clock, path.capture) - _insertion(clock, path.launch)
    arrival = path.clk_to_q_early_ps + path.logic_min_ps + path.routing_min_ps
    return arrival - path.hold_ps - skew - clock.uncertainty_ps


def consumption(path, clock):
    """Period consumed by the path (period minus setup slack)."""
    return clock.period_ps - setup_slack(path, clock)


class _Timer:
    """Flat, list-based view of a realized design for the hot loops."""

    def __init__(self, design):
        g = design.graph
        cached = getattr(g, "_sta_cache", None)
        if cached is None:
            order = comb_order(g)
            is_reg = {n.id: n.kind == "Register" for n in g.nodes}
            fanout = {n.id: [] for n in g.nodes}
            fanin = {n.id: [] for n in g.nodes}
            for i, e in enumerate(g.edges):
                fanout[e.src].append((i, e.dst))
                fanin[e.dst].append((i, e.src))
            regs = sorted(n.id for n in g.nodes if n.kind == "Register")
            ports = sorted(n.id for n in g.nodes if n.kind == "Port")
            cached = (order, is_reg, fanout, fanin, regs, ports)
            g._sta_cache = cached
        self.order, self.is_reg, self.fanout, self.fanin, self.regs, self.ports = cached
        self.graph = g
        self.design = design
        self.dmax = design.delay_max.tolist()
        self.dmin = design.delay_min.tolist()
        clk = design.clock
        rt = design.register_timing
        self.unc = clk.uncertainty_ps
        self.period = clk.period_ps
        self.ins = {r: clk.insertion(r) for r in self.regs}
        self.start_late = {r: self.ins[r] + rt[r].clk_to_q_late_ps for r in self.regs}
        self.start_early = {r: self.ins[r] + rt[r].clk_to_q_early_ps for r in self.regs}
        self.end = {r: rt[r].setup_ps - self.ins[r] for r in self.regs}

    def arrivals(self, include_ports=True):
        amax, amin = {}, {}
        for r in self.regs:
            for i, w in self.fanout[r]:
                _relax(amax, amin, w, self.start_late[r] + self.dmax[i], self.start_early[r] + self.dmin[i])
        if include_ports:
            for p in self.ports:
                for i, w in self.fanout[p]:
                    _relax(amax, amin, w, self.dmax[i], self.dmin[i])
        for v in self.order:
            if v not in amax:
                continue
            hi, lo = amax[v], amin[v]
            for i, w in self.fanout[v]:
                _relax(amax, amin, w, hi + self.dmax[i], lo + self.dmin[i])
        return amax, amin

    def suffix_bounds(self, capture_ok):
        """Largest remaining (delay + capture end term) from each comb node."""
        down = {}
        for v in reversed(self.order):
            best = -math.inf
            for i, w in self.fanout[v]:
                if self.is_reg[w]:
                    if capture_ok(w):
                        best = max(best, self.dmax[i] + self.end[w])
                else:
                    tail = down.get(w, -math.inf)
                    if tail > -math.inf:
                        best = max(best, self.dmax[i] + tail)
            down[v] = best
        return down

    def worst_paths(self, k, capture_ok=lambda r: True, accept=lambda launch, capture: True):
        """Up to k (value, nodes, edges) tuples in descending value, ties by node sequence."""
        down = self.suffix_bounds(capture_ok)
        heap = []
        for r in self.regs:
            best = -math.inf
            for i, w in self.fanout[r]:
                if self.is_reg[w]:
                    if capture_ok(w):
                        best = max(best, self.dmax[i] + self.end[w])
                else:
                    best = max(best, self.dmax[i] + down[w])
            if best > -math.inf:
                heap.append((-(self.start_late[r] + best), (r,), (), self.start_late[r], False))
        heapq.heapify(heap)
        out = []
        while heap and len(out) < k:
            neg, nodes, edges, prefix, complete = heapq.heappop(heap)
            if complete:
                if accept(nodes[0], nodes[-1]):
                    out.append((-neg, nodes, edges))
                continue
            v = nodes[-1]
            for i, w in self.fanout[v]:
                val = prefix + self.dmax[i]
                if self.is_reg[w]:
                    if capture_ok(w):
                        total = val + self.end[w]
                        heapq.heappush(heap, (-total, nodes + (w,), edges + (i,), total, True))
                else:
                    tail = down[w]
                    if tail > -math.inf:
                        heapq.heappush(heap, (-(val + tail), nodes + (w,), edges + (i,), val, False))
        return out

    def max_consumption(self):
        amax, _ = self.arrivals(include_ports=False)
        worst = -math.inf
        for r in self.regs:
            if r in amax:
                worst = max(worst, amax[r] + self.end[r])
        return worst + self.unc


def _relax(amax, amin, w, hi, lo):
    if w in amax:
        if hi > amax[w]:
            amax[w] = hi
        if lo < amin[w]:
            amin[w] = lo
    else:
        amax[w] = hi
        amin[w] = lo


def _timer(design):
    if design._timer is None:
        design._timer = _Timer(design)
    return design._timer


def compute_arrivals(design):
    """Per-node (max, min) data arrival, measured from the ideal clock edge.

    Launch registers seed their fan-out with insertion + clk-to-q; register
    entries in the result are the arrivals at their data pins. Nodes with no
    driven arrival are absent.
    """
    amax, amin = _timer(design).arrivals()
    return {v: (amax[v], amin[v]) for v in amax}


def transition_of(launch_stage, capture_stage):
    if launch_stage is None or capture_stage is None:
        raise Unclassifiable("path endpoints must be stage-tagged")
    if capture_stage == "ID" and launch_stage == "WB":
        return WB_TO_RF
    return {"IF": "IF→ID", "ID": "IF→ID", "EX": "ID→EX", "MEM": "EX→MEM", "WB": "MEM→WB"}[capture_stage]


def classify(path, graph):
    """(transition, path_class) label of a register-to-register path.

    The transition follows the capture bank, so bypass paths launched from
    EX/MEM or MEM/WB into the ID/EX bank count as ID→EX. Class precedence:
    hazard unit or operand-select bypass -> BypassHazard; memory macro ->
    RegfileAccess; ALU/AGU/compare logic captured at the MEM bank ->
    AluToMem; decode fan-out control chain -> ControlProp; else RegToAlu.
    """
    launch = graph.node(path.launch)
    capture = graph.node(path.capture)
    transition = transition_of(launch.stage_tag, capture.stage_tag)
    inner = [graph.node(v) for v in path.nodes[1:-1]]
    roles = {n.role for n in inner}
    has_macro = any(n.cell_class == "MemMacro" for n in inner)

    if "hazard" in roles or (
        capture.stage_tag == "EX" and "opsel" in roles and launch.stage_tag in ("EX", "MEM", "WB")
    ):
        cls = "BypassHazard"
    elif has_macro:
        cls = "RegfileAccess"
    elif roles & _ALU_ROLES and capture.stage_tag == "MEM":
        cls = "AluToMem"
    elif "ctrl" in roles:
        cls = "ControlProp"
    else:
        cls = "RegToAlu"
    return transition, cls


def decompose(path, design):
    """Split a path into logic (incl. clk-to-q), routing and clocking (incl. setup)."""
    clk = design.clock
    skew = abs(clk.insertion(path.capture) - clk.insertion(path.launch))
    return DelayDecomposition(
        logic_ps=path.logic_max_ps + path.clk_to_q_late_ps,
        routing_ps=path.routing_max_ps,
        clocking_ps=clk.uncertainty_ps + skew + path.setup_ps,
    )


def build_path(design, nodes, edges):
    """Assemble a fully annotated TimingPath from node and edge sequences."""
    g = design.graph
    launch, capture = nodes[0], nodes[-1]
    rt = design.register_timing
    lmax = design.logic_max
    edges = tuple(int(i) for i in edges)
    idx = list(edges)
    path = TimingPath(
        launch=launch,
        capture=capture,
        nodes=tuple(nodes),
        edges=edges,
        clk_to_q_late_ps=rt[launch].clk_to_q_late_ps,
        clk_to_q_early_ps=rt[launch].clk_to_q_early_ps,
        setup_ps=rt[capture].setup_ps,
        hold_ps=rt[capture].hold_ps,
        logic_max_ps=float(sum(lmax[i] for i in idx)),
        logic_min_ps=float(sum(design.logic_min[i] for i in idx)),
        routing_max_ps=float(sum(design.routing_max[i] for i in idx)),
        routing_min_ps=float(sum(design.routing_min[i] for i in idx)),
        logic_levels=sum(1 for v in nodes[1:-1] if g.node(v).kind == "CombCell"),
        hop_count=int(sum(design.hop_count[i] for i in idx)),
        congestion_mean=float(sum(design.congestion[i] for i in idx) / len(idx)) if idx else 0.0,
    )
    transition, cls = classify(path, g)
    return _annotate(path, design, transition, cls)


def _annotate(path, design, transition, cls):
    return replace(
        path,
        decomposition=decompose(path, design),
        transition=transition,
        path_class=cls,
        setup_slack_ps=setup_slack(path, design.clock),
        hold_slack_ps=hold_slack(path, design.clock),
    )


def extract_paths(design, k=100, transition=None):
    """The k worst-setup-slack register-to-register paths, ascending by slack.

    With ``transition`` set, only paths labelled with that transition are
    returned. Fewer than k paths are returned when fewer exist.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    t = _timer(design)
    g = design.graph
    if transition is None:
        found = t.worst_paths(k)
    else:
        transition = canonical_transition(transition)
        stage = {n.id: n.stage_tag for n in g.nodes}
        wanted = {
            "IF→ID": ("IF", "ID"), WB_TO_RF: ("ID",), "ID→EX": ("EX",),
            "EX→MEM": ("MEM",), "MEM→WB": ("WB",),
        }[transition]
        found = t.worst_paths(
            k,
            capture_ok=lambda r: stage[r] in wanted,
            accept=lambda a, b: transition_of(stage[a], stage[b]) == transition,
        )
    paths = [build_path(design, nodes, edges) for _, nodes, edges in found]
    paths.sort(key=lambda p: (p.setup_slack_ps, p.nodes))
    return paths


def worst_path(design):
    return extract_paths(design, 1)[0]


def fmax(design):
    """Maximum clock frequency in MHz (delays in ps)."""
    return 1e6 / _timer(design).max_consumption()


def worst_consumption(design):
    return _timer(design).max_consumption()

