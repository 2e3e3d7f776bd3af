"""Timing-graph data model, validation and topological services.

Delays are real-valued picoseconds. Tests compare delays with a 1e-9 ps
tolerance.

A register is a single node: edges leaving it start a path (launch), edges
entering it end one (capture). Arrival propagation stops at registers, so the
pipeline may loop through registers while the combinational subgraph stays
acyclic.

Logic and routing are carried on edges. An edge driven by a combinational
cell is a ``CellArc``: its logic pair is the driver's cell delay and its
routing pair is the wire from the driver to the sink. An edge driven by a
register or port is a ``Net`` and carries routing only.
"""

import heapq
import json
from dataclasses import dataclass, field

from .errors import CyclicGraph

SCHEMA_VERSION = 1

NODE_KINDS = ("Register", "CombCell", "ClockSource", "Port")
CELL_CLASSES = ("Lut", "CarryChain", "Mux", "StdCell", "MemMacro")
VT_CLASSES = ("LVT", "SVT", "HVT")
STAGES = ("IF", "ID", "EX", "MEM", "WB")
EDGE_KINDS = ("CellArc", "Net")


@dataclass(frozen=True)
class TimingNode:
    id: int
    name: str
    kind: str
    stage_tag: str | None = None
    cell_class: str | None = None
    drive_strength: int | None = None
    vt_class: str | None = None
    placement: tuple = (0, 0)

    @property
    def role(self):
        """Functional role from the hierarchical name (``ex.fwd_a.s0`` -> ``fwd``)."""
        parts = self.name.split(".")
        seg = parts[1] if len(parts) > 1 else parts[0]
        return seg.split("_")[0]


@dataclass(frozen=True)
class RegisterTiming:
    clk_to_q_late_ps: float = 0.0
    clk_to_q_early_ps: float = 0.0
    setup_ps: float = 0.0
    hold_ps: float = 0.0


@dataclass(frozen=True)
class TimingEdge:
    id: int
    src: int
    dst: int
    kind: str
    logic_ps: tuple = (0.0, 0.0)
    routing_ps: tuple = (0.0, 0.0)
    hop_count: int = 0
    congestion_weight: float = 0.0


@dataclass(frozen=True)
class ClockSpec:
    period_ps: float
    uncertainty_ps: float = 0.0
    source_latency_ps: float = 0.0
    insertion_delay_ps: dict = field(default_factory=dict)

    def insertion(self, reg):
        return self.insertion_delay_ps.get(reg, 0.0)

    def skew(self, launch, capture):
        """Capture insertion minus launch insertion (positive skew helps setup)."""
        return self.insertion(capture) - self.insertion(launch)


@dataclass(frozen=True)
class Violation:
    rule: str
    subjects: tuple
    detail: str = ""

    def __str__(self):
        return f"{self.rule}{list(self.subjects)}" + (f": {self.detail}" if self.detail else "")


class TimingGraph:
    """Immutable container of nodes, edges, register timing and the clock."""

    def __init__(self, nodes, edges, register_timing=None, clock=None, fabric_grid=(1, 1)):
        self.nodes = tuple(nodes)
        self.edges = tuple(edges)
        self.register_timing = dict(register_timing or {})
        self.clock = clock if clock is not None else ClockSpec(period_ps=1000.0)
        self.fabric_grid = tuple(fabric_grid)
        self._by_id = {n.id: n for n in self.nodes}
        self._fanin = None
        self._fanout = None

    def node(self, node_id):
        return self._by_id[node_id]

    def has_node(self, node_id):
        return node_id in self._by_id

    @property
    def registers(self):
        return [n for n in self.nodes if n.kind == "Register"]

    def find(self, name):
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)

    def fanout(self, node_id):
        """Edges leaving ``node_id`` in ascending edge-id order."""
        if self._fanout is None:
            self._build_adjacency()
        return self._fanout.get(node_id, ())

    def fanin(self, node_id):
        if self._fanin is None:
            self._build_adjacency()
        return self._fanin.get(node_id, ())

    def _build_adjacency(self):
        fanout, fanin = {}, {}
        for e in self.edges:
            fanout.setdefault(e.src, []).append(e)
            fanin.setdefault(e.dst, []).append(e)
        self._fanout = {k: tuple(v) for k, v in fanout.items()}
        self._fanin = {k: tuple(v) for k, v in fanin.items()}

    def replace(self, edges=None, register_timing=None, clock=None):
        return TimingGraph(
            self.nodes,
            self.edges if edges is None else edges,
            self.register_timing if register_timing is None else register_timing,
            self.clock if clock is None else clock,
            self.fabric_grid,
        )

    def __eq__(self, other):
        return isinstance(other, TimingGraph) and to_dict(self) == to_dict(other)

    def __repr__(self):
        return f"TimingGraph({len(self.nodes)} nodes, {len(self.edges)} edges)"


def _comb_cycles(graph):
    """Strongly connected components of size > 1 (or self loops) among non-register nodes."""
    comb = {n.id for n in graph.nodes if n.kind != "Register"}
    adj = {v: [] for v in comb}
    for e in graph.edges:
        if e.src in comb and e.dst in comb:
            adj[e.src].append(e.dst)

    # iterative Tarjan
    index, low, on_stack, stack, sccs = {}, {}, set(), [], []
    counter = 0
    for root in sorted(comb):
        if root in index:
            continue
        work = [(root, iter(adj[root]))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(adj[w])))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                if len(comp) > 1 or v in adj[v]:
                    sccs.append(tuple(sorted(comp)))
    return sorted(sccs)


def validate(graph):
    """Return the list of invariant violations (empty when the graph is well formed)."""
    out = []
    seen = set()
    for n in graph.nodes:
        if n.id in seen:
            out.append(Violation("DuplicateId", (n.id,)))
        seen.add(n.id)
        if n.kind not in NODE_KINDS:
            out.append(Violation("UnknownKind", (n.id,), n.kind))
        if n.kind == "Register" and n.stage_tag is None:
            out.append(Violation("UntaggedRegister", (n.id,), n.name))
        if n.stage_tag is not None and n.stage_tag not in STAGES:
            out.append(Violation("UnknownStage", (n.id,), str(n.stage_tag)))
        if n.kind == "CombCell" and n.cell_class not in CELL_CLASSES:
            out.append(Violation("UnknownCellClass", (n.id,), str(n.cell_class)))
        if n.vt_class is not None and n.vt_class not in VT_CLASSES:
            out.append(Violation("UnknownVtClass", (n.id,), str(n.vt_class)))
        if n.drive_strength is not None and n.drive_strength < 1:
            out.append(Violation("BadDriveStrength", (n.id,)))
        x, y = n.placement
        w, h = graph.fabric_grid
        if not (0 <= x < w and 0 <= y < h):
            out.append(Violation("PlacementOutOfGrid", (n.id,), f"{(x, y)} not in {w}x{h}"))

    for e in graph.edges:
        missing = [v for v in (e.src, e.dst) if not graph.has_node(v)]
        if missing:
            out.append(Violation("DanglingEdge", (e.id,), f"missing nodes {missing}"))
            continue
        if e.kind not in EDGE_KINDS:
            out.append(Violation("UnknownEdgeKind", (e.id,), e.kind))
        for label, pair in (("logic", e.logic_ps), ("routing", e.routing_ps)):
            if pair[0] > pair[1] or pair[0] < 0:
                out.append(Violation("DelayOrder", (e.id,), f"{label} {pair}"))
        if e.kind == "Net" and tuple(e.logic_ps) != (0, 0):
            out.append(Violation("NetWithLogic", (e.id,)))
        if e.kind == "CellArc" and graph.node(e.src).kind != "CombCell":
            out.append(Violation("CellArcFromNonCell", (e.id,)))
        if e.hop_count < 0:
            out.append(Violation("NegativeHops", (e.id,)))
        if not 0.0 <= e.congestion_weight <= 10.0:
            out.append(Violation("CongestionRange", (e.id,)))

    for reg, t in graph.register_timing.items():
        if min(t.clk_to_q_early_ps, t.clk_to_q_late_ps, t.setup_ps, t.hold_ps) < 0:
            out.append(Violation("NegativeRegisterTiming", (reg,)))
        if t.clk_to_q_early_ps > t.clk_to_q_late_ps:
            out.append(Violation("ClkToQOrder", (reg,)))
    for n in graph.registers:
        if n.id not in graph.register_timing:
            out.append(Violation("MissingRegisterTiming", (n.id,)))

    clk = graph.clock
    if not clk.period_ps > 0:
        out.append(Violation("ClockPeriod", (), str(clk.period_ps)))
    if clk.uncertainty_ps < 0 or clk.source_latency_ps < 0:
        out.append(Violation("ClockNegative", ()))
    for reg, d in clk.insertion_delay_ps.items():
        if d < 0:
            out.append(Violation("NegativeInsertion", (reg,)))

    if any(v.rule == "DanglingEdge" for v in out):
        return out

    for comp in _comb_cycles(graph):
        out.append(Violation("CombinationalCycle", comp))

    out.extend(_unanchored(graph))
    return out


def _unanchored(graph):
    anchors = {n.id for n in graph.nodes if n.kind in ("Register", "Port")}
    comb = [n.id for n in graph.nodes if n.kind == "CombCell"]

    def reach(start_nodes, step):
        seen = set()
        todo = list(start_nodes)
        while todo:
            v = todo.pop()
            for w in step(v):
                if w not in seen and w not in anchors:
                    seen.add(w)
                    todo.append(w)
        return seen

    fwd = reach(anchors, lambda v: [e.dst for e in graph.fanout(v)])
    bwd = reach(anchors, lambda v: [e.src for e in graph.fanin(v)])
    return [
        Violation("UnanchoredCell", (c,), graph.node(c).name)
        for c in comb
        if c not in fwd or c not in bwd
    ]


def topological_order(graph):
    """Deterministic topological order of all node ids (ties by ascending id).

    Edges into registers that close a sequential loop are the only edges
    allowed to point backwards; a loop made only of combinational nodes
    raises ``CyclicGraph``.
    """
    indeg = {n.id: 0 for n in graph.nodes}
    for e in graph.edges:
        indeg[e.dst] += 1
    ready = [v for v, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    done = set()
    order = []
    pending_regs = sorted(n.id for n in graph.nodes if n.kind == "Register")
    while len(order) < len(indeg):
        if not ready:
            # release the lowest-id register still waiting on a loop-closing capture edge
            reg = next((r for r in pending_regs if r not in done), None)
            if reg is None:
                raise CyclicGraph("combinational cycle: " + str(_comb_cycles(graph)))
            indeg[reg] = 0
            heapq.heappush(ready, reg)
        v = heapq.heappop(ready)
        if v in done:
            continue
        done.add(v)
        order.append(v)
        for e in graph.fanout(v):
            if e.dst in done:
                continue
            indeg[e.dst] -= 1
            if indeg[e.dst] == 0:
                heapq.heappush(ready, e.dst)
    return order


def comb_order(graph):
    """Topological order of the non-register nodes only (registers are cut)."""
    nodes = [n.id for n in graph.nodes if n.kind != "Register"]
    member = set(nodes)
    indeg = dict.fromkeys(nodes, 0)
    for e in graph.edges:
        if e.src in member and e.dst in member:
            indeg[e.dst] += 1
    ready = [v for v, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        v = heapq.heappop(ready)
        order.append(v)
        for e in graph.fanout(v):
            if e.dst in member:
                indeg[e.dst] -= 1
                if indeg[e.dst] == 0:
                    heapq.heappush(ready, e.dst)
    if len(order) != len(nodes):
        raise CyclicGraph("combinational cycle: " + str(_comb_cycles(graph)))
    return order


# -- serialization ---------------------------------------------------------


def node_to_dict(n):
    return {
        "id": n.id,
        "name": n.name,
        "kind": n.kind,
        "stage_tag": n.stage_tag,
        "cell_class": n.cell_class,
        "drive_strength": n.drive_strength,
        "vt_class": n.vt_class,
        "placement": [int(n.placement[0]), int(n.placement[1])],
    }


def edge_to_dict(e):
    return {
        "id": e.id,
        "src": e.src,
        "dst": e.dst,
        "kind": e.kind,
        "logic_ps": [float(e.logic_ps[0]), float(e.logic_ps[1])],
        "routing_ps": [float(e.routing_ps[0]), float(e.routing_ps[1])],
        "hop_count": int(e.hop_count),
        "congestion_weight": float(e.congestion_weight),
    }


def timing_to_dict(t):
    return {
        "clk_to_q_late_ps": float(t.clk_to_q_late_ps),
        "clk_to_q_early_ps": float(t.clk_to_q_early_ps),
        "setup_ps": float(t.setup_ps),
        "hold_ps": float(t.hold_ps),
    }


def clock_to_dict(c):
    return {
        "period_ps": float(c.period_ps),
        "uncertainty_ps": float(c.uncertainty_ps),
        "source_latency_ps": float(c.source_latency_ps),
        "insertion_delay_ps": {str(k): float(v) for k, v in sorted(c.insertion_delay_ps.items())},
    }


def clock_from_dict(d):
    return ClockSpec(
        period_ps=d["period_ps"],
        uncertainty_ps=d.get("uncertainty_ps", 0.0),
        source_latency_ps=d.get("source_latency_ps", 0.0),
        insertion_delay_ps={int(k): v for k, v in d.get("insertion_delay_ps", {}).items()},
    )


def to_dict(graph):
    return {
        "schema_version": SCHEMA_VERSION,
        "nodes": [node_to_dict(n) for n in graph.nodes],
        "edges": [edge_to_dict(e) for e in graph.edges],
        "register_timing": {
            str(k): timing_to_dict(v) for k, v in sorted(graph.register_timing.items())
        },
        "clock": clock_to_dict(graph.clock),
        "fabric_grid": list(graph.fabric_grid),
    }


def from_dict(d):
    nodes = [
        TimingNode(
            id=n["id"],
            name=n["name"],
            kind=n["kind"],
            stage_tag=n.get("stage_tag"),
            cell_class=n.get("cell_class"),
            drive_strength=n.get("drive_strength"),
            vt_class=n.get("vt_class"),
            placement=tuple(n.get("placement", (0, 0))),
        )
        for n in d["nodes"]
    ]
    edges = [
        TimingEdge(
            id=e["id"],
            src=e["src"],
            dst=e["dst"],
            kind=e["kind"],
            logic_ps=tuple(e.get("logic_ps", (0.0, 0.0))),
            routing_ps=tuple(e.get("routing_ps", (0.0, 0.0))),
            hop_count=e.get("hop_count", 0),
            congestion_weight=e.get("congestion_weight", 0.0),
        )
        for e in d["edges"]
    ]
    timing = {int(k): RegisterTiming(**v) for k, v in d.get("register_timing", {}).items()}
    return TimingGraph(nodes, edges, timing, clock_from_dict(d["clock"]), tuple(d["fabric_grid"]))


def dumps(graph):
    return json.dumps(to_dict(graph), indent=1, sort_keys=True)


def loads(text):
    return from_dict(json.loads(text))


def save(graph, path):
    with open(path, "w") as f:
        f.write(dumps(graph))
        f.write("\n")


def load(path):
    with open(path) as f:
        return loads(f.read())
