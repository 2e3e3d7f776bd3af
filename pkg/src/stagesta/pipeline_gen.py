"""Deterministic construction of a five-stage RV32I timing graph.

Buses are modelled one node per 8-bit slice. Node names follow
``<stage>.<role>.<detail>``; the role segment is what path classification
keys on (``alu``, ``agu``, ``cmp``, ``opsel``, ``fwd``, ``hazard``, ``ctrl``,
...). Registers are tagged with the stage their bank feeds:

    PC -> IF, IF/ID -> ID, ID/EX -> EX, EX/MEM -> MEM, MEM/WB -> WB,
    register-file storage -> ID

Emission table (S slices, D = alu_depth_levels, A = max(1, D // 2),
B = enabled bypass sources; rows marked * need include_control_paths):

    role      class       count        fan-in
    pc        Register    S
    pcinc     CarryChain  2S           l0<-pc[s]; l1<-l0[s], l0[s-1]
    pcmux     Mux         S            pcinc.l1[s], exmem.brt[s]
    fetch     Lut         S            pc[s]
    ifid      Register    2S           instr<-fetch[s]; pc<-pc[s]
    decode    Lut         S            ifid.instr[s]
    imm       Lut         S            ifid.instr[s], decode[s]
    rfread    MemMacro    S            ifid.instr[s], rf[s]
    hazard*   Lut         1            ifid.instr[*], idex.ctrl
    ctrl*     Lut         2+2+2        two-level chains in ID, EX and MEM driving that
                                       stage's muxes
    opsel     Mux         2S           rfread[s], imm[s] (b only), ctrl*, hazard*,
                                       memwb.wb[s] if WB in B
    idex      Register    3S (+1*)     opa, opb, pc (+ ctrl)
    fwd       Mux         2S           idex.op[s], exmem.alu[s] if EX in B,
                                       memwb.wb[s] if MEM in B
    alu       Lut/Carry   D*S          l0<-fwd_a[s], fwd_b[s]; l>0<-l-1[s], plus l-1[s-2**j]
                                       on the j-th odd level while 2**j < S
    agu       CarryChain  A*S          l0<-fwd_a[s], idex.opb[s]; l>0 as alu
    cmp       Lut         S+2          l0<-fwd a/b[s]; red<-l0[*]; out<-red
    brt       CarryChain  S            idex.pc[s], idex.opb[s]
    resmux    Mux         S            alu.l(D-1)[s], agu.l(A-1)[s], ctrl*
    exmem     Register    4S+1 (+1*)   alu, addr, wdata, brt, br (+ ctrl)
    dmem      MemMacro    S            exmem.addr[*], exmem.wdata[s]
    ldalign   Lut         S            dmem[s]
    wbmux     Mux         S            ldalign[s], exmem.alu[s], ctrl*
    memwb     Register    S (+1*)      wb (+ ctrl)
    rf        Register    S            memwb.wb[s] (+ memwb.ctrl*)

Placement is a compact tile layout with one slice every four rows. The
pipeline banks run left to right (IF/ID, ID/EX, EX/MEM, MEM/WB); the
columns of the other roles come from calibration, so some stage-local
cells sit beside a neighbouring bank. The data-memory macro is pinned to
the bottom edge with the memory-port registers next to it.
"""

import json
from dataclasses import asdict, dataclass

from .errors import InvalidConfig, InvalidGraph
from .timing_graph import ClockSpec, RegisterTiming, TimingEdge, TimingGraph, TimingNode, validate

BYPASS_SOURCES = ("EX", "MEM", "WB")

# Column (x tile) of each placed role on the reference 36-tile-wide grid;
# wider grids stretch these proportionally.
_REF_WIDTH = 36
_COL = {
    "pc": 2, "pcinc.l0": 2, "pcinc.l1": 0, "pcmux": 0, "fetch": 1, "ifid": 1, "decode": 13,
    "imm": 2, "rf": 12, "rfread": 0, "ctrl.id": 3, "hazard": 6, "opsel": 10, "idex": 9,
    "fwd": 11, "alu": (13, 18), "agu": (16, 17), "cmp.l0": 14, "cmp.red": 15, "cmp.out": 13, "brt": 14,
    "resmux": 13, "ctrl.ex": 7, "exmem": 20, "brtreg": 10, "dmem": 18, "ldalign": 21, "wbmux": 22,
    "ctrl.mem": 16, "memwb": 28, "memport": 19,
}

@dataclass
class PipelineConfig:
    word_width: int = 32
    regfile_entries: int = 32
    regfile_read_ports: int = 2
    regfile_write_ports: int = 1
    alu_depth_levels: int = 8
    bypass_sources: tuple = BYPASS_SOURCES
    mem_macro_access_ps_hint: float = 0.0
    include_control_paths: bool = True
    fabric_grid: tuple = (36, 20)
    slice_width: int = 8

    def check(self):
        if self.word_width < 1:
            raise InvalidConfig("word_width must be >= 1")
        if self.alu_depth_levels < 1:
            raise InvalidConfig("alu_depth_levels must be >= 1")
        if self.regfile_entries < 1 or self.slice_width < 1:
            raise InvalidConfig("regfile_entries and slice_width must be >= 1")
        if self.regfile_read_ports != 2 or self.regfile_write_ports != 1:
            raise InvalidConfig("register file is dual-read/single-write")
        if self.mem_macro_access_ps_hint < 0:
            raise InvalidConfig("mem_macro_access_ps_hint must be >= 0")
        bad = set(self.bypass_sources) - set(BYPASS_SOURCES)
        if bad:
            raise InvalidConfig(f"unknown bypass sources {sorted(bad)}")
        w, h = self.fabric_grid
        if w < _REF_WIDTH or h < 4 * self.slices + 4:
            raise InvalidConfig(f"fabric_grid {self.fabric_grid} too small for {self.slices} slices")

    @property
    def slices(self):
        return max(1, -(-self.word_width // self.slice_width))

    def to_dict(self):
        d = asdict(self)
        d["bypass_sources"] = list(self.bypass_sources)
        d["fabric_grid"] = list(self.fabric_grid)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d.pop("schema_version", None)
        if "bypass_sources" in d:
            d["bypass_sources"] = tuple(d["bypass_sources"])
        if "fabric_grid" in d:
            d["fabric_grid"] = tuple(d["fabric_grid"])
        try:
            return cls(**d)
        except TypeError as exc:
            raise InvalidConfig(str(exc)) from None

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))


class _Builder:
    def __init__(self, cfg, layout=None):
        self.cfg = cfg
        self.cols = {**_COL, **(layout or {})}
        self.nodes = []
        self.edges = []
        self.ids = {}
        self.w, self.h = cfg.fabric_grid
        self.pitch = (self.h - 4) // cfg.slices

    def x(self, role, frac=0.0):
        col = self.cols[role]
        if isinstance(col, tuple):
            col = col[0] + (col[1] - col[0]) * frac
        return min(self.w - 1, int(round(col * (self.w - 1) / (_REF_WIDTH - 1))))

    def y(self, s, offset=0):
        return min(self.h - 1, 2 + s * self.pitch + offset)

    def add(self, name, kind, stage, pos, cell_class=None):
        nid = len(self.nodes)
        drive = vt = None
        if kind == "CombCell" and cell_class != "MemMacro":
            drive, vt = 2, "SVT"
        self.nodes.append(TimingNode(nid, name, kind, stage, cell_class, drive, vt, tuple(pos)))
        self.ids[name] = nid
        return nid

    def reg(self, name, stage, pos):
        return self.add(name, "Register", stage, pos)

    def cell(self, name, stage, pos, cell_class):
        return self.add(name, "CombCell", stage, pos, cell_class)

    def connect(self, src, dst):
        s, d = self.ids[src], self.ids[dst]
        kind = "CellArc" if self.nodes[s].kind == "CombCell" else "Net"
        self.edges.append(TimingEdge(len(self.edges), s, d, kind))


def _prefix_spans(depth, slices):
    """Carry-prefix cross-slice spans: the j-th odd level reaches back 2**j slices."""
    spans = {}
    for j, lvl in enumerate(range(1, depth, 2)):
        if 2**j >= slices:
            break
        spans[lvl] = 2**j
    return spans


def build_rv32i_graph(config=None, layout=None):
    """Build the stage-tagged timing graph of the five-stage core.

    ``layout`` overrides entries of the default column table (role -> x
    tile, or (x0, x1) for a multi-level block); calibration uses it to
    search placements.
    """
    cfg = config or PipelineConfig()
    cfg.check()
    unknown = set(layout or {}) - set(_COL)
    if unknown:
        raise InvalidConfig(f"unknown layout roles {sorted(unknown)}")
    S = cfg.slices
    D = cfg.alu_depth_levels
    A = max(1, D // 2)
    ctl = cfg.include_control_paths
    byp = set(cfg.bypass_sources)
    b = _Builder(cfg, layout)
    x, y = b.x, b.y
    mid = S // 2

    # -- IF
    for s in range(S):
        b.reg(f"if.pc.s{s}", "IF", (x("pc"), y(s)))
        b.cell(f"if.pcinc.l0.s{s}", "IF", (x("pcinc.l0"), y(s)), "CarryChain")
        b.cell(f"if.pcinc.l1.s{s}", "IF", (x("pcinc.l1"), y(s)), "CarryChain")
        b.cell(f"if.pcmux.s{s}", "IF", (x("pcmux"), y(s, 2)), "Mux")
        b.cell(f"if.fetch.s{s}", "IF", (x("fetch"), y(s, 1)), "Lut")
    for s in range(S):
        b.reg(f"id.ifid.instr.s{s}", "ID", (x("ifid"), y(s, 1)))
        b.reg(f"id.ifid.pc.s{s}", "ID", (x("ifid"), y(s)))

    # -- ID
    for s in range(S):
        b.cell(f"id.decode.s{s}", "ID", (x("decode"), y(s, 1)), "Lut")
        b.cell(f"id.imm.s{s}", "ID", (x("imm"), y(s, 1)), "Lut")
        b.reg(f"id.rf.s{s}", "ID", (x("rf"), y(s, 3)))
        b.cell(f"id.rfread.s{s}", "ID", (x("rfread"), y(s, 2)), "MemMacro")
    if ctl:
        b.cell("id.hazard", "ID", (x("hazard"), y(mid, 3)), "Lut")
        b.cell("id.ctrl.l0", "ID", (x("ctrl.id"), y(mid, 1)), "Lut")
        b.cell("id.ctrl.l1", "ID", (x("ctrl.id") + 1, y(mid, 1)), "Lut")
    for s in range(S):
        b.cell(f"id.opsel_a.s{s}", "ID", (x("opsel"), y(s)), "Mux")
        b.cell(f"id.opsel_b.s{s}", "ID", (x("opsel"), y(s, 1)), "Mux")
    for s in range(S):
        b.reg(f"ex.idex.opa.s{s}", "EX", (x("idex"), y(s)))
        b.reg(f"ex.idex.opb.s{s}", "EX", (x("idex"), y(s, 1)))
        b.reg(f"ex.idex.pc.s{s}", "EX", (x("idex"), y(s, 2)))
    if ctl:
        b.reg("ex.idex.ctrl", "EX", (x("idex"), y(mid, 3)))

    # -- EX
    for s in range(S):
        b.cell(f"ex.fwd_a.s{s}", "EX", (x("fwd"), y(s)), "Mux")
        b.cell(f"ex.fwd_b.s{s}", "EX", (x("fwd"), y(s, 1)), "Mux")
    for lvl in range(D):
        cls = "CarryChain" if lvl % 2 else "Lut"
        for s in range(S):
            b.cell(f"ex.alu.l{lvl}.s{s}", "EX", (x("alu", lvl / max(1, D - 1)), y(s)), cls)
    for lvl in range(A):
        for s in range(S):
            b.cell(f"ex.agu.l{lvl}.s{s}", "EX", (x("agu", lvl / max(1, A - 1)), y(s, 2)), "CarryChain")
    for s in range(S):
        b.cell(f"ex.cmp.l0.s{s}", "EX", (x("cmp.l0"), y(s, 3)), "Lut")
    b.cell("ex.cmp.red", "EX", (x("cmp.red"), y(mid, 3)), "Lut")
    b.cell("ex.cmp.out", "EX", (x("cmp.out"), y(mid, 3)), "Lut")
    for s in range(S):
        b.cell(f"ex.brt.s{s}", "EX", (x("brt"), y(s, 2)), "CarryChain")
        b.cell(f"ex.resmux.s{s}", "EX", (x("resmux"), y(s)), "Mux")
    if ctl:
        b.cell("ex.ctrl.l0", "EX", (x("ctrl.ex"), y(mid, 3)), "Lut")
        b.cell("ex.ctrl.l1", "EX", (x("ctrl.ex") + 1, y(mid, 3)), "Lut")
    for s in range(S):
        b.reg(f"mem.exmem.alu.s{s}", "MEM", (x("exmem"), y(s)))
        b.reg(f"mem.exmem.wdata.s{s}", "MEM", (x("memport") + 1, 1 + s))
        b.reg(f"mem.exmem.addr.s{s}", "MEM", (x("memport"), 1 + s))
        b.reg(f"mem.exmem.brt.s{s}", "MEM", (x("brtreg"), y(s, 3)))
    b.reg("mem.exmem.br", "MEM", (x("exmem"), y(mid, 3)))
    if ctl:
        b.reg("mem.exmem.ctrl", "MEM", (x("exmem"), y(mid, 2)))

    # -- MEM: the data-memory macro sits on the bottom edge
    for s in range(S):
        b.cell(f"mem.dmem.s{s}", "MEM", (x("dmem") + s, 0), "MemMacro")
        b.cell(f"mem.ldalign.s{s}", "MEM", (x("ldalign"), y(s, 1)), "Lut")
        b.cell(f"mem.wbmux.s{s}", "MEM", (x("wbmux"), y(s)), "Mux")
    if ctl:
        b.cell("mem.ctrl.l0", "MEM", (x("ctrl.mem"), y(mid, 3)), "Lut")
        b.cell("mem.ctrl.l1", "MEM", (x("ctrl.mem") + 1, y(mid, 3)), "Lut")
    for s in range(S):
        b.reg(f"wb.memwb.wb.s{s}", "WB", (x("memwb"), y(s)))
    if ctl:
        b.reg("wb.memwb.ctrl", "WB", (x("memwb"), y(mid, 3)))

    c = b.connect
    # IF
    for s in range(S):
        c(f"if.pc.s{s}", f"if.pcinc.l0.s{s}")
        c(f"if.pcinc.l0.s{s}", f"if.pcinc.l1.s{s}")
        if s > 0:
            c(f"if.pcinc.l0.s{s - 1}", f"if.pcinc.l1.s{s}")
        c(f"if.pcinc.l1.s{s}", f"if.pcmux.s{s}")
        c(f"mem.exmem.brt.s{s}", f"if.pcmux.s{s}")
        c(f"if.pcmux.s{s}", f"if.pc.s{s}")
        c(f"if.pc.s{s}", f"if.fetch.s{s}")
        c(f"if.fetch.s{s}", f"id.ifid.instr.s{s}")
        c(f"if.pc.s{s}", f"id.ifid.pc.s{s}")

    # ID
    for s in range(S):
        c(f"id.ifid.instr.s{s}", f"id.decode.s{s}")
        c(f"id.ifid.instr.s{s}", f"id.imm.s{s}")
        c(f"id.decode.s{s}", f"id.imm.s{s}")
        c(f"id.ifid.instr.s{s}", f"id.rfread.s{s}")
        c(f"id.rf.s{s}", f"id.rfread.s{s}")
    if ctl:
        for s in range(S):
            c(f"id.ifid.instr.s{s}", "id.hazard")
        c("ex.idex.ctrl", "id.hazard")
        for s in range(S):
            c(f"id.decode.s{s}", "id.ctrl.l0")
        c("id.ctrl.l0", "id.ctrl.l1")
    for s in range(S):
        for side in ("a", "b"):
            mux = f"id.opsel_{side}.s{s}"
            c(f"id.rfread.s{s}", mux)
            if side == "b":
                c(f"id.imm.s{s}", mux)
            if ctl:
                c("id.ctrl.l1", mux)
                c("id.hazard", mux)
            if "WB" in byp:
                c(f"wb.memwb.wb.s{s}", mux)
        c(f"id.opsel_a.s{s}", f"ex.idex.opa.s{s}")
        c(f"id.opsel_b.s{s}", f"ex.idex.opb.s{s}")
        c(f"id.ifid.pc.s{s}", f"ex.idex.pc.s{s}")
    if ctl:
        c("id.ctrl.l1", "ex.idex.ctrl")

    # EX
    if ctl:
        c("ex.idex.ctrl", "ex.ctrl.l0")
        c("ex.ctrl.l0", "ex.ctrl.l1")
    for s in range(S):
        for side, src in (("a", "opa"), ("b", "opb")):
            mux = f"ex.fwd_{side}.s{s}"
            c(f"ex.idex.{src}.s{s}", mux)
            if "EX" in byp:
                c(f"mem.exmem.alu.s{s}", mux)
            if "MEM" in byp:
                c(f"wb.memwb.wb.s{s}", mux)
    for s in range(S):
        c(f"ex.fwd_a.s{s}", f"ex.alu.l0.s{s}")
        c(f"ex.fwd_b.s{s}", f"ex.alu.l0.s{s}")
    spans = _prefix_spans(D, S)
    for lvl in range(1, D):
        for s in range(S):
            c(f"ex.alu.l{lvl - 1}.s{s}", f"ex.alu.l{lvl}.s{s}")
            if lvl in spans and s >= spans[lvl]:
                c(f"ex.alu.l{lvl - 1}.s{s - spans[lvl]}", f"ex.alu.l{lvl}.s{s}")
    for s in range(S):
        c(f"ex.fwd_a.s{s}", f"ex.agu.l0.s{s}")
        c(f"ex.idex.opb.s{s}", f"ex.agu.l0.s{s}")
    spans = _prefix_spans(A, S)
    for lvl in range(1, A):
        for s in range(S):
            c(f"ex.agu.l{lvl - 1}.s{s}", f"ex.agu.l{lvl}.s{s}")
            if lvl in spans and s >= spans[lvl]:
                c(f"ex.agu.l{lvl - 1}.s{s - spans[lvl]}", f"ex.agu.l{lvl}.s{s}")
    for s in range(S):
        c(f"ex.fwd_a.s{s}", f"ex.cmp.l0.s{s}")
        c(f"ex.fwd_b.s{s}", f"ex.cmp.l0.s{s}")
        c(f"ex.cmp.l0.s{s}", "ex.cmp.red")
    c("ex.cmp.red", "ex.cmp.out")
    c("ex.cmp.out", "mem.exmem.br")
    for s in range(S):
        c(f"ex.idex.pc.s{s}", f"ex.brt.s{s}")
        c(f"ex.idex.opb.s{s}", f"ex.brt.s{s}")
        c(f"ex.alu.l{D - 1}.s{s}", f"ex.resmux.s{s}")
        c(f"ex.agu.l{A - 1}.s{s}", f"ex.resmux.s{s}")
        if ctl:
            c("ex.ctrl.l1", f"ex.resmux.s{s}")
        c(f"ex.resmux.s{s}", f"mem.exmem.alu.s{s}")
        c(f"ex.agu.l{A - 1}.s{s}", f"mem.exmem.addr.s{s}")
        c(f"ex.fwd_b.s{s}", f"mem.exmem.wdata.s{s}")
        c(f"ex.brt.s{s}", f"mem.exmem.brt.s{s}")
    if ctl:
        c("ex.ctrl.l1", "mem.exmem.ctrl")

    # MEM
    if ctl:
        c("mem.exmem.ctrl", "mem.ctrl.l0")
        c("mem.ctrl.l0", "mem.ctrl.l1")
    for s in range(S):
        for t in range(S):
            c(f"mem.exmem.addr.s{t}", f"mem.dmem.s{s}")
        c(f"mem.exmem.wdata.s{s}", f"mem.dmem.s{s}")
        c(f"mem.dmem.s{s}", f"mem.ldalign.s{s}")
        c(f"mem.ldalign.s{s}", f"mem.wbmux.s{s}")
        c(f"mem.exmem.alu.s{s}", f"mem.wbmux.s{s}")
        if ctl:
            c("mem.ctrl.l1", f"mem.wbmux.s{s}")
        c(f"mem.wbmux.s{s}", f"wb.memwb.wb.s{s}")
    if ctl:
        c("mem.ctrl.l1", "wb.memwb.ctrl")

    # WB: write-back into the register file
    for s in range(S):
        c(f"wb.memwb.wb.s{s}", f"id.rf.s{s}")
        if ctl:
            c("wb.memwb.ctrl", f"id.rf.s{s}")

    timing = {n.id: RegisterTiming() for n in b.nodes if n.kind == "Register"}
    graph = TimingGraph(b.nodes, b.edges, timing, ClockSpec(period_ps=1000.0), cfg.fabric_grid)
    problems = validate(graph)
    if problems:
        raise InvalidGraph(problems)
    return graph
