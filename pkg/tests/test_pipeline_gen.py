import json
from pathlib import Path

import pytest

from stagesta import timing_graph as tg
from stagesta.errors import InvalidConfig
from stagesta.pipeline_gen import PipelineConfig, build_rv32i_graph
from stagesta.sta_engine import transition_of

MANIFEST = json.loads((Path(__file__).parent / "data" / "default_manifest.json").read_text())


def prefix_spans(depth, slices):
    out, j = [], 0
    for lvl in range(1, depth, 2):
        if 2**j >= slices:
            break
        out.append(2**j)
        j += 1
    return out


def expected_counts(S=4, D=8, ctl=True, byp=("EX", "MEM", "WB")):
    """Node, register and edge counts read off the documented emission table."""
    c = int(ctl)
    A = max(1, D // 2)
    ex, mem, wb = ("EX" in byp), ("MEM" in byp), ("WB" in byp)
    regs = S + 2 * S + S + (3 * S + c) + (4 * S + 1 + c) + (S + c)
    comb = 17 * S + D * S + A * S + 2 + 7 * c
    edges = (
        8 * S + (S - 1)                                   # IF
        + 5 * S + c * (2 * S + 2)                         # decode, imm, rf read, hazard, ctrl
        + 2 * S * (1 + 2 * c + wb) + S                    # operand select
        + 2 * S + S + c                                   # into ID/EX
        + 2 * c                                           # EX ctrl chain
        + 2 * S * (1 + ex + mem)                          # forwarding muxes
        + 2 * S + (D - 1) * S + sum(S - sp for sp in prefix_spans(D, S))
        + 2 * S + (A - 1) * S + sum(S - sp for sp in prefix_spans(A, S))
        + 3 * S + 2                                       # comparator
        + (8 + c) * S + c                                 # brt, resmux, into EX/MEM
        + 2 * c + S * S + (5 + c) * S + c                 # MEM
        + (1 + c) * S                                     # write-back
    )
    return regs + comb, regs, edges


def counts(g):
    return len(g.nodes), len(g.registers), len(g.edges)


def test_default_manifest(default_graph):
    assert counts(default_graph) == (MANIFEST["nodes"], MANIFEST["registers"], MANIFEST["edges"])
    assert expected_counts() == (MANIFEST["nodes"], MANIFEST["registers"], MANIFEST["edges"])


@pytest.mark.parametrize(
    "kw",
    [
        dict(),
        dict(alu_depth_levels=1),
        dict(alu_depth_levels=5),
        dict(alu_depth_levels=16),
        dict(include_control_paths=False),
        dict(bypass_sources=()),
        dict(bypass_sources=("MEM",)),
        dict(word_width=64, fabric_grid=(36, 36)),
        dict(word_width=8, slice_width=8),
        dict(word_width=32, slice_width=4, fabric_grid=(40, 36)),
    ],
)
def test_counts_match_emission_table(kw):
    cfg = PipelineConfig(**kw)
    g = build_rv32i_graph(cfg)
    assert tg.validate(g) == []
    assert counts(g) == expected_counts(cfg.slices, cfg.alu_depth_levels, cfg.include_control_paths,
                                        cfg.bypass_sources)


def longest_comb_chain(g, src_prefix, dst_prefix):
    """Most CombCell levels on a path from a src-bank register to a dst-bank register."""
    order = tg.comb_order(g)
    best = {}
    for r in g.registers:
        if r.name.startswith(src_prefix):
            for e in g.fanout(r.id):
                if g.node(e.dst).kind == "CombCell":
                    best[e.dst] = max(best.get(e.dst, 0), 1)
    out = 0
    for v in order:
        if v not in best:
            continue
        for e in g.fanout(v):
            w = g.node(e.dst)
            if w.kind == "CombCell":
                best[e.dst] = max(best.get(e.dst, 0), best[v] + 1)
            elif w.name.startswith(dst_prefix):
                out = max(out, best[v])
    return out


@pytest.mark.parametrize("depth", [2, 4, 8, 16])
def test_alu_chain_depth(depth):
    g = build_rv32i_graph(PipelineConfig(alu_depth_levels=depth))
    assert longest_comb_chain(g, "ex.idex.", "mem.exmem.") == depth + 2


def test_no_bypass_edges():
    g = build_rv32i_graph(PipelineConfig(bypass_sources=()))
    for e in g.edges:
        src, dst = g.node(e.src), g.node(e.dst)
        if src.name.startswith(("mem.exmem.", "wb.memwb.")):
            assert dst.role not in ("fwd", "opsel")
    full = build_rv32i_graph()
    assert any(full.node(e.src).name.startswith("mem.exmem.alu") and full.node(e.dst).role == "fwd"
               for e in full.edges)


def structure(g, stage_prefix):
    names = {n.id: n.name for n in g.nodes}
    return sorted((names[e.src], names[e.dst]) for e in g.edges
                  if names[e.src].startswith(stage_prefix) or names[e.dst].startswith(stage_prefix))


def test_doubling_depth():
    g8 = build_rv32i_graph(PipelineConfig(alu_depth_levels=8))
    g16 = build_rv32i_graph(PipelineConfig(alu_depth_levels=16))
    assert longest_comb_chain(g16, "ex.idex.", "mem.exmem.") > longest_comb_chain(g8, "ex.idex.", "mem.exmem.")
    assert structure(g8, "if.") == structure(g16, "if.")
    assert longest_comb_chain(g8, "if.pc", "id.ifid") == longest_comb_chain(g16, "if.pc", "id.ifid")


def test_stage_tags_and_transitions(default_graph):
    banks = {"if.pc": "IF", "id.ifid": "ID", "id.rf": "ID", "ex.idex": "EX", "mem.exmem": "MEM", "wb.memwb": "WB"}
    for r in default_graph.registers:
        prefix = ".".join(r.name.split(".")[:2])
        assert r.stage_tag == banks[prefix]
    stage = {n.id: n.stage_tag for n in default_graph.nodes}
    regs = {r.id for r in default_graph.registers}
    # every register pair joined by a path maps to a known transition
    for r in regs:
        seen, todo = set(), [r]
        while todo:
            v = todo.pop()
            for e in default_graph.fanout(v):
                if e.dst in regs:
                    assert transition_of(stage[r], stage[e.dst])
                elif e.dst not in seen:
                    seen.add(e.dst)
                    todo.append(e.dst)


def test_deterministic():
    assert tg.dumps(build_rv32i_graph()) == tg.dumps(build_rv32i_graph())


def test_macro_on_bottom_edge(default_graph):
    dmem = [n for n in default_graph.nodes if n.role == "dmem"]
    assert dmem and all(n.placement[1] == 0 and n.cell_class == "MemMacro" for n in dmem)
    xs = {n.role: n.placement[0] for n in default_graph.registers}
    assert xs["ifid"] < xs["idex"] < xs["exmem"] < xs["memwb"]


@pytest.mark.parametrize(
    "kw",
    [
        dict(word_width=0),
        dict(alu_depth_levels=0),
        dict(regfile_read_ports=1),
        dict(bypass_sources=("IF",)),
        dict(mem_macro_access_ps_hint=-1.0),
        dict(fabric_grid=(10, 10)),
    ],
)
def test_invalid_config(kw):
    with pytest.raises(InvalidConfig):
        build_rv32i_graph(PipelineConfig(**kw))


def test_config_file_round_trip(tmp_path):
    cfg = PipelineConfig(alu_depth_levels=6, bypass_sources=("EX",))
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert PipelineConfig.load(path) == cfg
    with pytest.raises(InvalidConfig):
        PipelineConfig.from_dict({"no_such_field": 1})


def test_layout_override():
    g = build_rv32i_graph(layout={"memwb": 30})
    default = build_rv32i_graph()
    assert g.find("wb.memwb.wb.s0").placement[0] == 30
    assert [n.name for n in g.nodes] == [n.name for n in default.nodes]
    assert g.edges == default.edges
    with pytest.raises(InvalidConfig):
        build_rv32i_graph(layout={"nonsense": 3})
