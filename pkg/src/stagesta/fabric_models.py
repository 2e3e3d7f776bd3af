"""FPGA and ASIC delay models that turn a structural graph into a realized design.

FPGA realizations are seed-stochastic: every net draws a hop count from a
lognormal hop model modulated by a seeded congestion field. ASIC realizations
are corner-derated and optionally perturbed by per-cell LVF-style Gaussian
draws. All randomness comes from :mod:`stagesta.rng` streams keyed by
(seed, edge or node id), so a realization is fully replayable from its
provenance.
"""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import rng
from .errors import InvalidCorner, InvalidGraph, InvalidModel
from .timing_graph import (
    ClockSpec,
    RegisterTiming,
    clock_from_dict,
    clock_to_dict,
    from_dict as graph_from_dict,
    timing_to_dict,
    to_dict as graph_to_dict,
    validate,
)

CORNERS = ("FF", "TT", "SS")
LAYERS = ("local", "intermediate", "global")

# FPGA hold-side routing is this fraction of the max-delay routing
FPGA_MIN_ROUTING_FRACTION = 0.85
LVF_TRUNCATION_SIGMA = 4.0

# rng salts, one per independent draw family
_SALT_HOPS = 11
_SALT_HOTSPOT = 12
_SALT_FPGA_CLOCK = 13
_SALT_LVF = 21
_SALT_ASIC_CLOCK = 22


@dataclass(frozen=True)
class HopModel:
    base_per_tile: float = 1.0
    dispersion: float = 0.3
    congestion_gain: float = 1.0


@dataclass(frozen=True)
class CongestionField:
    n_hotspots: int = 3
    amplitude: float = 1.0
    radius_tiles: float = 8.0


@dataclass(frozen=True)
class FpgaFabricModel:
    lut_delay_ps: float
    carry_delay_ps: float
    mux_delay_ps: float
    memmacro_access_ps: float
    ff_timing: RegisterTiming
    switch_delay_ps: float
    segment_delay_ps: float
    hop_model: HopModel = HopModel()
    congestion_field: CongestionField = CongestionField()
    clock_insertion_ps: float = 0.0
    clock_skew_spread_ps: float = 0.0
    clock_uncertainty_ps: float = 0.0
    clock_period_ps: float = 2000.0

    def check(self):
        delays = [
            self.lut_delay_ps, self.carry_delay_ps, self.mux_delay_ps, self.memmacro_access_ps,
            self.switch_delay_ps, self.segment_delay_ps, self.clock_insertion_ps,
            self.clock_skew_spread_ps, self.clock_uncertainty_ps,
            self.hop_model.base_per_tile, self.hop_model.congestion_gain,
            self.congestion_field.amplitude, self.congestion_field.radius_tiles,
        ]
        if any(not math.isfinite(d) or d < 0 for d in delays):
            raise InvalidModel("FPGA delay parameters must be finite and >= 0")
        if not self.hop_model.dispersion > 0:
            raise InvalidModel("hop dispersion must be > 0")
        if not 0 <= self.congestion_field.amplitude <= 1:
            raise InvalidModel("congestion amplitude must lie in [0, 1]")
        if self.clock_period_ps <= 0:
            raise InvalidModel("clock period must be > 0")
        _check_ff(self.ff_timing)

    def cell_delay(self, cell_class):
        return {
            "Lut": self.lut_delay_ps,
            "StdCell": self.lut_delay_ps,
            "CarryChain": self.carry_delay_ps,
            "Mux": self.mux_delay_ps,
            "MemMacro": self.memmacro_access_ps,
        }[cell_class]


@dataclass(frozen=True)
class AsicFabricModel:
    cell_base_ps: dict
    memmacro_access_ps: float
    ff_timing: RegisterTiming
    wire_ps_per_tile: dict
    layer_thresholds: tuple = (4, 12)
    corner_multipliers: dict = field(default_factory=lambda: {"FF": 0.90, "TT": 1.0, "SS": 1.145})
    lvf_sigma_fraction: float = 0.05
    clock_insertion_ps: float = 0.0
    clock_skew_budget_ps: float = 0.0
    clock_uncertainty_ps: float = 0.0
    clock_period_ps: float = 540.0

    def check(self):
        m = self.corner_multipliers
        if m.get("TT") != 1.0:
            raise InvalidModel("TT multiplier must be 1.0")
        if not m.get("FF", 0) < 1.0 < m.get("SS", 0):
            raise InvalidModel("corner multipliers must satisfy FF < 1.0 < SS")
        if not 0 <= self.lvf_sigma_fraction < 0.2:
            raise InvalidModel("lvf_sigma_fraction must lie in [0, 0.2)")
        vals = list(self.cell_base_ps.values()) + list(self.wire_ps_per_tile.values()) + [
            self.memmacro_access_ps, self.clock_insertion_ps, self.clock_skew_budget_ps,
            self.clock_uncertainty_ps,
        ]
        if any(not math.isfinite(v) or v < 0 for v in vals):
            raise InvalidModel("ASIC delay parameters must be finite and >= 0")
        if set(self.wire_ps_per_tile) != set(LAYERS):
            raise InvalidModel(f"wire_ps_per_tile needs layers {LAYERS}")
        if self.clock_period_ps <= 0:
            raise InvalidModel("clock period must be > 0")
        _check_ff(self.ff_timing)

    def layer(self, span):
        lo, hi = self.layer_thresholds
        if span <= lo:
            return "local"
        if span <= hi:
            return "intermediate"
        return "global"

    def cell_base(self, node):
        if node.cell_class == "MemMacro":
            return self.memmacro_access_ps
        key = cell_key(node.cell_class, node.drive_strength, node.vt_class)
        try:
            return self.cell_base_ps[key]
        except KeyError:
            raise InvalidModel(f"no ASIC base delay for {key}") from None

    def fastest_multiplier(self, corner):
        here = self.corner_multipliers[corner]
        return min(v for v in self.corner_multipliers.values() if v <= here)


def cell_key(cell_class, drive, vt):
    return f"{cell_class}/{drive}/{vt}"


def _check_ff(t):
    if min(t.clk_to_q_late_ps, t.clk_to_q_early_ps, t.setup_ps, t.hold_ps) < 0:
        raise InvalidModel("register timing must be >= 0")
    if t.clk_to_q_early_ps > t.clk_to_q_late_ps:
        raise InvalidModel("clk_to_q_early must not exceed clk_to_q_late")


class RealizedDesign:
    """A timing graph with concrete per-edge delays, register timing and clock."""

    def __init__(self, graph, logic_min, logic_max, routing_min, routing_max,
                 hop_count, congestion, register_timing, clock, provenance):
        self.graph = graph
        self.logic_min = np.asarray(logic_min, dtype=float)
        self.logic_max = np.asarray(logic_max, dtype=float)
        self.routing_min = np.asarray(routing_min, dtype=float)
        self.routing_max = np.asarray(routing_max, dtype=float)
        self.hop_count = np.asarray(hop_count, dtype=np.int64)
        self.congestion = np.asarray(congestion, dtype=float)
        self.register_timing = dict(register_timing)
        self.clock = clock
        self.provenance = dict(provenance)
        self._timer = None

    @property
    def delay_max(self):
        return self.logic_max + self.routing_max

    @property
    def delay_min(self):
        return self.logic_min + self.routing_min

    def with_clock(self, clock):
        return RealizedDesign(self.graph, self.logic_min, self.logic_max, self.routing_min,
                              self.routing_max, self.hop_count, self.congestion,
                              self.register_timing, clock, self.provenance)

    def scaled(self, factor):
        """Every delay (edge, register, clock) multiplied by ``factor``."""
        t = {
            k: RegisterTiming(*(factor * x for x in (v.clk_to_q_late_ps, v.clk_to_q_early_ps, v.setup_ps, v.hold_ps)))
            for k, v in self.register_timing.items()
        }
        c = self.clock
        clock = ClockSpec(c.period_ps * factor, c.uncertainty_ps * factor, c.source_latency_ps * factor,
                          {k: v * factor for k, v in c.insertion_delay_ps.items()})
        return RealizedDesign(self.graph, self.logic_min * factor, self.logic_max * factor,
                              self.routing_min * factor, self.routing_max * factor, self.hop_count,
                              self.congestion, t, clock, self.provenance)

    def to_dict(self):
        return {
            "schema_version": 1,
            "provenance": self.provenance,
            "graph": graph_to_dict(self.graph),
            "logic_min": self.logic_min.tolist(),
            "logic_max": self.logic_max.tolist(),
            "routing_min": self.routing_min.tolist(),
            "routing_max": self.routing_max.tolist(),
            "hop_count": self.hop_count.tolist(),
            "congestion": self.congestion.tolist(),
            "register_timing": {str(k): timing_to_dict(v) for k, v in sorted(self.register_timing.items())},
            "clock": clock_to_dict(self.clock),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            graph_from_dict(d["graph"]),
            d["logic_min"], d["logic_max"], d["routing_min"], d["routing_max"],
            d["hop_count"], d["congestion"],
            {int(k): RegisterTiming(**v) for k, v in d["register_timing"].items()},
            clock_from_dict(d["clock"]),
            d["provenance"],
        )

    def dumps(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def save(self, path):
        with open(path, "w") as f:
            f.write(self.dumps())
            f.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))


def _require_valid(graph):
    problems = validate(graph)
    if problems:
        raise InvalidGraph(problems)


def _edge_geometry(graph):
    src = np.array([graph.node(e.src).placement for e in graph.edges], dtype=float).reshape(-1, 2)
    dst = np.array([graph.node(e.dst).placement for e in graph.edges], dtype=float).reshape(-1, 2)
    dist = np.abs(src - dst).sum(axis=1)
    mid = (src + dst) / 2.0
    return dist, mid


def congestion_field(model, grid, seed, points):
    """Seeded hotspot field in [0, 1] evaluated at ``points`` (n x 2 tile coordinates)."""
    cf = model.congestion_field
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    k = np.arange(cf.n_hotspots)
    cx = rng.uniform(seed, _SALT_HOTSPOT, k, 0) * grid[0]
    cy = rng.uniform(seed, _SALT_HOTSPOT, k, 1) * grid[1]
    amp = rng.uniform(seed, _SALT_HOTSPOT, k, 2) * cf.amplitude
    d2 = (points[:, None, 0] - cx[None, :]) ** 2 + (points[:, None, 1] - cy[None, :]) ** 2
    field_ = (amp[None, :] * np.exp(-d2 / (2.0 * cf.radius_tiles**2))).sum(axis=1)
    return np.clip(field_, 0.0, 1.0)


def realize_fpga(graph, model, seed):
    """Seeded FPGA realization: quantized cell delays plus stochastic hop-count routing."""
    model.check()
    _require_valid(graph)
    seed = int(seed)
    E = len(graph.edges)
    edge_ids = np.array([e.id for e in graph.edges], dtype=np.int64)

    logic = np.zeros(E)
    for i, e in enumerate(graph.edges):
        if e.kind == "CellArc":
            logic[i] = model.cell_delay(graph.node(e.src).cell_class)

    dist, mid = _edge_geometry(graph)
    cong = congestion_field(model, graph.fabric_grid, seed, mid)
    hm = model.hop_model
    mult = np.exp(hm.dispersion * rng.normal(seed, _SALT_HOPS, edge_ids))
    hops = np.rint(hm.base_per_tile * dist * (1.0 + hm.congestion_gain * cong) * mult).astype(np.int64)
    routing_max = hops * (model.switch_delay_ps + model.segment_delay_ps)
    routing_min = FPGA_MIN_ROUTING_FRACTION * routing_max

    reg_ids = np.array(sorted(n.id for n in graph.registers), dtype=np.int64)
    u = rng.uniform(seed, _SALT_FPGA_CLOCK, reg_ids)
    ins = model.clock_insertion_ps + (2.0 * u - 1.0) * model.clock_skew_spread_ps
    clock = ClockSpec(
        period_ps=model.clock_period_ps,
        uncertainty_ps=model.clock_uncertainty_ps,
        source_latency_ps=0.0,
        insertion_delay_ps={int(r): float(max(0.0, d)) for r, d in zip(reg_ids, ins)},
    )
    timing = {int(r): model.ff_timing for r in reg_ids}
    return RealizedDesign(graph, logic, logic.copy(), routing_min, routing_max, hops, cong,
                          timing, clock, {"fabric": "FPGA", "seed": seed})


def asic_insertion_delays(graph, model):
    """Balanced (zero-mean) per-register insertion offsets within the skew budget."""
    reg_ids = np.array(sorted(n.id for n in graph.registers), dtype=np.int64)
    off = 2.0 * rng.uniform(0, _SALT_ASIC_CLOCK, reg_ids) - 1.0
    off -= off.mean()
    peak = np.abs(off).max() if len(off) else 0.0
    if peak > 0:
        off *= model.clock_skew_budget_ps / peak
    return {int(r): float(model.clock_insertion_ps + o) for r, o in zip(reg_ids, off)}


def realize_asic(graph, model, corner="TT", lvf_sample=None):
    """Corner-derated ASIC realization with optional per-cell LVF perturbation."""
    model.check()
    if corner not in model.corner_multipliers:
        raise InvalidCorner(f"unknown corner {corner!r}")
    _require_valid(graph)
    m = model.corner_multipliers[corner]
    m_fast = model.fastest_multiplier(corner)

    node_ids = np.array([n.id for n in graph.nodes], dtype=np.int64)
    if lvf_sample is None:
        g = np.zeros(len(node_ids))
    else:
        g = model.lvf_sigma_fraction * rng.truncated_normal(
            int(lvf_sample), _SALT_LVF, node_ids, LVF_TRUNCATION_SIGMA)
    g_of = dict(zip(node_ids.tolist(), g.tolist()))

    E = len(graph.edges)
    base = np.zeros(E)
    gain = np.zeros(E)
    for i, e in enumerate(graph.edges):
        if e.kind == "CellArc":
            node = graph.node(e.src)
            base[i] = model.cell_base(node)
            gain[i] = g_of[node.id]
    logic_max = base * m * (1.0 + gain)
    logic_min = base * m_fast * (1.0 + gain)

    dist, _ = _edge_geometry(graph)
    per_tile = np.array([model.wire_ps_per_tile[model.layer(d)] for d in dist])
    wire = per_tile * dist
    routing_max = wire * m
    routing_min = wire * m_fast

    ff = model.ff_timing
    reg_t = RegisterTiming(ff.clk_to_q_late_ps * m, ff.clk_to_q_early_ps * m_fast,
                           ff.setup_ps * m, ff.hold_ps * m)
    timing = {n.id: reg_t for n in graph.registers}
    clock = ClockSpec(model.clock_period_ps, model.clock_uncertainty_ps, 0.0,
                      asic_insertion_delays(graph, model))
    prov = {"fabric": "ASIC", "corner": corner, "lvf_sample": None if lvf_sample is None else int(lvf_sample)}
    return RealizedDesign(graph, logic_min, logic_max, routing_min, routing_max,
                          np.zeros(E, dtype=np.int64), np.zeros(E), timing, clock, prov)


def replay(graph, provenance, fpga_model=None, asic_model=None):
    """Rebuild a realization from its provenance record."""
    if provenance["fabric"] == "FPGA":
        return realize_fpga(graph, fpga_model, provenance["seed"])
    return realize_asic(graph, asic_model, provenance["corner"], provenance.get("lvf_sample"))


# -- model files -------------------------------------------------------------


def model_to_dict(model):
    d = asdict(model)
    d["fabric"] = "FPGA" if isinstance(model, FpgaFabricModel) else "ASIC"
    d["schema_version"] = 1
    if "layer_thresholds" in d:
        d["layer_thresholds"] = list(d["layer_thresholds"])
    return d


def model_from_dict(d):
    d = dict(d)
    d.pop("schema_version", None)
    fabric = d.pop("fabric", None)
    try:
        d["ff_timing"] = RegisterTiming(**d["ff_timing"])
        if fabric == "FPGA":
            d["hop_model"] = HopModel(**d["hop_model"])
            d["congestion_field"] = CongestionField(**d["congestion_field"])
            model = FpgaFabricModel(**d)
        elif fabric == "ASIC":
            d["layer_thresholds"] = tuple(d["layer_thresholds"])
            model = AsicFabricModel(**d)
        else:
            raise InvalidModel(f"model fabric must be FPGA or ASIC, got {fabric!r}")
    except (KeyError, TypeError) as exc:
        raise InvalidModel(f"malformed model file: {exc}") from None
    model.check()
    return model


def save_model(model, path):
    with open(path, "w") as f:
        json.dump(model_to_dict(model), f, indent=1, sort_keys=True)
        f.write("\n")


def load_model(path):
    with open(path) as f:
        return model_from_dict(json.load(f))


def default_calibration():
    """Shipped (FPGA, ASIC) models fitted by :mod:`stagesta.calibration`."""
    from .calibration import SHIPPED_ASIC, SHIPPED_FPGA

    return SHIPPED_FPGA, SHIPPED_ASIC

