"""Property-based checks of the engine, the record format and the statistics.

``CASES`` counts executed examples so the acceptance suite can confirm the
volume of generated inputs.
"""

import collections
import math
import random

import numpy as np
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from conftest import enumerate_paths, random_design
from stagesta import sta_engine as sta
from stagesta import stats_analysis as sa
from stagesta.fabric_models import RealizedDesign, realize_asic, realize_fpga
from stagesta.pipeline_gen import PipelineConfig, build_rv32i_graph
from stagesta.report import PathRecord, dumps_records, import_paths
from test_fabric_models import asic_model, fpga_model

CASES = collections.Counter()

PROPERTY_SETTINGS = settings(max_examples=200, deadline=None, derandomize=True,
                             suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much])

# a narrow pipeline keeps each realization cheap
SMALL_GRAPH = build_rv32i_graph(PipelineConfig(word_width=8))

seeds = st.integers(min_value=0, max_value=2**32 - 1)


@PROPERTY_SETTINGS
@given(seeds)
def test_engine_matches_enumeration(seed):
    CASES["engine_matches_enumeration"] += 1
    d = random_design(random.Random(seed))
    rows = enumerate_paths(d)
    if not rows:
        assert sta.extract_paths(d, 5) == []
        return
    got = sta.extract_paths(d, len(rows) + 5)
    assert len(got) == len(rows)
    assert math.isclose(got[0].setup_slack_ps, min(r[2] for r in rows), abs_tol=1e-9)
    assert math.isclose(min(p.hold_slack_ps for p in got), min(r[3] for r in rows), abs_tol=1e-9)
    assert math.isclose(sta.worst_consumption(d), max(r[4] for r in rows), rel_tol=1e-12)


@PROPERTY_SETTINGS
@given(seeds, st.integers(min_value=0, max_value=10_000), st.floats(min_value=0.0, max_value=500.0))
def test_slack_linear_in_single_edge(seed, pick, extra):
    """Delaying one edge by x lowers the setup slack of exactly the paths through it by x."""
    CASES["slack_linear_in_single_edge"] += 1
    d = random_design(random.Random(seed))
    assume(len(d.graph.edges) > 0)
    i = pick % len(d.graph.edges)
    routing = d.routing_max.copy()
    routing[i] += extra
    slower = RealizedDesign(d.graph, d.logic_min, d.logic_max, d.routing_min, routing, d.hop_count,
                            d.congestion, d.register_timing, d.clock, d.provenance)
    before = {p.edges: p.setup_slack_ps for p in sta.extract_paths(d, 10_000)}
    after = {p.edges: p.setup_slack_ps for p in sta.extract_paths(slower, 10_000)}
    assert before.keys() == after.keys()
    for k, v in before.items():
        expect = v - extra if i in k else v
        assert math.isclose(after[k], expect, rel_tol=1e-12, abs_tol=1e-9)


fpga_params = st.fixed_dictionaries({
    "switch_delay_ps": st.floats(min_value=1.0, max_value=60.0),
    "segment_delay_ps": st.floats(min_value=1.0, max_value=40.0),
    "lut_delay_ps": st.floats(min_value=20.0, max_value=200.0),
})


@settings(PROPERTY_SETTINGS, max_examples=60)
@given(fpga_params, st.sampled_from(["switch_delay_ps", "segment_delay_ps", "lut_delay_ps"]),
       st.floats(min_value=0.0, max_value=50.0), st.integers(min_value=1, max_value=1000))
def test_fpga_delays_monotone_in_parameters(params, knob, bump, seed):
    CASES["fpga_delays_monotone_in_parameters"] += 1
    lo = fpga_model(**params)
    hi = fpga_model(**{**params, knob: params[knob] + bump})
    a, b = realize_fpga(SMALL_GRAPH, lo, seed), realize_fpga(SMALL_GRAPH, hi, seed)
    assert np.all(b.delay_max >= a.delay_max)
    assert sta.worst_consumption(b) >= sta.worst_consumption(a)


@settings(PROPERTY_SETTINGS, max_examples=60)
@given(st.floats(min_value=1.001, max_value=1.4), st.floats(min_value=0.0, max_value=0.3),
       st.integers(min_value=0, max_value=1000))
def test_asic_delays_monotone_in_corner(k_ss, extra, sample):
    CASES["asic_delays_monotone_in_corner"] += 1
    lo = asic_model(corner_multipliers={"FF": 0.9, "TT": 1.0, "SS": k_ss})
    hi = asic_model(corner_multipliers={"FF": 0.9, "TT": 1.0, "SS": k_ss + extra})
    a, b = realize_asic(SMALL_GRAPH, lo, "SS", sample), realize_asic(SMALL_GRAPH, hi, "SS", sample)
    assert np.all(b.delay_max >= a.delay_max)
    assert sta.worst_consumption(b) >= sta.worst_consumption(a)


@PROPERTY_SETTINGS
@given(seeds, st.floats(min_value=0.05, max_value=20.0))
def test_fmax_scales_inversely(seed, factor):
    CASES["fmax_scales_inversely"] += 1
    d = random_design(random.Random(seed))
    assume(enumerate_paths(d))
    assert math.isclose(sta.fmax(d.scaled(factor)), sta.fmax(d) / factor, rel_tol=1e-9)


@PROPERTY_SETTINGS
@given(seeds)
def test_decomposition_conserves_delay(seed):
    CASES["decomposition_conserves_delay"] += 1
    d = random_design(random.Random(seed))
    for p in sta.extract_paths(d, 20):
        dec = p.decomposition
        skew = abs(d.clock.insertion(p.capture) - d.clock.insertion(p.launch))
        assert min(dec.logic_ps, dec.routing_ps, dec.clocking_ps) >= 0
        assert math.isclose(dec.total_ps, p.data_delay_max_ps + p.setup_ps + d.clock.uncertainty_ps + skew,
                            rel_tol=1e-12, abs_tol=1e-9)
        assert math.isclose(sum(dec.fractions), 1.0, rel_tol=1e-12)


finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)
nonneg = st.floats(min_value=0.0, max_value=1e6, allow_nan=False)
text = st.text(min_size=0, max_size=12)

records = st.builds(
    PathRecord,
    launch_name=text,
    capture_name=text,
    transition=st.sampled_from(sta.ALL_TRANSITIONS),
    path_class=st.sampled_from(sta.PATH_CLASSES),
    logic_ps=nonneg,
    routing_ps=nonneg,
    clocking_ps=nonneg,
    setup_slack_ps=finite,
    hold_slack_ps=finite,
    logic_levels=st.integers(min_value=0, max_value=64),
    provenance=text,
    hop_count=st.none() | st.integers(min_value=0, max_value=500),
    congestion_mean=st.none() | st.floats(min_value=0.0, max_value=10.0),
    period_ps=st.none() | st.floats(min_value=1.0, max_value=1e5),
    group=text,
)


@PROPERTY_SETTINGS
@given(st.lists(records, min_size=1, max_size=8))
def test_records_round_trip(recs):
    CASES["records_round_trip"] += 1
    text_ = dumps_records(recs)
    back = import_paths(text_)
    assert back == recs
    assert dumps_records(back) == text_


samples = st.lists(st.floats(min_value=-1e4, max_value=1e4, allow_nan=False), min_size=3, max_size=60)


@PROPERTY_SETTINGS
@given(samples, st.floats(min_value=0.1, max_value=10.0), st.floats(min_value=-1e4, max_value=1e4))
def test_moments_affine(x, a, b):
    CASES["moments_affine"] += 1
    x = np.asarray(x)
    assume(np.ptp(x) > 1e-3 * (1 + np.abs(x).max()))
    m0, s0, k0, e0 = sa.moments(x)
    m1, s1, k1, e1 = sa.moments(a * x + b)
    assert math.isclose(m1, a * m0 + b, rel_tol=1e-9, abs_tol=1e-6)
    assert math.isclose(s1, a * s0, rel_tol=1e-9)
    assert math.isclose(k1, k0, rel_tol=1e-6, abs_tol=1e-6)
    assert math.isclose(e1, e0, rel_tol=1e-6, abs_tol=1e-6)
    m2, s2, k2, _ = sa.moments(-x)
    assert math.isclose(k2, -k0, rel_tol=1e-9, abs_tol=1e-9)
