import numpy as np
import pytest

from stagesta import calibration as cal
from stagesta import sta_engine as sta
from stagesta.fabric_models import default_calibration, realize_asic, realize_fpga


def test_shipped_models_are_scaled_shapes():
    fpga, asic = default_calibration()
    assert fpga == cal.fpga_model(cal.FPGA_SHAPE, cal.FPGA_SCALE)
    assert asic == cal.asic_model(cal.ASIC_SHAPE, cal.ASIC_SCALE)


def test_fit_scales_reproduces_shipped(default_graph):
    kf, ka = cal.fit_scales(default_graph)
    assert kf == pytest.approx(cal.FPGA_SCALE, rel=1e-12)
    assert ka == pytest.approx(cal.ASIC_SCALE, rel=1e-12)


def test_scale_is_exactly_inverse(default_graph):
    base = cal.fpga_model(cal.FPGA_SHAPE)
    scaled = cal.fpga_model(cal.FPGA_SHAPE, 1.25)
    for seed in (1, 2):
        assert sta.fmax(realize_fpga(default_graph, scaled, seed)) == pytest.approx(
            sta.fmax(realize_fpga(default_graph, base, seed)) / 1.25, rel=1e-12)
    a0 = realize_asic(default_graph, cal.asic_model(cal.ASIC_SHAPE), "SS", 4)
    a1 = realize_asic(default_graph, cal.asic_model(cal.ASIC_SHAPE, 0.5), "SS", 4)
    assert sta.fmax(a1) == pytest.approx(2 * sta.fmax(a0), rel=1e-12)


def test_shipped_targets(default_graph):
    fpga, asic = default_calibration()
    mean_f = np.mean([sta.fmax(realize_fpga(default_graph, fpga, s)) for s in range(1, 31)])
    assert mean_f == pytest.approx(493.0, rel=1e-9)
    assert sta.fmax(realize_asic(default_graph, asic, "TT")) == pytest.approx(1850.0, rel=1e-9)


def synthetic_metrics(**kw):
    m = {
        "fpga_fmax": np.linspace(472, 512, 30), "fpga_ex_mem": 30, "fpga_routing": np.full(30, 0.68),
        "fpga_sigma": {"IF→ID": 100.0, "ID→EX": 125.0, "EX→MEM": 145.0, "MEM→WB": 110.0},
        "fpga_skew": -0.6, "fpga_worst_skew": 0.3, "fpga_logic": 0.3, "fpga_clocking": 0.05,
        "asic_tt": 1850.0, "asic_ss": 1630.0, "asic_transition": "EX→MEM", "asic_logic": 0.6,
        "asic_clocking": 0.11, "asic_sigma": {t: 11.0 for t in sta.TRANSITIONS},
        "asic_skew": {t: 0.0 for t in sta.TRANSITIONS}, "asic_shift": 0.14, "asic_sigma_ratio": 1.1,
        "asic_worst_skew": 0.0,
    }
    m.update(kw)
    return m


def test_loss_zero_inside_margins():
    assert cal.loss(synthetic_metrics()) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("kw", [
    {"fpga_ex_mem": 25},
    {"fpga_sigma": {"IF→ID": 120.0, "ID→EX": 125.0, "EX→MEM": 145.0, "MEM→WB": 110.0}},
    {"asic_transition": "ID→EX"},
    {"asic_shift": 0.25},
    {"fpga_fmax": np.linspace(440, 540, 30)},
])
def test_loss_penalizes_misses(kw):
    assert cal.loss(synthetic_metrics(**kw)) > 1.0


def fmax_with_min(lo, n=30, mean=493.0):
    # mean pinned so the loss rescale leaves the minimum in place
    f = np.full(n, mean + (mean - lo) / (n - 1))
    f[0] = lo
    return f


def test_loss_hard_band_dominates():
    inside = cal.loss(synthetic_metrics(fpga_fmax=fmax_with_min(463.0)))
    outside = cal.loss(synthetic_metrics(fpga_fmax=fmax_with_min(461.5)))
    assert outside > inside + 50
