"""Shipped fabric calibrations and the procedure that produced them.

Primitive delays are not observable from aggregate timing reports, so the
models are fitted to aggregate targets on the default pipeline:

    FPGA  mean Fmax 493 MHz over seeds 1..30, Fmax samples within about
          [463, 520] MHz, worst-path routing share about 0.68, worst path in
          EX→MEM, stage slack spread ordered EX→MEM > ID→EX > MEM→WB > IF→ID,
          right-skewed worst delay, logic share 0.26 to 0.38, clocking 0.04
          to 0.07
    ASIC  TT Fmax 1850 MHz, SS Fmax about 1630 MHz, per-transition slack
          std 8 to 17 ps, worst-path logic share about 0.60 and clocking
          share 0.10 to 0.12, SS/TT mean shift 12 to 18 %

Fitting runs in two steps.

1. Shape. Relative primitive delays (``FPGA_SHAPE``, ``ASIC_SHAPE``), the
   interconnect/variation knobs and the placement columns of the default
   graph are found by random local search on ``loss`` (all targets as
   hinge penalties with a safety margin inside each band). ``search``
   reruns it; it takes tens of minutes on one core.
2. Scale. Fmax is exactly inversely proportional to a uniform scale of
   every delay, so each shape is multiplied by a closed-form factor that
   puts the FPGA mean Fmax at 493 MHz and the ASIC nominal TT Fmax at
   1850 MHz (``fit_scales``).

``python3 -m stagesta.calibration`` re-derives the scales and prints the
target metrics; ``--search SECONDS`` runs step 1 first from the shipped
point and prints the improved shape and layout.
"""

import argparse
import copy
import json
import math
import random
import time

import numpy as np

from . import sta_engine as sta
from .errors import StageStaError
from .fabric_models import AsicFabricModel, CongestionField, FpgaFabricModel, HopModel, realize_asic, realize_fpga
from .pipeline_gen import _COL, PipelineConfig, build_rv32i_graph
from .timing_graph import RegisterTiming

FPGA_TARGET_MHZ = 493.0
ASIC_TARGET_MHZ = 1850.0
FPGA_SEEDS = 30

# relative (unscaled) parameters found by ``search``
FPGA_SHAPE = {
    "lut": 110.8735, "carry": 16.4181, "mux": 35.5037, "macro": 93.5165,
    "clkq": 88.0443, "setup": 80.8755, "switch": 18.0, "segment": 12.0,
    "dispersion": 0.0717, "congestion_gain": 0.2603, "amplitude": 0.7287, "radius": 7.2603,
    "insertion": 400.0, "spread": 1.4632, "uncertainty": 50.0666,
}
ASIC_SHAPE = {
    "lut": 36.2443, "carry": 16.8585, "mux": 14.8387, "macro": 62.8972,
    "clkq": 80.0, "setup": 22.6563, "local": 3.923, "intermediate": 3.5286,
    "global": 3.0017, "lvf": 0.1163, "skew": 10.0865, "uncertainty": 36.0913,
    "insertion": 150.0, "ss": 1.1473,
}
# delay multipliers from ``fit_scales`` on the default graph
FPGA_SCALE = 0.828956590172587
ASIC_SCALE = 0.9927641454866928

# clk-to-q early / late and hold / setup ratios held fixed during the search
_EARLY_RATIO = 0.7
_HOLD_RATIO = 0.5
_FF_MULTIPLIER = 0.90


def _ff(clkq, setup, k):
    return RegisterTiming(k * clkq, k * clkq * _EARLY_RATIO, k * setup, k * setup * _HOLD_RATIO)


def fpga_model(shape, scale=1.0):
    p, k = shape, scale
    return FpgaFabricModel(
        lut_delay_ps=k * p["lut"], carry_delay_ps=k * p["carry"], mux_delay_ps=k * p["mux"],
        memmacro_access_ps=k * p["macro"], ff_timing=_ff(p["clkq"], p["setup"], k),
        switch_delay_ps=k * p["switch"], segment_delay_ps=k * p["segment"],
        hop_model=HopModel(1.0, p["dispersion"], p["congestion_gain"]),
        congestion_field=CongestionField(3, p["amplitude"], p["radius"]),
        clock_insertion_ps=k * p["insertion"], clock_skew_spread_ps=k * p["spread"],
        clock_uncertainty_ps=k * p["uncertainty"], clock_period_ps=2000.0,
    )


def asic_model(shape, scale=1.0):
    p, k = shape, scale
    # StdCell shares the generic-LUT-function base
    bases = {"Lut": p["lut"], "CarryChain": p["carry"], "Mux": p["mux"], "StdCell": p["lut"]}
    return AsicFabricModel(
        cell_base_ps={f"{c}/2/SVT": k * v for c, v in bases.items()},
        memmacro_access_ps=k * p["macro"], ff_timing=_ff(p["clkq"], p["setup"], k),
        wire_ps_per_tile={layer: k * p[layer] for layer in ("local", "intermediate", "global")},
        corner_multipliers={"FF": _FF_MULTIPLIER, "TT": 1.0, "SS": p["ss"]},
        lvf_sigma_fraction=p["lvf"], clock_insertion_ps=k * p["insertion"],
        clock_skew_budget_ps=k * p["skew"], clock_uncertainty_ps=k * p["uncertainty"],
        clock_period_ps=540.0,
    )


SHIPPED_FPGA = fpga_model(FPGA_SHAPE, FPGA_SCALE)
SHIPPED_ASIC = asic_model(ASIC_SHAPE, ASIC_SCALE)


def fit_scales(graph, fpga_shape=FPGA_SHAPE, asic_shape=ASIC_SHAPE, n_seeds=FPGA_SEEDS):
    """Delay multipliers that put the unscaled shapes on the Fmax targets."""
    m = fpga_model(fpga_shape)
    mean_f = np.mean([sta.fmax(realize_fpga(graph, m, s)) for s in range(1, n_seeds + 1)])
    tt = sta.fmax(realize_asic(graph, asic_model(asic_shape), "TT"))
    return float(mean_f / FPGA_TARGET_MHZ), float(tt / ASIC_TARGET_MHZ)


# -- target metrics and search ----------------------------------------------------


def metrics(graph, fpga, asic, n_seeds=FPGA_SEEDS, n_samples=40):
    """The calibration targets measured on (graph, fpga, asic)."""
    from .stats_analysis import corner_sweep, moments, seed_sweep, stage_statistics

    fs = seed_sweep(graph, fpga, n_seeds)
    worst = [r.worst for r in fs.realizations]
    a = corner_sweep(graph, asic, ("TT", "SS"), n_samples)
    tt, ss = a.select("TT"), a.select("SS")
    w_tt, w_ss = 1e6 / tt.fmax, 1e6 / ss.fmax
    nominal = sta.worst_path(realize_asic(graph, asic, "TT"))
    return {
        "fpga_fmax": fs.fmax,
        "fpga_ex_mem": sum(w.transition == "EX→MEM" for w in worst),
        "fpga_routing": np.array([w.routing_fraction for w in worst]),
        "fpga_sigma": {t: stage_statistics(fs, t).std_ps for t in sta.TRANSITIONS},
        "fpga_skew": stage_statistics(fs, "EX→MEM").skewness,
        "fpga_worst_skew": moments(1e6 / fs.fmax)[2],
        "fpga_logic": np.mean([w.logic_fraction for w in worst]),
        "fpga_clocking": np.mean([w.clocking_fraction for w in worst]),
        "asic_tt": 1e6 / sta.worst_consumption(realize_asic(graph, asic, "TT")),
        "asic_ss": 1e6 / sta.worst_consumption(realize_asic(graph, asic, "SS")),
        "asic_transition": nominal.transition,
        "asic_logic": nominal.decomposition.logic_fraction,
        "asic_clocking": nominal.decomposition.clocking_fraction,
        "asic_sigma": {t: stage_statistics(tt, t).std_ps for t in sta.TRANSITIONS},
        "asic_skew": {t: stage_statistics(tt, t).skewness for t in sta.TRANSITIONS},
        "asic_shift": w_ss.mean() / w_tt.mean() - 1,
        "asic_sigma_ratio": w_ss.std() / w_tt.std(),
        "asic_worst_skew": moments(w_tt)[2],
    }


def _hinge(x, lo, hi, scale):
    if x < lo:
        return ((lo - x) / scale) ** 2
    if x > hi:
        return ((x - hi) / scale) ** 2
    return 0.0


def loss(m):
    """Sum of squared hinge penalties; zero when every target sits inside its margin."""
    # both shapes are judged after the closed-form rescale of ``fit_scales``
    f_scale = np.mean(m["fpga_fmax"]) / FPGA_TARGET_MHZ
    a_scale = m["asic_tt"] / ASIC_TARGET_MHZ
    f = m["fpga_fmax"] / f_scale
    s = m["fpga_sigma"]
    rf = m["fpga_routing"]
    terms = [
        _hinge(m["fpga_ex_mem"], 29, 30, 1),
        sum(_hinge(r, 0.635, 0.725, 0.01) for r in rf) / 5 + _hinge(rf.mean(), 0.665, 0.695, 0.01),
        _hinge(f.min(), 468, 600, 3) + _hinge(f.max(), 0, 514, 3) + _hinge(np.ptp(f), 30, 1e9, 3),
        sum(_hinge(a / b, 1.08, 1e9, 0.03) for a, b in ((s["EX→MEM"], s["ID→EX"]), (s["ID→EX"], s["MEM→WB"]),
                                                      (s["MEM→WB"], s["IF→ID"]))),
        _hinge(abs(m["fpga_skew"]), 0.45, 1e9, 0.05) + 0.2 * _hinge(m["fpga_worst_skew"], 0.05, 1e9, 0.1),
        _hinge(m["fpga_logic"], 0.27, 0.37, 0.01) + _hinge(m["fpga_clocking"], 0.042, 0.068, 0.002),
        sum(_hinge(v * a_scale, 9.5, 15.5, 0.5) for v in m["asic_sigma"].values()),
        _hinge(m["asic_ss"] / a_scale, 1615, 1645, 5),
        _hinge(m["asic_shift"], 0.13, 0.17, 0.005) + _hinge(m["asic_sigma_ratio"], 0, 1.35, 0.05),
        _hinge(m["asic_logic"], 0.57, 0.63, 0.005) + _hinge(m["asic_clocking"], 0.104, 0.116, 0.002),
        0.0 if m["asic_transition"] == "EX→MEM" else 5.0,
        0.3 * _hinge(abs(m["asic_worst_skew"]), 0, 0.15, 0.05),
    ]
    ratio = np.mean([(s[t] * f_scale) / (m["asic_sigma"][t] * a_scale) for t in sta.TRANSITIONS])
    terms.append(_hinge(ratio, 9.5, 12.5, 0.3))
    # leaving an acceptance band outright costs far more than eating into a margin
    hard = [
        _hinge(f.min(), 472 * 0.98, 1e9, 0.1), _hinge(f.max(), 0, 510 * 1.02, 0.1),
        sum(_hinge(a / b, 1.01, 1e9, 0.01) for a, b in ((s["EX→MEM"], s["ID→EX"]), (s["ID→EX"], s["MEM→WB"]),
                                                       (s["MEM→WB"], s["IF→ID"]))),
        sum(_hinge(r, 0.62, 0.74, 0.001) for r in rf),
        sum(_hinge(v * a_scale, 8.2, 16.8, 0.05) for v in m["asic_sigma"].values()),
        _hinge(ratio, 8.2, 13.8, 0.05),
    ]
    terms.append(sum(hard))
    return float(sum(terms))


_BOUNDS = {
    "fpga": dict(lut=(40, 150), carry=(5, 60), mux=(20, 100), macro=(50, 900), clkq=(40, 200), setup=(10, 100),
                 dispersion=(0.02, 0.4), congestion_gain=(0, 1.5), amplitude=(0, 1), radius=(2, 15),
                 spread=(0, 60), uncertainty=(0, 120)),
    "asic": {"lut": (10, 60), "carry": (10, 60), "mux": (10, 60), "macro": (20, 200), "clkq": (10, 80),
             "setup": (5, 50), "local": (0.5, 12), "intermediate": (0.5, 12), "global": (0.5, 12),
             "lvf": (0.02, 0.19), "skew": (0, 30), "uncertainty": (0, 80), "ss": (1.10, 1.20)},
}
_HEIGHTS = (20, 22, 24, 26, 28)


def _evaluate(point):
    layout, height, fp, ap = point
    graph = build_rv32i_graph(PipelineConfig(fabric_grid=(36, height)), layout)
    return loss(metrics(graph, fpga_model(fp), asic_model(ap)))


def _mutate(point, rnd):
    layout, height, fp, ap = copy.deepcopy(point)
    for _ in range(rnd.choice((1, 1, 2, 3))):
        u = rnd.random()
        if u < 0.4:
            role = rnd.choice(sorted(layout))
            v = layout[role]
            step = rnd.choice((-2, -1, 1, 2))
            if isinstance(v, tuple):
                i = rnd.randrange(2)
                v = list(v)
                v[i] = max(0, min(35, v[i] + step))
                layout[role] = (v[0], max(v))
            else:
                layout[role] = max(0, min(35, v + step))
        elif u < 0.45:
            height = rnd.choice(_HEIGHTS)
        else:
            fabric, shape = ("fpga", fp) if u < 0.75 else ("asic", ap)
            key = rnd.choice(sorted(_BOUNDS[fabric]))
            lo, hi = _BOUNDS[fabric][key]
            sd = 0.005 if key == "ss" else (0.15 if fabric == "fpga" else 0.1)
            v = shape[key] * math.exp(rnd.gauss(0, sd)) if shape[key] > 0 else lo + 0.05 * (hi - lo)
            shape[key] = float(min(hi, max(lo, v)))
    return layout, height, fp, ap


def search(budget_s, seed=0, start=None, log=print):
    """Random local search on ``loss``; returns (loss, layout, height, fpga_shape, asic_shape)."""
    rnd = random.Random(seed)
    point = start or (dict(_COL), PipelineConfig().fabric_grid[1], dict(FPGA_SHAPE), dict(ASIC_SHAPE))
    best = _evaluate(point)
    t0 = time.monotonic()
    it = 0
    while time.monotonic() - t0 < budget_s:
        it += 1
        cand = _mutate(point, rnd)
        try:
            val = _evaluate(cand)
        except StageStaError:
            continue  # layouts that do not fit the grid are rejected
        if val <= best:
            best, point = val, cand
            log(f"iteration {it}: loss {best:.3f}")
    return (best, *point)


def _report(graph, fpga, asic):
    m = metrics(graph, fpga, asic)
    f = m["fpga_fmax"]
    print(f"FPGA Fmax mean {f.mean():.1f} MHz [{f.min():.1f}, {f.max():.1f}], EX→MEM {m['fpga_ex_mem']}/30, "
          f"routing {m['fpga_routing'].mean():.3f}")
    print("  slack std " + ", ".join(f"{t} {v:.1f}" for t, v in m["fpga_sigma"].items()))
    print(f"ASIC TT {m['asic_tt']:.0f} MHz, SS {m['asic_ss']:.0f} MHz, logic {m['asic_logic']:.3f}, "
          f"clocking {m['asic_clocking']:.3f}, shift {m['asic_shift']:.1%}")
    print("  slack std " + ", ".join(f"{t} {v:.1f}" for t, v in m["asic_sigma"].items()))
    print(f"loss {loss(m):.3f}")


def main(argv=None):
    ap = argparse.ArgumentParser(prog="python3 -m stagesta.calibration", description="refit the shipped calibration")
    ap.add_argument("--search", type=float, default=0.0, metavar="SECONDS", help="run the shape search first")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    layout, height, fp, asp = dict(_COL), PipelineConfig().fabric_grid[1], FPGA_SHAPE, ASIC_SHAPE
    if args.search > 0:
        _, layout, height, fp, asp = search(args.search, args.seed)
        print(json.dumps({"layout": layout, "height": height, "fpga_shape": fp, "asic_shape": asp}, indent=1))
    graph = build_rv32i_graph(PipelineConfig(fabric_grid=(36, height)), layout)
    kf, ka = fit_scales(graph, fp, asp)
    print(f"FPGA_SCALE = {kf!r}\nASIC_SCALE = {ka!r}")
    _report(graph, fpga_model(fp, kf), asic_model(asp, ka))


if __name__ == "__main__":
    main()
