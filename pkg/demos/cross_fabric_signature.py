"""Seed sweep on the FPGA model, corner/LVF sweep on the ASIC model, then the
cross-fabric signature, printed as a small table.

    python3 demos/cross_fabric_signature.py [--seeds 30] [--samples 200]
"""

import argparse

from stagesta import sta_engine as sta
from stagesta import stats_analysis as sa
from stagesta.fabric_models import default_calibration
from stagesta.pipeline_gen import build_rv32i_graph


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--seeds", type=int, default=30)
    ap.add_argument("--samples", type=int, default=200)
    args = ap.parse_args()

    graph = build_rv32i_graph()
    fpga, asic = default_calibration()
    f = sa.seed_sweep(graph, fpga, args.seeds)
    a = sa.corner_sweep(graph, asic, ("TT", "FF", "SS"), args.samples)
    rep = sa.extract_signatures(f, a)

    print(f"FPGA Fmax over {args.seeds} seeds: mean {f.fmax.mean():.1f} MHz, "
          f"range [{f.fmax.min():.1f}, {f.fmax.max():.1f}]")
    for corner in ("FF", "TT", "SS"):
        sel = a.select(corner).fmax
        print(f"ASIC {corner}: Fmax mean {sel.mean():.0f} MHz, std {sel.std(ddof=1):.1f}")
    print()
    print(f"{'transition':10s} {'FPGA sigma':>11s} {'ASIC sigma':>11s} {'ratio':>7s}")
    for t in sta.TRANSITIONS:
        print(f"{t:10s} {rep.fpga.stage_sigma_ps[t]:11.1f} {rep.asic.stage_sigma_ps[t]:11.1f} "
              f"{rep.robustness_ratio[t]:7.2f}")
    print()
    for sig in (rep.fpga, rep.asic):
        print(f"{sig.fabric}: bottleneck {sig.bottleneck} in {sig.dominance:.0%} of realizations, "
              f"{sig.variability_class} variability, logic/routing/clocking "
              f"{sig.logic_fraction['mean']:.2f}/{sig.routing_fraction['mean']:.2f}/"
              f"{sig.clocking_fraction['mean']:.2f}")
    print(f"mean robustness ratio {rep.robustness_ratio_mean:.2f}")


if __name__ == "__main__":
    main()
