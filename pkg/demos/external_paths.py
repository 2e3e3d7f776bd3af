"""Feed path reports from another timing tool through the analysis.

Writes a few hand-made records in the interchange format (one JSON object
per line, ASCII transition spellings accepted, unknown fields kept), with
one deliberately broken line, then imports them leniently and prints the
per-transition statistics.

    python3 demos/external_paths.py
"""

import json
import random
import tempfile
from pathlib import Path

from stagesta import stats_analysis as sa
from stagesta.cli import sweep_from_records
from stagesta.report import read_records


def fake_report(rnd, run):
    for t, base in (("IF->ID", 700), ("ID->EX", 420), ("EX->MEM", 40), ("MEM->WB", 380)):
        for i in range(12):
            logic = rnd.uniform(500, 700)
            routing = rnd.uniform(900, 1300)
            yield {
                "launch_name": f"u_core/r{i}_reg/Q", "capture_name": f"u_core/c{i}_reg/D",
                "transition": t, "path_class": "RegToAlu",
                "logic_ps": logic, "routing_ps": routing, "clocking_ps": 90.0,
                "setup_slack_ps": base + rnd.gauss(0, 60), "hold_slack_ps": rnd.uniform(20, 90),
                "logic_levels": rnd.randint(4, 9), "provenance": f"vendor:run={run}",
                "period_ps": 2000.0, "tool_version": "x.y",
            }


def main():
    rnd = random.Random(3)
    lines = [json.dumps(r) for run in (1, 2, 3) for r in fake_report(rnd, run)]
    lines.insert(5, '{"launch_name": "truncated')
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "vendor.jsonl"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        errors = []
        records = read_records(path, lenient=True, errors=errors)
    for e in errors:
        print(f"skipped: {e}")
    sweep = sweep_from_records(records, "FPGA")
    print(f"{len(records)} records in {len(sweep.realizations)} runs, Fmax {sweep.fmax.round(1).tolist()} MHz")
    for t in ("IF→ID", "ID→EX", "EX→MEM", "MEM→WB"):
        s = sa.stage_statistics(sweep, t)
        print(f"{t:8s} mean {s.mean_ps:7.1f}  std {s.std_ps:6.1f}  skew {s.skewness:+.2f}  "
              f"{sa.shape_flag(s.skewness)}")


if __name__ == "__main__":
    main()
