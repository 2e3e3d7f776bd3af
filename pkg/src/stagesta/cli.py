"""``stagesta`` command line.

Exit status: 0 on success, 1 on analysis-domain errors (bad graph, model,
records ...), 2 on usage errors. Every command prints a provenance header
(tool version, sha256 digests of the input files, seeds) to stdout; output
files never carry timestamps, so identical command lines give identical
bytes.
"""

import argparse
import hashlib
import json
import sys
import time

from . import __version__
from . import sta_engine as sta
from . import timing_graph
from .errors import StageStaError
from .fabric_models import (
    CORNERS,
    FpgaFabricModel,
    RealizedDesign,
    default_calibration,
    load_model,
    realize_asic,
    realize_fpga,
)
from .pipeline_gen import PipelineConfig, build_rv32i_graph
from .report import dumps_histogram_csv, dumps_records, export_paths, read_records
from .stats_analysis import (
    DEFAULT_PATHS_PER_TRANSITION,
    Realization,
    SweepResult,
    corner_sweep,
    extract_signatures,
    interconnect_sensitivity,
    seed_sweep,
    stage_statistics,
)

# k worst paths per endpoint bank for `sta`, and the per-design cap
STA_PATH_CAP = 10_000


def _digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()[:16]


def _header(args, inputs, seeds=""):
    print(f"# stagesta {__version__} {args.command}")
    for name, path in inputs:
        if path:
            print(f"# input {name} {path} sha256:{_digest(path)}")
    if seeds:
        print(f"# seeds {seeds}")
    if not args.deterministic_output:
        print(f"# run at {time.strftime('%Y-%m-%dT%H:%M:%S')}")


def _write(path, text):
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)


def _json(obj):
    return json.dumps(obj, sort_keys=True, indent=1, ensure_ascii=False) + "\n"


def _graph(args):
    if args.graph:
        return timing_graph.load(args.graph)
    return build_rv32i_graph(PipelineConfig.load(args.config) if args.config else None)


def _models(args):
    fpga, asic = default_calibration()
    if args.model:
        m = load_model(args.model)
        if isinstance(m, FpgaFabricModel):
            fpga = m
        else:
            asic = m
    return fpga, asic


# -- commands ----------------------------------------------------------------


def cmd_gen(args):
    _header(args, [("config", args.config)])
    graph = build_rv32i_graph(PipelineConfig.load(args.config) if args.config else None)
    _write(args.out, timing_graph.dumps(graph) + "\n")
    n_reg = len(graph.registers)
    print(f"graph: {len(graph.nodes)} nodes ({n_reg} registers), {len(graph.edges)} edges -> {args.out}")


def cmd_realize(args):
    _header(args, [("graph", args.graph), ("config", args.config), ("model", args.model)],
            seeds=str(args.seed) if args.fabric == "fpga" else str(args.sample))
    graph = _graph(args)
    fpga, asic = _models(args)
    if args.fabric == "fpga":
        design = realize_fpga(graph, fpga, args.seed)
    else:
        design = realize_asic(graph, asic, args.corner, args.sample)
    design.save(args.out)
    print(f"realized {design.provenance} fmax {sta.fmax(design):.3f} MHz -> {args.out}")


def cmd_sta(args):
    _header(args, [("design", args.design)])
    design = RealizedDesign.load(args.design)
    paths = []
    per_bank = min(args.k, STA_PATH_CAP // len(sta.ALL_TRANSITIONS))
    for t in sta.ALL_TRANSITIONS:
        paths.extend(sta.extract_paths(design, per_bank, t))
    prov = _provenance_label(design.provenance)
    records = export_paths(paths, design, prov)
    worst = records[0]
    print(f"fmax {sta.fmax(design):.3f} MHz")
    print(f"worst setup slack {worst.setup_slack_ps:.3f} ps  {worst.transition} {worst.path_class}")
    print(f"  {worst.launch_name} -> {worst.capture_name}  logic {worst.logic_ps:.1f} "
          f"routing {worst.routing_ps:.1f} clocking {worst.clocking_ps:.1f} ps")
    print(f"worst hold slack {min(r.hold_slack_ps for r in records):.3f} ps")
    for t in sta.ALL_TRANSITIONS:
        sel = [r for r in records if r.transition == t]
        if sel:
            print(f"  {t:8s} paths {len(sel):4d} worst {sel[0].setup_slack_ps:10.3f} ps")
    if args.paths_out:
        _write(args.paths_out, dumps_records(records))
        print(f"{len(records)} path records -> {args.paths_out}")


def _provenance_label(p):
    if p.get("fabric") == "FPGA":
        return f"FPGA:seed={p['seed']}"
    sample = p.get("lvf_sample")
    return f"ASIC:{p.get('corner')}:" + ("nominal" if sample is None else f"sample={sample}")


def _finish_sweep(args, sweep):
    sweep.save(args.out)
    f = sweep.fmax
    print(f"{sweep.fabric} sweep: {len(sweep.realizations)} realizations, "
          f"fmax mean {f.mean():.2f} MHz [{f.min():.2f}, {f.max():.2f}] -> {args.out}")
    if args.paths_out:
        _write(args.paths_out, dumps_records(sweep.records()))
        print(f"{len(sweep.records())} path records -> {args.paths_out}")


def cmd_sweep_seeds(args):
    _header(args, [("graph", args.graph), ("config", args.config), ("model", args.model)],
            seeds=f"1..{args.seeds}")
    fpga, _ = _models(args)
    _finish_sweep(args, seed_sweep(_graph(args), fpga, args.seeds, args.k, args.jobs))


def cmd_sweep_corners(args):
    corners = tuple(c.strip() for c in args.corners.split(",") if c.strip())
    _header(args, [("graph", args.graph), ("config", args.config), ("model", args.model)],
            seeds=f"corners {','.join(corners)} samples 1..{args.samples}" if args.samples else "nominal")
    _, asic = _models(args)
    _finish_sweep(args, corner_sweep(_graph(args), asic, corners, args.samples, args.k, args.jobs))


def _load_sweep(path):
    if path.endswith(".jsonl"):
        return sweep_from_records(read_records(path))
    return SweepResult.load(path)


def cmd_analyze(args):
    _header(args, [("sweep", args.sweep)])
    sweep = _load_sweep(args.sweep)
    stats = {}
    for t in sta.TRANSITIONS:
        if len(sweep.records(t)) >= 2:
            stats[t] = stage_statistics(sweep, t)
    out = {
        "schema_version": 1,
        "fabric": sweep.fabric,
        "realizations": len(sweep.realizations),
        "stages": {
            t: {k: v for k, v in s.__dict__.items() if k != "histogram"} for t, s in stats.items()
        },
    }
    if any(r.hop_count is not None for r in sweep.records()):
        out["interconnect_sensitivity"] = interconnect_sensitivity(sweep)
    print(f"{'transition':10s} {'n':>5s} {'mean':>10s} {'std':>9s} {'skew':>7s} {'kurt':>7s}")
    for t, s in stats.items():
        print(f"{t:10s} {s.n:5d} {s.mean_ps:10.2f} {s.std_ps:9.2f} {s.skewness:7.3f} {s.excess_kurtosis:7.3f}")
    if args.out:
        _write(args.out, _json(out))
        print(f"statistics -> {args.out}")
    if args.hist_out:
        _write(args.hist_out, dumps_histogram_csv(stats))
        print(f"histograms -> {args.hist_out}")


def cmd_signatures(args):
    _header(args, [("fpga", args.fpga), ("asic", args.asic)])
    report = extract_signatures(_load_sweep(args.fpga), _load_sweep(args.asic))
    for sig in (report.fpga, report.asic):
        rf = sig.routing_fraction
        print(f"{sig.fabric}: bottleneck {sig.bottleneck} ({sig.dominance:.0%}), "
              f"{sig.variability_class}, routing share {rf['mean']:.3f} [{rf['min']:.3f}, {rf['max']:.3f}]")
    ratios = ", ".join(f"{t} {v:.2f}" for t, v in report.robustness_ratio.items())
    print(f"robustness ratio mean {report.robustness_ratio_mean:.2f} ({ratios})")
    if args.out:
        _write(args.out, report.dumps() + "\n")
        print(f"signature -> {args.out}")


def sweep_from_records(records, fabric=None):
    """Group imported records into realizations by provenance (first-seen order)."""
    groups = {}
    for r in records:
        groups.setdefault(r.provenance, []).append(r)
    reals = []
    for prov, recs in groups.items():
        worst = min(recs, key=lambda r: r.setup_slack_ps)
        period = worst.period_ps
        f = 1e6 / (period - worst.setup_slack_ps) if period else float("nan")
        reals.append(Realization(prov, recs[0].group, f, recs))
    if fabric is None:
        first = next(iter(groups))
        fabric = "ASIC" if first.startswith("ASIC") else "FPGA"
    return SweepResult(fabric, reals)


def cmd_ingest(args):
    _header(args, [("paths", args.paths)])
    errors = []
    records = read_records(args.paths, lenient=args.lenient, errors=errors)
    for e in errors:
        print(f"skipped line {e.line}: {e.reason}", file=sys.stderr)
    sweep = sweep_from_records(records, args.fabric.upper() if args.fabric else None)
    sweep.save(args.out)
    print(f"ingested {len(records)} records ({len(errors)} skipped) into "
          f"{len(sweep.realizations)} realizations -> {args.out}")


# -- parser ------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="stagesta", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"stagesta {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def common(sp, graph=True, model=False):
        sp.add_argument("--deterministic-output", action=argparse.BooleanOptionalAction, default=True,
                        help="omit wall-clock data from the header (default on)")
        if graph:
            sp.add_argument("--graph", help="graph JSON (default: build from --config)")
            sp.add_argument("--config", help="pipeline config JSON")
        if model:
            sp.add_argument("--model", help="fabric model JSON (default: shipped calibration)")

    sp = sub.add_parser("gen", help="build the pipeline timing graph")
    common(sp, graph=False)
    sp.add_argument("--config", help="pipeline config JSON")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("realize", help="realize a graph on a fabric")
    common(sp, model=True)
    sp.add_argument("--fabric", choices=("fpga", "asic"), required=True)
    sp.add_argument("--seed", type=int, default=1, help="FPGA placement-and-routing seed")
    sp.add_argument("--corner", choices=CORNERS, default="TT")
    sp.add_argument("--sample", type=int, default=None, help="ASIC LVF sample seed")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_realize)

    sp = sub.add_parser("sta", help="timing report for a realized design")
    common(sp, graph=False)
    sp.add_argument("--design", required=True)
    sp.add_argument("--k", type=_positive, default=100, help="worst paths per endpoint bank")
    sp.add_argument("--paths-out", help="write path records (JSONL)")
    sp.set_defaults(func=cmd_sta)

    sp = sub.add_parser("sweep-seeds", help="FPGA seed sweep")
    common(sp, model=True)
    sp.add_argument("--seeds", type=_positive, default=30)
    sp.add_argument("--k", type=_positive, default=DEFAULT_PATHS_PER_TRANSITION, help="paths kept per transition")
    sp.add_argument("--jobs", type=_positive, default=None)
    sp.add_argument("--out", required=True)
    sp.add_argument("--paths-out")
    sp.set_defaults(func=cmd_sweep_seeds)

    sp = sub.add_parser("sweep-corners", help="ASIC corner / LVF sweep")
    common(sp, model=True)
    sp.add_argument("--corners", default="TT,FF,SS")
    sp.add_argument("--samples", type=_non_negative, default=200)
    sp.add_argument("--k", type=_positive, default=DEFAULT_PATHS_PER_TRANSITION)
    sp.add_argument("--jobs", type=_positive, default=None)
    sp.add_argument("--out", required=True)
    sp.add_argument("--paths-out")
    sp.set_defaults(func=cmd_sweep_corners)

    sp = sub.add_parser("analyze", help="stage statistics and histograms of a sweep")
    common(sp, graph=False)
    sp.add_argument("--sweep", required=True, help="sweep JSON or path-record JSONL")
    sp.add_argument("--out")
    sp.add_argument("--hist-out", help="histogram CSV")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("signatures", help="cross-fabric timing signature")
    common(sp, graph=False)
    sp.add_argument("--fpga", required=True)
    sp.add_argument("--asic", required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_signatures)

    sp = sub.add_parser("ingest", help="import external path records into a sweep")
    common(sp, graph=False)
    sp.add_argument("--paths", required=True)
    sp.add_argument("--fabric", choices=("fpga", "asic", "FPGA", "ASIC"))
    sp.add_argument("--lenient", action="store_true", help="skip malformed lines instead of failing")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_ingest)
    return p


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _non_negative(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def run_cli(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (StageStaError, ValueError) as exc:
        print(f"stagesta: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"stagesta: error: {exc}", file=sys.stderr)
        return 1
    except (KeyError, TypeError) as exc:
        # a JSON document that parsed but lacks the expected structure
        print(f"stagesta: error: malformed input document ({type(exc).__name__}: {exc})", file=sys.stderr)
        return 1
    return 0


def main(argv=None):
    try:
        code = run_cli(argv)
    except SystemExit as exc:  # argparse usage errors
        code = exc.code if isinstance(exc.code, int) else 2
    sys.exit(code)


if __name__ == "__main__":
    main()
