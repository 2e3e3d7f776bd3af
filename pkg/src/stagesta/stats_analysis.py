"""Seed/corner sweeps, stage-resolved slack statistics and cross-fabric signatures."""

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import sta_engine as sta
from .errors import InsufficientSamples
from .fabric_models import realize_asic, realize_fpga
from .report import PathRecord, export_paths

# worst paths kept per transition per realization
DEFAULT_PATHS_PER_TRANSITION = 10

# skewness thresholds for the distribution-shape flags
ASYMMETRIC_SKEW = 0.3
GAUSSIAN_SKEW = 0.2


@dataclass
class Realization:
    provenance: str
    group: str
    fmax_mhz: float
    paths: list

    @property
    def worst(self):
        return min(self.paths, key=lambda r: (r.setup_slack_ps, r.transition, r.launch_name, r.capture_name))


@dataclass
class SweepResult:
    fabric: str
    realizations: list = field(default_factory=list)

    @property
    def fmax(self):
        return np.array([r.fmax_mhz for r in self.realizations])

    @property
    def groups(self):
        seen = []
        for r in self.realizations:
            if r.group not in seen:
                seen.append(r.group)
        return seen

    def select(self, group):
        return SweepResult(self.fabric, [r for r in self.realizations if r.group == group])

    def records(self, transition=None):
        out = []
        for r in self.realizations:
            out.extend(p for p in r.paths if transition is None or p.transition == transition)
        return out

    def samples(self, transition):
        return np.array([p.setup_slack_ps for p in self.records(transition)])

    def to_dict(self):
        return {
            "schema_version": 1,
            "fabric": self.fabric,
            "realizations": [
                {
                    "provenance": r.provenance,
                    "group": r.group,
                    "fmax_mhz": r.fmax_mhz,
                    "paths": [p.to_dict() for p in r.paths],
                }
                for r in self.realizations
            ],
        }

    @classmethod
    def from_dict(cls, d):
        from .report import parse_record

        reals = []
        for r in d["realizations"]:
            paths = [parse_record(json.dumps(p), i + 1) for i, p in enumerate(r["paths"])]
            reals.append(Realization(r["provenance"], r["group"], r["fmax_mhz"], paths))
        return cls(d["fabric"], reals)

    def dumps(self):
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.dumps())
            f.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as f:
            return cls.loads(f.read())


def analyze_design(design, provenance, group="", k_paths=DEFAULT_PATHS_PER_TRANSITION):
    """Fmax plus the worst ``k_paths`` paths of every transition, as records."""
    records = []
    for t in sta.ALL_TRANSITIONS:
        records.extend(export_paths(sta.extract_paths(design, k_paths, t), design, provenance, group))
    return Realization(provenance, group, float(sta.fmax(design)), records)


def _fpga_job(args):
    graph, model, seed, k_paths = args
    return analyze_design(realize_fpga(graph, model, seed), f"FPGA:seed={seed}", "", k_paths)


def _asic_job(args):
    graph, model, corner, sample, k_paths = args
    prov = f"ASIC:{corner}:" + ("nominal" if sample is None else f"sample={sample}")
    return analyze_design(realize_asic(graph, model, corner, sample), prov, corner, k_paths)


def _run(fn, jobs_args, jobs):
    jobs = jobs or int(os.environ.get("STAGESTA_JOBS", "1") or 1)
    if jobs <= 1 or len(jobs_args) <= 1:
        return [fn(a) for a in jobs_args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # map preserves submission order, so assembly is scheduling independent
        return list(pool.map(fn, jobs_args, chunksize=4))


def seed_sweep(graph, fpga_model, n_seeds=30, k_paths=DEFAULT_PATHS_PER_TRANSITION, jobs=None):
    """Analyze FPGA realizations for seeds 1..n_seeds."""
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    args = [(graph, fpga_model, s, k_paths) for s in range(1, n_seeds + 1)]
    return SweepResult("FPGA", _run(_fpga_job, args, jobs))


def corner_sweep(graph, asic_model, corners=("TT",), n_lvf_samples=0,
                 k_paths=DEFAULT_PATHS_PER_TRANSITION, jobs=None):
    """One realization per (corner, LVF sample); zero samples means the nominal corner run."""
    if not corners:
        raise ValueError("corners must be non-empty")
    if n_lvf_samples < 0:
        raise ValueError("n_lvf_samples must be >= 0")
    samples = [None] if n_lvf_samples == 0 else list(range(1, n_lvf_samples + 1))
    args = [(graph, asic_model, c, s, k_paths) for c in corners for s in samples]
    return SweepResult("ASIC", _run(_asic_job, args, jobs))


# -- statistics ---------------------------------------------------------------


@dataclass(frozen=True)
class StageStatistics:
    transition: str
    n: int
    mean_ps: float
    std_ps: float
    skewness: float
    excess_kurtosis: float
    min_ps: float
    max_ps: float
    histogram: tuple


def moments(x):
    """(mean, unbiased std, skewness, excess kurtosis); shape moments are 0 for constant data."""
    x = np.asarray(x, dtype=float)
    mean = float(x.mean())
    d = x - mean
    m2 = float(np.mean(d**2))
    std = float(np.sqrt(np.sum(d**2) / (len(x) - 1)))
    if m2 <= 1e-24 * max(1.0, mean * mean):
        return mean, std, 0.0, 0.0
    skew = float(np.mean(d**3) / m2**1.5)
    kurt = float(np.mean(d**4) / m2**2 - 3.0)
    return mean, std, skew, kurt


def histogram(x):
    """Freedman-Diaconis bins; 10 bins when the inter-quartile range is zero."""
    x = np.asarray(x, dtype=float)
    q75, q25 = np.percentile(x, [75, 25])
    bins = "fd" if q75 > q25 else 10
    counts, edges = np.histogram(x, bins=bins)
    return tuple(float(e) for e in edges), tuple(int(c) for c in counts)


def stage_statistics(sweep, transition):
    transition = sta.canonical_transition(transition)
    x = sweep.samples(transition)
    if len(x) < 2:
        raise InsufficientSamples(f"{transition}: need at least 2 samples, have {len(x)}")
    return statistics_of(x, transition)


def statistics_of(x, transition=""):
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        raise InsufficientSamples(f"need at least 2 samples, have {len(x)}")
    mean, std, skew, kurt = moments(x)
    return StageStatistics(transition, len(x), mean, std, skew, kurt,
                           float(x.min()), float(x.max()), histogram(x))


def _pearson(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) < 2:
        return math.nan, "insufficient"
    da, db = a - a.mean(), b - b.mean()
    va, vb = float(np.sum(da * da)), float(np.sum(db * db))
    if va == 0 or vb == 0:
        return math.nan, "zero-variance"
    return float(np.sum(da * db) / math.sqrt(va * vb)), ""


def interconnect_sensitivity(sweep):
    """Pearson correlations of routing delay with hop count and with path congestion."""
    recs = [r for r in sweep.records() if r.hop_count is not None]
    if len(recs) < 2:
        raise InsufficientSamples("interconnect sensitivity needs hop metadata on >= 2 paths")
    out = {}
    for scope in ("overall",) + sta.TRANSITIONS:
        sel = recs if scope == "overall" else [r for r in recs if r.transition == scope]
        hop_r, hop_flag = _pearson([r.hop_count for r in sel], [r.routing_ps for r in sel])
        cong_r, cong_flag = _pearson([r.congestion_mean or 0.0 for r in sel], [r.routing_ps for r in sel])
        out[scope] = {
            "n": len(sel),
            "hop_routing_r": hop_r,
            "hop_routing_flag": hop_flag,
            "congestion_routing_r": cong_r,
            "congestion_routing_flag": cong_flag,
        }
    return out


# -- signatures -----------------------------------------------------------------


def within_group_residuals(sweep, transition):
    """Slack samples minus their group (corner) mean, pooled over groups."""
    res = []
    dof = 0
    for g in sweep.groups:
        x = sweep.select(g).samples(transition)
        if len(x) == 0:
            continue
        res.append(x - x.mean())
        dof += len(x) - 1
    if dof < 1:
        raise InsufficientSamples(f"{transition}: not enough samples")
    r = np.concatenate(res)
    return r, dof


def pooled_sigma(sweep, transition):
    r, dof = within_group_residuals(sweep, transition)
    return float(np.sqrt(np.sum(r * r) / dof))


def pooled_skewness(sweep, transition):
    r, _ = within_group_residuals(sweep, transition)
    m2 = float(np.mean(r * r))
    if m2 == 0:
        return 0.0
    return float(np.mean(r**3) / m2**1.5)


def shape_flag(skew):
    if abs(skew) > ASYMMETRIC_SKEW:
        return "asymmetric-heavy-tail"
    if abs(skew) <= GAUSSIAN_SKEW:
        return "near-Gaussian"
    return "indeterminate"


def mean_levels(sweep, transition):
    recs = sweep.records(transition)
    if not recs:
        raise InsufficientSamples(f"{transition}: no paths")
    return float(np.mean([r.logic_levels for r in recs]))


@dataclass
class FabricSignature:
    fabric: str
    realizations: int
    routing_fraction: dict
    logic_fraction: dict
    clocking_fraction: dict
    bottleneck: str
    dominance: float
    variability_class: str
    stage_sigma_ps: dict
    stage_skewness: dict
    stage_levels: dict
    shape: dict


@dataclass
class SignatureReport:
    fpga: FabricSignature
    asic: FabricSignature
    robustness_ratio: dict
    robustness_ratio_mean: float

    def to_dict(self):
        return {"schema_version": 1, **asdict(self)}

    def dumps(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1, ensure_ascii=False)


def _summary(x):
    x = np.asarray(x, dtype=float)
    return {
        "mean": float(x.mean()),
        "std": float(x.std(ddof=1)) if len(x) > 1 else 0.0,
        "min": float(x.min()),
        "max": float(x.max()),
    }


def fabric_signature(sweep):
    if not sweep.realizations:
        raise InsufficientSamples("sweep has no realizations")
    worst = [r.worst for r in sweep.realizations]
    routing = [w.routing_fraction for w in worst]
    logic = [w.logic_fraction for w in worst]
    clocking = [w.clocking_fraction for w in worst]
    labels = [w.transition for w in worst]
    counts = {t: labels.count(t) for t in sta.ALL_TRANSITIONS}
    bottleneck = max(sta.ALL_TRANSITIONS, key=lambda t: (counts[t], -sta.ALL_TRANSITIONS.index(t)))
    if len(worst) > 1:
        topological = np.std(routing, ddof=1) > np.std(logic, ddof=1)
    else:
        topological = False
    sigma, skew, levels, shape = {}, {}, {}, {}
    for t in sta.TRANSITIONS:
        sigma[t] = pooled_sigma(sweep, t)
        skew[t] = pooled_skewness(sweep, t)
        levels[t] = mean_levels(sweep, t)
        shape[t] = shape_flag(skew[t])
    return FabricSignature(
        fabric=sweep.fabric,
        realizations=len(worst),
        routing_fraction=_summary(routing),
        logic_fraction=_summary(logic),
        clocking_fraction=_summary(clocking),
        bottleneck=bottleneck,
        dominance=counts[bottleneck] / len(worst),
        variability_class="topological" if topological else "parametric",
        stage_sigma_ps=sigma,
        stage_skewness=skew,
        stage_levels=levels,
        shape=shape,
    )


def extract_signatures(fpga_sweep, asic_sweep):
    """Cross-fabric signature: decomposition, bottleneck, variability class, robustness."""
    f = fabric_signature(fpga_sweep)
    a = fabric_signature(asic_sweep)
    ratio = {}
    for t in sta.TRANSITIONS:
        num = f.stage_sigma_ps[t] / f.stage_levels[t]
        den = a.stage_sigma_ps[t] / a.stage_levels[t]
        if den <= 0 or num <= 0:
            raise InsufficientSamples(f"{t}: degenerate slack spread")
        ratio[t] = num / den
    return SignatureReport(f, a, ratio, float(np.mean([ratio[t] for t in sta.TRANSITIONS])))
