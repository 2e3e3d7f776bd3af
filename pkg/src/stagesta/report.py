"""Interchange path-record format (line-delimited JSON) and histogram CSV.

One record per line. Required fields are listed in ``REQUIRED``; unknown
fields are kept in ``PathRecord.extra`` and written back unchanged, so
adapter scripts may annotate records freely.
"""

import csv
import io
import json
import math
from dataclasses import dataclass, field

from .errors import EmptyInput, ParseError
from .sta_engine import ALL_TRANSITIONS, PATH_CLASSES, canonical_transition

SCHEMA_VERSION = 1

REQUIRED = (
    "launch_name", "capture_name", "transition", "path_class",
    "logic_ps", "routing_ps", "clocking_ps", "setup_slack_ps", "hold_slack_ps",
    "logic_levels", "provenance",
)
OPTIONAL = ("hop_count", "congestion_mean", "period_ps", "group")


@dataclass(frozen=True)
class PathRecord:
    launch_name: str
    capture_name: str
    transition: str
    path_class: str
    logic_ps: float
    routing_ps: float
    clocking_ps: float
    setup_slack_ps: float
    hold_slack_ps: float
    logic_levels: int
    provenance: str
    hop_count: int | None = None
    congestion_mean: float | None = None
    period_ps: float | None = None
    group: str = ""
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def total_ps(self):
        return self.logic_ps + self.routing_ps + self.clocking_ps

    @property
    def routing_fraction(self):
        return self.routing_ps / self.total_ps if self.total_ps > 0 else 0.0

    @property
    def logic_fraction(self):
        return self.logic_ps / self.total_ps if self.total_ps > 0 else 0.0

    @property
    def clocking_fraction(self):
        return self.clocking_ps / self.total_ps if self.total_ps > 0 else 0.0

    def to_dict(self):
        d = {k: getattr(self, k) for k in REQUIRED}
        for k in OPTIONAL:
            v = getattr(self, k)
            if v is not None and v != "":
                d[k] = v
        for k, v in self.extra.items():
            d.setdefault(k, v)
        return d


def record_from_path(path, design, provenance, group=""):
    g = design.graph
    dec = path.decomposition
    return PathRecord(
        launch_name=g.node(path.launch).name,
        capture_name=g.node(path.capture).name,
        transition=path.transition,
        path_class=path.path_class,
        logic_ps=float(dec.logic_ps),
        routing_ps=float(dec.routing_ps),
        clocking_ps=float(dec.clocking_ps),
        setup_slack_ps=float(path.setup_slack_ps),
        hold_slack_ps=float(path.hold_slack_ps),
        logic_levels=int(path.logic_levels),
        provenance=provenance,
        hop_count=int(path.hop_count),
        congestion_mean=float(path.congestion_mean),
        period_ps=float(design.clock.period_ps),
        group=group,
    )


def export_paths(paths, design, provenance="", group=""):
    """Path records for ``paths`` in ascending setup-slack order."""
    ordered = sorted(paths, key=lambda p: (p.setup_slack_ps, p.nodes))
    return [record_from_path(p, design, provenance, group) for p in ordered]


def dumps_records(records):
    return "".join(json.dumps(r.to_dict(), sort_keys=True, ensure_ascii=False) + "\n" for r in records)


def write_records(records, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps_records(records))


def _number(d, key, line, integer=False):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(line, f"{key} must be a number")
    if integer and not float(v).is_integer():
        raise ParseError(line, f"{key} must be an integer")
    if not math.isfinite(v):
        raise ParseError(line, f"{key} must be finite")
    return int(v) if integer else float(v)


def parse_record(text, line=1):
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(line, f"invalid JSON ({exc.msg})") from None
    if not isinstance(d, dict):
        raise ParseError(line, "record must be a JSON object")
    missing = [k for k in REQUIRED if k not in d]
    if missing:
        raise ParseError(line, f"missing field(s) {', '.join(missing)}")
    vals = {}
    for k in ("logic_ps", "routing_ps", "clocking_ps"):
        vals[k] = _number(d, k, line)
        if vals[k] < 0:
            raise ParseError(line, f"{k} must be >= 0")
    for k in ("setup_slack_ps", "hold_slack_ps"):
        vals[k] = _number(d, k, line)
    vals["logic_levels"] = _number(d, "logic_levels", line, integer=True)
    if vals["logic_levels"] < 0:
        raise ParseError(line, "logic_levels must be >= 0")
    try:
        transition = canonical_transition(str(d["transition"]))
    except ValueError:
        raise ParseError(line, f"transition must be one of {ALL_TRANSITIONS}") from None
    if d["path_class"] not in PATH_CLASSES:
        raise ParseError(line, f"path_class must be one of {PATH_CLASSES}")
    opt = {}
    if d.get("hop_count") is not None:
        opt["hop_count"] = _number(d, "hop_count", line, integer=True)
        if opt["hop_count"] < 0:
            raise ParseError(line, "hop_count must be >= 0")
    for k in ("congestion_mean", "period_ps"):
        if d.get(k) is not None:
            opt[k] = _number(d, k, line)
    extra = {k: v for k, v in d.items() if k not in REQUIRED and k not in OPTIONAL}
    return PathRecord(
        launch_name=str(d["launch_name"]),
        capture_name=str(d["capture_name"]),
        transition=transition,
        path_class=d["path_class"],
        provenance=str(d["provenance"]),
        group=str(d.get("group", "")),
        extra=extra,
        **vals,
        **opt,
    )


def import_paths(lines, lenient=False, errors=None):
    """Parse JSONL records. Malformed lines raise, or are skipped and logged to ``errors`` when lenient."""
    if isinstance(lines, str):
        lines = io.StringIO(lines)
    out = []
    for n, text in enumerate(lines, start=1):
        if not text.strip():
            continue
        try:
            out.append(parse_record(text.rstrip("\r\n"), n))
        except ParseError as exc:
            if not lenient:
                raise
            if errors is not None:
                errors.append(exc)
    if not out:
        raise EmptyInput("no path records found")
    return out


def read_records(path, lenient=False, errors=None):
    with open(path, encoding="utf-8") as f:
        return import_paths(f, lenient=lenient, errors=errors)


# -- histogram CSV -------------------------------------------------------------

HIST_HEADER = ("transition", "bin_lo_ps", "bin_hi_ps", "count")


def histogram_rows(stats_by_transition):
    rows = []
    for transition, st in stats_by_transition.items():
        edges, counts = st.histogram
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            rows.append((transition, float(lo), float(hi), int(c)))
    return rows


def dumps_histogram_csv(stats_by_transition):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HIST_HEADER)
    for t, lo, hi, c in histogram_rows(stats_by_transition):
        w.writerow((t, repr(lo), repr(hi), c))
    return buf.getvalue()


def read_histogram_csv(text):
    """Rows of (transition, lo, hi, count) from histogram CSV text."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != HIST_HEADER:
        raise ParseError(1, f"histogram header must be {','.join(HIST_HEADER)}")
    return [(r[0], float(r[1]), float(r[2]), int(r[3])) for r in rows[1:] if r]
