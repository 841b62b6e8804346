"""Per-layer profiling, layer-type breakdowns, memory footprint and report output.

Report schemas (stable; the plotting helpers and any downstream scripts read
them):

* breakdown CSV: ``layer_type,time_share,op_share,add,mul,mad,max_cmp,div,exp_tanh,load,store``
  one row per layer type. Shares are fractions of the network total; the
  category columns are raw operation counts.
* footprint CSV: ``network,weight_bytes,peak_activation_bytes,total_bytes``
* shape trace CSV: ``layer,kind,inputs,output`` with shapes written ``CxHxW``
  and multiple inputs separated by ``;``.
* records CSV: ``layer,layer_type,wall_ns,bytes_read,bytes_written`` then one
  column per operation category.

JSON output mirrors the dataclasses field for field. Floats are written as
their shortest round-trip decimal.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

from .counters import ARITHMETIC, CATEGORIES, OpCategory, ProfileRecord
from .errors import ReportError
from .graph import INPUT, NetworkGraph, ShapeTrace, TraceEntry, activation_bytes, run_inference, \
    topological_schedule, validate_shapes
from .weights import count_parameters

LAYER_TYPE_ORDER = ("conv", "fire_squeeze", "fire_expand", "pool", "fc", "norm", "relu", "batchnorm",
                    "scale", "eltwise", "concat", "softmax", "rnn_cell")
CATEGORY_NAMES = tuple(c.value for c in CATEGORIES)


def profile_run(g: NetworkGraph, store, x, repeats: int = 5):
    """Run inference ``repeats`` times; keep the fastest wall time per layer.

    Counters come from the first pass (they are shape-determined, so every
    pass produces the same values).
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    _, records = run_inference(g, store, x)
    for _ in range(repeats - 1):
        _, again = run_inference(g, store, x)
        for r, a in zip(records, again):
            r.wall_ns = min(r.wall_ns, a.wall_ns)
    return records


@dataclass
class LayerTypeRow:
    layer_type: str
    time_share: float
    op_share: float
    histogram: dict  # category name -> count


@dataclass
class BreakdownReport:
    network: str
    rows: list
    category_totals: dict
    metadata: dict = field(default_factory=dict)

    def row(self, layer_type):
        for r in self.rows:
            if r.layer_type == layer_type:
                return r
        raise KeyError(layer_type)

    def to_dict(self):
        return {
            "network": self.network,
            "rows": [asdict(r) for r in self.rows],
            "category_totals": dict(self.category_totals),
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["network"], [LayerTypeRow(**r) for r in d["rows"]], d["category_totals"],
                   d.get("metadata", {}))


def _ordered_types(types):
    known = [t for t in LAYER_TYPE_ORDER if t in types]
    return known + sorted(t for t in types if t not in LAYER_TYPE_ORDER)


def breakdown_by_layer_type(records, network="", metadata=None) -> BreakdownReport:
    records = list(records)
    if not records:
        raise ReportError("cannot build a breakdown from zero records")
    groups = {}
    for r in records:
        groups.setdefault(r.layer_type, []).append(r)
    total_ns = sum(r.wall_ns for r in records)
    total_ops = sum(r.counter.arithmetic() for r in records)
    rows = []
    for t in _ordered_types(groups):
        rs = groups[t]
        hist = dict.fromkeys(CATEGORY_NAMES, 0)
        for r in rs:
            for cat, n in r.counter.as_dict().items():
                hist[cat] += n
        ns = sum(r.wall_ns for r in rs)
        ops = sum(r.counter.arithmetic() for r in rs)
        time_share = ns / total_ns if total_ns else len(rs) / len(records)
        op_share = ops / total_ops if total_ops else len(rs) / len(records)
        rows.append(LayerTypeRow(t, time_share, op_share, hist))
    totals = dict.fromkeys(CATEGORY_NAMES, 0)
    for row in rows:
        for cat, n in row.histogram.items():
            totals[cat] += n
    return BreakdownReport(network, rows, totals, dict(metadata or {}))


def top_ops(report: BreakdownReport, k: int):
    """Categories ranked by share of all counted operations (descending, ties by name)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    total = sum(report.category_totals.values())
    shares = [(cat, (n / total if total else 0.0)) for cat, n in report.category_totals.items()]
    shares.sort(key=lambda cs: (-cs[1], cs[0]))
    return shares[:k]


def category_share(report: BreakdownReport, categories):
    total = sum(report.category_totals.values())
    return sum(report.category_totals[OpCategory(c).value] for c in categories) / total


def arithmetic_share_by_layer(records):
    """Arithmetic operation count per record name, in execution order."""
    return {r.layer: r.counter.arithmetic() for r in records}


# --------------------------------------------------------------------------
# memory footprint
# --------------------------------------------------------------------------

@dataclass
class MemoryFootprint:
    network: str
    weight_bytes: int
    peak_activation_bytes: int

    @property
    def total_bytes(self):
        return self.weight_bytes + self.peak_activation_bytes

    def to_dict(self):
        return {"network": self.network, "weight_bytes": self.weight_bytes,
                "peak_activation_bytes": self.peak_activation_bytes, "total_bytes": self.total_bytes}

    @classmethod
    def from_dict(cls, d):
        return cls(d["network"], d["weight_bytes"], d["peak_activation_bytes"])


def liveness_walk(g: NetworkGraph, trace: ShapeTrace = None):
    """Activation bytes held right after each layer produces its output.

    A tensor is retained from its producer until its last consumer has run;
    the graph input counts as a live activation.
    """
    trace = trace or validate_shapes(g)
    shapes = {INPUT: g.input_shape}
    shapes.update({e.layer: e.output for e in trace})
    remaining = {name: len(c) for name, c in g.consumers().items()}
    held = activation_bytes(g.input_shape)
    steps = []
    for name in topological_schedule(g):
        held += activation_bytes(shapes[name])
        steps.append((name, held))
        for src in g.node(name).inputs:
            remaining[src] -= 1
            if remaining[src] == 0:
                held -= activation_bytes(shapes[src])
    return steps


def footprint(g: NetworkGraph) -> MemoryFootprint:
    steps = liveness_walk(g)
    return MemoryFootprint(g.id, 4 * count_parameters(g).total, max(b for _, b in steps))


# --------------------------------------------------------------------------
# report emission
# --------------------------------------------------------------------------

def _num(v):
    return repr(float(v)) if isinstance(v, float) else str(v)


def _shape_str(shape):
    return "x".join(str(d) for d in shape)


def _csv_bytes(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue().encode("utf-8")


def _stable_breakdown(report):
    d = report.to_dict()
    for r in d["rows"]:
        r["time_share"] = None
    d["metadata"] = {k: v for k, v in d["metadata"].items() if k in ("network", "seed")}
    return d


def emit_report(report, fmt="csv", stable=False) -> bytes:
    """Serialize a BreakdownReport, MemoryFootprint, ShapeTrace or record list.

    ``stable=True`` leaves out everything that depends on the host clock or the
    run environment (time shares, timestamps, worker counts, wall times), so
    the bytes depend only on network, weights and input.
    """
    if fmt not in ("csv", "json"):
        raise ReportError(f"unsupported report format {fmt!r}; use csv or json")
    if isinstance(report, BreakdownReport):
        if fmt == "json":
            d = _stable_breakdown(report) if stable else report.to_dict()
            return (json.dumps(d, indent=2) + "\n").encode("utf-8")
        rows = [[r.layer_type, "" if stable else _num(r.time_share), _num(r.op_share)]
                + [r.histogram[c] for c in CATEGORY_NAMES] for r in report.rows]
        return _csv_bytes(["layer_type", "time_share", "op_share", *CATEGORY_NAMES], rows)
    if isinstance(report, MemoryFootprint):
        if fmt == "json":
            return (json.dumps(report.to_dict(), indent=2) + "\n").encode("utf-8")
        d = report.to_dict()
        return _csv_bytes(list(d), [list(d.values())])
    if isinstance(report, ShapeTrace):
        if fmt == "json":
            d = {"network": report.network,
                 "entries": [{"layer": e.layer, "kind": e.kind, "inputs": [list(s) for s in e.inputs],
                              "output": list(e.output)} for e in report]}
            return (json.dumps(d, indent=2) + "\n").encode("utf-8")
        rows = [[e.layer, e.kind, ";".join(_shape_str(s) for s in e.inputs), _shape_str(e.output)]
                for e in report]
        return _csv_bytes(["layer", "kind", "inputs", "output"], rows)
    if isinstance(report, (list, tuple)) and all(isinstance(r, ProfileRecord) for r in report):
        recs = [{"layer": r.layer, "layer_type": r.layer_type, "wall_ns": None if stable else r.wall_ns,
                 "bytes_read": r.bytes_read, "bytes_written": r.bytes_written, **r.counter.as_dict()}
                for r in report]
        if fmt == "json":
            return (json.dumps(recs, indent=2) + "\n").encode("utf-8")
        header = ["layer", "layer_type", "wall_ns", "bytes_read", "bytes_written", *CATEGORY_NAMES]
        return _csv_bytes(header, [["" if d[h] is None else d[h] for h in header] for d in recs])
    raise ReportError(f"cannot emit a report of type {type(report).__name__}")


def parse_report(data: bytes, kind: str):
    """Inverse of :func:`emit_report` for JSON breakdown, footprint and trace reports."""
    d = json.loads(data.decode("utf-8"))
    if kind == "breakdown":
        return BreakdownReport.from_dict(d)
    if kind == "footprint":
        return MemoryFootprint.from_dict(d)
    if kind == "trace":
        return ShapeTrace(d["network"], [TraceEntry(e["layer"], e["kind"], tuple(tuple(s) for s in e["inputs"]),
                                                    tuple(e["output"])) for e in d["entries"]])
    raise ReportError(f"unknown report kind {kind!r}")


__all__ = [
    "ARITHMETIC", "BreakdownReport", "LayerTypeRow", "MemoryFootprint", "arithmetic_share_by_layer",
    "breakdown_by_layer_type", "category_share", "emit_report", "footprint", "liveness_walk",
    "parse_report", "profile_run", "top_ops",
]
