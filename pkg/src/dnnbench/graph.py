"""Network graphs: layer descriptors, scheduling, shape checking and execution."""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import ops
from .counters import OpCounter, ProfileRecord
from .errors import GraphError, ShapeError, WeightError
from .tensor import ITEMSIZE, as_tensor, check_shape, concat_channels

INPUT = "data"

KINDS = ("conv", "pool", "global_avg_pool", "relu", "lrn", "batchnorm", "scale", "eltwise",
         "concat", "fc", "softmax", "fire", "lstm", "gru")
JOIN_KINDS = ("eltwise", "concat")

# layer kind -> reporting category
LAYER_TYPES = {
    "conv": "conv", "pool": "pool", "global_avg_pool": "pool", "fc": "fc", "lrn": "norm",
    "relu": "relu", "batchnorm": "batchnorm", "scale": "scale", "eltwise": "eltwise",
    "concat": "concat", "softmax": "softmax", "lstm": "rnn_cell", "gru": "rnn_cell",
}
FIRE_STAGE_TYPES = {"squeeze1x1": "fire_squeeze", "expand1x1": "fire_expand", "expand3x3": "fire_expand"}


@dataclass(frozen=True)
class LaunchMeta:
    """One recorded GPU kernel launch: grid/block dims, registers, shared and constant memory."""

    grid: tuple
    block: tuple
    regs: int
    smem: int
    cmem: int


@dataclass(frozen=True)
class FcParams:
    in_features: int
    out_features: int


@dataclass(frozen=True)
class BatchNormParams:
    channels: int
    eps: float = 1e-5


@dataclass(frozen=True)
class ScaleParams:
    channels: int


@dataclass(frozen=True)
class FireParams:
    in_channels: int
    squeeze: int
    expand1x1: int
    expand3x3: int

    @property
    def convs(self):
        return {
            "squeeze1x1": ops.ConvParams(self.in_channels, self.squeeze, 1, 1),
            "expand1x1": ops.ConvParams(self.squeeze, self.expand1x1, 1, 1),
            "expand3x3": ops.ConvParams(self.squeeze, self.expand3x3, 3, 3, pad=1),
        }


@dataclass(frozen=True)
class RnnParams:
    input_dim: int
    hidden_dim: int
    steps: int


PARAM_TYPES = {
    "conv": ops.ConvParams, "pool": ops.PoolParams, "lrn": ops.LrnParams, "fc": FcParams,
    "batchnorm": BatchNormParams, "scale": ScaleParams, "fire": FireParams,
    "lstm": RnnParams, "gru": RnnParams,
}


@dataclass(frozen=True)
class LayerDescriptor:
    name: str
    kind: str
    params: object = None
    inputs: tuple = (INPUT,)
    launch_meta: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GraphError(f"{self.name}: unknown layer kind {self.kind!r}")
        expected = PARAM_TYPES.get(self.kind)
        if expected is not None and not isinstance(self.params, expected):
            raise GraphError(f"{self.name}: {self.kind} layer needs {expected.__name__} parameters")

    @property
    def layer_type(self):
        return LAYER_TYPES.get(self.kind, self.kind)

    def param_arrays(self):
        """Ordered ``(role, shape)`` list of the arrays this layer's weight blob holds."""
        p = self.params
        if self.kind == "conv":
            return [("weights", p.weight_shape), ("bias", (p.out_channels,))]
        if self.kind == "fc":
            return [("weights", (p.out_features, p.in_features)), ("bias", (p.out_features,))]
        if self.kind == "batchnorm":
            return [("mean", (p.channels,)), ("var", (p.channels,))]
        if self.kind == "scale":
            return [("gamma", (p.channels,)), ("beta", (p.channels,))]
        if self.kind == "fire":
            out = []
            for stage, cp in p.convs.items():
                out += [(f"{stage}.weights", cp.weight_shape), (f"{stage}.bias", (cp.out_channels,))]
            return out
        if self.kind in ("lstm", "gru"):
            gates = ops.LSTM_GATES if self.kind == "lstm" else ops.GRU_GATES
            D, Hd = p.input_dim, p.hidden_dim
            out = []
            for g in gates:
                out += [(f"W_{g}", (Hd, D)), (f"U_{g}", (Hd, Hd)), (f"b_{g}", (Hd,))]
            return out
        return []

    @property
    def has_params(self):
        return bool(self.param_arrays())


@dataclass
class NetworkGraph:
    id: str
    nodes: list
    input_shape: tuple
    output_len: int

    def __post_init__(self):
        self.input_shape = check_shape(self.input_shape)
        names = [n.name for n in self.nodes]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise GraphError(f"duplicate layer names: {dup}")
        if INPUT in names:
            raise GraphError(f"layer name {INPUT!r} is reserved for the graph input")
        self._index = {n.name: i for i, n in enumerate(self.nodes)}

    def node(self, name):
        return self.nodes[self._index[name]]

    def __iter__(self):
        return iter(self.nodes)

    def __len__(self):
        return len(self.nodes)

    @property
    def edges(self):
        return [(src, n.name) for n in self.nodes for src in n.inputs]

    def consumers(self):
        out = {INPUT: []}
        out.update({n.name: [] for n in self.nodes})
        for src, dst in self.edges:
            out[src].append(dst)
        return out

    def count_kind(self, kind):
        return sum(1 for n in self.nodes if n.kind == kind)

    def check_structure(self):
        """Check predecessor arity and single-sink form; returns the sink name."""
        for n in self.nodes:
            want = 2 if n.kind in JOIN_KINDS else 1
            if len(n.inputs) != want:
                raise GraphError(f"{n.name}: {n.kind} layer needs {want} input(s), has {len(n.inputs)}")
            for src in n.inputs:
                if src != INPUT and src not in self._index:
                    raise GraphError(f"{n.name}: unknown input {src!r}")
        cons = self.consumers()
        if not cons[INPUT]:
            raise GraphError("graph input is never consumed")
        sinks = [n.name for n in self.nodes if not cons[n.name]]
        if len(sinks) != 1:
            raise GraphError(f"graph must have exactly one output layer, found {sinks}")
        return sinks[0]


def topological_schedule(g: NetworkGraph):
    """Layer names ordered so every producer precedes its consumers.

    Ties are broken by declaration order, so a graph declared in a valid order
    is scheduled exactly as declared.
    """
    index = {n.name: i for i, n in enumerate(g.nodes)}
    indeg = {}
    for n in g.nodes:
        for src in n.inputs:
            if src != INPUT and src not in index:
                raise GraphError(f"{n.name}: unknown input {src!r}")
        indeg[n.name] = sum(1 for src in n.inputs if src != INPUT)
    cons = g.consumers()
    ready = [index[n.name] for n in g.nodes if indeg[n.name] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        name = g.nodes[heapq.heappop(ready)].name
        order.append(name)
        for dst in cons[name]:
            indeg[dst] -= 1
            if indeg[dst] == 0:
                heapq.heappush(ready, index[dst])
    if len(order) != len(g.nodes):
        stuck = sorted(set(index) - set(order), key=index.get)
        raise GraphError(f"cycle detected among layers {stuck}")
    return order


# --------------------------------------------------------------------------
# shape propagation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceEntry:
    layer: str
    kind: str
    inputs: tuple
    output: tuple


@dataclass
class ShapeTrace:
    network: str
    entries: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def output_of(self, layer):
        for e in self.entries:
            if e.layer == layer:
                return e.output
        raise KeyError(layer)


def infer_shape(node: LayerDescriptor, shapes):
    """Output shape of ``node`` given its input shapes; raises ShapeError."""
    p = node.params
    x = shapes[0]
    k = node.kind
    if k in ("conv", "pool", "lrn", "batchnorm", "scale", "fire", "global_avg_pool") and len(x) != 3:
        raise ShapeError(f"expects a (C, H, W) input, got {x}")
    if k == "conv":
        if x[0] != p.in_channels:
            raise ShapeError(f"expects {p.in_channels} input channels, got {x[0]}")
        return (p.out_channels,) + p.output_hw(x[1], x[2])
    if k == "pool":
        if p.window > x[1] + 2 * p.pad or p.window > x[2] + 2 * p.pad:
            raise ShapeError(f"pool window {p.window} larger than input {x[1]}x{x[2]}")
        return (x[0],) + p.output_hw(x[1], x[2])
    if k == "global_avg_pool":
        return (x[0],)
    if k in ("relu", "lrn", "softmax"):
        return x
    if k in ("batchnorm", "scale"):
        if x[0] != p.channels:
            raise ShapeError(f"expects {p.channels} channels, got {x[0]}")
        return x
    if k == "eltwise":
        if shapes[0] != shapes[1]:
            raise ShapeError(f"eltwise inputs differ: {shapes[0]} vs {shapes[1]}")
        return x
    if k == "concat":
        a, b = shapes
        if len(a) != 3 or len(b) != 3 or a[1:] != b[1:]:
            raise ShapeError(f"cannot concatenate {a} and {b} along channels")
        return (a[0] + b[0],) + a[1:]
    if k == "fc":
        if math.prod(x) != p.in_features:
            raise ShapeError(f"expects {p.in_features} input features, got {math.prod(x)} from {x}")
        return (p.out_features,)
    if k == "fire":
        if x[0] != p.in_channels:
            raise ShapeError(f"expects {p.in_channels} input channels, got {x[0]}")
        return (p.expand1x1 + p.expand3x3,) + x[1:]
    if k in ("lstm", "gru"):
        if math.prod(x) != p.steps * p.input_dim:
            raise ShapeError(f"expects {p.steps} steps of {p.input_dim} features, got {x}")
        return (p.hidden_dim,)
    raise GraphError(f"no shape rule for kind {k!r}")


def validate_shapes(g: NetworkGraph, input_shape=None) -> ShapeTrace:
    input_shape = check_shape(g.input_shape if input_shape is None else input_shape)
    g.check_structure()
    shapes = {INPUT: input_shape}
    trace = ShapeTrace(g.id)
    for name in topological_schedule(g):
        node = g.node(name)
        ins = tuple(shapes[s] for s in node.inputs)
        try:
            out = check_shape(infer_shape(node, ins))
        except ShapeError as e:
            raise ShapeError(f"{name}: {e}") from None
        shapes[name] = out
        trace.entries.append(TraceEntry(name, node.kind, ins, out))
    final = trace.entries[-1].output
    if math.prod(final) != g.output_len:
        raise ShapeError(f"{trace.entries[-1].layer}: network output has {math.prod(final)} values, "
                         f"expected {g.output_len}")
    return trace


def argmax_class(output) -> int:
    """Index of the largest entry; ties go to the lowest index."""
    out = np.asarray(output).reshape(-1)
    if out.size == 0:
        raise ShapeError("argmax of an empty vector")
    return int(np.argmax(out))


# --------------------------------------------------------------------------
# execution
# --------------------------------------------------------------------------

@dataclass
class LivenessTrace:
    """Bytes of activations held after each scheduled layer produces its output."""

    steps: list = field(default_factory=list)

    @property
    def peak_bytes(self):
        return max((b for _, b in self.steps), default=0)


def check_store(g: NetworkGraph, store):
    """Raise WeightError unless ``store`` holds a conforming blob for every parameterized layer."""
    for node in g.nodes:
        wanted = node.param_arrays()
        if not wanted:
            continue
        blob = store.blobs.get(node.name)
        if blob is None:
            raise WeightError(node.name, "no weight blob")
        have = [(role, tuple(np.shape(a))) for role, a in blob.arrays.items()]
        if have != [(r, tuple(s)) for r, s in wanted]:
            raise WeightError(node.name, f"blob arrays {have} do not match expected {wanted}")


def _execute(node, xs, arrays, counter, stages):
    k, p = node.kind, node.params
    x = xs[0]
    if k == "conv":
        return ops.conv2d(x, arrays["weights"], arrays["bias"], p, counter)
    if k == "pool":
        return ops.pool2d(x, p, counter)
    if k == "global_avg_pool":
        return ops.global_avg_pool(x, counter)
    if k == "relu":
        return ops.relu(x, counter)
    if k == "lrn":
        return ops.lrn(x, p, counter)
    if k == "batchnorm":
        return ops.batchnorm_inference(x, arrays["mean"], arrays["var"], p.eps, counter)
    if k == "scale":
        return ops.scale_shift(x, arrays["gamma"], arrays["beta"], counter)
    if k == "eltwise":
        return ops.eltwise_add(xs[0], xs[1], counter)
    if k == "concat":
        return concat_channels(xs[0], xs[1])
    if k == "fc":
        return ops.fully_connected(x, arrays["weights"], arrays["bias"], counter)
    if k == "softmax":
        return ops.softmax(x, counter)
    if k == "fire":
        layers = [ops.ConvLayer(cp, arrays[f"{s}.weights"], arrays[f"{s}.bias"]) for s, cp in p.convs.items()]
        return ops.fire_module(x, *layers, counter=counter, stages=stages)
    if k in ("lstm", "gru"):
        w = cell_weights(node, arrays)
        seq = as_tensor(x).reshape(p.steps, p.input_dim)
        return ops.run_cell_sequence(seq, w, counter)
    raise GraphError(f"{node.name}: cannot execute kind {k!r}")


def cell_weights(node, arrays):
    p = node.params
    gates = ops.LSTM_GATES if node.kind == "lstm" else ops.GRU_GATES
    return ops.RnnCellWeights(node.kind, p.input_dim, p.hidden_dim,
                              W={g: arrays[f"W_{g}"] for g in gates},
                              U={g: arrays[f"U_{g}"] for g in gates},
                              b={g: arrays[f"b_{g}"] for g in gates})


def run_inference(g: NetworkGraph, store, x, liveness: LivenessTrace = None):
    """Execute ``g`` on input ``x`` with weights from ``store``.

    Returns ``(output, records)`` with one ProfileRecord per layer; fire layers
    contribute one record per stage. Intermediate tensors are dropped as soon
    as their last consumer has run.
    """
    x = as_tensor(x)
    if x.shape != g.input_shape:
        validate_shapes(g, x.shape)
        raise ShapeError(f"input shape {x.shape} does not match network input {g.input_shape}")
    validate_shapes(g)
    check_store(g, store)
    cons = g.consumers()
    remaining = {name: len(c) for name, c in cons.items()}
    live = {INPUT: x}
    held = x.nbytes
    records = []
    schedule = topological_schedule(g)
    for name in schedule:
        node = g.node(name)
        xs = [live[s] for s in node.inputs]
        counter = OpCounter()
        stages = {} if node.kind == "fire" else None
        arrays = store.blobs[name].arrays if node.has_params else {}
        t0 = time.perf_counter_ns()
        out = _execute(node, xs, arrays, counter, stages)
        elapsed = time.perf_counter_ns() - t0
        if stages:
            for stage, (c, ns) in stages.items():
                records.append(ProfileRecord(f"{name}/{stage}", FIRE_STAGE_TYPES[stage], ns, c))
        else:
            records.append(ProfileRecord(name, node.layer_type, elapsed, counter))
        live[name] = out
        held += out.nbytes
        if liveness is not None:
            liveness.steps.append((name, held))
        for src in node.inputs:
            remaining[src] -= 1
            if remaining[src] == 0:
                held -= live.pop(src).nbytes
    return live[schedule[-1]], records


# --------------------------------------------------------------------------
# JSON topology export
# --------------------------------------------------------------------------

def graph_to_dict(g: NetworkGraph) -> dict:
    nodes = []
    for n in g.nodes:
        nodes.append({
            "name": n.name,
            "kind": n.kind,
            "inputs": list(n.inputs),
            "params": asdict(n.params) if n.params is not None else None,
            "launch_meta": [{"grid": list(m.grid), "block": list(m.block), "regs": m.regs,
                             "smem": m.smem, "cmem": m.cmem} for m in n.launch_meta],
        })
    return {
        "network": g.id,
        "input_shape": list(g.input_shape),
        "output_len": g.output_len,
        "nodes": nodes,
        "edges": [list(e) for e in g.edges],
    }


def graph_from_dict(d: dict) -> NetworkGraph:
    nodes = []
    for n in d["nodes"]:
        ptype = PARAM_TYPES.get(n["kind"])
        params = ptype(**n["params"]) if ptype is not None else None
        meta = tuple(LaunchMeta(tuple(m["grid"]), tuple(m["block"]), m["regs"], m["smem"], m["cmem"])
                     for m in n.get("launch_meta", ()))
        nodes.append(LayerDescriptor(n["name"], n["kind"], params, tuple(n["inputs"]), meta))
    return NetworkGraph(d["network"], nodes, tuple(d["input_shape"]), d["output_len"])


def activation_bytes(shape):
    return ITEMSIZE * math.prod(shape)
