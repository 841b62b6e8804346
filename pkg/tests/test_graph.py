import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from dnnbench.errors import GraphError, ShapeError
from dnnbench.graph import (INPUT, FcParams, LayerDescriptor, LivenessTrace, NetworkGraph, argmax_class,
                            graph_from_dict, graph_to_dict, run_inference, topological_schedule,
                            validate_shapes)
from dnnbench.networks import NETWORKS, build_network
from dnnbench.ops import ConvParams
from dnnbench.profiler import liveness_walk
from dnnbench.weights import generate_synthetic


def relu(name, src):
    return LayerDescriptor(name, "relu", inputs=(src,))


def residual_graph(order=None):
    nodes = [
        LayerDescriptor("c1", "conv", ConvParams(2, 2, 3, 3, pad=1)),
        relu("r1", "c1"),
        LayerDescriptor("c2", "conv", ConvParams(2, 2, 1, 1), inputs=("c1",)),
        LayerDescriptor("sum", "eltwise", inputs=("r1", "c2")),
        LayerDescriptor("fc", "fc", FcParams(2 * 4 * 4, 3), inputs=("sum",)),
    ]
    if order:
        nodes = [nodes[i] for i in order]
    return NetworkGraph("toy", nodes, (2, 4, 4), 3)


def test_schedule_keeps_valid_declaration_order():
    g = residual_graph()
    assert topological_schedule(g) == ["c1", "r1", "c2", "sum", "fc"]


@pytest.mark.parametrize("perm", list(itertools.permutations(range(5)))[::7])
def test_schedule_is_topological_for_any_declaration_order(perm):
    g = residual_graph(perm)
    order = topological_schedule(g)
    assert sorted(order) == sorted(n.name for n in g.nodes)
    assert oracles.is_topological(order, g.edges)


def test_cycle_detected():
    nodes = [relu("a", "b"), relu("b", "a"), relu("c", INPUT)]
    with pytest.raises(GraphError, match="cycle"):
        topological_schedule(NetworkGraph("cyc", nodes, (1,), 1))


def test_structure_errors():
    with pytest.raises(GraphError):
        NetworkGraph("dup", [relu("a", INPUT), relu("a", INPUT)], (1,), 1)
    with pytest.raises(GraphError):
        LayerDescriptor("x", "warp")
    with pytest.raises(GraphError):
        LayerDescriptor("x", "conv", FcParams(1, 1))
    two_sinks = NetworkGraph("s", [relu("a", INPUT), relu("b", INPUT)], (1,), 1)
    with pytest.raises(GraphError, match="exactly one output"):
        two_sinks.check_structure()
    bad_arity = NetworkGraph("s", [LayerDescriptor("e", "eltwise", inputs=(INPUT,))], (1,), 1)
    with pytest.raises(GraphError):
        bad_arity.check_structure()


def test_shape_error_names_the_layer():
    nodes = [LayerDescriptor("conv_a", "conv", ConvParams(2, 4, 3, 3)),
             LayerDescriptor("conv_b", "conv", ConvParams(3, 4, 1, 1), inputs=("conv_a",))]
    with pytest.raises(ShapeError, match="conv_b"):
        validate_shapes(NetworkGraph("bad", nodes, (2, 5, 5), 36))


def test_trace_chains():
    for net in NETWORKS:
        trace = validate_shapes(build_network(net))
        produced = {INPUT: build_network(net).input_shape}
        g = build_network(net)
        for e in trace:
            assert e.inputs == tuple(produced[s] for s in g.node(e.layer).inputs)
            produced[e.layer] = e.output


def test_argmax_ties_go_low():
    assert argmax_class([0.2, 0.5, 0.5, 0.1]) == 1
    with pytest.raises(ShapeError):
        argmax_class([])


def test_graph_dict_round_trip():
    for net in NETWORKS:
        g = build_network(net)
        g2 = graph_from_dict(graph_to_dict(g))
        assert graph_to_dict(g2) == graph_to_dict(g)


def test_run_inference_rejects_wrong_input_shape():
    g = build_network("cifarnet")
    with pytest.raises(ShapeError):
        run_inference(g, generate_synthetic(g, 0), np.zeros((3, 30, 30), np.float32))


@pytest.mark.parametrize("net", ["CifarNet", "SqueezeNet", "ResNet50", "LSTM"])
def test_liveness_matches_brute_force_oracle(net):
    g = build_network(net)
    trace = validate_shapes(g)
    order = topological_schedule(g)
    size_of = {e.layer: 4 * int(np.prod(e.output)) for e in trace}
    inputs_of = {n.name: n.inputs for n in g.nodes}
    want = oracles.peak_live_bytes(order, inputs_of, size_of, INPUT, 4 * int(np.prod(g.input_shape)))
    assert max(b for _, b in liveness_walk(g)) == want


@pytest.mark.parametrize("net", ["CifarNet", "SqueezeNet", "GRU"])
def test_executed_liveness_matches_analytic_walk(net):
    g = build_network(net)
    live = LivenessTrace()
    x = np.zeros(g.input_shape, np.float32)
    run_inference(g, generate_synthetic(g, 1), x, liveness=live)
    assert live.steps == liveness_walk(g)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 100), st.integers(0, 100)), min_size=1, max_size=12),
       st.integers(0, 2**31))
def test_random_dag_schedule_and_liveness(raw_edges, seed):
    """Random DAGs of relu/eltwise nodes: schedule is topological, liveness agrees with brute force."""
    rng = np.random.default_rng(seed)
    nodes = [relu("n0", INPUT)]
    for i, (a, b) in enumerate(raw_edges, start=1):
        srcs = (f"n{a % i}", f"n{b % i}")
        if srcs[0] != srcs[1] and rng.random() < 0.5:
            nodes.append(LayerDescriptor(f"n{i}", "eltwise", inputs=srcs))
        else:
            nodes.append(relu(f"n{i}", srcs[0]))
    # funnel every dangling node into one sink
    cons = {nd.name: 0 for nd in nodes}
    for nd in nodes:
        for s in nd.inputs:
            if s != INPUT:
                cons[s] += 1
    sinks = [k for k, v in cons.items() if v == 0]
    last = sinks[0]
    for j, s in enumerate(sinks[1:]):
        nodes.append(LayerDescriptor(f"join{j}", "eltwise", inputs=(last, s)))
        last = f"join{j}"
    perm = rng.permutation(len(nodes))
    g = NetworkGraph("rand", [nodes[i] for i in perm], (2, 3, 3), 18)
    order = topological_schedule(g)
    assert oracles.is_topological(order, g.edges)
    validate_shapes(g)
    size_of = {nd.name: 72 for nd in g.nodes}
    want = oracles.peak_live_bytes(order, {nd.name: nd.inputs for nd in g.nodes}, size_of, INPUT, 72)
    assert max(b for _, b in liveness_walk(g)) == want
