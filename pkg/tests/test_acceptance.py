"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Tolerances and thresholds are pinned here and must not be loosened:

 1. conv share of arithmetic ops >= 0.90 (CifarNet, ResNet50); conv wall-time
    share >= 0.70 as the secondary check
 2. AlexNet / SqueezeNet parameter ratio in [40, 60]
 3. footprint < 500 KB for LSTM and GRU, >= 1 MB for every CNN (decimal units)
 4. conv10 has the highest per-layer arithmetic-op count in SqueezeNet
 5. {mad, add, mul} > 50% of counted ops, every network
 6. seven kernels vs naive oracles, >= 100 random instances each, relative
    error <= 1e-5
 7. shapes validate for all seven networks, with golden checkpoints
 8. outputs, counters and report bytes identical over 3 runs and workers {1, 4}
 9. store round-trip for all seven networks; forced corruption raises the
    documented errors
10. softmax outputs sum to 1 +- 1e-6 with entries in (0, 1]
"""

import time

import numpy as np
import pytest

import oracles
from dnnbench import ops, parallel
from dnnbench.errors import PersistenceError, WeightError
from dnnbench.graph import run_inference, validate_shapes
from dnnbench.networks import CNNS, NETWORKS, RNNS, build_network
from dnnbench.profiler import breakdown_by_layer_type, category_share, emit_report, footprint, profile_run
from dnnbench.weights import count_parameters, generate_synthetic, load_store, write_store

KB, MB = 1000, 1000 * 1000
CONV_TYPES = ("conv", "fire_squeeze", "fire_expand")
RESULTS = {}


@pytest.fixture
def report(capsys, request):
    def emit(number, title, ok, detail, started):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} -- {detail} ({time.perf_counter() - started:.1f}s)"
        RESULTS[number] = line
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
    return emit


def synthetic_input(g, seed=0):
    return np.random.default_rng(seed).random(g.input_shape, dtype=np.float32)


# --------------------------------------------------------------------------

def test_c01_convolution_dominance(report):
    t0 = time.perf_counter()
    details, ok = [], True
    for net in ("CifarNet", "ResNet50"):
        g = build_network(net)
        r = breakdown_by_layer_type(profile_run(g, generate_synthetic(g, 42), synthetic_input(g), repeats=5), net)
        op = sum(row.op_share for row in r.rows if row.layer_type in CONV_TYPES)
        wall = sum(row.time_share for row in r.rows if row.layer_type in CONV_TYPES)
        ok &= op >= 0.90 and wall >= 0.70
        details.append(f"{net} ops {op:.4f} wall {wall:.3f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 120
    report(1, "conv >= 90% of ops, >= 70% wall", ok, "; ".join(details), t0)


def test_c02_parameter_ratio(report):
    t0 = time.perf_counter()
    a = count_parameters(build_network("AlexNet")).total
    s = count_parameters(build_network("SqueezeNet")).total
    ratio = a / s
    report(2, "AlexNet/SqueezeNet params in [40, 60]", 40 <= ratio <= 60 and time.perf_counter() - t0 < 1,
           f"{a} / {s} = {ratio:.2f}", t0)


def test_c03_memory_footprint(report):
    t0 = time.perf_counter()
    fps = {net: footprint(build_network(net)) for net in NETWORKS}
    ok = all(fps[n].total_bytes < 500 * KB for n in RNNS) and all(fps[n].total_bytes >= 1 * MB for n in CNNS)
    ok &= time.perf_counter() - t0 < 1
    detail = ", ".join(f"{n} {fps[n].total_bytes / KB:.0f} KB" for n in NETWORKS)
    report(3, "RNN < 500 KB, CNN >= 1 MB", ok, detail, t0)


def test_c04_squeezenet_hot_layer(report):
    t0 = time.perf_counter()
    g = build_network("SqueezeNet")
    _, records = run_inference(g, generate_synthetic(g, 42), synthetic_input(g))
    ranked = sorted(records, key=lambda r: -r.counter.arithmetic())
    top = ", ".join(f"{r.layer}={r.counter.arithmetic()}" for r in ranked[:3])
    report(4, "conv10 is SqueezeNet's largest layer by arithmetic ops", ranked[0].layer == "conv10",
           f"top: {top}", t0)


def test_c05_operation_mix(report):
    t0 = time.perf_counter()
    shares = {}
    for net in NETWORKS:
        g = build_network(net)
        _, records = run_inference(g, generate_synthetic(g, 42), synthetic_input(g))
        shares[net] = category_share(breakdown_by_layer_type(records, net), ("mad", "add", "mul"))
    ok = all(v > 0.5 for v in shares.values()) and time.perf_counter() - t0 < 120
    report(5, "{mad, add, mul} > 50% of ops", ok, ", ".join(f"{k} {v:.3f}" for k, v in shares.items()), t0)


def _random_cell(rng, kind, d, hd):
    gates = ops.LSTM_GATES if kind == "lstm" else ops.GRU_GATES
    u = lambda *s: rng.uniform(-0.6, 0.6, s).astype(np.float32)  # noqa: E731
    return ops.RnnCellWeights(kind, d, hd, W={g: u(hd, d) for g in gates}, U={g: u(hd, hd) for g in gates},
                              b={g: u(hd) for g in gates})


def test_c06_oracle_equivalence(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    n = 100
    u = lambda *s, lo=-1.0, hi=1.0: rng.uniform(lo, hi, s).astype(np.float32)  # noqa: E731
    worst = {}

    def check(name, got, want):
        worst[name] = max(worst.get(name, 0.0), oracles.rel_err(got, want))

    for _ in range(n):
        groups = int(rng.integers(1, 3))
        cin, cout = groups * int(rng.integers(1, 4)), groups * int(rng.integers(1, 4))
        size, k, stride, pad = int(rng.integers(3, 8)), int(rng.integers(1, 4)), int(rng.integers(1, 3)), int(rng.integers(0, 2))
        p = ops.ConvParams(cin, cout, k, k, stride, pad, groups, rounding="floor")
        x, w, b = u(cin, size, size), u(*p.weight_shape), u(cout)
        check("conv2d", ops.conv2d(x, w, b, p), oracles.conv2d(x, w, b, stride, pad, groups))

        mode = "max" if rng.random() < 0.5 else "average"
        kp, sp = int(rng.integers(1, 4)), int(rng.integers(1, 3))
        padp = int(rng.integers(0, kp))
        ceil_mode = bool(rng.random() < 0.5)
        xp = u(2, int(rng.integers(4, 9)), int(rng.integers(4, 9)))
        pp = ops.PoolParams(kp, sp, mode, padp, "ceil" if ceil_mode else "floor")
        check("pool2d", ops.pool2d(xp, pp), oracles.pool2d(xp, kp, sp, mode, padp, ceil_mode))

        m, nn = int(rng.integers(1, 16)), int(rng.integers(1, 48))
        xf, wf, bf = u(nn), u(m, nn), u(m)
        check("fully_connected", ops.fully_connected(xf, wf, bf), oracles.fully_connected(xf, wf, bf))

        xl = u(int(rng.integers(1, 10)), 3, 3, lo=-10, hi=10)
        ls = int(rng.choice([3, 5]))
        check("lrn", ops.lrn(xl, ops.LrnParams(ls, 1.0, 1e-2, 0.75)), oracles.lrn(xl, ls, 1.0, 1e-2, 0.75))

        c = int(rng.integers(1, 8))
        xb, mean, var = u(c, 3, 3), u(c), u(c, lo=0.0, hi=2.0)
        check("batchnorm_inference", ops.batchnorm_inference(xb, mean, var), oracles.batchnorm(xb, mean, var))

        d, hd = int(rng.integers(1, 4)), int(rng.integers(1, 10))
        cw = _random_cell(rng, "lstm", d, hd)
        xs, hs, cs = u(d), u(hd), u(hd)
        h2, c2 = ops.lstm_cell(xs, hs, cs, cw)
        wh, wc = oracles.lstm_cell(xs, hs, cs, cw.W, cw.U, cw.b)
        check("lstm_cell", np.concatenate([h2, c2]), np.concatenate([wh, wc]))

        gw = _random_cell(rng, "gru", d, hd)
        check("gru_cell", ops.gru_cell(xs, hs, gw), oracles.gru_cell(xs, hs, gw.W, gw.U, gw.b))

    ok = all(v <= 1e-5 for v in worst.values()) and len(worst) == 7 and time.perf_counter() - t0 < 30
    report(6, f"7 kernels match oracles on {n} instances each (rel err <= 1e-5)", ok,
           ", ".join(f"{k} {v:.1e}" for k, v in worst.items()), t0)


GOLDEN = {
    "AlexNet": {"conv1": (96, 55, 55), "pool1": (96, 27, 27)},
    "SqueezeNet": {"conv1": (96, 111, 111), "fire2": (128, 55, 55)},
}
FINAL = {"CifarNet": 9, "AlexNet": 1000, "SqueezeNet": 1000, "ResNet50": 1000, "VGG16": 1000, "LSTM": 1, "GRU": 1}


def test_c07_shape_conformance(report):
    t0 = time.perf_counter()
    bad = []
    for net in NETWORKS:
        trace = validate_shapes(build_network(net))
        for layer, shape in GOLDEN.get(net, {}).items():
            if trace.output_of(layer) != shape:
                bad.append(f"{net}.{layer}={trace.output_of(layer)}")
        if trace.entries[-1].output != (FINAL[net],):
            bad.append(f"{net} output {trace.entries[-1].output}")
    ok = not bad and time.perf_counter() - t0 < 1
    report(7, "shapes validate with golden checkpoints", ok, "; ".join(bad) or "all 7 networks conform", t0)


def test_c08_determinism(report):
    t0 = time.perf_counter()
    seen = {}
    mismatches = []
    for net in ("CifarNet", "SqueezeNet", "LSTM", "GRU"):
        g = build_network(net)
        store = generate_synthetic(g, 11)
        x = synthetic_input(g, 5)
        for workers in (1, 4):
            for _ in range(3):
                with parallel.workers(workers):
                    y, records = run_inference(g, store, x)
                rep = breakdown_by_layer_type(records, net, {"network": net, "seed": 11})
                sig = (y.tobytes(), [(r.layer, r.counter.as_dict(), r.bytes_read, r.bytes_written) for r in records],
                       emit_report(rep, "csv", stable=True), emit_report(rep, "json", stable=True),
                       emit_report(records, "csv", stable=True))
                if net in seen and seen[net] != sig:
                    mismatches.append(f"{net}@{workers}")
                seen.setdefault(net, sig)
    ok = not mismatches and time.perf_counter() - t0 < 180
    report(8, "bit-identical over 3 runs x workers {1, 4}", ok,
           "mismatch: " + ", ".join(mismatches) if mismatches else "4 networks x 6 runs identical", t0)


def test_c09_persistence(report, tmp_path):
    t0 = time.perf_counter()
    failures = []
    for net in NETWORKS:
        g = build_network(net)
        store = generate_synthetic(g, 3)
        d = tmp_path / net
        write_store(store, d)
        if not load_store(d, g).equals(store):
            failures.append(f"{net} round-trip")
        del store
    g = build_network("CifarNet")
    d = tmp_path / "CifarNet"
    victim = d / "001_conv2.bin"
    data = victim.read_bytes()
    victim.write_bytes(data[:-8])
    try:
        load_store(d, g)
        failures.append("truncated blob accepted")
    except WeightError as e:
        if e.layer != "conv2":
            failures.append("truncated blob blamed the wrong layer")
    victim.unlink()
    try:
        load_store(d, g)
        failures.append("missing file accepted")
    except PersistenceError:
        pass
    ok = not failures and time.perf_counter() - t0 < 30
    report(9, "store round-trip + corruption errors", ok, "; ".join(failures) or "7 stores identical, errors typed", t0)


def test_c10_softmax_contract(report):
    t0 = time.perf_counter()
    detail, ok = [], True
    for net in NETWORKS:
        g = build_network(net)
        if g.nodes[-1].kind != "softmax":
            continue
        y, _ = run_inference(g, generate_synthetic(g, 8), synthetic_input(g, 1))
        s = float(y.astype(np.float64).sum())
        ok &= abs(s - 1) <= 1e-6 and bool(np.all((y > 0) & (y <= 1)))
        detail.append(f"{net} sum-1={s - 1:+.1e} min={float(y.min()):.1e}")
    ok &= len(detail) >= 3 and time.perf_counter() - t0 < 30
    report(10, "softmax sums to 1 +- 1e-6, entries in (0, 1]", ok, "; ".join(detail), t0)
