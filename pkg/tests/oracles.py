"""Independent reference implementations written as plain loops in float64.

Nothing here imports the package's kernels; shapes and formulas are derived
from first principles so the tests compare two independent computations.
"""

import math

import numpy as np


def conv2d(x, w, b, stride=1, pad=0, groups=1):
    C, H, W = x.shape
    Co, Cg, Kh, Kw = w.shape
    Ho = (H + 2 * pad - Kh) // stride + 1
    Wo = (W + 2 * pad - Kw) // stride + 1
    out = np.zeros((Co, Ho, Wo))
    per_group = Co // groups
    for o in range(Co):
        g = o // per_group
        for y in range(Ho):
            for xx in range(Wo):
                s = float(b[o])
                for ci in range(Cg):
                    c = g * Cg + ci
                    for u in range(Kh):
                        for v in range(Kw):
                            iy = y * stride - pad + u
                            ix = xx * stride - pad + v
                            if 0 <= iy < H and 0 <= ix < W:
                                s += float(w[o, ci, u, v]) * float(x[c, iy, ix])
                out[o, y, xx] = s
    return out


def pool_extent(n, k, s, p, ceil_mode):
    if ceil_mode:
        out = math.ceil((n + 2 * p - k) / s) + 1
        if (out - 1) * s >= n + p:
            out -= 1
        return out
    return (n + 2 * p - k) // s + 1


def pool2d(x, k, s, mode, pad=0, ceil_mode=False):
    C, H, W = x.shape
    Ho, Wo = pool_extent(H, k, s, pad, ceil_mode), pool_extent(W, k, s, pad, ceil_mode)
    out = np.zeros((C, Ho, Wo))
    for c in range(C):
        for y in range(Ho):
            for xx in range(Wo):
                vals = []
                for u in range(k):
                    for v in range(k):
                        iy, ix = y * s - pad + u, xx * s - pad + v
                        if 0 <= iy < H and 0 <= ix < W:
                            vals.append(float(x[c, iy, ix]))
                out[c, y, xx] = max(vals) if mode == "max" else sum(vals) / len(vals)
    return out


def fully_connected(x, w, b):
    flat = [float(v) for v in np.asarray(x).reshape(-1)]
    out = np.zeros(w.shape[0])
    for i in range(w.shape[0]):
        s = float(b[i])
        for j, v in enumerate(flat):
            s += float(w[i, j]) * v
        out[i] = s
    return out


def lrn(x, n=5, k=1.0, alpha=1e-4, beta=0.75):
    C, H, W = x.shape
    out = np.zeros(x.shape)
    for c in range(C):
        lo, hi = max(0, c - n // 2), min(C - 1, c + n // 2)
        for y in range(H):
            for xx in range(W):
                s = sum(float(x[j, y, xx]) ** 2 for j in range(lo, hi + 1))
                out[c, y, xx] = float(x[c, y, xx]) / (k + alpha / n * s) ** beta
    return out


def batchnorm(x, mean, var, eps=1e-5):
    out = np.zeros(x.shape)
    for c in range(x.shape[0]):
        d = math.sqrt(float(var[c]) + eps)
        for idx, v in np.ndenumerate(x[c]):
            out[(c,) + idx] = (float(v) - float(mean[c])) / d
    return out


def _sig(v):
    return 1.0 / (1.0 + math.exp(-v))


def _gate(W, U, b, x, h, i):
    s = float(b[i])
    for j in range(len(x)):
        s += float(W[i, j]) * x[j]
    for j in range(len(h)):
        s += float(U[i, j]) * h[j]
    return s


def lstm_cell(x, h, c, W, U, b):
    """W, U, b: dicts keyed by gate name i, f, o, g."""
    x, h, c = [list(map(float, v)) for v in (x, h, c)]
    Hd = len(h)
    h2, c2 = [], []
    for n in range(Hd):
        i = _sig(_gate(W["i"], U["i"], b["i"], x, h, n))
        f = _sig(_gate(W["f"], U["f"], b["f"], x, h, n))
        o = _sig(_gate(W["o"], U["o"], b["o"], x, h, n))
        g = math.tanh(_gate(W["g"], U["g"], b["g"], x, h, n))
        cn = f * c[n] + i * g
        c2.append(cn)
        h2.append(o * math.tanh(cn))
    return np.array(h2), np.array(c2)


def gru_cell(x, h, W, U, b):
    """W, U, b: dicts keyed by gate name z, r, h."""
    x, h = list(map(float, x)), list(map(float, h))
    Hd = len(h)
    r = [_sig(_gate(W["r"], U["r"], b["r"], x, h, n)) for n in range(Hd)]
    rh = [r[n] * h[n] for n in range(Hd)]
    out = []
    for n in range(Hd):
        z = _sig(_gate(W["z"], U["z"], b["z"], x, h, n))
        cand = math.tanh(_gate(W["h"], U["h"], b["h"], x, rh, n))
        out.append((1 - z) * h[n] + z * cand)
    return np.array(out)


def softmax(v):
    v = [float(t) for t in v]
    m = max(v)
    e = [math.exp(t - m) for t in v]
    s = sum(e)
    return np.array([t / s for t in e])


def rel_err(got, want):
    want = np.asarray(want, dtype=np.float64)
    got = np.asarray(got, dtype=np.float64)
    denom = max(np.linalg.norm(want), 1e-30)
    return float(np.linalg.norm(got - want) / denom)


def is_topological(order, edges):
    pos = {n: i for i, n in enumerate(order)}
    return all(pos[a] < pos[b] for a, b in edges if a in pos and b in pos)


def peak_live_bytes(order, inputs_of, size_of, input_name, input_bytes):
    """Brute-force liveness: recompute the live set from scratch at every step.

    While a layer runs, its output and all of its inputs are held, as is any
    earlier tensor that a later layer still needs.
    """
    peak = 0
    for step, name in enumerate(order):
        done = set(order[:step])
        live = {name}
        for t in [input_name] + order[:step]:
            consumers = [c for c in order if t in inputs_of[c]]
            if any(c not in done for c in consumers):
                live.add(t)
        total = sum(input_bytes if t == input_name else size_of[t] for t in live)
        peak = max(peak, total)
    return peak
