"""Layer kernels built from elementary arithmetic.

Every kernel takes float32 channel-major tensors and returns a new tensor. An
optional :class:`~dnnbench.counters.OpCounter` receives the operation counts,
which depend only on shapes. Convolution is direct: for each filter tap the
shifted input plane is multiplied into an accumulator that starts at the bias,
taps visited in row-major order. Work is split into output-channel tiles whose
boundaries depend on the layer shape alone (see :mod:`dnnbench.parallel`).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .counters import OpCounter, merge_all
from .errors import DataError, InputError, ShapeError
from .parallel import parallel_map, tiles
from .tensor import DTYPE, ITEMSIZE, as_tensor, concat_channels, new_tensor

CONV_TILE = 32
FC_TILE = 512
ROUNDING_MODES = ("exact", "floor", "ceil")


def _count(counter, **kw):
    if counter is not None:
        counter.tally(**kw)


def _io(counter, read=0, written=0):
    if counter is not None:
        counter.io(read * ITEMSIZE, written * ITEMSIZE)


@dataclass(frozen=True)
class ConvParams:
    in_channels: int
    out_channels: int
    kernel_h: int
    kernel_w: int
    stride: int = 1
    pad: int = 0
    groups: int = 1
    # "exact" rejects extents that do not tile the padded input; "floor" drops
    # the trailing rows/columns like Caffe does.
    rounding: str = "exact"

    def __post_init__(self):
        if self.kernel_h < 1 or self.kernel_w < 1 or self.stride < 1 or self.pad < 0:
            raise ShapeError(f"invalid convolution geometry {self}")
        if self.groups < 1 or self.in_channels % self.groups or self.out_channels % self.groups:
            raise ShapeError(f"channels {self.in_channels}->{self.out_channels} not divisible by groups={self.groups}")
        if self.rounding not in ("exact", "floor"):
            raise ValueError(f"convolution rounding must be exact or floor, not {self.rounding!r}")

    @property
    def weight_shape(self):
        return (self.out_channels, self.in_channels // self.groups, self.kernel_h, self.kernel_w)

    def output_hw(self, h, w):
        return (_extent(h, self.kernel_h, self.stride, self.pad, self.rounding, "conv"),
                _extent(w, self.kernel_w, self.stride, self.pad, self.rounding, "conv"))


@dataclass(frozen=True)
class PoolParams:
    window: int
    stride: int
    mode: str = "max"
    pad: int = 0
    rounding: str = "exact"

    def __post_init__(self):
        if self.window < 1 or self.stride < 1 or self.pad < 0:
            raise ShapeError(f"invalid pooling geometry {self}")
        if self.mode not in ("max", "average"):
            raise ValueError(f"pooling mode must be max or average, not {self.mode!r}")
        if self.rounding not in ROUNDING_MODES:
            raise ValueError(f"unknown rounding {self.rounding!r}")

    def output_hw(self, h, w):
        return (_extent(h, self.window, self.stride, self.pad, self.rounding, "pool"),
                _extent(w, self.window, self.stride, self.pad, self.rounding, "pool"))


@dataclass(frozen=True)
class LrnParams:
    local_size: int = 5
    k: float = 1.0
    alpha: float = 1e-4
    beta: float = 0.75

    def __post_init__(self):
        if self.local_size < 1 or self.local_size % 2 == 0:
            raise ValueError("LRN local_size must be a positive odd integer")
        if self.k < 0 or self.alpha < 0 or self.beta < 0:
            raise ValueError("LRN constants must be non-negative")


def _extent(n, k, s, p, rounding, what):
    span = n + 2 * p - k
    if span < 0:
        raise ShapeError(f"{what} window {k} larger than padded input {n + 2 * p}")
    if rounding == "exact":
        if span % s:
            raise ShapeError(f"{what} window {k} stride {s} pad {p} does not tile input extent {n}")
        return span // s + 1
    if rounding == "floor":
        return span // s + 1
    out = -(-span // s) + 1
    # the last window must start inside the input or left padding
    if (out - 1) * s >= n + p:
        out -= 1
    return out


def _require_chw(x, what):
    if x.ndim != 3:
        raise ShapeError(f"{what} expects a (C, H, W) tensor, got shape {x.shape}")


# --------------------------------------------------------------------------
# convolution and pooling
# --------------------------------------------------------------------------

def conv2d(x, weights, bias, p: ConvParams, counter=None):
    x = as_tensor(x)
    _require_chw(x, "conv2d")
    C, H, W = x.shape
    if C != p.in_channels:
        raise ShapeError(f"conv2d expects {p.in_channels} input channels, got {C}")
    weights = np.asarray(weights, dtype=DTYPE)
    bias = np.asarray(bias, dtype=DTYPE).reshape(-1)
    if weights.shape != p.weight_shape:
        raise ShapeError(f"conv2d weight shape {weights.shape} != expected {p.weight_shape}")
    if bias.shape != (p.out_channels,):
        raise ShapeError(f"conv2d bias shape {bias.shape} != ({p.out_channels},)")
    Ho, Wo = p.output_hw(H, W)
    kh, kw, s = p.kernel_h, p.kernel_w, p.stride
    cin_g = C // p.groups
    cout_g = p.out_channels // p.groups

    xp = np.pad(x, ((0, 0), (p.pad, p.pad), (p.pad, p.pad))) if p.pad else x
    out = new_tensor((p.out_channels, Ho, Wo))
    out2 = out.reshape(p.out_channels, Ho * Wo)

    for g in range(p.groups):
        xs = xp[g * cin_g:(g + 1) * cin_g]
        taps = [np.ascontiguousarray(xs[:, u:u + s * (Ho - 1) + 1:s, v:v + s * (Wo - 1) + 1:s]).reshape(cin_g, Ho * Wo)
                for u in range(kh) for v in range(kw)]
        wg = weights[g * cout_g:(g + 1) * cout_g]
        wt = np.ascontiguousarray(wg.transpose(2, 3, 0, 1)).reshape(kh * kw, cout_g, cin_g)
        base = g * cout_g

        def work(tile, wt=wt, taps=taps, base=base):
            a, b = tile
            acc = np.empty((b - a, Ho * Wo), dtype=DTYPE)
            acc[:] = bias[base + a:base + b, None]
            tmp = np.empty_like(acc)
            for t in range(kh * kw):
                np.matmul(wt[t, a:b], taps[t], out=tmp)
                acc += tmp
            out2[base + a:base + b] = acc
            c = OpCounter()
            n_out = (b - a) * Ho * Wo
            c.tally(mad=n_out * cin_g * kh * kw, add=n_out, store=n_out)
            c.io(read=ITEMSIZE * (2 * n_out * cin_g * kh * kw + n_out), written=ITEMSIZE * n_out)
            return c

        tile_counts = parallel_map(work, tiles(cout_g, CONV_TILE))
        if counter is not None:
            counter.merge(merge_all(tile_counts))
    _count(counter, load=x.size)
    return out


def pool2d(x, p: PoolParams, counter=None):
    x = as_tensor(x)
    _require_chw(x, "pool2d")
    C, H, W = x.shape
    if p.window > H + 2 * p.pad or p.window > W + 2 * p.pad:
        raise ShapeError(f"pool window {p.window} larger than input {H}x{W}")
    Ho, Wo = p.output_hw(H, W)
    k, s = p.window, p.stride
    # pad so that every window slice is in range; padded cells never win a max
    # and are excluded from the average's divisor
    need_h = (Ho - 1) * s + k
    need_w = (Wo - 1) * s + k
    fill = -np.inf if p.mode == "max" else 0.0
    xp = np.full((C, max(need_h, H + p.pad), max(need_w, W + p.pad)), fill, dtype=DTYPE)
    xp[:, p.pad:p.pad + H, p.pad:p.pad + W] = x
    reduce = np.maximum if p.mode == "max" else np.add

    # separable window: reduce along columns, then along rows
    cols = xp[:, :need_h, 0:s * (Wo - 1) + 1:s].copy()
    for v in range(1, k):
        reduce(cols, xp[:, :need_h, v:v + s * (Wo - 1) + 1:s], out=cols)
    acc = cols[:, 0:s * (Ho - 1) + 1:s].copy()
    for u in range(1, k):
        reduce(acc, cols[:, u:u + s * (Ho - 1) + 1:s], out=acc)

    # in-bounds taps per output position, one axis at a time
    def inside(n, n_out):
        starts = np.arange(n_out) * s - p.pad
        return np.minimum(starts + k, n) - np.maximum(starts, 0)

    rows_in, cols_in = inside(H, Ho), inside(W, Wo)
    out = new_tensor((C, Ho, Wo))
    if p.mode == "max":
        out[:] = acc
    else:
        out[:] = acc / np.outer(rows_in, cols_in).astype(DTYPE)
    n_taps = int(rows_in.sum()) * int(cols_in.sum()) * C
    n_out = C * Ho * Wo
    if p.mode == "max":
        _count(counter, max_cmp=n_taps - n_out)
    else:
        _count(counter, add=n_taps - n_out, div=n_out)
    _count(counter, load=x.size, store=n_out)
    _io(counter, read=n_taps, written=n_out)
    return out


def global_avg_pool(x, counter=None):
    x = as_tensor(x)
    _require_chw(x, "global_avg_pool")
    C, H, W = x.shape
    out = new_tensor((C,))
    out[:] = x.reshape(C, H * W).sum(axis=1, dtype=DTYPE) / DTYPE(H * W)
    _count(counter, add=C * (H * W - 1), div=C, load=x.size, store=C)
    _io(counter, read=x.size, written=C)
    return out


# --------------------------------------------------------------------------
# elementwise and normalization
# --------------------------------------------------------------------------

def relu(x, counter=None):
    x = as_tensor(x)
    out = new_tensor(x.shape)
    np.maximum(x, DTYPE(0), out=out)
    _count(counter, max_cmp=x.size, load=x.size, store=x.size)
    _io(counter, read=x.size, written=x.size)
    return out


def lrn(x, p: LrnParams = LrnParams(), counter=None):
    """Across-channel local response normalization.

    ``out = x / (k + alpha/n * sum of x**2 over the n neighbouring channels)**beta``
    where the channel window is clipped to the valid range.
    """
    x = as_tensor(x)
    _require_chw(x, "lrn")
    C, H, W = x.shape
    half = p.local_size // 2
    sq = np.pad(x * x, ((half, half), (0, 0), (0, 0)))
    acc = np.zeros_like(x)
    for d in range(p.local_size):
        acc += sq[d:d + C]
    scale = DTYPE(p.k) + DTYPE(p.alpha / p.local_size) * acc
    out = new_tensor(x.shape)
    out[:] = x / scale ** DTYPE(p.beta)
    taps = sum(min(c + half, C - 1) - max(c - half, 0) + 1 for c in range(C)) * H * W
    _count(counter, mad=taps + x.size, exp_tanh=x.size, div=x.size, load=x.size, store=x.size)
    _io(counter, read=taps + x.size, written=x.size)
    return out


def batchnorm_inference(x, mean, var, eps=1e-5, counter=None):
    x = as_tensor(x)
    _require_chw(x, "batchnorm")
    C = x.shape[0]
    mean = np.asarray(mean, dtype=DTYPE).reshape(-1)
    var = np.asarray(var, dtype=DTYPE).reshape(-1)
    if mean.shape != (C,) or var.shape != (C,):
        raise ShapeError(f"batchnorm statistics must have length {C}")
    if np.any(var < 0):
        raise DataError("batchnorm variance must be non-negative")
    std = np.sqrt(var + DTYPE(eps))
    out = new_tensor(x.shape)
    out[:] = (x - mean[:, None, None]) / std[:, None, None]
    _count(counter, add=x.size + C, exp_tanh=C, div=x.size, load=x.size, store=x.size)
    _io(counter, read=x.size + 2 * C, written=x.size)
    return out


def scale_shift(x, gamma, beta, counter=None):
    x = as_tensor(x)
    _require_chw(x, "scale")
    C = x.shape[0]
    gamma = np.asarray(gamma, dtype=DTYPE).reshape(-1)
    beta = np.asarray(beta, dtype=DTYPE).reshape(-1)
    if gamma.shape != (C,) or beta.shape != (C,):
        raise ShapeError(f"scale parameters must have length {C}, got {gamma.shape} and {beta.shape}")
    out = new_tensor(x.shape)
    out[:] = gamma[:, None, None] * x + beta[:, None, None]
    _count(counter, mad=x.size, load=x.size, store=x.size)
    _io(counter, read=x.size + 2 * C, written=x.size)
    return out


def eltwise_add(a, b, counter=None):
    a = as_tensor(a)
    b = as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"eltwise add of mismatched shapes {a.shape} and {b.shape}")
    out = new_tensor(a.shape)
    np.add(a, b, out=out)
    _count(counter, add=a.size, load=2 * a.size, store=a.size)
    _io(counter, read=2 * a.size, written=a.size)
    return out


# --------------------------------------------------------------------------
# dense layers
# --------------------------------------------------------------------------

def fully_connected(x, weights, bias, counter=None):
    """``out = weights @ x + bias``; ``x`` is flattened in channel-major order."""
    x = as_tensor(x).reshape(-1)
    weights = np.asarray(weights, dtype=DTYPE)
    bias = np.asarray(bias, dtype=DTYPE).reshape(-1)
    if weights.ndim != 2 or weights.shape[1] != x.size:
        raise ShapeError(f"fully_connected weight shape {weights.shape} does not accept input length {x.size}")
    M, N = weights.shape
    if bias.shape != (M,):
        raise ShapeError(f"fully_connected bias shape {bias.shape} != ({M},)")
    out = new_tensor((M,))

    def work(tile):
        a, b = tile
        out[a:b] = weights[a:b] @ x + bias[a:b]

    parallel_map(work, tiles(M, FC_TILE))
    _count(counter, mad=M * N, add=M, load=N, store=M)
    _io(counter, read=2 * M * N + M, written=M)
    return out


def softmax(x, counter=None):
    x = as_tensor(x).reshape(-1)
    # float64 internally keeps the result within half an ulp of float32
    z = x.astype(np.float64)
    e = np.exp(z - z.max())
    out = new_tensor(x.shape, e / e.sum())
    n = x.size
    _count(counter, max_cmp=n - 1, add=2 * n - 1, exp_tanh=n, div=n, load=n, store=n)
    _io(counter, read=n, written=n)
    return out


# --------------------------------------------------------------------------
# fire module
# --------------------------------------------------------------------------

class ConvLayer(NamedTuple):
    params: ConvParams
    weights: np.ndarray
    bias: np.ndarray


FIRE_STAGES = ("squeeze1x1", "expand1x1", "expand3x3")


def fire_module(x, squeeze: ConvLayer, expand1: ConvLayer, expand3: ConvLayer, counter=None, stages=None):
    """SqueezeNet fire module.

    ``stages``, when a dict, receives ``name -> (OpCounter, wall_ns)`` for the
    squeeze and the two expand convolutions (each including its ReLU).
    """
    sp, e1, e3 = squeeze.params, expand1.params, expand3.params
    if (sp.kernel_h, sp.kernel_w) != (1, 1) or (e1.kernel_h, e1.kernel_w) != (1, 1):
        raise ShapeError("fire squeeze and expand1x1 must use 1x1 kernels")
    if (e3.kernel_h, e3.kernel_w, e3.pad) != (3, 3, 1):
        raise ShapeError("fire expand3x3 must use a 3x3 kernel with pad 1")
    if any(q.stride != 1 for q in (sp, e1, e3)):
        raise ShapeError("fire convolutions must use stride 1")

    def stage(name, fn):
        c = OpCounter()
        t0 = time.perf_counter_ns()
        y = fn(c)
        elapsed = time.perf_counter_ns() - t0
        if stages is not None:
            stages[name] = (c, elapsed)
        if counter is not None:
            counter.merge(c)
        return y

    def conv_relu(inp, layer, c):
        return relu(conv2d(inp, layer.weights, layer.bias, layer.params, counter=c), counter=c)

    s = stage("squeeze1x1", lambda c: conv_relu(x, squeeze, c))
    a = stage("expand1x1", lambda c: conv_relu(s, expand1, c))
    b = stage("expand3x3", lambda c: conv_relu(s, expand3, c))
    return concat_channels(a, b)


# --------------------------------------------------------------------------
# recurrent cells
# --------------------------------------------------------------------------

LSTM_GATES = ("i", "f", "o", "g")
GRU_GATES = ("z", "r", "h")


@dataclass
class RnnCellWeights:
    """Per-gate input matrices ``W`` (hidden x input), recurrent matrices ``U``
    (hidden x hidden) and biases ``b`` (hidden)."""

    kind: str
    input_dim: int
    hidden_dim: int
    W: dict = field(default_factory=dict)
    U: dict = field(default_factory=dict)
    b: dict = field(default_factory=dict)

    @property
    def gates(self):
        return LSTM_GATES if self.kind == "lstm" else GRU_GATES

    def validate(self):
        if self.kind not in ("lstm", "gru"):
            raise ValueError(f"unknown cell kind {self.kind!r}")
        if self.hidden_dim < 1 or self.input_dim < 1:
            raise ShapeError("cell dimensions must be >= 1")
        D, Hd = self.input_dim, self.hidden_dim
        for g in self.gates:
            shapes = (np.shape(self.W.get(g)), np.shape(self.U.get(g)), np.shape(self.b.get(g)))
            if shapes != ((Hd, D), (Hd, Hd), (Hd,)):
                raise ShapeError(f"{self.kind} gate {g!r} has shapes {shapes}, expected {((Hd, D), (Hd, Hd), (Hd,))}")
        return self

    @classmethod
    def zeros(cls, kind, input_dim, hidden_dim):
        gates = LSTM_GATES if kind == "lstm" else GRU_GATES
        return cls(kind, input_dim, hidden_dim,
                   W={g: np.zeros((hidden_dim, input_dim), DTYPE) for g in gates},
                   U={g: np.zeros((hidden_dim, hidden_dim), DTYPE) for g in gates},
                   b={g: np.zeros(hidden_dim, DTYPE) for g in gates})


def _check_state(v, n, what):
    v = as_tensor(v).reshape(-1)
    if v.size != n:
        raise ShapeError(f"{what} has length {v.size}, expected {n}")
    return v


def _affine(w, gate, x, h, counter):
    D, Hd = w.input_dim, w.hidden_dim
    _count(counter, mad=Hd * (D + Hd), add=2 * Hd)
    _io(counter, read=2 * Hd * (D + Hd) + Hd)
    return np.dot(w.W[gate], x) + np.dot(w.U[gate], h) + w.b[gate]


def _sigmoid(z, counter):
    _count(counter, exp_tanh=z.size, add=z.size, div=z.size)
    one = DTYPE(1)
    return (one / (one + np.exp(-z))).astype(DTYPE)


def _tanh(z, counter):
    _count(counter, exp_tanh=z.size)
    return np.tanh(z).astype(DTYPE)


def lstm_cell(x, h, c, w: RnnCellWeights, counter=None):
    """One LSTM step; returns ``(h', c')``.

    i, f, o are sigmoid gates, g the tanh candidate; ``c' = f*c + i*g`` and
    ``h' = o * tanh(c')``.
    """
    if w.kind != "lstm":
        raise ValueError("lstm_cell needs LSTM weights")
    w.validate()
    Hd = w.hidden_dim
    x = _check_state(x, w.input_dim, "lstm input")
    h = _check_state(h, Hd, "lstm hidden state")
    c = _check_state(c, Hd, "lstm cell state")
    i = _sigmoid(_affine(w, "i", x, h, counter), counter)
    f = _sigmoid(_affine(w, "f", x, h, counter), counter)
    o = _sigmoid(_affine(w, "o", x, h, counter), counter)
    g = _tanh(_affine(w, "g", x, h, counter), counter)
    c_new = new_tensor((Hd,), f * c + i * g)
    h_new = new_tensor((Hd,), o * _tanh(c_new, counter))
    _count(counter, mul=2 * Hd, mad=Hd, load=x.size + 2 * Hd, store=2 * Hd)
    _io(counter, written=2 * Hd)
    return h_new, c_new


def gru_cell(x, h, w: RnnCellWeights, counter=None):
    """One GRU step: ``h' = (1 - z) * h + z * h~`` with the reset gate applied
    to ``h`` before the recurrent product of the candidate."""
    if w.kind != "gru":
        raise ValueError("gru_cell needs GRU weights")
    w.validate()
    Hd = w.hidden_dim
    x = _check_state(x, w.input_dim, "gru input")
    h = _check_state(h, Hd, "gru hidden state")
    z = _sigmoid(_affine(w, "z", x, h, counter), counter)
    r = _sigmoid(_affine(w, "r", x, h, counter), counter)
    cand = _tanh(_affine(w, "h", x, r * h, counter), counter)
    one = DTYPE(1)
    h_new = new_tensor((Hd,), (one - z) * h + z * cand)
    _count(counter, mul=2 * Hd, add=Hd, mad=Hd, load=x.size + Hd, store=Hd)
    _io(counter, written=Hd)
    return h_new


def run_cell_sequence(seq, w: RnnCellWeights, counter=None):
    """Run the cell over ``seq`` from a zero state; returns the final hidden state."""
    steps = [as_tensor(s).reshape(-1) for s in seq]
    if not steps:
        raise InputError("recurrent input sequence is empty")
    h = new_tensor((w.hidden_dim,))
    c = new_tensor((w.hidden_dim,))
    for x in steps:
        if w.kind == "lstm":
            h, c = lstm_cell(x, h, c, w, counter)
        else:
            h = gru_cell(x, h, w, counter)
    return h


def rnn_forecast(seq, w: RnnCellWeights, head_weights, head_bias, counter=None):
    """Scalar forecast: run the cell over ``seq`` then project the final hidden
    state through a fully-connected head."""
    h = run_cell_sequence(seq, w, counter)
    return fully_connected(h, head_weights, head_bias, counter)

