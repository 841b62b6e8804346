"""Builders for the seven benchmark networks.

Launch metadata reproduces the GPU kernel configurations recorded for the
original CUDA implementation (grid, block, registers, shared and constant
memory). It is descriptive only; nothing here depends on it.
"""

from __future__ import annotations

from .graph import (INPUT, BatchNormParams, FcParams, FireParams, LaunchMeta, LayerDescriptor,
                    NetworkGraph, RnnParams, ScaleParams)
from .ops import ConvParams, LrnParams, PoolParams

NETWORKS = ("CifarNet", "AlexNet", "SqueezeNet", "ResNet50", "VGG16", "LSTM", "GRU")
CNNS = NETWORKS[:5]
RNNS = NETWORKS[5:]


def L(grid, block, regs, smem, cmem):
    return LaunchMeta(tuple(grid), tuple(block), regs, smem, cmem)


class _Builder:
    def __init__(self, net_id, input_shape, output_len):
        self.net_id = net_id
        self.input_shape = input_shape
        self.output_len = output_len
        self.nodes = []
        self.last = INPUT

    def add(self, name, kind, params=None, inputs=None, launch=()):
        if isinstance(launch, LaunchMeta):
            launch = (launch,)
        inputs = (self.last,) if inputs is None else tuple(inputs)
        self.nodes.append(LayerDescriptor(name, kind, params, inputs, tuple(launch)))
        self.last = name
        return name

    def build(self):
        return NetworkGraph(self.net_id, self.nodes, self.input_shape, self.output_len)


def cifarnet():
    """Three 5x5 convolutions and two fully-connected layers over 3x32x32 images.

    The second pooling layer keeps the 16x16 extent so that the third
    convolution also runs at 16x16 and the first FC layer reads 64x8x8 values.
    """
    b = _Builder("CifarNet", (3, 32, 32), 9)
    blk = (32, 32, 1)
    one = (1, 1, 1)
    b.add("conv1", "conv", ConvParams(3, 32, 5, 5, pad=2), launch=L(one, blk, 19, 40, 16))
    b.add("pool1", "pool", PoolParams(3, 2, "max", rounding="ceil"), launch=L(one, blk, 14, 60, 20))
    b.add("relu1", "relu")
    b.add("conv2", "conv", ConvParams(32, 32, 5, 5, pad=2), launch=L(one, blk, 21, 56, 16))
    b.add("relu2", "relu")
    b.add("pool2", "pool", PoolParams(3, 1, "average", pad=1), launch=L(one, blk, 8, 40, 4))
    b.add("conv3", "conv", ConvParams(32, 64, 5, 5, pad=2), launch=L(one, blk, 12, 40, 4))
    b.add("relu3", "relu")
    b.add("pool3", "pool", PoolParams(3, 2, "average", rounding="ceil"), launch=L(one, blk, 14, 60, 20))
    b.add("fc1", "fc", FcParams(64 * 8 * 8, 64), launch=L(one, (64, 1, 1), 19, 40, 16))
    b.add("fc2", "fc", FcParams(64, 9), launch=L(one, (32, 1, 1), 10, 60, 12))
    b.add("prob", "softmax")
    return b.build()


def alexnet():
    b = _Builder("AlexNet", (3, 227, 227), 1000)
    quads = [(32, 32, 1), (32, 23, 1), (23, 32, 1), (23, 23, 1)]
    b.add("conv1", "conv", ConvParams(3, 96, 11, 11, stride=4),
          launch=[L((96, 1, 1), q, 19, 56, 208) for q in quads])
    b.add("relu1", "relu")
    b.add("norm1", "lrn", LrnParams(), launch=[L((96, 1, 1), q, 13, 64, 308) for q in quads])
    b.add("pool1", "pool", PoolParams(3, 2, "max"), launch=L((96, 1, 1), (27, 27, 1), 12, 60, 204))
    b.add("conv2", "conv", ConvParams(96, 256, 5, 5, pad=2, groups=2),
          launch=[L((128, 1, 1), (27, 27, 1), 18, 80, 204)] * 2)
    b.add("relu2", "relu")
    b.add("norm2", "lrn", LrnParams(), launch=L((256, 1, 1), (27, 27, 1), 13, 60, 308))
    b.add("pool2", "pool", PoolParams(3, 2, "max"), launch=L((256, 1, 1), (13, 13, 1), 12, 60, 204))
    b.add("conv3", "conv", ConvParams(256, 384, 3, 3, pad=1), launch=L((384, 1, 1), (13, 13, 1), 18, 80, 204))
    b.add("relu3", "relu")
    b.add("conv4", "conv", ConvParams(384, 384, 3, 3, pad=1, groups=2),
          launch=[L((192, 1, 1), (13, 13, 1), 18, 80, 204), L((192, 1, 1), (13, 13, 1), 19, 80, 204)])
    b.add("relu4", "relu")
    b.add("conv5", "conv", ConvParams(384, 256, 3, 3, pad=1, groups=2),
          launch=[L((128, 1, 1), (13, 13, 1), 18, 80, 204), L((128, 1, 1), (13, 13, 1), 19, 80, 204)])
    b.add("relu5", "relu")
    b.add("pool5", "pool", PoolParams(3, 2, "max"), launch=L((256, 1, 1), (6, 6, 1), 12, 60, 204))
    b.add("fc6", "fc", FcParams(256 * 6 * 6, 4096), launch=L((4096, 1, 1), (1, 1, 1), 8, 58, 204))
    b.add("relu6", "relu")
    b.add("fc7", "fc", FcParams(4096, 4096), launch=L((4096, 1, 1), (1, 1, 1), 8, 58, 204))
    b.add("relu7", "relu")
    b.add("fc8", "fc", FcParams(4096, 1000), launch=L((1000, 1, 1), (1, 1, 1), 8, 58, 204))
    return b.build()


# (squeeze, expand1x1, expand3x3) per fire module of the v1.0 model
SQUEEZENET_FIRES = {
    "fire2": (16, 64, 64), "fire3": (16, 64, 64), "fire4": (32, 128, 128),
    "fire5": (32, 128, 128), "fire6": (48, 192, 192), "fire7": (48, 192, 192),
    "fire8": (64, 256, 256), "fire9": (64, 256, 256),
}

_SQUEEZENET_FIRE_LAUNCH = {
    "fire2": [(15, 40, 4), (13, 40, 0), (21, 40, 20)],
    "fire3": [(13, 40, 0), (13, 40, 0), (13, 40, 0)],
    "fire4": [(13, 40, 0), (12, 60, 12), (13, 40, 0)],
    "fire5": [(13, 40, 12), (21, 40, 20), (21, 40, 20)],
    "fire6": [(13, 40, 0), (21, 40, 20), (21, 40, 20)],
    "fire7": [(12, 60, 12), (21, 40, 20), (15, 40, 4)],
    "fire8": [(13, 40, 0), (13, 40, 0), (13, 40, 0)],
    "fire9": [(21, 40, 20), (13, 40, 0), (9, 32, 12)],
}


def squeezenet():
    b = _Builder("SqueezeNet", (3, 227, 227), 1000)

    def fire(name, cin, extent):
        s, e1, e3 = SQUEEZENET_FIRES[name]
        launch = [L((extent, 1, 1), (extent, 1, 1), *r) for r in _SQUEEZENET_FIRE_LAUNCH[name]]
        b.add(name, "fire", FireParams(cin, s, e1, e3), launch=launch)
        return e1 + e3

    b.add("conv1", "conv", ConvParams(3, 96, 7, 7, stride=2), launch=L((111, 1, 1), (111, 1, 1), 19, 56, 12))
    b.add("relu_conv1", "relu")
    b.add("pool1", "pool", PoolParams(3, 2, "max"), launch=L((111, 1, 1), (111, 1, 1), 21, 40, 20))
    c = fire("fire2", 96, 55)
    c = fire("fire3", c, 55)
    c = fire("fire4", c, 55)
    b.add("pool4", "pool", PoolParams(3, 2, "max"), launch=L((55, 1, 1), (55, 1, 1), 13, 40, 0))
    c = fire("fire5", c, 27)
    c = fire("fire6", c, 27)
    c = fire("fire7", c, 27)
    c = fire("fire8", c, 27)
    b.add("pool8", "pool", PoolParams(3, 2, "max"), launch=L((27, 1, 1), (27, 1, 1), 12, 60, 12))
    c = fire("fire9", c, 13)
    b.add("conv10", "conv", ConvParams(c, 1000, 1, 1, pad=1), launch=L((15, 1, 1), (15, 1, 1), 13, 40, 0))
    b.add("relu_conv10", "relu")
    b.add("pool10", "global_avg_pool", launch=L((1, 1, 1), (1000, 1, 1), 14, 40, 0))
    return b.build()


# launch rows recorded for the first 24 ResNet-50 layers, in declaration order
_RESNET_LAUNCH = [
    (64, 29, 76, 12), (64, 12, 52, 12), (64, 12, 52, 4), (64, 8, 32, 8), (64, 19, 68, 4),
    (256, 31, 84, 8), (256, 5, 48, 12), (256, 12, 52, 4),
    (64, 31, 84, 8), (64, 12, 52, 12), (64, 12, 52, 4), (64, 8, 32, 8),
    (64, 31, 84, 8), (64, 12, 52, 12), (64, 12, 52, 4), (64, 8, 32, 8),
    (256, 31, 84, 8), (256, 12, 52, 12), (256, 12, 52, 4), (256, 11, 48, 4), (256, 8, 32, 8),
    (64, 31, 84, 8), (64, 12, 52, 12), (64, 12, 52, 4),
]

RESNET50_STAGES = ((3, 64), (4, 128), (6, 256), (3, 512))


def resnet50():
    """Bottleneck ResNet-50: stem, (3, 4, 6, 3) blocks, global pool, FC, softmax.

    Downsampling blocks put the stride on the first 1x1 convolution of both
    the projection shortcut and the residual branch.
    """
    b = _Builder("ResNet50", (3, 224, 224), 1000)

    def conv_bn(tag, cin, cout, k, stride=1, pad=0, relu=True, inputs=None):
        conv = tag if tag == "conv1" else f"res{tag}"
        sep = "_" if tag == "conv1" else ""
        b.add(conv, "conv", ConvParams(cin, cout, k, k, stride=stride, pad=pad, rounding="floor"), inputs=inputs)
        b.add(f"bn{sep}{tag}", "batchnorm", BatchNormParams(cout))
        b.add(f"scale{sep}{tag}", "scale", ScaleParams(cout))
        if relu:
            b.add(f"{conv}_relu", "relu")
        return b.last

    conv_bn("conv1", 3, 64, 7, stride=2, pad=3)
    b.add("pool1", "pool", PoolParams(3, 2, "max", rounding="ceil"))
    x = b.last
    cin = 64
    for stage, (blocks, width) in enumerate(RESNET50_STAGES, start=2):
        cout = 4 * width
        for i in range(blocks):
            tag = f"{stage}{chr(ord('a') + i)}"
            stride = 2 if (i == 0 and stage > 2) else 1
            if i == 0:
                shortcut = conv_bn(f"{tag}_branch1", cin, cout, 1, stride=stride, relu=False, inputs=(x,))
            else:
                shortcut = x
            conv_bn(f"{tag}_branch2a", cin, width, 1, stride=stride, inputs=(x,))
            conv_bn(f"{tag}_branch2b", width, width, 3, pad=1)
            branch = conv_bn(f"{tag}_branch2c", width, cout, 1, relu=False)
            b.add(f"res{tag}", "eltwise", inputs=(shortcut, branch))
            x = b.add(f"res{tag}_relu", "relu")
            cin = cout
    b.add("pool5", "global_avg_pool")
    b.add("fc1000", "fc", FcParams(2048, 1000))
    b.add("prob", "softmax")

    for i, (grid_x, regs, smem, cmem) in enumerate(_RESNET_LAUNCH):
        n = b.nodes[i]
        b.nodes[i] = LayerDescriptor(n.name, n.kind, n.params, n.inputs,
                                     (L((grid_x, 1, 1), (32, 32, 1), regs, smem, cmem),))
    return b.build()


VGG16_CONFIG = ((2, 64), (2, 128), (3, 256), (3, 512), (3, 512))

# recorded rows cover conv1_1..conv5_2, pools 1-4, fc6 and fc8
_VGG_LAUNCH = {
    "conv1_1": ((16, 16, 64), (14, 14, 1), 15, 0, 72),
    "conv1_2": ((16, 16, 64), (14, 14, 1), 19, 0, 76),
    "pool1": ((8, 8, 64), (14, 14, 1), 13, 0, 56),
    "conv2_1": ((8, 8, 128), (14, 14, 1), 19, 0, 76),
    "conv2_2": ((8, 8, 128), (14, 14, 1), 19, 0, 76),
    "pool2": ((8, 8, 128), (7, 7, 1), 13, 0, 56),
    "conv3_1": ((8, 8, 256), (7, 7, 1), 19, 0, 76),
    "conv3_2": ((8, 8, 256), (7, 7, 1), 19, 0, 76),
    "conv3_3": ((8, 8, 256), (7, 7, 1), 19, 0, 76),
    "pool3": ((7, 7, 256), (4, 4, 1), 13, 0, 56),
    "conv4_1": ((7, 7, 512), (4, 4, 1), 19, 0, 76),
    "conv4_2": ((7, 7, 512), (4, 4, 1), 19, 0, 76),
    "conv4_3": ((7, 7, 512), (4, 4, 1), 19, 0, 76),
    "pool4": ((7, 7, 512), (2, 2, 1), 13, 0, 56),
    "conv5_1": ((7, 7, 512), (2, 2, 1), 19, 0, 76),
    "conv5_2": ((7, 7, 512), (2, 2, 1), 19, 0, 76),
    "fc6": ((4, 4, 4), (8, 8, 1), 11, 0, 77),
    "fc8": ((1, 1, 10), (10, 10, 1), 11, 0, 77),
}


def vgg16():
    """VGG configuration D: 13 3x3 convolutions, 5 max pools, 3 FC layers, softmax."""
    b = _Builder("VGG16", (3, 224, 224), 1000)

    def meta(name):
        row = _VGG_LAUNCH.get(name)
        return (L(*row),) if row else ()

    cin = 3
    for stage, (n, width) in enumerate(VGG16_CONFIG, start=1):
        for i in range(1, n + 1):
            name = f"conv{stage}_{i}"
            b.add(name, "conv", ConvParams(cin, width, 3, 3, pad=1), launch=meta(name))
            b.add(f"relu{stage}_{i}", "relu")
            cin = width
        b.add(f"pool{stage}", "pool", PoolParams(2, 2, "max"), launch=meta(f"pool{stage}"))
    b.add("fc6", "fc", FcParams(512 * 7 * 7, 4096), launch=meta("fc6"))
    b.add("relu6", "relu")
    b.add("fc7", "fc", FcParams(4096, 4096), launch=meta("fc7"))
    b.add("relu7", "relu")
    b.add("fc8", "fc", FcParams(4096, 1000), launch=meta("fc8"))
    b.add("prob", "softmax")
    return b.build()


RNN_HIDDEN = 100
RNN_STEPS = 2


def _rnn(kind, net_id, launch):
    b = _Builder(net_id, (RNN_STEPS, 1), 1)
    b.add(kind, kind, RnnParams(1, RNN_HIDDEN, RNN_STEPS), launch=launch)
    b.add("fc", "fc", FcParams(RNN_HIDDEN, 1))
    return b.build()


def lstm():
    """Two scaled prices in, one forecast out: LSTM(hidden 100) then FC(100 -> 1)."""
    return _rnn("lstm", "LSTM", L((1, 1, 1), (100, 1, 1), 22, 936, 60))


def gru():
    return _rnn("gru", "GRU", L((1, 1, 1), (10, 10, 1), 12, 504, 56))


_BUILDERS = {
    "cifarnet": cifarnet, "alexnet": alexnet, "squeezenet": squeezenet, "resnet50": resnet50,
    "vgg16": vgg16, "lstm": lstm, "gru": gru,
}


def canonical_id(name):
    key = name.lower().replace("-", "").replace("_", "")
    for net in NETWORKS:
        if net.lower() == key:
            return net
    aliases = {"resnet": "ResNet50", "vgg": "VGG16", "vggnet": "VGG16"}
    if key in aliases:
        return aliases[key]
    raise KeyError(f"unknown network {name!r}; choose from {', '.join(NETWORKS)}")


def build_network(name) -> NetworkGraph:
    return _BUILDERS[canonical_id(name).lower()]()
