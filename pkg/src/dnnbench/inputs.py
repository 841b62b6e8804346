"""Input decoding: binary PPM images, raw float32 tensors and inline price pairs."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError
from .tensor import DTYPE, element_count

INPUT_KINDS = ("raw_f32", "ppm_image", "price_pair", "generated")


@dataclass
class InputSpec:
    kind: str
    path: str = None
    values: tuple = ()
    mean: tuple = ()  # per-channel means subtracted after scaling to [0, 1]
    seed: int = 0

    def describe(self):
        d = {"kind": self.kind}
        if self.path:
            d["path"] = str(self.path)
        if self.values:
            d["values"] = list(self.values)
        if self.mean:
            d["preprocessing"] = {"mean_subtract": list(self.mean)}
        if self.kind == "generated":
            d["seed"] = self.seed
        return d


def _ppm_tokens(data: bytes, count: int):
    """Read ``count`` whitespace-separated header fields, skipping ``#`` comments."""
    tokens, i = [], 0
    while len(tokens) < count:
        while i < len(data) and data[i:i + 1].isspace():
            i += 1
        if i >= len(data):
            raise InputError("truncated PPM header")
        if data[i:i + 1] == b"#":
            while i < len(data) and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < len(data) and not data[j:j + 1].isspace():
            j += 1
        tokens.append(data[i:j])
        i = j
    return tokens, i + 1  # exactly one whitespace byte separates header and raster


def decode_ppm(data: bytes):
    """Decode an 8-bit binary (P6) PPM into a float32 CHW array in [0, 1]."""
    tokens, start = _ppm_tokens(data, 4)
    if tokens[0] != b"P6":
        raise InputError(f"not a binary PPM (magic {tokens[0][:8]!r}, expected b'P6')")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError as e:
        raise InputError(f"bad PPM header: {e}") from e
    if w <= 0 or h <= 0 or not 0 < maxval < 256:
        raise InputError(f"unsupported PPM geometry {w}x{h} maxval {maxval} (8-bit only)")
    raster = data[start:start + 3 * w * h]
    if len(raster) != 3 * w * h:
        raise InputError(f"PPM raster truncated: {len(raster)} of {3 * w * h} bytes")
    px = np.frombuffer(raster, dtype=np.uint8).reshape(h, w, 3)
    return (px.transpose(2, 0, 1).astype(DTYPE) / DTYPE(maxval)).copy()


def encode_ppm(chw) -> bytes:
    """Inverse of :func:`decode_ppm` for arrays in [0, 1] (used to make fixtures)."""
    a = np.clip(np.rint(np.asarray(chw) * 255.0), 0, 255).astype(np.uint8)
    c, h, w = a.shape
    if c != 3:
        raise InputError("PPM needs 3 channels")
    return f"P6\n{w} {h}\n255\n".encode() + a.transpose(1, 2, 0).tobytes()


def parse_prices(text: str):
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError as e:
        raise InputError(f"--prices expects comma-separated numbers: {e}") from e
    if len(values) != 2:
        raise InputError(f"price input needs exactly 2 values (past two days), got {len(values)}")
    return values


def parse_mean(text: str):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError as e:
        raise InputError(f"--mean expects comma-separated numbers: {e}") from e


def load_input(spec: InputSpec, shape) -> np.ndarray:
    """Materialize ``spec`` as a float32 tensor of ``shape`` or raise InputError."""
    shape = tuple(shape)
    if spec.kind == "price_pair":
        if len(spec.values) != 2:
            raise InputError(f"price input needs exactly 2 values, got {len(spec.values)}")
        x = np.asarray(spec.values, dtype=DTYPE).reshape(2, 1)
    elif spec.kind == "generated":
        rng = np.random.Generator(np.random.PCG64(spec.seed))
        x = rng.random(element_count(shape), dtype=DTYPE).reshape(shape)
    else:
        try:
            data = Path(spec.path).read_bytes()
        except (OSError, TypeError) as e:
            raise InputError(f"cannot read input {spec.path}: {e}") from e
        if spec.kind == "ppm_image":
            x = decode_ppm(data)
        elif spec.kind == "raw_f32":
            if len(data) % 4:
                raise InputError(f"raw input length {len(data)} is not a multiple of 4")
            x = np.frombuffer(data, dtype="<f4").astype(DTYPE)
            if x.size != element_count(shape):
                raise InputError(f"raw input has {x.size} values, network expects {element_count(shape)}")
            x = x.reshape(shape)
        else:
            raise InputError(f"unknown input kind {spec.kind!r}")
    if x.shape != shape:
        raise InputError(f"input shape {x.shape} does not match network input {shape}")
    if spec.mean:
        if len(spec.mean) != shape[0]:
            raise InputError(f"{len(spec.mean)} means given for {shape[0]} channels")
        x = x - np.asarray(spec.mean, dtype=DTYPE).reshape((-1,) + (1,) * (len(shape) - 1))
    if not np.all(np.isfinite(x)):
        raise InputError("input contains non-finite values")
    return np.ascontiguousarray(x, dtype=DTYPE)


def infer_kind(path) -> str:
    p = str(path).lower()
    return "ppm_image" if p.endswith((".ppm", ".pnm")) else "raw_f32"


__all__ = ["INPUT_KINDS", "InputSpec", "decode_ppm", "encode_ppm", "infer_kind", "load_input",
           "parse_mean", "parse_prices"]
