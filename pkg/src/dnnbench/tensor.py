"""Dense float32 tensors in channel-major (C, H, W) layout.

Tensors are plain ``numpy.ndarray`` objects with dtype float32 and C order, so
the flat buffer of a (C, H, W) tensor is exactly channel-major row-major. The
helpers here validate shapes, fix the indexing convention every kernel relies
on, and report allocations to any active :class:`AllocationAccountant`.
"""

from __future__ import annotations

import contextlib
import contextvars
import math

import numpy as np

from .errors import ShapeError, TensorIndexError

DTYPE = np.float32
ITEMSIZE = 4
MAX_ELEMENTS = 2**31

_accountants = contextvars.ContextVar("accountants", default=())


def check_shape(dims) -> tuple:
    """Validate ``dims`` and return it as a tuple of ints.

    A shape has one to three positive extents: (N), (C, H, W) or anything in
    between, with at most 2**31 elements.
    """
    try:
        dims = tuple(int(d) for d in dims)
    except TypeError:
        dims = (int(dims),)
    if not 1 <= len(dims) <= 3:
        raise ShapeError(f"shape {dims} must have rank 1..3")
    if any(d < 1 for d in dims):
        raise ShapeError(f"shape {dims} has a non-positive extent")
    if math.prod(dims) > MAX_ELEMENTS:
        raise ShapeError(f"shape {dims} exceeds {MAX_ELEMENTS} elements")
    return dims


def element_count(shape) -> int:
    return math.prod(check_shape(shape))


def nbytes(shape) -> int:
    return ITEMSIZE * element_count(shape)


class AllocationAccountant:
    """Collects the byte size of every tensor created through :func:`new_tensor`."""

    def __init__(self):
        self.allocations = []

    @property
    def total_bytes(self):
        return sum(self.allocations)

    def record(self, n):
        self.allocations.append(n)


@contextlib.contextmanager
def track_allocations():
    acct = AllocationAccountant()
    token = _accountants.set(_accountants.get() + (acct,))
    try:
        yield acct
    finally:
        _accountants.reset(token)


def _report(n):
    for acct in _accountants.get():
        acct.record(n)


def new_tensor(shape, fill="zeros") -> np.ndarray:
    """Allocate a float32 tensor.

    ``fill`` is ``"zeros"``, a real constant, or a buffer (anything
    ``numpy.asarray`` accepts) whose length must equal the element count.
    """
    dims = check_shape(shape)
    count = math.prod(dims)
    if isinstance(fill, str):
        if fill != "zeros":
            raise ValueError(f"unknown fill {fill!r}")
        out = np.zeros(dims, dtype=DTYPE)
    elif np.isscalar(fill):
        out = np.full(dims, fill, dtype=DTYPE)
    else:
        buf = np.asarray(fill, dtype=DTYPE).reshape(-1)
        if buf.size != count:
            raise ShapeError(f"buffer of length {buf.size} does not fill shape {dims} ({count} elements)")
        out = buf.reshape(dims).copy()
    _report(out.nbytes)
    return out


def as_tensor(x) -> np.ndarray:
    """View ``x`` as a contiguous float32 array, copying only when needed."""
    arr = np.ascontiguousarray(x, dtype=DTYPE)
    check_shape(arr.shape)
    return arr


def flat_index(shape, c, y, x) -> int:
    """Offset of element (c, y, x) in a channel-major (C, H, W) buffer."""
    C, H, W = _chw(shape)
    if not (0 <= c < C and 0 <= y < H and 0 <= x < W):
        raise TensorIndexError(f"index ({c}, {y}, {x}) out of range for shape {(C, H, W)}")
    return (c * H + y) * W + x


def _chw(shape):
    dims = check_shape(shape)
    return (1,) * (3 - len(dims)) + dims


def concat_channels(a, b) -> np.ndarray:
    """Stack ``b``'s channels after ``a``'s; spatial extents must agree."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 3 or b.ndim != 3 or a.shape[1:] != b.shape[1:]:
        raise ShapeError(f"cannot concatenate {a.shape} and {b.shape} along channels")
    out = new_tensor((a.shape[0] + b.shape[0],) + a.shape[1:])
    out[: a.shape[0]] = a
    out[a.shape[0]:] = b
    return out
