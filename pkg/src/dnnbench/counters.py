"""Operation counters attached to every layer kernel.

Counts are semantic, not instruction-level: one ``mad`` per multiply-accumulate,
one ``max_cmp`` per comparison, and so on. Index arithmetic is never counted.
``load`` counts activation elements a kernel reads (each distinct element once)
and ``store`` counts elements it writes; parameter reads show up only in
``bytes_read``, which counts every tap access.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class OpCategory(str, enum.Enum):
    ADD = "add"
    MUL = "mul"
    MAD = "mad"
    MAX_CMP = "max_cmp"
    DIV = "div"
    EXP_TANH = "exp_tanh"
    LOAD = "load"
    STORE = "store"


CATEGORIES = tuple(OpCategory)
ARITHMETIC = tuple(c for c in OpCategory if c not in (OpCategory.LOAD, OpCategory.STORE))


@dataclass
class OpCounter:
    counts: dict = field(default_factory=lambda: dict.fromkeys(CATEGORIES, 0))
    bytes_read: int = 0
    bytes_written: int = 0

    def add(self, category, n=1):
        self.counts[OpCategory(category)] += int(n)

    def tally(self, **kw):
        for name, n in kw.items():
            self.add(name, n)

    def io(self, read=0, written=0):
        self.bytes_read += int(read)
        self.bytes_written += int(written)

    def merge(self, other):
        for cat in CATEGORIES:
            self.counts[cat] += other.counts[cat]
        self.bytes_read += other.bytes_read
        self.bytes_written += other.bytes_written
        return self

    def arithmetic(self):
        return sum(self.counts[c] for c in ARITHMETIC)

    def total(self):
        return sum(self.counts.values())

    def as_dict(self):
        return {c.value: self.counts[c] for c in CATEGORIES}

    def __getitem__(self, category):
        return self.counts[OpCategory(category)]


def merge_all(counters):
    out = OpCounter()
    for c in counters:
        out.merge(c)
    return out


@dataclass
class ProfileRecord:
    """Measurements for one executed layer (or fire-module stage)."""

    layer: str
    layer_type: str
    wall_ns: int
    counter: OpCounter

    @property
    def bytes_read(self):
        return self.counter.bytes_read

    @property
    def bytes_written(self):
        return self.counter.bytes_written
