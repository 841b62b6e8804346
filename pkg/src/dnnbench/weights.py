"""Per-layer weight files, synthetic weights and parameter accounting.

On-disk format: one headerless file per parameterized layer holding its arrays
as little-endian float32, concatenated in declared order (weights, bias, then
auxiliaries), plus ``manifest.json``::

    {"format": "dnnbench-weights", "version": 1, "network": "AlexNet",
     "provenance": {"kind": "synthetic", "seed": 42},
     "layers": [{"name": "conv1", "kind": "conv", "file": "000_conv1.bin",
                 "bytes": 139776, "sha256": "...",
                 "arrays": [{"role": "weights", "shape": [96, 3, 11, 11], "offset": 0},
                            {"role": "bias", "shape": [96], "offset": 139392}]}]}

Conv weights are ordered (out-channel, in-channel, kernel-row, kernel-col).
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import PersistenceError, WeightError
from .graph import NetworkGraph, check_store
from .tensor import DTYPE, ITEMSIZE

FORMAT = "dnnbench-weights"
VERSION = 1
MANIFEST = "manifest.json"
FILE_DTYPE = np.dtype("<f4")

SYNTHETIC_RANGE = (-0.05, 0.05)
VARIANCE_RANGE = (0.5, 1.5)


@dataclass
class WeightBlob:
    layer: str
    kind: str
    arrays: dict  # role -> float32 ndarray, in file order

    @property
    def nbytes(self):
        return sum(a.size for a in self.arrays.values()) * ITEMSIZE

    def payload(self) -> bytes:
        return b"".join(np.asarray(a, dtype=FILE_DTYPE).tobytes() for a in self.arrays.values())


@dataclass
class WeightStore:
    network: str
    blobs: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    @property
    def nbytes(self):
        return sum(b.nbytes for b in self.blobs.values())

    def equals(self, other) -> bool:
        """Bit-exact comparison of every array (NaN payloads included)."""
        if self.network != other.network or list(self.blobs) != list(other.blobs):
            return False
        for name, blob in self.blobs.items():
            ob = other.blobs[name]
            if blob.kind != ob.kind or list(blob.arrays) != list(ob.arrays):
                return False
            for role, a in blob.arrays.items():
                b = ob.arrays[role]
                if a.shape != b.shape or a.tobytes() != b.tobytes():
                    return False
        return True


@dataclass
class ManifestEntry:
    name: str
    kind: str
    file: str
    bytes: int
    sha256: str
    arrays: list  # [{"role", "shape", "offset"}]


@dataclass
class Manifest:
    network: str
    layers: list
    provenance: dict = field(default_factory=dict)
    version: int = VERSION

    def to_dict(self):
        return {
            "format": FORMAT,
            "version": self.version,
            "network": self.network,
            "provenance": self.provenance,
            "layers": [asdict(e) for e in self.layers],
        }

    def checksums(self):
        return {e.name: e.sha256 for e in self.layers}


def _file_name(index, layer):
    return f"{index:03d}_{re.sub(r'[^A-Za-z0-9_.-]', '_', layer)}.bin"


def write_store(store: WeightStore, directory) -> Manifest:
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        entries = []
        for i, (name, blob) in enumerate(store.blobs.items()):
            payload = blob.payload()
            fname = _file_name(i, name)
            (directory / fname).write_bytes(payload)
            offsets, off = [], 0
            for role, a in blob.arrays.items():
                offsets.append({"role": role, "shape": list(a.shape), "offset": off})
                off += a.size * ITEMSIZE
            entries.append(ManifestEntry(name, blob.kind, fname, len(payload),
                                         hashlib.sha256(payload).hexdigest(), offsets))
        manifest = Manifest(store.network, entries, dict(store.provenance))
        text = json.dumps(manifest.to_dict(), indent=2) + "\n"
        (directory / MANIFEST).write_text(text, encoding="utf-8")
    except OSError as e:
        raise PersistenceError(f"cannot write weight store to {directory}: {e}") from e
    return manifest


def read_manifest(path) -> Manifest:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise PersistenceError(f"manifest not found: {path}") from e
    except (OSError, ValueError) as e:
        raise PersistenceError(f"cannot read manifest {path}: {e}") from e
    if doc.get("format") != FORMAT or doc.get("version") != VERSION:
        raise PersistenceError(f"unsupported manifest format {doc.get('format')!r} version {doc.get('version')!r}")
    try:
        layers = [ManifestEntry(**e) for e in doc["layers"]]
        return Manifest(doc["network"], layers, doc.get("provenance", {}), doc["version"])
    except (KeyError, TypeError) as e:
        raise PersistenceError(f"malformed manifest {path}: {e}") from e


def load_store(manifest_path, g: NetworkGraph) -> WeightStore:
    """Load a store written by :func:`write_store` and check it against ``g``."""
    manifest_path = Path(manifest_path)
    root = manifest_path if manifest_path.is_dir() else manifest_path.parent
    manifest = read_manifest(manifest_path)
    entries = {e.name: e for e in manifest.layers}
    expected = {n.name: n for n in g.nodes if n.has_params}
    orphans = [name for name in entries if name not in expected]
    if orphans:
        raise WeightError(orphans[0], f"manifest entry has no matching layer in {g.id}")

    store = WeightStore(g.id, provenance={"kind": "imported", "path": str(root)})
    for name, node in expected.items():
        entry = entries.get(name)
        if entry is None:
            raise WeightError(name, "missing from manifest")
        wanted = node.param_arrays()
        declared = [(a["role"], tuple(a["shape"])) for a in entry.arrays]
        if declared != [(r, tuple(s)) for r, s in wanted]:
            raise WeightError(name, f"manifest arrays {declared} do not match layer arrays {wanted}")
        size = sum(math.prod(s) for _, s in wanted) * ITEMSIZE
        path = root / entry.file
        try:
            raw = path.read_bytes()
        except FileNotFoundError as e:
            raise PersistenceError(f"{name}: weight file {path} is missing") from e
        except OSError as e:
            raise PersistenceError(f"{name}: cannot read {path}: {e}") from e
        if len(raw) != size or entry.bytes != size:
            raise WeightError(name, f"size mismatch: file has {len(raw)} bytes, layer needs {size}")
        if entry.sha256 and hashlib.sha256(raw).hexdigest() != entry.sha256:
            raise WeightError(name, "checksum mismatch")
        flat = np.frombuffer(raw, dtype=FILE_DTYPE)
        arrays, off = {}, 0
        for role, shape in wanted:
            n = math.prod(shape)
            arrays[role] = flat[off:off + n].astype(DTYPE).reshape(shape)
            off += n
        store.blobs[name] = WeightBlob(name, node.kind, arrays)
    check_store(g, store)
    return store


def _uniform(rng, shape, lo, hi):
    # float32 arithmetic keeps values inside [lo, hi] after rounding
    u = rng.random(math.prod(shape), dtype=np.float32)
    return (u * DTYPE(hi - lo) + DTYPE(lo)).reshape(shape)


def generate_synthetic(g: NetworkGraph, seed: int) -> WeightStore:
    """Seeded weights from numpy's PCG64 generator.

    Arrays are drawn in declaration order from a single stream, so the payload
    depends only on the sequence of array shapes and the seed. Values are
    uniform in [-0.05, 0.05]; batchnorm variances are uniform in [0.5, 1.5].
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    store = WeightStore(g.id, provenance={"kind": "synthetic", "seed": int(seed)})
    for node in g.nodes:
        wanted = node.param_arrays()
        if not wanted:
            continue
        arrays = {}
        for role, shape in wanted:
            lo, hi = VARIANCE_RANGE if (node.kind == "batchnorm" and role == "var") else SYNTHETIC_RANGE
            arrays[role] = _uniform(rng, shape, lo, hi)
        store.blobs[node.name] = WeightBlob(node.name, node.kind, arrays)
    return store


def zero_store(g: NetworkGraph) -> WeightStore:
    """All-zero weights (batchnorm variances set to one)."""
    store = WeightStore(g.id, provenance={"kind": "zeros"})
    for node in g.nodes:
        wanted = node.param_arrays()
        if wanted:
            arrays = {role: (np.ones(shape, DTYPE) if role == "var" else np.zeros(shape, DTYPE))
                      for role, shape in wanted}
            store.blobs[node.name] = WeightBlob(node.name, node.kind, arrays)
    return store


@dataclass
class ParameterCount:
    per_layer: dict
    total: int


def layer_parameters(node) -> int:
    p = node.params
    k = node.kind
    if k == "conv":
        return p.out_channels * (p.in_channels // p.groups) * p.kernel_h * p.kernel_w + p.out_channels
    if k == "fc":
        return p.out_features * p.in_features + p.out_features
    if k in ("batchnorm", "scale"):
        return 2 * p.channels
    if k == "fire":
        total = 0
        for cin, cout, kk in ((p.in_channels, p.squeeze, 1), (p.squeeze, p.expand1x1, 1),
                              (p.squeeze, p.expand3x3, 3)):
            total += cout * cin * kk * kk + cout
        return total
    if k in ("lstm", "gru"):
        gates = 4 if k == "lstm" else 3
        return gates * (p.hidden_dim * p.input_dim + p.hidden_dim * p.hidden_dim + p.hidden_dim)
    return 0


def count_parameters(g: NetworkGraph) -> ParameterCount:
    per_layer = {n.name: layer_parameters(n) for n in g.nodes if layer_parameters(n)}
    return ParameterCount(per_layer, sum(per_layer.values()))


def directory_digest(directory) -> str:
    """SHA-256 over every file name and content in ``directory`` (sorted)."""
    h = hashlib.sha256()
    for name in sorted(os.listdir(directory)):
        h.update(name.encode())
        h.update(Path(directory, name).read_bytes())
    return h.hexdigest()
