"""Binary weight container.

Layout::

    b"GCFS" | version: u32 LE | header_len: u64 LE | header: UTF-8 JSON | payload

The header lists tensors as ``{name, shape, bits, byte_offset}``; offsets are
relative to the start of the payload, which holds little-endian float32
arrays in declared order. Tensors shared between the two sides are stored
once under ``shared/...`` and each side refers to them with an entry carrying
``shared_alias`` instead of ``byte_offset``.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..features import Mode
from .weights import SIDES, FormatError, ModelHyperparams, ModelWeights, QuantizedTensor, is_shared

MAGIC = b"GCFS"
VERSION = 1
_PREFIX = struct.Struct("<4sIQ")


def to_bytes(weights: ModelWeights) -> bytes:
    entries, chunks, offset = [], [], 0
    stored = {}
    for side in SIDES:
        for key, t in sorted(weights.side(side).items()):
            if is_shared(key):
                alias = f"shared/{key}"
                if alias not in stored:
                    stored[alias] = t
                entries.append({"name": f"{side}/{key}", "shape": list(t.shape), "bits": t.bits,
                                "shared_alias": alias})
            else:
                stored[f"{side}/{key}"] = t
    payload_entries = []
    for name, t in stored.items():
        data = np.ascontiguousarray(t.values, dtype="<f4").tobytes()
        payload_entries.append({"name": name, "shape": list(t.shape), "bits": t.bits, "byte_offset": offset})
        chunks.append(data)
        offset += len(data)
    header = {
        "kind": weights.kind,
        "mode": weights.mode.value,
        "hyperparams": {k: getattr(weights.hp, k) for k in ("P", "U", "G", "K", "B", "M", "F", "post_taps")},
        "tensors": payload_entries + entries,
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    return _PREFIX.pack(MAGIC, VERSION, len(hbytes)) + hbytes + b"".join(chunks)


def from_bytes(blob: bytes) -> ModelWeights:
    if len(blob) < _PREFIX.size:
        raise FormatError("file too short for a weight container")
    magic, version, hlen = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported container version {version}")
    start = _PREFIX.size + hlen
    if start > len(blob):
        raise FormatError("truncated header")
    try:
        header = json.loads(blob[_PREFIX.size:start].decode("utf-8"))
        hp = ModelHyperparams(**header["hyperparams"])
        weights = ModelWeights(hp, Mode(header["mode"]), kind=header.get("kind", "gcfs"))
        entries = header["tensors"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"invalid header: {exc}") from exc

    payload = memoryview(blob)[start:]
    physical = {}
    for e in entries:
        if "shared_alias" in e:
            continue
        shape = tuple(e["shape"])
        n = int(np.prod(shape, dtype=np.int64))
        off = int(e["byte_offset"])
        if off < 0 or off + 4 * n > len(payload):
            raise FormatError(f"tensor {e['name']!r} extends past the payload")
        vals = np.frombuffer(payload, dtype="<f4", count=n, offset=off).astype(np.float64)
        t = QuantizedTensor(e["name"], shape, int(e["bits"]), vals)
        t.validate()
        physical[e["name"]] = t
    for e in entries:
        name = e["name"]
        if "shared_alias" in e:
            t = physical.get(e["shared_alias"])
            if t is None:
                raise FormatError(f"{name!r} refers to missing shared tensor {e['shared_alias']!r}")
        elif name.startswith("shared/"):
            continue
        else:
            t = physical[name]
        side, _, key = name.partition("/")
        if side not in SIDES:
            raise FormatError(f"tensor {name!r} has no side prefix")
        weights.side(side)[key] = t
    weights.validate()
    return weights


def save_weights(weights: ModelWeights, path) -> None:
    Path(path).write_bytes(to_bytes(weights))


def load_weights(path) -> ModelWeights:
    return from_bytes(Path(path).read_bytes())
