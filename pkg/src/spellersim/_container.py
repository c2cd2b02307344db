"""Deterministic binary container for model artifacts.

Layout: 4-byte magic, u16 format version, u16 reserved, u32 header length,
UTF-8 JSON header, then raw C-order array bytes in the order the header
lists them. The JSON header is rendered with sorted keys and no whitespace,
and arrays are stored sorted by name, so identical inputs produce identical
bytes (no timestamps, no dict-order dependence).
"""
from __future__ import annotations

import json
import struct

import numpy as np

_MAGIC = b"SSMC"
_VERSION = 1
_PREFIX = struct.Struct("<4sHHI")


def save_container(path, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    specs = []
    blobs = []
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        if arr.dtype.byteorder == ">":
            arr = arr.astype(arr.dtype.newbyteorder("<"))
        specs.append({"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape)})
        blobs.append(arr.tobytes())
    header = json.dumps(
        {"meta": meta, "arrays": specs}, sort_keys=True, separators=(",", ":")
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(_MAGIC, _VERSION, 0, len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_container(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        magic, version, _, header_len = _PREFIX.unpack(fh.read(_PREFIX.size))
        if magic != _MAGIC:
            raise ValueError("not a model container (bad magic)")
        if version != _VERSION:
            raise ValueError(f"unsupported container version {version}")
        header = json.loads(fh.read(header_len).decode("utf-8"))
        arrays = {}
        for spec in header["arrays"]:
            dtype = np.dtype(spec["dtype"])
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(count * dtype.itemsize)
            arrays[spec["name"]] = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
    return header["meta"], arrays
