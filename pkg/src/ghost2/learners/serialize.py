"""Binary model files.

Layout: ``GH2M`` magic, one version byte, a little-endian uint32 header
length, a UTF-8 JSON header, then the raw little-endian array bytes in
header order. Arrays round-trip bit-for-bit.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from ..dataset import NormParams
from ..errors import ModelFormatError
from .base import Model

MAGIC = b"GH2M"
VERSION = 1


def _plain(value):
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def dump_model(model: Model) -> bytes:
    arrays = dict(model.params)
    if model.norm is not None:
        arrays["__norm_min"] = model.norm.minimum
        arrays["__norm_max"] = model.norm.maximum
    entries, blobs = [], []
    for name in sorted(arrays):
        a = np.ascontiguousarray(arrays[name])
        le = a.astype(a.dtype.newbyteorder("<"), copy=False)
        entries.append({"name": name, "dtype": le.dtype.str, "shape": list(a.shape)})
        blobs.append(le.tobytes())
    header = {
        "kind": model.kind,
        "n_features": model.n_features,
        "config": _plain(model.config),
        "meta": _plain(model.meta),
        "arrays": entries,
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    return MAGIC + bytes([VERSION]) + struct.pack("<I", len(head)) + head + b"".join(blobs)


def load_model(blob: bytes) -> Model:
    if blob[:4] != MAGIC:
        raise ModelFormatError("not a ghost2 model file (bad magic)")
    if blob[4] != VERSION:
        raise ModelFormatError(f"unsupported model format version {blob[4]}")
    (size,) = struct.unpack("<I", blob[5:9])
    header = json.loads(blob[9:9 + size].decode())
    pos = 9 + size
    arrays = {}
    for entry in header["arrays"]:
        dtype = np.dtype(entry["dtype"])
        count = int(np.prod(entry["shape"], dtype=np.int64))
        nbytes = count * dtype.itemsize
        if pos + nbytes > len(blob):
            raise ModelFormatError("model file is truncated")
        arrays[entry["name"]] = np.frombuffer(blob[pos:pos + nbytes], dtype=dtype).reshape(entry["shape"]).copy()
        pos += nbytes
    norm = None
    if "__norm_min" in arrays:
        norm = NormParams(arrays.pop("__norm_min"), arrays.pop("__norm_max"))
    return Model(header["kind"], arrays, header["config"], header["n_features"], header["meta"], norm)


def write_model(model: Model, path) -> None:
    Path(path).write_bytes(dump_model(model))


def read_model(path) -> Model:
    return load_model(Path(path).read_bytes())


def model_digest(model: Model) -> str:
    return hashlib.sha256(dump_model(model)).hexdigest()
