"""Binary model container.

Layout (all integers little-endian)::

    offset  size  field
    0       4     magic b"GGNN"
    4       2     format version (uint16)
    6       2     weights version (uint16)
    8       4     spec length S in bytes (uint32)
    12      S     spec, canonical JSON, UTF-8
    12+S    ...   weight blocks: for each layer in order, for each parameter
                  in the fixed order kernel, bias, gain, shift, running_mean,
                  running_var (those present), raw float32 little-endian
    end-4   4     CRC-32 of every preceding byte (uint32)

Block sizes are implied by the model spec, so no per-block headers are stored.
"""

from __future__ import annotations

import math
import struct
import zlib
from pathlib import Path

import numpy as np

from gesturegate.errors import ModelError, ModelFormatError
from gesturegate.nn.model import WEIGHTS_VERSION, ModelWeights
from gesturegate.nn.spec import ModelSpec, param_shapes

MAGIC = b"GGNN"
FORMAT_VERSION = 1
PARAM_ORDER = ("kernel", "bias", "gain", "shift", "running_mean", "running_var")
_HEADER = struct.Struct("<4sHHI")
_LE_F32 = np.dtype("<f4")


def serialize(spec: ModelSpec, w: ModelWeights) -> bytes:
    w.check(spec)
    text = spec.to_json().encode("utf-8")
    parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, w.version, len(text)), text]
    for block in w.blocks:
        for name in PARAM_ORDER:
            if name in block:
                parts.append(np.ascontiguousarray(block[name], dtype=_LE_F32).tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def deserialize(payload: bytes) -> tuple[ModelSpec, ModelWeights]:
    if len(payload) < _HEADER.size + 4:
        raise ModelFormatError(f"model payload truncated ({len(payload)} bytes)")
    body, (crc,) = payload[:-4], struct.unpack("<I", payload[-4:])
    magic, fmt, wver, spec_len = _HEADER.unpack_from(body)
    if magic != MAGIC:
        raise ModelFormatError(f"bad magic {magic!r}")
    if fmt != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {fmt} (expected {FORMAT_VERSION})")
    if wver != WEIGHTS_VERSION:
        raise ModelFormatError(f"unsupported weights version {wver} (expected {WEIGHTS_VERSION})")
    if zlib.crc32(body) != crc:
        raise ModelFormatError("checksum mismatch: model file is corrupt")
    offset = _HEADER.size
    try:
        spec = ModelSpec.from_json(body[offset : offset + spec_len].decode("utf-8"))
    except Exception as exc:  # malformed spec text
        raise ModelFormatError(f"unreadable model spec: {exc}") from exc
    offset += spec_len

    blocks = []
    for shapes in param_shapes(spec):
        block = {}
        for name in PARAM_ORDER:
            if name not in shapes:
                continue
            n = math.prod(shapes[name])
            end = offset + 4 * n
            if end > len(body):
                raise ModelFormatError("model payload truncated inside weight blocks")
            block[name] = np.frombuffer(body, _LE_F32, n, offset).astype(np.float32).reshape(shapes[name])
            offset = end
        blocks.append(block)
    if offset != len(body):
        raise ModelFormatError(f"{len(body) - offset} trailing bytes after weight blocks")
    w = ModelWeights(blocks, wver)
    w.check(spec)
    return spec, w


def save_model(path, spec: ModelSpec, w: ModelWeights) -> int:
    data = serialize(spec, w)
    Path(path).write_bytes(data)
    return len(data)


def load_model(path) -> tuple[ModelSpec, ModelWeights]:
    try:
        payload = Path(path).read_bytes()
    except OSError as exc:
        raise ModelError(f"cannot read model file {path}: {exc.strerror or exc}") from exc
    return deserialize(payload)
