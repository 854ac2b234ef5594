"""Named-tensor checkpoint container.

Layout (little-endian)::

    magic   b"ZSCK"
    version u8
    header  u32 length + UTF-8 JSON
    count   u32
    per tensor:
        name   u16 length + UTF-8
        ndim   u8, then ndim x u32 dims
        values float64, row-major
"""

import json
import struct

import numpy as np

MAGIC = b"ZSCK"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def dumps(tensors, header=None):
    parts = [MAGIC, struct.pack("<B", FORMAT_VERSION)]
    blob = json.dumps(header or {}, sort_keys=True).encode("utf-8")
    parts.append(struct.pack("<I", len(blob)))
    parts.append(blob)
    parts.append(struct.pack("<I", len(tensors)))
    for name, value in tensors.items():
        value = np.ascontiguousarray(value, dtype="<f8")
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<B", value.ndim))
        parts.append(struct.pack(f"<{value.ndim}I", *value.shape))
        parts.append(value.tobytes(order="C"))
    return b"".join(parts)


def loads(buf):
    if buf[:4] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    (version,) = struct.unpack_from("<B", buf, 4)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    pos = 5
    tensors = {}
    try:
        (hlen,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        header = json.loads(buf[pos:pos + hlen].decode("utf-8"))
        pos += hlen
        (count,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", buf, pos)
            pos += 2
            name = buf[pos:pos + nlen].decode("utf-8")
            pos += nlen
            (ndim,) = struct.unpack_from("<B", buf, pos)
            pos += 1
            shape = struct.unpack_from(f"<{ndim}I", buf, pos)
            pos += 4 * ndim
            n = int(np.prod(shape)) if ndim else 1
            values = np.frombuffer(buf, dtype="<f8", count=n, offset=pos)
            pos += 8 * n
            tensors[name] = values.reshape(shape).astype(np.float64)
    except (struct.error, ValueError) as exc:
        raise CheckpointError(f"truncated or corrupt checkpoint: {exc}") from exc
    if pos != len(buf):
        raise CheckpointError(f"{len(buf) - pos} trailing bytes after last tensor")
    return tensors, header


def save(path, tensors, header=None):
    with open(path, "wb") as fh:
        fh.write(dumps(tensors, header))


def load(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
