"""On-disk TT format (binary, version 1) and its JSON mirror.

Binary layout, all integers unsigned 64-bit little-endian::

    bytes 0..3    magic b"TTR1"
    uint64        N
    uint64 x N    dims I_1 .. I_N
    uint64 x N+1  ranks R_0 .. R_N
    float64 x ... cores 1..N in order, each R_{n-1} x I_n x R_n in C order
                  (last index fastest), little-endian IEEE 754

Nothing follows the last core; trailing bytes are an error.
"""

from __future__ import annotations

import json
import os
import struct

import numpy as np

from .tt import TT

__all__ = ["MAGIC", "dumps", "loads", "save", "load", "to_json", "from_json", "save_json", "load_json"]

MAGIC = b"TTR1"
_U64 = struct.Struct("<Q")


def dumps(x: TT) -> bytes:
    parts = [MAGIC, _U64.pack(x.order)]
    parts += [_U64.pack(d) for d in x.dims]
    parts += [_U64.pack(r) for r in x.ranks]
    parts += [np.ascontiguousarray(c, dtype="<f8").tobytes() for c in x.cores]
    return b"".join(parts)


def loads(buf: bytes) -> TT:
    if buf[:4] != MAGIC:
        raise ValueError(f"bad magic {buf[:4]!r}; expected {MAGIC!r}")
    pos = 4

    def u64():
        nonlocal pos
        if pos + 8 > len(buf):
            raise ValueError("truncated TT header")
        (v,) = _U64.unpack_from(buf, pos)
        pos += 8
        return v

    N = u64()
    if N < 1 or N > 10_000:
        raise ValueError(f"implausible order {N}")
    dims = [u64() for _ in range(N)]
    ranks = [u64() for _ in range(N + 1)]
    cores = []
    for n in range(N):
        shape = (ranks[n], dims[n], ranks[n + 1])
        nbytes = 8 * shape[0] * shape[1] * shape[2]
        if pos + nbytes > len(buf):
            raise ValueError(f"truncated data in core {n + 1}")
        cores.append(np.frombuffer(buf, dtype="<f8", count=nbytes // 8, offset=pos).reshape(shape).astype(np.float64))
        pos += nbytes
    if pos != len(buf):
        raise ValueError(f"{len(buf) - pos} trailing bytes after last core")
    return TT(cores)


def save(x: TT, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(x))


def load(path: str | os.PathLike) -> TT:
    with open(path, "rb") as fh:
        return loads(fh.read())


def to_json(x: TT) -> str:
    """Human-readable mirror of the binary format; floats round-trip exactly."""
    doc = {
        "format": "TTR1",
        "dims": list(x.dims),
        "ranks": list(x.ranks),
        "cores": [c.tolist() for c in x.cores],
    }
    return json.dumps(doc)


def from_json(text: str) -> TT:
    doc = json.loads(text)
    if doc.get("format") != "TTR1":
        raise ValueError(f"unsupported format {doc.get('format')!r}")
    cores = [np.asarray(c, dtype=np.float64) for c in doc["cores"]]
    x = TT(cores)
    if list(x.dims) != list(doc["dims"]) or list(x.ranks) != list(doc["ranks"]):
        raise ValueError("header dims/ranks disagree with core shapes")
    return x


def save_json(x: TT, path) -> None:
    with open(path, "w") as fh:
        fh.write(to_json(x))


def load_json(path) -> TT:
    with open(path) as fh:
        return from_json(fh.read())
