"""Binary tensor container and JSON sidecars.

Layout (little-endian)::

    b"GLTN"  u32 version=1  u8 dtype  u32 rank  rank x u32 dims  payload

with dtype codes 0 = float32, 1 = float64, 2 = int64 and a row-major payload.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct

import numpy as np

from .errors import ParseError

MAGIC = b"GLTN"
VERSION = 1
DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("<i8")}
CODES = {np.dtype("float32"): 0, np.dtype("float64"): 1, np.dtype("int64"): 2}


def encode_tensor(array):
    a = np.asarray(array)
    if a.dtype.kind in "iub":
        a = a.astype(np.int64)
    code = CODES.get(np.dtype(a.dtype.str.replace(">", "<")))
    if code is None:
        raise ValueError(f"unsupported dtype {a.dtype}")
    header = MAGIC + struct.pack("<IBI", VERSION, code, a.ndim) + struct.pack(f"<{a.ndim}I", *a.shape)
    return header + np.ascontiguousarray(a, dtype=DTYPES[code]).tobytes()


def decode_tensor(data):
    if len(data) < 13 or data[:4] != MAGIC:
        raise ParseError("not a GLTN tensor (bad magic)")
    version, code, rank = struct.unpack_from("<IBI", data, 4)
    if version != VERSION:
        raise ParseError(f"unsupported tensor version {version}")
    if code not in DTYPES:
        raise ParseError(f"unknown dtype code {code}")
    off = 13
    if len(data) < off + 4 * rank:
        raise ParseError("truncated tensor header")
    dims = struct.unpack_from(f"<{rank}I", data, off)
    off += 4 * rank
    dt = DTYPES[code]
    count = int(np.prod(dims, dtype=np.int64))
    if len(data) != off + count * dt.itemsize:
        raise ParseError(f"payload has {len(data) - off} bytes, expected {count * dt.itemsize}")
    return np.frombuffer(data, dtype=dt, count=count, offset=off).reshape(dims).astype(dt.newbyteorder("="))


def save_tensor(path, array):
    with open(path, "wb") as fh:
        fh.write(encode_tensor(array))


def load_tensor(path):
    with open(path, "rb") as fh:
        return decode_tensor(fh.read())


def save_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def save_arrays(directory, arrays):
    """Write a dict of arrays as ``<name>.gltn`` files into ``directory``."""
    os.makedirs(directory, exist_ok=True)
    for name, a in arrays.items():
        save_tensor(os.path.join(directory, f"{name}.gltn"), a)
