"""Binary checkpoint format for parameter sets.

Layout (all integers little-endian):

    magic   4 bytes  b"GFCK"
    version u32      currently 1
    then, per parameter until end of file:
        name_len u32, name UTF-8,
        rank u32, dims rank * u64,
        values prod(dims) * float64 (little-endian, row-major)

Parameters are written in sorted-name order so identical parameter sets
serialize to identical bytes.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import DataError
from .network import ParameterSet

__all__ = ["save_checkpoint", "load_checkpoint", "CHECKPOINT_MAGIC", "CHECKPOINT_VERSION"]

CHECKPOINT_MAGIC = b"GFCK"
CHECKPOINT_VERSION = 1

# running statistics are state, not weights; restored as non-trainable
_NON_TRAINABLE_SUFFIXES = ("running_mean", "running_var")


def save_checkpoint(params: ParameterSet, path) -> None:
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        for name in sorted(params.names()):
            data = np.ascontiguousarray(params[name].data, dtype="<f8")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", data.ndim))
            fh.write(struct.pack(f"<{data.ndim}Q", *data.shape))
            fh.write(data.tobytes())


def _read_exact(fh, n, path, what):
    buf = fh.read(n)
    if len(buf) != n:
        raise DataError(f"{path}: truncated checkpoint while reading {what}")
    return buf


def load_checkpoint(path) -> ParameterSet:
    params = ParameterSet()
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise DataError(f"{path}: not a checkpoint file (bad magic {magic!r})")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, path, "version"))
        if version != CHECKPOINT_VERSION:
            raise DataError(f"{path}: unsupported checkpoint version {version}")
        while True:
            head = fh.read(4)
            if not head:
                break
            if len(head) != 4:
                raise DataError(f"{path}: truncated checkpoint while reading name length")
            (name_len,) = struct.unpack("<I", head)
            name = _read_exact(fh, name_len, path, "name").decode("utf-8")
            (rank,) = struct.unpack("<I", _read_exact(fh, 4, path, "rank"))
            dims = struct.unpack(
                f"<{rank}Q", _read_exact(fh, 8 * rank, path, f"dims of {name!r}")
            )
            count = 1
            for d in dims:
                count *= d
            raw = _read_exact(fh, 8 * count, path, f"values of {name!r}")
            data = np.frombuffer(raw, dtype="<f8").reshape(dims).astype(np.float64)
            trainable = not name.endswith(_NON_TRAINABLE_SUFFIXES)
            params.add(name, data, trainable=trainable)
    return params
