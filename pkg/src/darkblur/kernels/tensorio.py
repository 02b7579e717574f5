"""Flat binary tensor files: magic "TNSR", u32 rank, u32 dims, f32 payload.

Little-endian throughout, row-major payload (H, then W, then C fastest).
Used for checkpoints and for dumping intermediate maps.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import ValidationError

MAGIC = b"TNSR"


def save_tensor(path: str | Path, arr: np.ndarray):
    arr = np.ascontiguousarray(arr, dtype=np.float32)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(arr.astype("<f4").tobytes())


def load_tensor(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValidationError(f"{path}: not a TNSR file (magic {magic!r})")
        (rank,) = struct.unpack("<I", fh.read(4))
        if rank > 8:
            raise ValidationError(f"{path}: implausible tensor rank {rank}")
        dims = struct.unpack(f"<{rank}I", fh.read(4 * rank))
        count = int(np.prod(dims)) if rank else 1
        payload = fh.read(4 * count)
        if len(payload) != 4 * count:
            raise ValidationError(f"{path}: truncated payload")
    return np.frombuffer(payload, dtype="<f4").reshape(dims).copy()
