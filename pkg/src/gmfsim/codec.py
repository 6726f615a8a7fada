"""Sparse wire format.

Layout (little-endian): ``u32 count`` followed by ``count`` records of
``u32 index`` + ``f64 value``. A message is exactly ``4 + 12 * nnz`` bytes.
"""

import numpy as np

from .errors import CodecError
from .vectors import SparseVector

HEADER_BYTES = 4
ENTRY_BYTES = 12

_ENTRY = np.dtype([("index", "<u4"), ("value", "<f8")])
assert _ENTRY.itemsize == ENTRY_BYTES


def message_size(nnz: int) -> int:
    return HEADER_BYTES + ENTRY_BYTES * nnz


def encode(g: SparseVector) -> bytes:
    if g.dim > 2**32:
        raise CodecError(f"dim {g.dim} does not fit a u32 index")
    rec = np.empty(g.nnz(), dtype=_ENTRY)
    rec["index"] = g.indices
    rec["value"] = g.values
    return np.uint32(g.nnz()).astype("<u4").tobytes() + rec.tobytes()


def decode(data: bytes, dim: int) -> SparseVector:
    data = bytes(data)
    if len(data) < HEADER_BYTES:
        raise CodecError(f"truncated header: {len(data)} bytes")
    count = int(np.frombuffer(data[:HEADER_BYTES], dtype="<u4")[0])
    expected = message_size(count)
    if len(data) != expected:
        raise CodecError(f"expected {expected} bytes for {count} entries, got {len(data)}")
    rec = np.frombuffer(data[HEADER_BYTES:], dtype=_ENTRY)
    idx = rec["index"].astype(np.int64)
    if count and idx.max() >= dim:
        raise CodecError(f"index {int(idx.max())} out of range for dim {dim}")
    try:
        return SparseVector(dim, idx, rec["value"].astype(np.float64))
    except ValueError as exc:
        raise CodecError(f"invalid payload: {exc}") from exc
