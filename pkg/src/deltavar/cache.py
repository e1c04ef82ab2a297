"""Binary divisor-table cache.

Layout (little-endian): b"DKT1", k:u32, start:u64, end:u64, values:u32[end-start],
then an 8-byte BLAKE2b digest of everything before it.
"""
from __future__ import annotations

import hashlib
import os
import struct
from pathlib import Path

import numpy as np

from .errors import CacheIntegrityError
from .sieve import DEFAULT_MEMORY_BUDGET, DivisorTable, build_table

MAGIC = b"DKT1"
_HEADER = struct.Struct("<4sIQQ")
ENV_VAR = "DELTAVAR_CACHE"


def default_cache_dir() -> Path:
    return Path(os.environ.get(ENV_VAR) or Path.home() / ".cache" / "deltavar")


def _digest(data: bytes) -> bytes:
    return hashlib.blake2b(data, digest_size=8).digest()


def write_table(table: DivisorTable, path) -> Path:
    path = Path(path)
    body = _HEADER.pack(MAGIC, table.k, table.start, table.end) + table.values.astype("<u4").tobytes()
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(body + _digest(body))
    tmp.replace(path)
    return path


def read_table(path) -> DivisorTable:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size + 8:
        raise CacheIntegrityError(f"{path}: truncated file")
    body, digest = raw[:-8], raw[-8:]
    magic, k, start, end = _HEADER.unpack_from(body)
    if magic != MAGIC:
        raise CacheIntegrityError(f"{path}: bad magic {magic!r}")
    if _digest(body) != digest:
        raise CacheIntegrityError(f"{path}: checksum mismatch")
    values = np.frombuffer(body, dtype="<u4", offset=_HEADER.size)
    if values.size != end - start:
        raise CacheIntegrityError(f"{path}: length {values.size} != end - start")
    return DivisorTable(k=k, start=start, end=end, values=values.astype(np.uint32))


def table_path(cache_dir, k: int, N: int) -> Path:
    return Path(cache_dir) / f"dk{k}_1_{N + 1}.dkt"


def load_or_build(k: int, N: int, cache_dir=None, memory_budget: int = DEFAULT_MEMORY_BUDGET) -> DivisorTable:
    cache_dir = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    path = table_path(cache_dir, k, N)
    if path.exists():
        return read_table(path)
    table = build_table(k, N, memory_budget)
    cache_dir.mkdir(parents=True, exist_ok=True)
    write_table(table, path)
    return table
