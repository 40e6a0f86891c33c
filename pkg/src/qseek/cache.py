"""Binary keyed-vector cache.

Layout: magic ``IDNTCACH``, version u16, dtype tag u8 (0=f32, 1=f64),
dim u32, count u64, then ``count`` records of (key length u16, key bytes
utf-8, row of dim values little-endian). Rows share one dimension per
file; round-trips are bit-exact for f32 payloads.

Variable-length chunk feature matrices (T x d') are stored one frame per
record under keys ``<interview>:c<chunk>:f<frame>`` since rows are
fixed-dim; helpers below pack and unpack that convention.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CacheCorruptionError, ValidationError

MAGIC = b"IDNTCACH"
VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_TAGS = {"f32": 0, "f64": 1}


@dataclass
class EmbeddingCache:
    dim: int
    dtype: str
    entries: dict[str, np.ndarray]

    @property
    def count(self) -> int:
        return len(self.entries)

    def __getitem__(self, key: str) -> np.ndarray:
        return self.entries[key]

    def __contains__(self, key: str) -> bool:
        return key in self.entries


def write_cache(entries: dict[str, np.ndarray], path: str | Path, dtype: str = "f32") -> None:
    """Write keyed rows. All rows must share one dimension."""
    if dtype not in _TAGS:
        raise ValidationError(f"unsupported cache dtype {dtype!r}")
    if not entries:
        raise ValidationError("refusing to write an empty cache")
    np_dtype = _DTYPES[_TAGS[dtype]]
    dim = None
    for key, row in entries.items():
        vec = np.asarray(row)
        if vec.ndim != 1:
            raise ValidationError(f"cache row {key!r} must be 1-D, got shape {vec.shape}")
        if dim is None:
            dim = vec.shape[0]
        elif vec.shape[0] != dim:
            raise ValidationError(
                f"inconsistent row dims: {key!r} has {vec.shape[0]}, expected {dim}"
            )
    with Path(path).open("wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<HBIQ", VERSION, _TAGS[dtype], dim, len(entries)))
        for key, row in entries.items():
            key_bytes = key.encode("utf-8")
            if len(key_bytes) > 0xFFFF:
                raise ValidationError(f"cache key too long: {key[:40]!r}...")
            f.write(struct.pack("<H", len(key_bytes)))
            f.write(key_bytes)
            f.write(np.ascontiguousarray(row, dtype=np_dtype).tobytes())


def read_cache(path: str | Path) -> EmbeddingCache:
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) + 15 or data[: len(MAGIC)] != MAGIC:
        raise CacheCorruptionError(f"{path}: not a cache file (bad magic)")
    offset = len(MAGIC)
    version, dtype_tag, dim, count = struct.unpack_from("<HBIQ", data, offset)
    offset += 15
    if version != VERSION:
        raise CacheCorruptionError(f"{path}: unsupported cache version {version}")
    if dtype_tag not in _DTYPES:
        raise CacheCorruptionError(f"{path}: unknown dtype tag {dtype_tag}")
    np_dtype = _DTYPES[dtype_tag]
    row_bytes = dim * np_dtype.itemsize
    entries: dict[str, np.ndarray] = {}
    for i in range(count):
        if offset + 2 > len(data):
            raise CacheCorruptionError(f"{path}: truncated at record {i} (header said {count})")
        (key_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        if offset + key_len + row_bytes > len(data):
            raise CacheCorruptionError(f"{path}: truncated at record {i} (header said {count})")
        key = data[offset : offset + key_len].decode("utf-8")
        offset += key_len
        entries[key] = np.frombuffer(data[offset : offset + row_bytes], dtype=np_dtype).copy()
        offset += row_bytes
    if offset != len(data):
        raise CacheCorruptionError(f"{path}: {len(data) - offset} trailing bytes after {count} records")
    dtype_name = "f32" if dtype_tag == 0 else "f64"
    return EmbeddingCache(dim=dim, dtype=dtype_name, entries=entries)


# -- chunk-feature packing convention --


def frame_key(interview_id: str, chunk_index: int, frame: int) -> str:
    return f"{interview_id}:c{chunk_index:05d}:f{frame:04d}"


def pack_chunk_features(
    features: dict[tuple[str, int], np.ndarray]
) -> dict[str, np.ndarray]:
    """Flatten {(interview, chunk): T x d' matrix} into per-frame rows."""
    rows: dict[str, np.ndarray] = {}
    for (interview_id, chunk_index), matrix in features.items():
        mat = np.asarray(matrix)
        if mat.ndim != 2:
            raise ValidationError(f"chunk features must be 2-D, got {mat.shape}")
        for t in range(mat.shape[0]):
            rows[frame_key(interview_id, chunk_index, t)] = mat[t]
    return rows


def unpack_chunk_features(cache: EmbeddingCache) -> dict[tuple[str, int], np.ndarray]:
    """Reassemble T x d' matrices from per-frame rows."""
    grouped: dict[tuple[str, int], list[tuple[int, np.ndarray]]] = {}
    for key, row in cache.entries.items():
        interview_id, chunk_part, frame_part = key.rsplit(":", 2)
        if not chunk_part.startswith("c") or not frame_part.startswith("f"):
            raise CacheCorruptionError(f"unexpected feature cache key {key!r}")
        grouped.setdefault((interview_id, int(chunk_part[1:])), []).append(
            (int(frame_part[1:]), row)
        )
    out: dict[tuple[str, int], np.ndarray] = {}
    for chunk_key, frames in grouped.items():
        frames.sort(key=lambda item: item[0])
        if [t for t, _ in frames] != list(range(len(frames))):
            raise CacheCorruptionError(f"missing frames for chunk {chunk_key}")
        out[chunk_key] = np.stack([row for _, row in frames]).astype(float)
    return out
