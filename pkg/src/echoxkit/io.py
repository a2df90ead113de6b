"""File formats: little-endian float matrices and JSONL records.

Matrix layout: 4-byte magic, u32 rows, u32 cols, then rows*cols float32
values in row-major order. Frame matrices use magic ``EFX1``, codebooks
use ``ECB1``.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import FormatError

FRAMES_MAGIC = b"EFX1"
CODEBOOK_MAGIC = b"ECB1"
_HEADER = struct.Struct("<4sII")


def write_matrix(path, matrix, magic: bytes = FRAMES_MAGIC) -> None:
    matrix = np.asarray(matrix, dtype="<f4")
    if matrix.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {matrix.shape}")
    rows, cols = matrix.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(magic, rows, cols))
        fh.write(np.ascontiguousarray(matrix).tobytes())


def read_matrix(path, magic: bytes = FRAMES_MAGIC) -> np.ndarray:
    """Read a matrix file, returning float64 values."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    found, rows, cols = _HEADER.unpack_from(data)
    if found != magic:
        raise FormatError(f"{path}: bad magic {found!r}, expected {magic!r}")
    if cols < 1:
        raise FormatError(f"{path}: column count must be >= 1")
    expected = _HEADER.size + 4 * rows * cols
    if len(data) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(data)}")
    values = np.frombuffer(data, dtype="<f4", offset=_HEADER.size, count=rows * cols)
    return values.reshape(rows, cols).astype(np.float64)


def read_jsonl(path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: {exc.msg}") from None
            if not isinstance(record, dict):
                raise FormatError(f"{path}:{lineno}: expected a JSON object")
            records.append(record)
    return records


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def iter_jsonl_lines(records: Iterable[dict]) -> Iterator[str]:
    for record in records:
        yield dumps(record) + "\n"


def write_jsonl(path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(iter_jsonl_lines(records))
