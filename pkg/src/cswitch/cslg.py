"""CSLG binary container: per-frame log scores plus their symbol table.

Layout (little-endian): magic ``CSLG``, u16 version (1), u16 flags (bit 0 =
rows are log-softmax normalized), u32 T, u32 V, u32 frame rate in
millihertz, u16-length-prefixed UTF-8 utterance id, V length-prefixed
UTF-8 symbols, then T*V float32 values row-major.

The same container carries CTC logits (symbols = vocabulary) and LID
posteriors (symbols = class names). Reading always validates the header
and, when the normalized flag is set, checks that it is honest.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .ctc import LogitMatrix
from .errors import LogitError

MAGIC = b"CSLG"
VERSION = 1
FLAG_NORMALIZED = 0x1

_HEADER = struct.Struct("<4sHHIII")


def write_cslg(m: LogitMatrix, symbols, path: str | Path) -> None:
    """Write a matrix and its symbol table; the write is atomic."""
    t_count, v_count = m.values.shape
    if len(symbols) != v_count:
        raise LogitError(
            f"{v_count} columns but {len(symbols)} symbols for {m.utterance_id!r}"
        )
    flags = FLAG_NORMALIZED if m.normalized else 0
    millihz = round(m.frame_rate * 1000.0)
    blob = bytearray()
    blob += _HEADER.pack(MAGIC, VERSION, flags, t_count, v_count, millihz)
    ident = m.utterance_id.encode("utf-8")
    blob += struct.pack("<H", len(ident)) + ident
    for sym in symbols:
        raw = sym.encode("utf-8")
        blob += struct.pack("<H", len(raw)) + raw
    blob += np.asarray(m.values, dtype="<f4").tobytes(order="C")
    tmp = str(path) + ".tmp"
    with open(tmp, "wb") as handle:
        handle.write(bytes(blob))
    os.replace(tmp, path)


def read_cslg(path: str | Path) -> tuple[LogitMatrix, list[str]]:
    """Read and validate a container; returns the matrix and its symbols."""
    with open(path, "rb") as handle:
        data = handle.read()
    if len(data) < _HEADER.size:
        raise LogitError(f"{path}: truncated header")
    magic, version, flags, t_count, v_count, millihz = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise LogitError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise LogitError(f"{path}: unsupported version {version}")
    if millihz == 0:
        raise LogitError(f"{path}: zero frame rate")
    offset = _HEADER.size

    def read_str() -> str:
        nonlocal offset
        if offset + 2 > len(data):
            raise LogitError(f"{path}: truncated string length")
        (length,) = struct.unpack_from("<H", data, offset)
        offset += 2
        if offset + length > len(data):
            raise LogitError(f"{path}: truncated string")
        text = data[offset : offset + length].decode("utf-8")
        offset += length
        return text

    ident = read_str()
    symbols = [read_str() for _ in range(v_count)]
    expected = t_count * v_count * 4
    if len(data) - offset != expected:
        raise LogitError(
            f"{path}: expected {expected} value bytes, found {len(data) - offset}"
        )
    values = (
        np.frombuffer(data, dtype="<f4", count=t_count * v_count, offset=offset)
        .astype(np.float64)
        .reshape(t_count, v_count)
    )
    matrix = LogitMatrix(
        utterance_id=ident,
        frame_rate=millihz / 1000.0,
        values=values,
        normalized=bool(flags & FLAG_NORMALIZED),
    )
    return matrix, symbols
