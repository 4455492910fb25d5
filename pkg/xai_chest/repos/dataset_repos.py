"""
Бинарный кэш датасета (.xcds)

    magic     4 байта  b"XCDS"
    version   uint32 LE
    n         uint64 LE  число строк
    d_in      uint32 LE
    d_out     uint32 LE
    inputs    n·d_in  float32 LE, построчно
    targets   n·d_out float32 LE, построчно
    meta_len  uint32 LE
    meta      meta_len байт UTF-8 JSON (ключи отсортированы)

Датасет хранится в float32 и в памяти, поэтому load(save(d)) совпадает
побитово, а повторная генерация с тем же сидом даёт идентичный файл.
"""

from __future__ import annotations

import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np
import orjson

from xai_chest.models.nn_models import Dataset
from xai_chest.utils.errors import ArtifactIOError, DatasetFormatError

logger = logging.getLogger(__name__)

MAGIC = b"XCDS"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQII")
_META_LEN = struct.Struct("<I")
_FLOAT = np.dtype("<f4")


def dumps_dataset(dataset: Dataset) -> bytes:
    n, d_in = dataset.inputs.shape
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, n, d_in, dataset.d_out)
    meta = orjson.dumps(dataset.meta, option=orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY)
    return b"".join(
        [
            header,
            dataset.inputs.astype(_FLOAT).tobytes(order="C"),
            dataset.targets.astype(_FLOAT).tobytes(order="C"),
            _META_LEN.pack(len(meta)),
            meta,
        ]
    )


def loads_dataset(blob: bytes) -> Dataset:
    if len(blob) < _HEADER.size:
        raise DatasetFormatError("dataset cache is shorter than its header")
    magic, version, n, d_in, d_out = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise DatasetFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise DatasetFormatError(f"unsupported dataset cache version {version} (expected {FORMAT_VERSION})")
    offset = _HEADER.size
    sizes = (n * d_in * _FLOAT.itemsize, n * d_out * _FLOAT.itemsize)
    if len(blob) < offset + sizes[0] + sizes[1] + _META_LEN.size:
        raise DatasetFormatError(f"payload truncated: dims ({n}, {d_in}, {d_out}) need more bytes than present")
    inputs = np.frombuffer(blob, dtype=_FLOAT, count=n * d_in, offset=offset).reshape(n, d_in)
    offset += sizes[0]
    targets = np.frombuffer(blob, dtype=_FLOAT, count=n * d_out, offset=offset).reshape(n, d_out)
    offset += sizes[1]
    (meta_len,) = _META_LEN.unpack_from(blob, offset)
    offset += _META_LEN.size
    if len(blob) != offset + meta_len:
        raise DatasetFormatError(f"manifest block length {meta_len} does not match file size")
    try:
        meta = orjson.loads(blob[offset:offset + meta_len])
    except orjson.JSONDecodeError as e:
        raise DatasetFormatError(f"manifest block is not valid JSON: {e}") from e
    try:
        return Dataset(inputs=inputs, targets=targets, meta=meta)
    except ValueError as e:
        raise DatasetFormatError(str(e)) from e


def save_dataset(dataset: Dataset, path: Union[str, Path]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(dumps_dataset(dataset))
    except OSError as e:
        raise ArtifactIOError(f"cannot write dataset {path}: {e}") from e
    logger.debug(f"Saved dataset {dataset.inputs.shape} to {path}")
    return path


def load_dataset(path: Union[str, Path]) -> Dataset:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise ArtifactIOError(f"cannot read dataset {path}: {e}") from e
    return loads_dataset(blob)
