"""
Checkpoint file format

Layout: the magic bytes ADSEP001, an 8-byte little-endian header length, a JSON
header mapping tensor name -> {dtype, shape, offset} plus free-form metadata,
then the raw little-endian float32 values of every tensor at its offset
(counted from the start of the data section).
"""
import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

import numpy as np

from src.graph.tensor import Tensor
from src.utils.errors import DataError

MAGIC = b"ADSEP001"
_DTYPE = '<f4'

ArrayLike = Union[np.ndarray, Tensor]


def save_checkpoint(
    path: Union[str, Path],
    tensors: Mapping[str, ArrayLike],
    metadata: Optional[Dict[str, Any]] = None,
) -> Path:
    """
    Atomically write tensors and metadata to path

    Args:
        path: Destination file
        tensors: Named arrays or tensors (stored as float32)
        metadata: JSON-serializable metadata

    Returns:
        The written path
    """
    path = Path(path)
    entries = {}
    blobs = []
    offset = 0
    for name, value in tensors.items():
        data = value.data if isinstance(value, Tensor) else value
        blob = np.ascontiguousarray(data, dtype=_DTYPE).tobytes()
        entries[name] = {'dtype': 'float32', 'shape': list(np.shape(data)), 'offset': offset}
        blobs.append(blob)
        offset += len(blob)

    header = json.dumps({'tensors': entries, 'metadata': metadata or {}}, sort_keys=True).encode('utf-8')

    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix='.tmp')
        with os.fdopen(fd, 'wb') as f:
            f.write(MAGIC)
            f.write(struct.pack('<Q', len(header)))
            f.write(header)
            for blob in blobs:
                f.write(blob)
        os.replace(tmp_name, path)
    except OSError as e:
        raise DataError(f"Cannot write checkpoint {path}: {e}") from e
    return path


def load_checkpoint(path: Union[str, Path]) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    """
    Read a checkpoint written by save_checkpoint

    Args:
        path: Checkpoint file

    Returns:
        Tuple of (name -> float64 array, metadata)
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise DataError(f"Cannot read checkpoint {path}: {e}") from e

    if raw[:len(MAGIC)] != MAGIC:
        raise DataError(f"{path} is not a checkpoint (bad magic)")
    start = len(MAGIC) + 8
    (header_len,) = struct.unpack('<Q', raw[len(MAGIC):start])
    try:
        header = json.loads(raw[start:start + header_len].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataError(f"{path}: corrupt checkpoint header") from e

    data = memoryview(raw)[start + header_len:]
    tensors = {}
    for name, entry in header['tensors'].items():
        count = int(np.prod(entry['shape'], dtype=np.int64))
        values = np.frombuffer(data, dtype=_DTYPE, count=count, offset=entry['offset'])
        tensors[name] = values.astype(np.float64).reshape(entry['shape'])
    return tensors, header.get('metadata', {})
