"""
EZTA tensor archive

Layout (all integers little-endian):

    magic "EZTA" | version u32 = 1 | count u32
    per entry: name_len u16 | name UTF-8 | dtype u8 (0 = float32, 1 = int64)
               | ndim u8 | dims u64 x ndim | row-major payload
"""
import logging
import struct
from typing import Dict, Mapping

import numpy as np
import torch

from easyctrl.exceptions import FormatError, ValidationError
from easyctrl.io.files import atomic_write_bytes

logger = logging.getLogger(__name__)

MAGIC = b"EZTA"
VERSION = 1
HEADER = struct.Struct("<4sII")
DTYPES = {
    0: np.dtype("<f4"),
    1: np.dtype("<i8"),
}
DTYPE_CODES = {
    torch.float32: 0,
    torch.int64: 1,
}


def encode_archive(params: Mapping[str, torch.Tensor]) -> bytes:
    """
    Serialize a name -> tensor map, preserving insertion order.

    Args:
        params: float32 or int64 tensors keyed by dot-separated names

    Returns:
        bytes: The archive
    """
    chunks = [HEADER.pack(MAGIC, VERSION, len(params))]
    for name, tensor in params.items():
        encoded = name.encode("utf-8")
        if not encoded or len(encoded) > 0xFFFF:
            raise ValidationError(f"archive entry names must be 1..65535 bytes, got {name!r}")
        if tensor.dtype not in DTYPE_CODES:
            raise ValidationError(f"entry '{name}' has dtype {tensor.dtype}; only float32 and int64 are storable")
        if tensor.ndim > 0xFF:
            raise ValidationError(f"entry '{name}' has too many dimensions ({tensor.ndim})")
        code = DTYPE_CODES[tensor.dtype]
        array = tensor.detach().cpu().contiguous().numpy().astype(DTYPES[code], copy=False)
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<BB", code, array.ndim))
        chunks.append(struct.pack(f"<{array.ndim}Q", *array.shape))
        chunks.append(array.tobytes(order="C"))
    return b"".join(chunks)


def decode_archive(data: bytes) -> Dict[str, torch.Tensor]:
    """
    Parse archive bytes.

    Raises:
        FormatError: On bad magic or version, truncation, unknown dtype,
            duplicate names or trailing bytes, with the offending byte offset
    """
    if len(data) < HEADER.size:
        raise FormatError("archive header is truncated", offset=len(data))
    magic, version, count = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=0)
    if version != VERSION:
        raise FormatError(f"unsupported archive version {version}", offset=4)

    offset = HEADER.size
    params: Dict[str, torch.Tensor] = {}

    def take(size: int, what: str) -> bytes:
        nonlocal offset
        if offset + size > len(data):
            raise FormatError(f"archive truncated while reading {what}", offset=offset)
        chunk = data[offset:offset + size]
        offset += size
        return chunk

    for index in range(count):
        start = offset
        (name_len,) = struct.unpack("<H", take(2, f"entry {index} name length"))
        try:
            name = take(name_len, f"entry {index} name").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"entry {index} name is not valid UTF-8", offset=start + 2) from exc
        if name in params:
            raise FormatError(f"duplicate entry name '{name}'", offset=start)
        dtype_offset = offset
        code, ndim = struct.unpack("<BB", take(2, f"entry '{name}' dtype"))
        if code not in DTYPES:
            raise FormatError(f"entry '{name}' has unknown dtype code {code}", offset=dtype_offset)
        dims = struct.unpack(f"<{ndim}Q", take(8 * ndim, f"entry '{name}' dims"))
        dtype = DTYPES[code]
        payload = take(int(np.prod(dims, dtype=np.int64)) * dtype.itemsize, f"entry '{name}' payload")
        array = np.frombuffer(payload, dtype=dtype).reshape(dims).astype(dtype.newbyteorder("="))
        params[name] = torch.from_numpy(array)

    if offset != len(data):
        raise FormatError(f"{len(data) - offset} trailing bytes after {count} entries", offset=offset)
    return params


def save_archive(params: Mapping[str, torch.Tensor], path: str) -> None:
    """Write an archive atomically."""
    atomic_write_bytes(path, encode_archive(params))
    logger.info(f"Saved {len(params)} tensors to {path}")


def load_archive(path: str) -> Dict[str, torch.Tensor]:
    with open(path, "rb") as f:
        data = f.read()
    return decode_archive(data)


def text_to_tensor(text: str) -> torch.Tensor:
    """Store a UTF-8 string as an int64 byte tensor (used for vocabularies, metadata and configs)."""
    return torch.tensor(list(text.encode("utf-8")), dtype=torch.int64)


def tensor_to_text(tensor: torch.Tensor) -> str:
    try:
        return bytes(int(v) for v in tensor.reshape(-1).tolist()).decode("utf-8")
    except (ValueError, UnicodeDecodeError) as exc:
        raise FormatError(f"tensor does not hold UTF-8 text: {exc}") from exc
