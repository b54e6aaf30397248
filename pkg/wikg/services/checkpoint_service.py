"""
Checkpoint files.

Layout (little-endian):
    b"WKGC" | u32 version | u32 config length | config JSON
    | u32 tensor count | per tensor: u16 name length, name (utf-8),
      u8 dtype code, u8 ndim, ndim x u32 dims, raw data
The config JSON carries a ``tag`` ("wikg" or "baseline") and the model
configuration.
"""

import json
import struct
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np

from wikg.core.config import ModelConfig
from wikg.core.errors import FormatError
from wikg.engine.tensor import Tensor
from wikg.services.classifier_service import BagClassifier, classifier_from_tensors

MAGIC = b"WKGC"
VERSION = 1
DTYPE_CODES = {np.dtype("<f4"): 0, np.dtype("<f8"): 1}
CODE_DTYPES = {code: dtype for dtype, code in DTYPE_CODES.items()}

PathLike = Union[str, Path]


def _tag(config: ModelConfig) -> str:
    return "baseline" if config.kind.is_baseline else "wikg"


def encode_checkpoint(config: ModelConfig, tensors: Dict[str, np.ndarray]) -> bytes:
    header = json.dumps(
        {"tag": _tag(config), "config": config.model_dump(mode="json")}, sort_keys=True
    ).encode("utf-8")
    parts = [MAGIC, struct.pack("<II", VERSION, len(header)), header, struct.pack("<I", len(tensors))]
    for name, array in tensors.items():
        dtype = np.dtype(array.dtype).newbyteorder("<")
        if dtype not in DTYPE_CODES:
            raise FormatError(f"tensor {name} has unsupported dtype {array.dtype}")
        encoded_name = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded_name)))
        parts.append(encoded_name)
        parts.append(struct.pack("<BB", DTYPE_CODES[dtype], array.ndim))
        parts.append(struct.pack(f"<{array.ndim}I", *array.shape))
        parts.append(np.ascontiguousarray(array, dtype=dtype).tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, payload: bytes):
        self.payload = payload
        self.offset = 0

    def take(self, size: int, what: str) -> bytes:
        end = self.offset + size
        if end > len(self.payload):
            raise FormatError(
                f"truncated checkpoint reading {what}: need {size} bytes, {len(self.payload) - self.offset} left",
                self.offset,
            )
        chunk = self.payload[self.offset:end]
        self.offset = end
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode_checkpoint(payload: bytes) -> Tuple[ModelConfig, Dict[str, np.ndarray]]:
    reader = _Reader(payload)
    if reader.take(4, "magic") != MAGIC:
        raise FormatError("not a checkpoint (bad magic)", 0)
    version, header_len = reader.unpack("<II", "header")
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", 4)
    header_offset = reader.offset
    try:
        header = json.loads(reader.take(header_len, "config").decode("utf-8"))
        config = ModelConfig.model_validate(header["config"])
    except (ValueError, KeyError) as e:
        raise FormatError(f"bad config block: {e}", header_offset) from None
    if header.get("tag") != _tag(config):
        raise FormatError(f"config tag {header.get('tag')!r} does not match model kind {config.kind.value}")

    (count,) = reader.unpack("<I", "tensor count")
    tensors: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = reader.unpack("<H", "tensor name length")
        name = reader.take(name_len, "tensor name").decode("utf-8")
        code, ndim = reader.unpack("<BB", f"{name} dtype")
        if code not in CODE_DTYPES:
            raise FormatError(f"unknown dtype code {code} for {name}", reader.offset - 2)
        shape = reader.unpack(f"<{ndim}I", f"{name} shape")
        dtype = CODE_DTYPES[code]
        size = int(np.prod(shape)) * dtype.itemsize
        data = np.frombuffer(reader.take(size, f"{name} data"), dtype=dtype).reshape(shape)
        tensors[name] = data.astype(dtype.newbyteorder("="))
    if reader.offset != len(payload):
        raise FormatError(f"{len(payload) - reader.offset} trailing bytes after last tensor", reader.offset)
    return config, tensors


def save_checkpoint(path: PathLike, model: BagClassifier) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = {name: t.data for name, t in model.named_tensors().items()}
    path.write_bytes(encode_checkpoint(model.config, arrays))
    return path


def read_checkpoint(path: PathLike) -> Tuple[ModelConfig, Dict[str, np.ndarray]]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    return decode_checkpoint(path.read_bytes())


def load_checkpoint(path: PathLike) -> BagClassifier:
    """Restore a classifier; tensors keep the stored precision."""
    config, arrays = read_checkpoint(path)
    tensors = {
        name: Tensor(array, requires_grad=True, name=name, dtype=array.dtype)
        for name, array in arrays.items()
    }
    return classifier_from_tensors(config, tensors)
