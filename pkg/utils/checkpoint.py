"""
Формат чекпоинта.

    b"FEDECKPT" | u32 version | u32 section_count | секции...

Секция:
    u16 name_len | name (UTF-8) | u8 kind | u64 payload_len | payload

kind = 0: JSON (UTF-8, sort_keys, компактные разделители)
kind = 1: массив float64, kind = 2: массив int64;
    payload = u8 ndim | ndim × u64 shape | данные little-endian построчно

Порядок секций сохраняется, поэтому save -> load -> save даёт те же байты.
"""

import json
import struct
from pathlib import Path
from typing import Any, Dict, Mapping, Tuple, Union

import numpy as np

from utils.errors import CheckpointError

MAGIC = b"FEDECKPT"
VERSION = 1

KIND_JSON = 0
KIND_FLOAT = 1
KIND_INT = 2

_HEADER = struct.Struct("<8sII")
_NAME_LEN = struct.Struct("<H")
_SECTION = struct.Struct("<BQ")


def _encode_array(array: np.ndarray) -> Tuple[int, bytes]:
    if np.issubdtype(array.dtype, np.integer):
        kind, data = KIND_INT, np.ascontiguousarray(array, dtype="<i8")
    elif np.issubdtype(array.dtype, np.floating):
        kind, data = KIND_FLOAT, np.ascontiguousarray(array, dtype="<f8")
    else:
        raise CheckpointError(f"Неподдерживаемый тип массива {array.dtype}")
    shape = struct.pack(f"<B{array.ndim}Q", array.ndim, *array.shape)
    return kind, shape + data.tobytes()


def _decode_array(kind: int, payload: bytes) -> np.ndarray:
    if not payload:
        raise CheckpointError("Пустая секция массива")
    ndim = payload[0]
    offset = 1 + 8 * ndim
    shape = struct.unpack_from(f"<{ndim}Q", payload, 1)
    dtype = "<i8" if kind == KIND_INT else "<f8"
    expected = int(np.prod(shape, dtype=np.int64)) * 8
    if len(payload) - offset != expected:
        raise CheckpointError(f"Размер массива {len(payload) - offset} не соответствует форме {shape}")
    if expected == 0:
        return np.zeros(shape, dtype=np.int64 if kind == KIND_INT else np.float64)
    array = np.frombuffer(payload, dtype=dtype, offset=offset).reshape(shape)
    return array.astype(np.int64 if kind == KIND_INT else np.float64)


def encode_checkpoint(sections: Mapping[str, Any]) -> bytes:
    """Сериализует именованные секции (dict/list -> JSON, np.ndarray -> массив)."""
    parts = [_HEADER.pack(MAGIC, VERSION, len(sections))]
    for name, value in sections.items():
        encoded_name = name.encode("utf-8")
        if isinstance(value, np.ndarray):
            kind, payload = _encode_array(value)
        else:
            kind = KIND_JSON
            payload = json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
        parts.append(_NAME_LEN.pack(len(encoded_name)))
        parts.append(encoded_name)
        parts.append(_SECTION.pack(kind, len(payload)))
        parts.append(payload)
    return b"".join(parts)


def decode_checkpoint(data: bytes) -> Dict[str, Any]:
    if len(data) < _HEADER.size:
        raise CheckpointError("Файл чекпоинта обрезан")
    magic, version, count = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError("Неверная сигнатура чекпоинта")
    if version != VERSION:
        raise CheckpointError(f"Неподдерживаемая версия чекпоинта: {version}")

    sections: Dict[str, Any] = {}
    offset = _HEADER.size
    try:
        for _ in range(count):
            (name_len,) = _NAME_LEN.unpack_from(data, offset)
            offset += _NAME_LEN.size
            name = data[offset:offset + name_len].decode("utf-8")
            offset += name_len
            kind, length = _SECTION.unpack_from(data, offset)
            offset += _SECTION.size
            payload = data[offset:offset + length]
            if len(payload) != length:
                raise CheckpointError(f"Секция {name} обрезана")
            offset += length

            if kind == KIND_JSON:
                sections[name] = json.loads(payload.decode("utf-8"))
            elif kind in (KIND_FLOAT, KIND_INT):
                sections[name] = _decode_array(kind, payload)
            else:
                raise CheckpointError(f"Секция {name}: неизвестный тип {kind}")
    except struct.error as e:
        raise CheckpointError(f"Файл чекпоинта обрезан: {e}") from None

    if offset != len(data):
        raise CheckpointError("Лишние байты в конце чекпоинта")
    return sections


def save_checkpoint(path: Union[str, Path], sections: Mapping[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, 'wb') as f:
        f.write(encode_checkpoint(sections))
    tmp.replace(path)
    return path


def load_checkpoint(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"Чекпоинт {path} не найден")
    with open(path, 'rb') as f:
        return decode_checkpoint(f.read())
