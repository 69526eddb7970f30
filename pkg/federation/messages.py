"""
Сообщения между сервером и клиентами.

Все целые и вещественные числа little-endian. Форматы:

REGISTER:   b"REGI" | u32 client_id | u32 count | count × (u32 len | UTF-8 label)
DISTRIBUTE: b"DIST" | u64 round | u32 client_id | u32 rows | u32 dim | rows·dim × f64
UPDATE:     b"UPDT" | тот же заголовок и полезная нагрузка, что у DISTRIBUTE

Матрица передаётся построчно (row-major).
"""

import struct
from dataclasses import dataclass
from typing import List, Union

import numpy as np

from utils.errors import ContractViolation

REGISTER_TAG = b"REGI"
DISTRIBUTE_TAG = b"DIST"
UPDATE_TAG = b"UPDT"

_MATRIX_HEADER = struct.Struct("<4sQIII")
_REGISTER_HEADER = struct.Struct("<4sII")
_U32 = struct.Struct("<I")


@dataclass
class RegisterMessage:
    client_id: int
    labels: List[str]

    def to_bytes(self) -> bytes:
        parts = [_REGISTER_HEADER.pack(REGISTER_TAG, self.client_id, len(self.labels))]
        for label in self.labels:
            encoded = label.encode("utf-8")
            parts.append(_U32.pack(len(encoded)))
            parts.append(encoded)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "RegisterMessage":
        if len(data) < _REGISTER_HEADER.size:
            raise ContractViolation("Сообщение REGISTER обрезано")
        tag, client_id, count = _REGISTER_HEADER.unpack_from(data)
        if tag != REGISTER_TAG:
            raise ContractViolation(f"Ожидалось сообщение REGISTER, получено {tag!r}")

        labels = []
        offset = _REGISTER_HEADER.size
        for _ in range(count):
            if offset + _U32.size > len(data):
                raise ContractViolation("Сообщение REGISTER обрезано")
            (length,) = _U32.unpack_from(data, offset)
            offset += _U32.size
            if offset + length > len(data):
                raise ContractViolation("Сообщение REGISTER обрезано")
            labels.append(data[offset:offset + length].decode("utf-8"))
            offset += length
        if offset != len(data):
            raise ContractViolation("Лишние байты в сообщении REGISTER")
        return cls(client_id, labels)


@dataclass
class _MatrixMessage:
    round_number: int
    client_id: int
    matrix: np.ndarray

    TAG = b""

    def to_bytes(self) -> bytes:
        matrix = np.ascontiguousarray(self.matrix, dtype="<f8")
        if matrix.ndim != 2:
            raise ContractViolation(f"Ожидалась матрица, получена форма {matrix.shape}")
        rows, dim = matrix.shape
        return _MATRIX_HEADER.pack(self.TAG, self.round_number, self.client_id, rows, dim) + matrix.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes):
        if len(data) < _MATRIX_HEADER.size:
            raise ContractViolation("Сообщение обрезано")
        tag, round_number, client_id, rows, dim = _MATRIX_HEADER.unpack_from(data)
        if tag != cls.TAG:
            raise ContractViolation(f"Ожидалось сообщение {cls.TAG!r}, получено {tag!r}")
        payload = data[_MATRIX_HEADER.size:]
        if len(payload) != rows * dim * 8:
            raise ContractViolation(f"Размер полезной нагрузки {len(payload)} не равен {rows}×{dim}×8")
        matrix = np.frombuffer(payload, dtype="<f8").reshape(rows, dim).astype(np.float64)
        return cls(round_number, client_id, matrix)


class DistributeMessage(_MatrixMessage):
    """Сервер -> клиент: локальная матрица сущностей в начале раунда"""
    TAG = DISTRIBUTE_TAG


class UpdateMessage(_MatrixMessage):
    """Клиент -> сервер: матрица сущностей после локального обучения"""
    TAG = UPDATE_TAG


Message = Union[RegisterMessage, DistributeMessage, UpdateMessage]


def decode_message(data: bytes) -> Message:
    """Разбирает сообщение по его тегу."""
    tag = bytes(data[:4])
    if tag == REGISTER_TAG:
        return RegisterMessage.from_bytes(data)
    if tag == DISTRIBUTE_TAG:
        return DistributeMessage.from_bytes(data)
    if tag == UPDATE_TAG:
        return UpdateMessage.from_bytes(data)
    raise ContractViolation(f"Неизвестный тег сообщения {tag!r}")
