"""Message framing and q-bit coefficient packing.

Frame: 4-byte little-endian payload length, one type byte, payload.
"""
from __future__ import annotations

import enum
import struct

import numpy as np

from ..exceptions import DimensionError

HEADER = struct.Struct("<IB")


class MsgType(enum.IntEnum):
    PUBLIC_KEY = 1
    INPUT_CT = 2
    OUTPUT_CT = 3


def pack_bits(values: np.ndarray, bits: int) -> bytes:
    """Concatenate the low ``bits`` of every value, little-endian bit order."""
    v = np.ascontiguousarray(values, dtype="<u8")
    if v.size and bits < 64 and int(v.max()) >> bits:
        raise DimensionError(f"value does not fit in {bits} bits")
    planes = np.unpackbits(v.view(np.uint8).reshape(-1, 8), axis=1, bitorder="little")
    return np.packbits(planes[:, :bits].ravel(), bitorder="little").tobytes()


def unpack_bits(blob: bytes, count: int, bits: int) -> np.ndarray:
    need = (count * bits + 7) // 8
    if len(blob) != need:
        raise DimensionError(f"{len(blob)} bytes for {count} values of {bits} bits, expected {need}")
    flat = np.unpackbits(np.frombuffer(blob, dtype=np.uint8), bitorder="little")[:count * bits]
    planes = np.zeros((count, 64), dtype=np.uint8)
    planes[:, :bits] = flat.reshape(count, bits)
    return np.packbits(planes, axis=1, bitorder="little").view("<u8").ravel().astype(np.uint64)


def frame(msg_type: MsgType, payload: bytes) -> bytes:
    return HEADER.pack(len(payload), int(msg_type)) + payload


def unframe(blob: bytes) -> tuple[MsgType, bytes]:
    if len(blob) < HEADER.size:
        raise DimensionError("truncated frame header")
    length, kind = HEADER.unpack_from(blob)
    payload = blob[HEADER.size:]
    if len(payload) != length:
        raise DimensionError(f"frame declares {length} payload bytes, holds {len(payload)}")
    return MsgType(kind), payload


def encode_input(seed: bytes, b: np.ndarray, q_bits: int) -> bytes:
    """Seeded ciphertext: 16-byte seed for ``a`` and the packed ``b``."""
    return seed + pack_bits(b, q_bits)


def decode_input(payload: bytes, n: int, q_bits: int) -> tuple[bytes, np.ndarray]:
    return payload[:16], unpack_bits(payload[16:], n, q_bits)


def encode_output(a: np.ndarray, b_values: np.ndarray, q_bits: int) -> bytes:
    """Extracted result: the shared ``a`` polynomial then one ``b`` per output."""
    return struct.pack("<I", b_values.size) + pack_bits(np.concatenate((a, b_values)), q_bits)


def decode_output(payload: bytes, n: int, q_bits: int) -> tuple[np.ndarray, np.ndarray]:
    (count,) = struct.unpack_from("<I", payload)
    values = unpack_bits(payload[4:], n + count, q_bits)
    return values[:n], values[n:]
