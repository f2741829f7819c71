"""Packed bit buffer exchanged between the source codec, FEC and modulators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BitBuffer:
    packed: bytes
    length: int

    def __post_init__(self):
        if self.length < 0 or len(self.packed) != (self.length + 7) // 8:
            raise ValueError("packed length inconsistent with bit count")

    @staticmethod
    def from_bits(bits) -> "BitBuffer":
        arr = np.asarray(bits, dtype=np.uint8).ravel()
        if np.any(arr > 1):
            raise ValueError("bits must be 0/1")
        return BitBuffer(packed=np.packbits(arr).tobytes(), length=int(arr.size))

    def bits(self) -> np.ndarray:
        return np.unpackbits(np.frombuffer(self.packed, dtype=np.uint8))[: self.length]

    def __len__(self) -> int:
        return self.length

    def __xor__(self, other: "BitBuffer") -> "BitBuffer":
        if self.length != other.length:
            raise ValueError("length mismatch")
        return BitBuffer.from_bits(self.bits() ^ other.bits())
