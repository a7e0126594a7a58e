"""Bit sequences and the ``LVC1`` container file format.

Layout of a container (all multi-byte fields little-endian)::

    b"LVC1" | version u8 | flags u8 | eps f64 | b_eps f64 | m f64 | p f64
            | payload bit count u64 | payload bytes (MSB first, zero padded)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .errors import MalformedStreamError

MAGIC = b"LVC1"
VERSION = 1
FLAG_TRUNCATED = 0x01
FLAG_QUANT_MODE = 0x02
FLAG_PREFIXED_TIMES = 0x04
_KNOWN_FLAGS = FLAG_TRUNCATED | FLAG_QUANT_MODE | FLAG_PREFIXED_TIMES
_HEADER = struct.Struct("<4sBBddddQ")


class BitStream:
    """Append-only bit sequence with a read cursor.

    Bits are stored as the characters ``"0"``/``"1"``; streams handled here
    are at most a few hundred kilobits, where a joined string is both the
    simplest and the fastest representation in Python.
    """

    __slots__ = ("_chunks", "_bits", "pos")

    def __init__(self, bits: str = ""):
        if bits.strip("01"):
            raise ValueError("bits must consist of '0' and '1' only")
        self._chunks = [bits] if bits else []
        self._bits = bits
        self.pos = 0

    # writer side
    def write(self, bits: str) -> None:
        self._chunks.append(bits)
        self._bits = None

    @property
    def bits(self) -> str:
        if self._bits is None:
            self._bits = "".join(self._chunks)
            self._chunks = [self._bits]
        return self._bits

    def __len__(self):
        return len(self.bits)

    def __eq__(self, other):
        return isinstance(other, BitStream) and self.bits == other.bits

    def __repr__(self):
        b = self.bits
        shown = b if len(b) <= 64 else b[:61] + "..."
        return f"BitStream({shown!r}, length={len(b)})"

    # reader side
    def read(self, n: int = 1) -> str:
        bits = self.bits
        if self.pos + n > len(bits):
            raise MalformedStreamError(f"stream ends after {len(bits)} bits")
        out = bits[self.pos:self.pos + n]
        self.pos += n
        return out

    def read_unary(self) -> int:
        """Count ``'1'`` bits up to and including the terminating ``'0'``."""
        bits = self.bits
        stop = bits.find("0", self.pos)
        if stop < 0:
            raise MalformedStreamError("unterminated unary run")
        n = stop - self.pos
        self.pos = stop + 1
        return n

    @property
    def remaining(self) -> int:
        return len(self.bits) - self.pos

    def rewind(self) -> "BitStream":
        self.pos = 0
        return self

    # byte packing
    def to_bytes(self) -> bytes:
        bits = self.bits
        pad = (-len(bits)) % 8
        padded = bits + "0" * pad
        if not padded:
            return b""
        return int(padded, 2).to_bytes(len(padded) // 8, "big")

    @classmethod
    def from_bytes(cls, data: bytes, nbits: int) -> "BitStream":
        if len(data) != (nbits + 7) // 8:
            raise MalformedStreamError(
                f"{len(data)} payload bytes cannot hold exactly {nbits} bits")
        if not data:
            return cls("")
        bits = bin(int.from_bytes(data, "big"))[2:].zfill(8 * len(data))
        if "1" in bits[nbits:]:
            raise MalformedStreamError("nonzero padding bits")
        return cls(bits[:nbits])


@dataclass(frozen=True)
class Container:
    flags: int
    eps: float
    b_eps: float
    m: float
    p: float
    stream: BitStream

    def to_bytes(self) -> bytes:
        head = _HEADER.pack(MAGIC, VERSION, self.flags, self.eps, self.b_eps, self.m,
                            self.p, len(self.stream))
        return head + self.stream.to_bytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Container":
        if len(data) < _HEADER.size:
            raise MalformedStreamError("container shorter than its header")
        magic, version, flags, eps, b_eps, m, p, nbits = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise MalformedStreamError(f"bad magic {magic!r}")
        if version != VERSION:
            raise MalformedStreamError(f"unsupported version {version}")
        if flags & ~_KNOWN_FLAGS:
            raise MalformedStreamError(f"unknown flag bits {flags:#04x}")
        stream = BitStream.from_bytes(data[_HEADER.size:], nbits)
        return cls(flags, eps, b_eps, m, p, stream)
