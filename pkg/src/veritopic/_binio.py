"""Little-endian binary readers/writers for the versioned file containers.

All multi-byte integers are unsigned little-endian unless noted. Strings are
UTF-8 with a length prefix. Readers validate bounds and raise FormatError
with the offending offset so corrupt files fail loudly instead of yielding
garbage arrays.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import FormatError


class Writer:
    def __init__(self) -> None:
        self._parts: list[bytes] = []

    def raw(self, data: bytes) -> None:
        self._parts.append(data)

    def u8(self, value: int) -> None:
        self._parts.append(struct.pack("<B", value))

    def u16(self, value: int) -> None:
        self._parts.append(struct.pack("<H", value))

    def u32(self, value: int) -> None:
        self._parts.append(struct.pack("<I", value))

    def u64(self, value: int) -> None:
        self._parts.append(struct.pack("<Q", value))

    def i32(self, value: int) -> None:
        self._parts.append(struct.pack("<i", value))

    def f64(self, value: float) -> None:
        self._parts.append(struct.pack("<d", value))

    def string(self, text: str, width: int = 16) -> None:
        """Length-prefixed UTF-8 string; width is the prefix size in bits."""
        data = text.encode("utf-8")
        limit = (1 << width) - 1
        if len(data) > limit:
            raise FormatError(f"string too long for u{width} prefix: {len(data)} bytes")
        if width == 8:
            self.u8(len(data))
        elif width == 16:
            self.u16(len(data))
        else:
            self.u32(len(data))
        self._parts.append(data)

    def f32_array(self, values: np.ndarray) -> None:
        self._parts.append(np.ascontiguousarray(values, dtype="<f4").tobytes())

    def f64_array(self, values: np.ndarray) -> None:
        self._parts.append(np.ascontiguousarray(values, dtype="<f8").tobytes())

    def i64_array(self, values: np.ndarray) -> None:
        self._parts.append(np.ascontiguousarray(values, dtype="<i8").tobytes())

    def u32_array(self, values) -> None:
        self._parts.append(np.ascontiguousarray(values, dtype="<u4").tobytes())

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class Reader:
    def __init__(self, data: bytes, name: str = "file") -> None:
        self._data = data
        self._pos = 0
        self._name = name

    @property
    def offset(self) -> int:
        return self._pos

    def _take(self, n: int) -> bytes:
        if self._pos + n > len(self._data):
            raise FormatError(
                f"{self._name}: truncated at offset {self._pos} "
                f"(wanted {n} bytes, {len(self._data) - self._pos} left)"
            )
        chunk = self._data[self._pos : self._pos + n]
        self._pos += n
        return chunk

    def raw(self, n: int) -> bytes:
        return self._take(n)

    def u8(self) -> int:
        return struct.unpack("<B", self._take(1))[0]

    def u16(self) -> int:
        return struct.unpack("<H", self._take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self._take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self._take(8))[0]

    def i32(self) -> int:
        return struct.unpack("<i", self._take(4))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self._take(8))[0]

    def string(self, width: int = 16) -> str:
        if width == 8:
            n = self.u8()
        elif width == 16:
            n = self.u16()
        else:
            n = self.u32()
        try:
            return self._take(n).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"{self._name}: invalid UTF-8 at offset {self._pos}") from exc

    def f32_array(self, count: int) -> np.ndarray:
        return np.frombuffer(self._take(4 * count), dtype="<f4").copy()

    def f64_array(self, count: int) -> np.ndarray:
        return np.frombuffer(self._take(8 * count), dtype="<f8").copy()

    def i64_array(self, count: int) -> np.ndarray:
        return np.frombuffer(self._take(8 * count), dtype="<i8").copy()

    def u32_array(self, count: int) -> np.ndarray:
        return np.frombuffer(self._take(4 * count), dtype="<u4").copy()

    def expect_done(self) -> None:
        if self._pos != len(self._data):
            raise FormatError(
                f"{self._name}: {len(self._data) - self._pos} trailing bytes after record end"
            )
