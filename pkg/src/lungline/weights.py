"""
LWT: a small little-endian binary archive of named float32 tensors.

Layout::

    "LWTF" | u32 version=1 | u32 count |
    count x ( u16 name_len | name (UTF-8) | u8 dtype=0 | u8 ndim | ndim x u32 extent | payload )

The payload is the row-major float32 data, little-endian.
"""
from __future__ import annotations

import io
import os
import struct
import warnings
from collections.abc import Mapping
from dataclasses import replace
from typing import BinaryIO, Iterable, Iterator, Union

import numpy as np

from .arch import ModelGraph
from .errors import LunglineError

MAGIC = b"LWTF"
VERSION = 1
DTYPE_F32 = 0
HEADER = struct.Struct("<4sII")

PathOrFile = Union[str, os.PathLike, BinaryIO]


class WeightsError(LunglineError):
    pass


class LWTFormatError(WeightsError, ValueError):
    pass


class LWTTruncatedError(WeightsError, ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (truncated at byte offset {offset})")
        self.offset = offset


class DuplicateNameError(WeightsError, ValueError):
    pass


class MissingWeightsError(WeightsError, KeyError):
    def __init__(self, missing: list[str]):
        super().__init__(f"{len(missing)} parameter(s) missing: {', '.join(missing)}")
        self.missing = missing

    def __str__(self):
        return self.args[0]


class WeightShapeError(WeightsError, ValueError):
    pass


class UnusedWeightsWarning(UserWarning):
    pass


class WeightContainer(Mapping):
    """Ordered, immutable mapping of tensor name to float32 array."""

    def __init__(self, entries: Union[Mapping, Iterable[tuple[str, np.ndarray]]] = ()):
        items = entries.items() if isinstance(entries, Mapping) else entries
        self._entries: dict[str, np.ndarray] = {}
        for name, data in items:
            if not isinstance(name, str):
                raise TypeError(f"tensor names must be str, got {type(name).__name__}")
            if name in self._entries:
                raise DuplicateNameError(f"duplicate tensor name {name!r}")
            if len(name.encode("utf-8")) > 0xFFFF:
                raise ValueError(f"tensor name too long: {name[:40]!r}...")
            arr = np.array(data, dtype=np.float32, order="C", copy=True)
            if arr.ndim > 0xFF or any(d < 1 or d > 0xFFFFFFFF for d in arr.shape):
                raise ValueError(f"tensor {name!r}: unsupported dims {arr.shape}")
            arr.flags.writeable = False
            self._entries[name] = arr

    def __getitem__(self, name: str) -> np.ndarray:
        return self._entries[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other):
        if not isinstance(other, WeightContainer):
            return NotImplemented
        if list(self) != list(other):
            return False
        return all(
            a.shape == b.shape and a.tobytes() == b.tobytes()
            for a, b in zip(self.values(), other.values())
        )

    def __repr__(self):
        return f"WeightContainer({len(self)} tensors)"

    def nbytes(self) -> int:
        """Size of the serialized container in bytes."""
        size = HEADER.size
        for name, arr in self._entries.items():
            size += 2 + len(name.encode("utf-8")) + 2 + 4 * arr.ndim + 4 * arr.size
        return size


def _encode(container: WeightContainer) -> bytes:
    buf = io.BytesIO()
    buf.write(HEADER.pack(MAGIC, VERSION, len(container)))
    for name, arr in container.items():
        raw = name.encode("utf-8")
        buf.write(struct.pack("<H", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<BB", DTYPE_F32, arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(arr.astype("<f4", copy=False).tobytes())
    return buf.getvalue()


def save_lwt(container: Union[WeightContainer, Mapping], destination: PathOrFile) -> int:
    """Write `container` to a path or binary file object; return bytes written."""
    if not isinstance(container, WeightContainer):
        container = WeightContainer(container)
    data = _encode(container)
    if hasattr(destination, "write"):
        destination.write(data)
    else:
        with open(destination, "wb") as fh:
            fh.write(data)
    return len(data)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise LWTTruncatedError(f"need {n} bytes for {what}", self.pos)
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk


def load_lwt(source: Union[PathOrFile, bytes]) -> WeightContainer:
    """Parse an LWT archive from a path, a binary file object, or raw bytes."""
    if isinstance(source, (bytes, bytearray, memoryview)):
        data = bytes(source)
    elif hasattr(source, "read"):
        data = source.read()
    else:
        with open(source, "rb") as fh:
            data = fh.read()

    r = _Reader(data)
    if data[:4] != MAGIC[:len(data[:4])]:
        raise LWTFormatError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    magic, version, count = HEADER.unpack(r.take(HEADER.size, "header"))
    if version != VERSION:
        raise LWTFormatError(f"unsupported LWT version {version}")

    entries: dict[str, np.ndarray] = {}
    for i in range(count):
        (name_len,) = struct.unpack("<H", r.take(2, f"name length of tensor {i}"))
        try:
            name = r.take(name_len, f"name of tensor {i}").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise LWTFormatError(f"tensor {i}: name is not valid UTF-8") from exc
        dtype, ndim = struct.unpack("<BB", r.take(2, f"dtype/ndim of {name!r}"))
        if dtype != DTYPE_F32:
            raise LWTFormatError(f"tensor {name!r}: unsupported dtype code {dtype}")
        dims = struct.unpack(f"<{ndim}I", r.take(4 * ndim, f"dims of {name!r}"))
        if any(d == 0 for d in dims):
            raise LWTFormatError(f"tensor {name!r}: zero extent in dims {dims}")
        size = int(np.prod(dims, dtype=np.int64))
        payload = r.take(4 * size, f"payload of {name!r}")
        if name in entries:
            raise DuplicateNameError(f"duplicate tensor name {name!r}")
        entries[name] = np.frombuffer(payload, dtype="<f4").reshape(dims)
    if r.pos != len(data):
        warnings.warn(f"{len(data) - r.pos} trailing bytes after the last tensor ignored")
    return WeightContainer(entries)


def model_weights(model: ModelGraph) -> WeightContainer:
    """Export every parameter of `model`, in layer order, as a container."""
    return WeightContainer((name, model.params[name]) for name in model.param_shapes())


def bind_weights(model: ModelGraph, container: Mapping) -> ModelGraph:
    """
    Return a bound copy of `model` whose parameters come from `container`.

    Every parameter must be present with exactly the expected shape; nothing is
    reshaped or transposed. Extra tensors in the container only warn.
    """
    shapes = model.param_shapes()
    missing = [n for n in shapes if n not in container]
    if missing:
        raise MissingWeightsError(missing)
    for name, shape in shapes.items():
        got = tuple(np.shape(container[name]))
        if got != shape:
            hint = " (replace the head before binding)" if name.startswith("head.") else ""
            raise WeightShapeError(
                f"tensor {name!r}: container has shape {got}, model expects {shape}{hint}"
            )
    extra = [n for n in container if n not in shapes]
    if extra:
        warnings.warn(
            f"{len(extra)} unused tensor(s) in container: {', '.join(extra[:10])}"
            + (" ..." if len(extra) > 10 else ""),
            UnusedWeightsWarning,
            stacklevel=2,
        )
    params = {}
    for name in shapes:
        arr = np.array(container[name], dtype=np.float32, order="C", copy=True)
        arr.flags.writeable = False
        params[name] = arr
    return replace(model, params=params, bound=True)
