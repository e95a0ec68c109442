"""Little-endian binary containers shared by the weights, checkpoint, and
dataset file formats. All round-trips are byte-exact."""

import struct

import numpy as np

WEIGHTS_MAGIC = b"CYCW"
WEIGHTS_VERSION = 1


class FormatError(ValueError):
    """Raised for bad magic, unsupported version, or truncated data."""


def read_exact(f, n):
    data = f.read(n)
    if len(data) != n:
        raise FormatError(f"truncated file: wanted {n} bytes, got {len(data)}")
    return data


def _write_name(f, name):
    raw = name.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError(f"name too long: {name!r}")
    f.write(struct.pack("<H", len(raw)))
    f.write(raw)


def _read_name(f):
    (n,) = struct.unpack("<H", read_exact(f, 2))
    return read_exact(f, n).decode("utf-8")


def write_array_blocks(f, named):
    """Write the CYCW block: magic, version, count, then each named float32
    array as (u16 name length, name, u8 rank, u32 extents..., raw data)."""
    f.write(WEIGHTS_MAGIC)
    f.write(struct.pack("<II", WEIGHTS_VERSION, len(named)))
    for name, arr in named.items():
        arr = np.ascontiguousarray(arr, dtype="<f4")
        _write_name(f, name)
        f.write(struct.pack("<B", arr.ndim))
        f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        f.write(arr.tobytes())


def read_array_blocks(f):
    magic = read_exact(f, 4)
    if magic != WEIGHTS_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {WEIGHTS_MAGIC!r}")
    version, count = struct.unpack("<II", read_exact(f, 8))
    if version != WEIGHTS_VERSION:
        raise FormatError(f"unsupported weights version {version}")
    named = {}
    for _ in range(count):
        name = _read_name(f)
        (rank,) = struct.unpack("<B", read_exact(f, 1))
        shape = struct.unpack(f"<{rank}I", read_exact(f, 4 * rank))
        n = int(np.prod(shape)) if rank else 1
        arr = np.frombuffer(read_exact(f, 4 * n), dtype="<f4").reshape(shape)
        named[name] = np.ascontiguousarray(arr)
    return named


def write_u64_section(f, named):
    """Named uint64 arrays: count, then (name, u32 length, raw u64 data)."""
    f.write(struct.pack("<I", len(named)))
    for name, arr in named.items():
        arr = np.ascontiguousarray(arr, dtype="<u8").reshape(-1)
        _write_name(f, name)
        f.write(struct.pack("<I", arr.size))
        f.write(arr.tobytes())


def read_u64_section(f):
    (count,) = struct.unpack("<I", read_exact(f, 4))
    named = {}
    for _ in range(count):
        name = _read_name(f)
        (n,) = struct.unpack("<I", read_exact(f, 4))
        named[name] = np.frombuffer(read_exact(f, 8 * n), dtype="<u8").copy()
    return named


def expect_eof(f, what):
    if f.read(1):
        raise FormatError(f"trailing bytes after {what}")
