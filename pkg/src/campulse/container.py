"""Binary container for named tensors.

Layout: magic ``RMTC``, version u32, entry count u32, then per entry a
u32-length-prefixed UTF-8 name, dtype code u8 (0=f32, 1=f64), rank u8,
dims as u64, and the raw values. All integers and values little-endian.

Checkpoints append a UTF-8 text block after the last entry; readers get
it back as ``trailer``.
"""

import struct

import numpy as np

MAGIC = b"RMTC"
VERSION = 1

_DTYPE_CODE = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_CODE_DTYPE = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


class ContainerError(Exception):
    pass


def write_container(path, tensors, trailer=b""):
    """Write a dict of name -> ndarray (f32/f64) plus an optional trailer."""
    if isinstance(trailer, str):
        trailer = trailer.encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(tensors)))
        for name, arr in tensors.items():
            arr = np.asarray(arr)
            if arr.dtype not in _DTYPE_CODE:
                raise ContainerError(f"{name}: unsupported dtype {arr.dtype}")
            nb = name.encode("utf-8")
            f.write(struct.pack("<I", len(nb)))
            f.write(nb)
            f.write(struct.pack("<BB", _DTYPE_CODE[arr.dtype], arr.ndim))
            for d in arr.shape:
                f.write(struct.pack("<Q", d))
            f.write(np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<")).tobytes())
        f.write(trailer)


def read_container(path):
    """Read back (tensors, trailer). Raises ContainerError on bad files."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != MAGIC:
        raise ContainerError(f"{path}: bad magic {data[:4]!r}")
    version, count = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise ContainerError(f"{path}: unsupported version {version}")
    off = 12
    tensors = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<I", data, off)
        off += 4
        name = data[off : off + nlen].decode("utf-8")
        off += nlen
        code, rank = struct.unpack_from("<BB", data, off)
        off += 2
        if code not in _CODE_DTYPE:
            raise ContainerError(f"{path}: unknown dtype code {code}")
        dims = struct.unpack_from(f"<{rank}Q", data, off) if rank else ()
        off += 8 * rank
        dtype = _CODE_DTYPE[code]
        n = int(np.prod(dims)) if rank else 1
        end = off + n * dtype.itemsize
        if end > len(data):
            raise ContainerError(f"{path}: truncated entry {name!r}")
        arr = np.frombuffer(data[off:end], dtype=dtype).reshape(dims).copy()
        tensors[name] = arr
        off = end
    return tensors, data[off:]
