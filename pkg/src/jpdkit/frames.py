"""Binary frame-stack storage.

Camera frames travel between the simulator and the reconstruction tools as a
single flat binary file holding a stack of equally sized 2-D frames.  The
layout is deliberately minimal so stacks can be produced or inspected from any
language:

======  ====  =======================================================
offset  size  field
======  ====  =======================================================
0       4     magic ``b"BPSR"``
4       2     format version, little-endian u16, currently 1
6       2     sample code, u16: 0 = uint16, 1 = float32, 2 = packed bits
8       4     frame width in pixels, u32
12      4     frame height in pixels, u32
16      4     number of frames, u32
20      12    reserved, zero
======  ====  =======================================================

Frame data follows the 32-byte header, frame by frame, row-major,
little-endian.  Packed-bit stacks (binary cameras) pack each row separately
into ``ceil(width / 8)`` bytes, most significant bit first, so rows always
start on a byte boundary.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import FileFormatError, FrameShapeError

MAGIC = b"BPSR"
VERSION = 1
_HEADER = struct.Struct("<4sHHIII")
HEADER_SIZE = 32

CODE_U16 = 0
CODE_F32 = 1
CODE_BITS = 2

_CODE_TO_DTYPE = {CODE_U16: np.dtype("<u2"), CODE_F32: np.dtype("<f4")}


def _code_for(frames: np.ndarray) -> int:
    if frames.dtype == np.bool_:
        return CODE_BITS
    if frames.dtype == np.uint16:
        return CODE_U16
    if frames.dtype == np.float32:
        return CODE_F32
    raise FrameShapeError(
        f"unsupported frame dtype {frames.dtype}; use uint16, float32 or bool"
    )


def write_frames(path, frames: np.ndarray) -> None:
    """Write a frame stack to *path*.

    *frames* must have shape (count, height, width) and dtype uint16,
    float32 or bool.  Boolean stacks are bit-packed per row.
    """
    frames = np.asarray(frames)
    if frames.ndim != 3:
        raise FrameShapeError(f"frame stack must be 3-D, got shape {frames.shape}")
    count, height, width = frames.shape
    if height == 0 or width == 0:
        raise FrameShapeError("frames must have non-zero height and width")
    code = _code_for(frames)
    header = _HEADER.pack(MAGIC, VERSION, code, width, height, count)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(b"\0" * (HEADER_SIZE - _HEADER.size))
        if code == CODE_BITS:
            # packbits along the row axis keeps every row byte-aligned
            fh.write(np.packbits(frames, axis=-1).tobytes())
        else:
            fh.write(frames.astype(_CODE_TO_DTYPE[code], copy=False).tobytes())


def read_frames(path) -> np.ndarray:
    """Read a frame stack written by :func:`write_frames`.

    Returns an array of shape (count, height, width); packed-bit stacks come
    back as bool.  Raises :class:`FileFormatError` on bad magic, version,
    sample code or a size mismatch (truncated or padded file).
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < HEADER_SIZE:
        raise FileFormatError(f"{path}: too short for a frame-stack header")
    magic, version, code, width, height, count = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FileFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FileFormatError(f"{path}: unsupported version {version}")
    if height == 0 or width == 0:
        raise FileFormatError(f"{path}: zero frame dimensions")
    body = raw[HEADER_SIZE:]
    if code == CODE_BITS:
        row_bytes = (width + 7) // 8
        expected = count * height * row_bytes
        if len(body) != expected:
            raise FileFormatError(
                f"{path}: expected {expected} data bytes, found {len(body)}"
            )
        packed = np.frombuffer(body, dtype=np.uint8)
        packed = packed.reshape(count, height, row_bytes)
        bits = np.unpackbits(packed, axis=-1, count=width)
        return bits.astype(bool)
    if code not in _CODE_TO_DTYPE:
        raise FileFormatError(f"{path}: unknown sample code {code}")
    dtype = _CODE_TO_DTYPE[code]
    expected = count * height * width * dtype.itemsize
    if len(body) != expected:
        raise FileFormatError(
            f"{path}: expected {expected} data bytes, found {len(body)}"
        )
    data = np.frombuffer(body, dtype=dtype).reshape(count, height, width)
    # native byte order copy so downstream arithmetic is unconstrained
    return np.ascontiguousarray(data.astype(dtype.newbyteorder("="), copy=False))
