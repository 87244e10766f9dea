import numpy as np
import pytest

from jpdkit.errors import FileFormatError, FrameShapeError
from jpdkit.frames import HEADER_SIZE, MAGIC, read_frames, write_frames


def test_round_trip_uint16(tmp_path):
    rng = np.random.default_rng(0)
    frames = rng.integers(0, 4000, (5, 7, 11)).astype(np.uint16)
    path = tmp_path / "stack.bpsr"
    write_frames(path, frames)
    back = read_frames(path)
    assert back.dtype == np.uint16
    assert np.array_equal(back, frames)


def test_round_trip_float32(tmp_path):
    rng = np.random.default_rng(1)
    frames = rng.normal(size=(3, 4, 6)).astype(np.float32)
    path = tmp_path / "stack.bpsr"
    write_frames(path, frames)
    back = read_frames(path)
    assert back.dtype == np.float32
    assert np.array_equal(back, frames)


def test_round_trip_bool_unaligned_width(tmp_path):
    # width 11 is not a byte multiple, so per-row packing is exercised
    rng = np.random.default_rng(2)
    frames = rng.random((4, 5, 11)) > 0.5
    path = tmp_path / "stack.bpsr"
    write_frames(path, frames)
    back = read_frames(path)
    assert back.dtype == np.bool_
    assert np.array_equal(back, frames)


def test_bool_file_is_row_packed(tmp_path):
    frames = np.zeros((1, 2, 11), dtype=bool)
    frames[0, 1, 10] = True
    path = tmp_path / "stack.bpsr"
    write_frames(path, frames)
    body = path.read_bytes()[HEADER_SIZE:]
    # 2 bytes per row; last set bit sits in bit position 10 % 8 of byte 1
    assert len(body) == 4
    assert body[:2] == b"\0\0"
    assert body[2:] == bytes([0, 0b00100000])


def test_header_layout(tmp_path):
    frames = np.zeros((2, 3, 4), dtype=np.uint16)
    path = tmp_path / "stack.bpsr"
    write_frames(path, frames)
    raw = path.read_bytes()
    assert raw[:4] == MAGIC
    assert len(raw) == HEADER_SIZE + 2 * 3 * 4 * 2
    width = int.from_bytes(raw[8:12], "little")
    height = int.from_bytes(raw[12:16], "little")
    count = int.from_bytes(raw[16:20], "little")
    assert (width, height, count) == (4, 3, 2)
    assert raw[20:32] == b"\0" * 12


def test_non_contiguous_input(tmp_path):
    base = np.arange(2 * 4 * 6, dtype=np.uint16).reshape(2, 4, 6)
    view = base[:, ::2, :]
    path = tmp_path / "stack.bpsr"
    write_frames(path, view)
    assert np.array_equal(read_frames(path), view)


def test_write_rejects_bad_shapes_and_dtypes(tmp_path):
    path = tmp_path / "bad.bpsr"
    with pytest.raises(FrameShapeError):
        write_frames(path, np.zeros((4, 4), dtype=np.uint16))
    with pytest.raises(FrameShapeError):
        write_frames(path, np.zeros((2, 0, 4), dtype=np.uint16))
    with pytest.raises(FrameShapeError):
        write_frames(path, np.zeros((2, 4, 4), dtype=np.int8))


def test_read_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.bpsr"
    frames = np.zeros((2, 3, 3), dtype=np.uint16)
    write_frames(path, frames)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"NOPE"
    path.write_bytes(bytes(raw))
    with pytest.raises(FileFormatError, match="magic"):
        read_frames(path)


def test_read_rejects_truncation_and_padding(tmp_path):
    path = tmp_path / "bad.bpsr"
    write_frames(path, np.zeros((2, 3, 3), dtype=np.uint16))
    raw = path.read_bytes()
    path.write_bytes(raw[:-1])
    with pytest.raises(FileFormatError, match="bytes"):
        read_frames(path)
    path.write_bytes(raw + b"\0")
    with pytest.raises(FileFormatError, match="bytes"):
        read_frames(path)
    path.write_bytes(raw[:10])
    with pytest.raises(FileFormatError, match="short"):
        read_frames(path)


def test_read_rejects_bad_version_and_code(tmp_path):
    path = tmp_path / "bad.bpsr"
    write_frames(path, np.zeros((2, 3, 3), dtype=np.uint16))
    raw = bytearray(path.read_bytes())
    raw[4:6] = (99).to_bytes(2, "little")
    path.write_bytes(bytes(raw))
    with pytest.raises(FileFormatError, match="version"):
        read_frames(path)
    raw[4:6] = (1).to_bytes(2, "little")
    raw[6:8] = (7).to_bytes(2, "little")
    path.write_bytes(bytes(raw))
    with pytest.raises(FileFormatError, match="sample code"):
        read_frames(path)
