import numpy as np
import pytest

from jpdkit.images import (GridImage, read_spectrum_csv, write_pgm16,
                           write_spectrum_csv)


def test_axis_coordinates():
    img = GridImage(np.zeros((3, 5)), pitch=0.5, origin=(-1.0, 2.0))
    assert np.allclose(img.axis_coordinates(0), [-1.0, -0.5, 0.0])
    assert np.allclose(img.axis_coordinates(1), [2.0, 2.5, 3.0, 3.5, 4.0])


def test_pgm_header_and_scaling(tmp_path):
    path = tmp_path / "img.pgm"
    write_pgm16(path, np.array([[0.0, 1.0], [2.0, 4.0]]))
    raw = path.read_bytes()
    header, pixels = raw.rsplit(b"\n", 1)
    assert header.split() == [b"P5", b"2", b"2", b"65535"]
    values = np.frombuffer(pixels, dtype=">u2").reshape(2, 2)
    assert values[1, 1] == 65535
    assert values[0, 1] == round(65535 / 4)
    assert values[0, 0] == 0


def test_pgm_all_zero_and_bad_shape(tmp_path):
    path = tmp_path / "img.pgm"
    write_pgm16(path, np.zeros((2, 2)))
    pixels = path.read_bytes().rsplit(b"\n", 1)[1]
    assert np.frombuffer(pixels, dtype=">u2").max() == 0
    with pytest.raises(ValueError):
        write_pgm16(path, np.zeros((2, 2, 2)))


def test_spectrum_csv_round_trip(tmp_path):
    path = tmp_path / "spec.csv"
    freqs = np.array([0.0, 1.0 / 3.0, 2.0 / 3.0])
    amps = np.array([1.0, 0.123456789012345, 2e-7])
    write_spectrum_csv(path, freqs, amps)
    text = path.read_text()
    assert text.splitlines()[0] == "frequency_cycles_per_pixel,amplitude"
    back_f, back_a = read_spectrum_csv(path)
    assert np.allclose(back_f, freqs, rtol=1e-11, atol=0)
    assert np.allclose(back_a, amps, rtol=1e-11, atol=0)
