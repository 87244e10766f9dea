"""Image containers and on-disk image/spectrum formats.

A :class:`GridImage` couples a 2-D array with the geometry of the grid it
lives on: the native camera grid (pitch 1.0 in pixel units), or the twice
denser grid that sum/difference coordinates of a photon pair live on
(pitch 0.5).  The origin records the physical coordinate, in pixel units of
the camera grid, of element ``values[0, 0]``.

Images are exported as 16-bit binary PGM (for quick viewing) plus raw ``.npy``
dumps (for lossless round trips); spectra as two-column CSV.  None of the
writers embed timestamps, so outputs are byte-stable for a fixed input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class GridImage:
    """A scalar image on a uniform grid.

    values  -- 2-D float array
    pitch   -- grid spacing in camera-pixel units (1.0 native, 0.5 dense)
    origin  -- physical (y, x) of values[0, 0], camera-pixel units
    counts  -- optional per-point contribution counts (dense-grid images
               built by shift-and-add averaging keep them for diagnostics)
    """

    values: np.ndarray
    pitch: float = 1.0
    origin: tuple[float, float] = (0.0, 0.0)
    counts: np.ndarray | None = field(default=None, repr=False)

    def axis_coordinates(self, axis: int) -> np.ndarray:
        """Physical coordinates of the grid lines along *axis* (0 = y)."""
        n = self.values.shape[axis]
        return self.origin[axis] + self.pitch * np.arange(n)


def write_pgm16(path, values: np.ndarray) -> None:
    """Write *values* as a 16-bit binary PGM, scaled so the maximum maps
    to 65535.  Non-positive images come out all black."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"PGM export needs a 2-D array, got shape {arr.shape}")
    top = float(arr.max(initial=0.0))
    if top > 0:
        scaled = np.clip(arr / top, 0.0, 1.0) * 65535.0
    else:
        scaled = np.zeros_like(arr)
    data = np.round(scaled).astype(">u2")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(data.tobytes())


def write_spectrum_csv(path, freqs: np.ndarray, amps: np.ndarray) -> None:
    """Write a spectrum as ``frequency_cycles_per_pixel,amplitude`` rows."""
    freqs = np.asarray(freqs, dtype=np.float64)
    amps = np.asarray(amps, dtype=np.float64)
    if freqs.shape != amps.shape or freqs.ndim != 1:
        raise ValueError("frequency and amplitude arrays must be equal-length 1-D")
    lines = ["frequency_cycles_per_pixel,amplitude"]
    lines.extend(f"{f:.12g},{a:.12g}" for f, a in zip(freqs, amps))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_spectrum_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a spectrum written by :func:`write_spectrum_csv`."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1]
