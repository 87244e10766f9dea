"""Phase imaging from four phase-shifted acquisition series.

Two interference regimes are supported.

Pair interference ("noon"): the coincidence rate against a reference with
phase shift alpha follows ``[1 + v cos(2 theta - 2 alpha)]^2`` because the
photon pair accumulates the object phase twice.  Acquiring at
``alpha in {0, pi/4, pi/2, 3*pi/4}`` places the doubled phase on quadrature
points, and the four-step arctangent returns ``wrap(2 theta)`` exactly, for
the squared fringe law as well as a linear one: the square's cross terms
cancel between shifts half a fringe apart.

Intensity interference ("classical"): single photons produce
``1 + v cos(theta - alpha)``; shifts ``{0, pi/2, pi, 3*pi/2}`` recover
``wrap(theta)``.

Phase maps from coincidence data are computed on the half-pixel grid of the
super-resolved image.  No plane filter or normalization is applied on the
way: all four shifts share the same plane scaling, which cancels in the
arctangent, whereas normalizing each shift separately would distort the
fringe ratios.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigurationError
from .images import GridImage
from .jpd import accumulate_jpd
from .pipeline import interpolate_invalid, super_resolve
from .jpd import apply_separation_policy
from .scenes import Scene, block_mean
from .simulate import (analytic_jpd, classical_fringe, interference_rate,
                       noon_density, simulate_frames)

PAIR_SHIFTS = (0.0, math.pi / 4, math.pi / 2, 3 * math.pi / 4)
INTENSITY_SHIFTS = (0.0, math.pi / 2, math.pi, 3 * math.pi / 2)


def wrap_phase(x: np.ndarray) -> np.ndarray:
    """Wrap angles to (-pi, pi], matching arctangent output."""
    return np.angle(np.exp(1j * np.asarray(x, dtype=np.float64)))


def four_step_phase(s0, s1, s2, s3) -> np.ndarray:
    """Quadrature recombination of four equally shifted acquisitions.

    With signals a + b cos(phi - k * pi/2), k = 0..3, returns wrap(phi);
    exact also when the fringe enters squared, since the extra harmonic is
    common mode between opposite shifts.
    """
    return np.arctan2(np.asarray(s1) - np.asarray(s3),
                      np.asarray(s0) - np.asarray(s2))


# ---------------------------------------------------------------------------
# pair-interference phase maps

def simulate_pair_phase_stacks(scene: Scene, contrast: float = 1.0,
                               sigma: float = 0.25, pair_rate: float = 60.0,
                               n_frames: int = 1000, camera=None,
                               seed: int = 0,
                               shifts=PAIR_SHIFTS) -> list[np.ndarray]:
    """Simulate one frame stack per reference shift; each stack gets an
    independent deterministic random stream derived from (seed, shift index).

    The per-shift pair rate follows the transmitted flux of the
    interference pattern (*pair_rate* refers to the bare object)."""
    base = scene.near_density()
    stacks = []
    for i, alpha in enumerate(shifts):
        density = noon_density(scene, alpha, contrast)
        stacks.append(simulate_frames(
            scene, mode="near", sigma=sigma,
            pair_rate=interference_rate(pair_rate, density, base),
            n_frames=n_frames, camera=camera, seed=(seed, i),
            density=density))
    return stacks


def _sr_image_for_phase(jpd, camera) -> GridImage:
    if camera is not None:
        jpd = apply_separation_policy(jpd, camera.invalid_pair_separation)
        if jpd.mode == "near":
            jpd = interpolate_invalid(jpd)
        else:
            jpd = jpd.with_invalid_excluded()
    return super_resolve(jpd)


def pair_phase_map(stacks, camera=None, band_radius: int = 1,
                   chunk_size: int = 256, workers: int | None = None) -> GridImage:
    """Reconstruct wrap(2 theta) on the half-pixel grid from four stacks
    acquired at the pair-interference shifts."""
    if len(stacks) != 4:
        raise ConfigurationError("four phase-shifted stacks are required")
    images = []
    for frames in stacks:
        jpd = accumulate_jpd(frames, mode="near", band_radius=band_radius,
                             chunk_size=chunk_size, workers=workers)
        images.append(_sr_image_for_phase(jpd, camera))
    phase = four_step_phase(*(im.values for im in images))
    ref = images[0]
    return GridImage(phase, pitch=ref.pitch, origin=ref.origin, counts=ref.counts)


def analytic_pair_phase_map(scene: Scene, contrast: float = 1.0,
                            sigma: float = 0.0, band_radius: int = 1,
                            shifts=PAIR_SHIFTS) -> GridImage:
    """Noise-free pair-interference phase map via the analytic JPDs."""
    base = scene.near_density()
    images = []
    for alpha in shifts:
        density = noon_density(scene, alpha, contrast)
        jpd = analytic_jpd(scene, mode="near", band_radius=band_radius,
                           sigma=sigma,
                           pair_rate=interference_rate(1.0, density, base),
                           density=density)
        images.append(super_resolve(jpd))
    phase = four_step_phase(*(im.values for im in images))
    ref = images[0]
    return GridImage(phase, pitch=ref.pitch, origin=ref.origin, counts=ref.counts)


def reference_pair_phase(scene: Scene) -> GridImage:
    """Ground-truth wrap(2 theta) sampled at the half-pixel points.

    Samples the scene phase at one subcell inside each half-pixel window
    (windows that do not straddle a phase step are constant, the intended
    use; see the quarter-pixel checkerboard alignment)."""
    f = scene.oversample
    m = scene.size
    n_half = 2 * m - 1
    starts = (f * (2 * np.arange(n_half) + 1)) // 4
    sampled = scene.phase[np.ix_(starts, starts)]
    return GridImage(wrap_phase(2.0 * sampled), pitch=0.5, origin=(0.0, 0.0))


# ---------------------------------------------------------------------------
# intensity-interference phase maps

def intensity_phase_map(stacks) -> np.ndarray:
    """wrap(theta) per camera pixel from four intensity stacks acquired at
    the intensity-interference shifts; each stack is averaged over frames."""
    if len(stacks) != 4:
        raise ConfigurationError("four phase-shifted stacks are required")
    means = [np.asarray(s, dtype=np.float64).mean(axis=0) for s in stacks]
    return four_step_phase(*means)


def analytic_intensity_phase_map(scene: Scene, contrast: float = 1.0,
                                 shifts=INTENSITY_SHIFTS) -> np.ndarray:
    """Noise-free intensity-interference phase map (pixel-integrated)."""
    images = [block_mean(classical_fringe(scene, alpha, contrast),
                         scene.oversample) for alpha in shifts]
    return four_step_phase(*images)


def reference_intensity_phase(scene: Scene) -> np.ndarray:
    """Ground-truth wrap(theta) sampled at pixel centres."""
    f = scene.oversample
    centers = np.arange(scene.size) * f + f // 2
    return wrap_phase(scene.phase[np.ix_(centers, centers)])


# ---------------------------------------------------------------------------
# phase sweep diagnostics

def double_phase_curve(scene: Scene, shifts: np.ndarray,
                       contrast: float = 1.0, kind: str = "pair") -> np.ndarray:
    """Total signal against reference shift: the pair-interference curve
    oscillates at twice the rate of the intensity curve."""
    shifts = np.asarray(shifts, dtype=np.float64)
    if kind == "pair":
        return np.array([noon_density(scene, a, contrast).sum() for a in shifts])
    if kind == "intensity":
        return np.array([classical_fringe(scene, a, contrast).sum() for a in shifts])
    raise ConfigurationError(f"kind must be 'pair' or 'intensity', got {kind!r}")


def dominant_period(shifts: np.ndarray, values: np.ndarray) -> float:
    """Period of the strongest non-constant Fourier component of a uniformly
    sampled sweep."""
    shifts = np.asarray(shifts, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if shifts.ndim != 1 or shifts.size < 3 or shifts.shape != values.shape:
        raise ConfigurationError("need matching 1-D sweeps of length >= 3")
    steps = np.diff(shifts)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
        raise ConfigurationError("period fit requires uniform shift spacing")
    coeffs = np.fft.rfft(values)
    k = 1 + int(np.argmax(np.abs(coeffs[1:])))
    span = steps[0] * shifts.size
    return span / k
