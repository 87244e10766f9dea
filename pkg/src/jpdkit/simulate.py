"""Photon-pair frame simulation and analytic (closed-form) JPDs.

The simulator draws pair birth positions from a scene-derived density on the
oversampled grid, applies the pair correlation model and a camera profile,
and bins photons into sensor frames.

Correlation model: the two photons of a pair land at ``x + xi_1`` and, in the
near-field geometry, ``x + xi_2`` (far field: ``C - x + xi_2`` with
``C = size - 1`` the pair sum-coordinate centre), the jitters drawn
independently as isotropic ``N(0, sigma^2 / 2)`` per photon.  The photon
separation then follows ``N(0, sigma^2)`` per axis while the pair centre
straddles the half-pixel grid symmetrically; a one-sided realization (photon
one exactly at ``x``) would shift every reconstructed image by a quarter
pixel.

Randomness is drawn per fixed-size frame chunk from
``SeedSequence((seed, stage, chunk))`` streams, so a stack is bit-identical
for a given seed no matter how the generation is batched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal, special

from .errors import ConfigurationError, DegenerateDensityError
from .jpd import Jpd, structural_validity
from .scenes import Scene

SIM_CHUNK_FRAMES = 4096
_STAGE_EVENTS = 0
_STAGE_CAMERA = 1


# ---------------------------------------------------------------------------
# camera profiles

@dataclass(frozen=True)
class IdealCamera:
    """Noiseless photon counting.  Only the self-product diagonal (both
    photons in one pixel) is unusable: the estimator cannot debias it."""

    name: str = "ideal"

    def render(self, counts: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return counts.astype(np.uint16)

    def invalid_pair_separation(self, dy, dx):
        return (np.asarray(dy) == 0) & (np.asarray(dx) == 0)


@dataclass(frozen=True)
class EmccdCamera:
    """Electron-multiplying CCD: per-frame scalar gain fluctuation, Gaussian
    read noise, optional vertical readout smear, u16 digitization.

    The gain fluctuation survives the accidental subtraction as a background
    proportional to the product of mean intensities; readout moves charge
    along columns, so all same-column separations (dx = 0) are flagged
    invalid regardless of the smear magnitude.
    """

    gain_mean: float = 200.0
    gain_cv: float = 0.0
    read_sigma: float = 8.0
    smear: float = 0.0
    name: str = "emccd"

    def __post_init__(self):
        if self.gain_mean <= 0:
            raise ConfigurationError("EMCCD gain_mean must be positive")
        if self.gain_cv < 0 or self.read_sigma < 0 or not (0 <= self.smear < 1):
            raise ConfigurationError("EMCCD noise parameters out of range")

    def render(self, counts: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        n = counts.shape[0]
        gains = rng.normal(self.gain_mean, self.gain_cv * self.gain_mean, n)
        analog = counts.astype(np.float64) * gains[:, None, None]
        if self.smear > 0:
            # charge leaks down the readout column: out[y] = in[y] + smear*out[y-1]
            analog = signal.lfilter([1.0], [1.0, -self.smear], analog, axis=1)
        analog += rng.normal(0.0, self.read_sigma, analog.shape)
        return np.round(np.clip(analog, 0, 65535)).astype(np.uint16)

    def invalid_pair_separation(self, dy, dx):
        dy = np.asarray(dy)
        dx = np.asarray(dx)
        return np.broadcast_to(dx == 0, np.broadcast_shapes(dy.shape, dx.shape))


@dataclass(frozen=True)
class SpadCamera:
    """Binary single-photon avalanche array: a pixel fires on >= 1 photon.
    Crosstalk contaminates the 8-neighbour ring, so all separations with
    |r2 - r1|_inf <= 1 are flagged invalid."""

    name: str = "spad"

    def render(self, counts: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return counts >= 1

    def invalid_pair_separation(self, dy, dx):
        return (np.abs(dy) <= 1) & (np.abs(dx) <= 1)


def camera_by_name(name: str, **params):
    """Instantiate a camera profile from its config-file name."""
    if name == "ideal":
        if params:
            raise ConfigurationError("ideal camera takes no parameters")
        return IdealCamera()
    if name == "emccd":
        try:
            return EmccdCamera(**params)
        except TypeError as exc:
            raise ConfigurationError(f"bad EMCCD parameter: {exc}") from exc
    if name == "spad":
        if params:
            raise ConfigurationError("spad camera takes no parameters")
        return SpadCamera()
    raise ConfigurationError(f"unknown camera profile {name!r}")


# ---------------------------------------------------------------------------
# pair densities beyond the plain geometric ones

def noon_density(scene: Scene, shift: float, contrast: float = 1.0) -> np.ndarray:
    """Two-photon interference density against a phase-shifted reference:
    |t|^4 [1 + v cos(2 theta - 2 alpha)]^2.  The doubled phase is what the
    photon pair accumulates; the squared bracket is the coincidence fringe."""
    fringe = 1.0 + contrast * np.cos(2.0 * scene.phase - 2.0 * shift)
    return scene.near_density() * fringe ** 2


def classical_fringe(scene: Scene, shift: float, contrast: float = 1.0) -> np.ndarray:
    """Single-photon interference intensity |t|^2 [1 + v cos(theta - alpha)]
    on the oversampled grid."""
    fringe = 1.0 + contrast * np.cos(scene.phase - shift)
    return scene.magnitude2 * fringe


def interference_rate(base_rate: float, pattern: np.ndarray,
                      reference: np.ndarray) -> float:
    """Event rate under an interference pattern.

    The simulator samples positions from a normalized density, so the
    shift-dependent total flux must enter through the rate: scale
    *base_rate* by the mass of *pattern* relative to *reference* (the bare
    object's density).  Without this, acquisitions at different reference
    shifts would be silently renormalized to equal flux and quantities that
    compare absolute signal across shifts, the four-step arctangent above
    all, would come out distorted.
    """
    total = float(np.asarray(pattern, dtype=np.float64).sum())
    base = float(np.asarray(reference, dtype=np.float64).sum())
    if base <= 0 or total < 0:
        raise DegenerateDensityError("interference rate needs positive masses")
    return base_rate * total / base


# ---------------------------------------------------------------------------
# frame simulation

def _normalized_density(scene: Scene, mode: str, density) -> np.ndarray:
    if density is None:
        density = scene.near_density() if mode == "near" else scene.far_density()
    density = np.asarray(density, dtype=np.float64)
    n = scene.size * scene.oversample
    if density.shape != (n, n):
        raise ConfigurationError(
            f"density shape {density.shape} does not match scene grid {(n, n)}")
    if np.any(density < 0) or not np.all(np.isfinite(density)):
        raise DegenerateDensityError("pair density must be finite and non-negative")
    total = density.sum()
    if total <= 0:
        raise DegenerateDensityError("pair density has no mass")
    return density.ravel() / total


def _seed_entropy(seed) -> tuple[int, ...]:
    """Accept a plain int or a tuple of ints (stream labels) as a seed."""
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    return tuple(int(s) for s in seed)


def _chunk_rngs(seed, chunk: int):
    base = _seed_entropy(seed)
    events = np.random.default_rng(
        np.random.SeedSequence((*base, _STAGE_EVENTS, chunk)))
    camera = np.random.default_rng(
        np.random.SeedSequence((*base, _STAGE_CAMERA, chunk)))
    return events, camera


def _bin_photons(counts: np.ndarray, frame_of: np.ndarray,
                 py: np.ndarray, px: np.ndarray, size: int) -> None:
    iy = np.floor(py + 0.5).astype(np.int64)
    ix = np.floor(px + 0.5).astype(np.int64)
    ok = (iy >= 0) & (iy < size) & (ix >= 0) & (ix < size)
    np.add.at(counts, (frame_of[ok], iy[ok], ix[ok]), 1)


def simulate_frames(scene: Scene, mode: str = "near", sigma: float = 0.25,
                    pair_rate: float = 60.0, n_frames: int = 1000,
                    camera=None, seed: int | tuple = 0,
                    density: np.ndarray | None = None) -> np.ndarray:
    """Simulate a camera frame stack of photon-pair detections.

    pair_rate is the Poisson mean of pairs per frame; *density* overrides the
    geometry's default pair density (used for interference thinning).
    Photons falling off the sensor are lost individually.
    """
    if mode not in ("near", "far"):
        raise ConfigurationError(f"mode must be 'near' or 'far', got {mode!r}")
    if sigma < 0 or pair_rate <= 0 or n_frames < 1:
        raise ConfigurationError("sigma >= 0, pair_rate > 0, n_frames >= 1 required")
    camera = camera if camera is not None else IdealCamera()
    p = _normalized_density(scene, mode, density)
    cum = np.cumsum(p)
    m, f = scene.size, scene.oversample
    sum_center = float(m - 1)
    jitter_scale = sigma / math.sqrt(2.0)
    out = None
    for chunk, start in enumerate(range(0, n_frames, SIM_CHUNK_FRAMES)):
        n = min(SIM_CHUNK_FRAMES, n_frames - start)
        rng_e, rng_c = _chunk_rngs(seed, chunk)
        frame_counts = rng_e.poisson(pair_rate, n)
        tot = int(frame_counts.sum())
        idx = np.minimum(np.searchsorted(cum, rng_e.random(tot)), p.size - 1)
        jy, jx = np.divmod(idx, m * f)
        y0 = -0.5 + (jy + rng_e.random(tot)) / f
        x0 = -0.5 + (jx + rng_e.random(tot)) / f
        if sigma > 0:
            jit = rng_e.normal(0.0, jitter_scale, (2, 2, tot))
        else:
            jit = np.zeros((2, 2, tot))
        frame_of = np.repeat(np.arange(n), frame_counts)
        counts = np.zeros((n, m, m), dtype=np.int32)
        _bin_photons(counts, frame_of, y0 + jit[0, 0], x0 + jit[0, 1], m)
        if mode == "near":
            _bin_photons(counts, frame_of, y0 + jit[1, 0], x0 + jit[1, 1], m)
        else:
            _bin_photons(counts, frame_of,
                         sum_center - y0 + jit[1, 0],
                         sum_center - x0 + jit[1, 1], m)
        rendered = camera.render(counts, rng_c)
        if out is None:
            out = np.empty((n_frames, m, m), dtype=rendered.dtype)
        out[start:start + n] = rendered
    return out


def simulate_intensity_frames(scene: Scene, intensity: np.ndarray,
                              photon_rate: float, n_frames: int,
                              camera=None, seed: int | tuple = 0) -> np.ndarray:
    """Simulate classical (single-photon) frames for an intensity pattern on
    the oversampled grid; photon_rate is the Poisson mean per frame."""
    if photon_rate <= 0 or n_frames < 1:
        raise ConfigurationError("photon_rate > 0 and n_frames >= 1 required")
    camera = camera if camera is not None else IdealCamera()
    p = _normalized_density(scene, "near", intensity)
    cum = np.cumsum(p)
    m, f = scene.size, scene.oversample
    out = None
    for chunk, start in enumerate(range(0, n_frames, SIM_CHUNK_FRAMES)):
        n = min(SIM_CHUNK_FRAMES, n_frames - start)
        rng_e, rng_c = _chunk_rngs(seed, chunk)
        frame_counts = rng_e.poisson(photon_rate, n)
        tot = int(frame_counts.sum())
        idx = np.minimum(np.searchsorted(cum, rng_e.random(tot)), p.size - 1)
        jy, jx = np.divmod(idx, m * f)
        py = -0.5 + (jy + rng_e.random(tot)) / f
        px = -0.5 + (jx + rng_e.random(tot)) / f
        frame_of = np.repeat(np.arange(n), frame_counts)
        counts = np.zeros((n, m, m), dtype=np.int32)
        _bin_photons(counts, frame_of, py, px, m)
        rendered = camera.render(counts, rng_c)
        if out is None:
            out = np.empty((n_frames, m, m), dtype=rendered.dtype)
        out[start:start + n] = rendered
    return out


# ---------------------------------------------------------------------------
# analytic JPDs

def _axis_capture(offsets: np.ndarray, sigma_photon: float) -> np.ndarray:
    """Probability that a photon born *offsets* away from a pixel centre is
    captured by that unit pixel, for Gaussian jitter sigma_photon."""
    z = 1.0 / (sigma_photon * math.sqrt(2.0))
    return 0.5 * (special.erf((offsets + 0.5) * z)
                  - special.erf((offsets - 0.5) * z))


def _half_grid_split(scene: Scene, mode: str) -> list[tuple[int, np.ndarray]]:
    """Per-axis weight matrices W_d[j, r] of the half-pixel assignment of
    perfectly correlated pairs.

    Near field: a pair born at x is assigned to the half-pixel sum point
    s = round(2x); even s maps to the single ordered pixel pair
    (r = s/2, d = 0) with weight 1, odd s splits evenly between
    ((s-1)/2, +1) and ((s+1)/2, -1).  Far field: the assignment runs on the
    difference coordinate s = round(2x - C) and the split goes to the two
    band planes u = +-1 whose parity matches C + s.  Pairs whose pixels fall
    off the sensor are dropped (structural exclusion).
    """
    m, f = scene.size, scene.oversample
    coords = scene.subcell_coordinates()
    big_c = m - 1
    target = 2.0 * coords - big_c if mode == "far" else 2.0 * coords
    s_all = np.round(target).astype(np.int64)
    mats = {d: np.zeros((m * f, m)) for d in (-1, 0, 1)}
    for j, s in enumerate(s_all):
        if mode == "far":
            parity = (big_c + s) % 2
            options = ((0, 1.0),) if parity == 0 else ((-1, 0.5), (1, 0.5))
            for u, weight in options:
                r1 = (big_c + u + int(s)) // 2
                r2 = r1 - int(s)
                if 0 <= r1 < m and 0 <= r2 < m:
                    mats[u][j, r1] = weight
        else:
            options = ((0, 1.0),) if s % 2 == 0 else ((-1, 0.5), (1, 0.5))
            for d, weight in options:
                r1 = (int(s) - d) // 2
                r2 = (int(s) + d) // 2
                if 0 <= r1 < m and 0 <= r2 < m:
                    mats[d][j, r1] = weight
    return [(d, mats[d]) for d in (-1, 0, 1)]


def analytic_jpd(scene: Scene, mode: str = "near",
                 band_radius: int = 3, sigma: float = 0.0,
                 pair_rate: float = 1.0,
                 density: np.ndarray | None = None) -> Jpd:
    """Closed-form expectation of the JPD estimator for a scene.

    sigma = 0 uses the half-pixel assignment of perfectly correlated pairs,
    under which the projection onto the pair coordinate (sum for near field,
    difference for far field) equals the half-pixel-sampled pair density
    exactly.  sigma > 0 evaluates the separable pixel-capture products
    implied by the Gaussian jitter model, summed over both photon orderings:
    the exact expectation of the frame-stack estimator at the given pair
    rate (the unmodeled self-product bias only touches entries every camera
    flags invalid anyway).

    Analytic JPDs model ideal lossless detection: every in-band entry whose
    partner pixel is on the sensor is valid.
    """
    if mode not in ("near", "far"):
        raise ConfigurationError(f"mode must be 'near' or 'far', got {mode!r}")
    if band_radius < 1:
        raise ConfigurationError("analytic construction needs band_radius >= 1")
    if sigma < 0:
        raise ConfigurationError("sigma must be >= 0")
    m = scene.size
    n_sub = m * scene.oversample
    rho = pair_rate * _normalized_density(scene, mode, density).reshape(n_sub, n_sub)
    k = band_radius
    planes = np.zeros((2 * k + 1, 2 * k + 1, m, m))
    if sigma == 0:
        axis_mats = _half_grid_split(scene, mode)
        for dy, wy in axis_mats:
            for dx, wx in axis_mats:
                planes[dy + k, dx + k] = wy.T @ rho @ wx
    else:
        sigma_photon = sigma / math.sqrt(2.0)
        coords = scene.subcell_coordinates()
        r = np.arange(m)
        first = _axis_capture(r[None, :] - coords[:, None], sigma_photon)
        pair_weight = {}
        for d in range(-k, k + 1):
            if mode == "near":
                off = (r[None, :] + d) - coords[:, None]
            else:
                # partner pixel C - r + d captures the photon born at C - x
                off = coords[:, None] - r[None, :] + d
            pair_weight[d] = first * _axis_capture(off, sigma_photon)
        for dy in range(-k, k + 1):
            for dx in range(-k, k + 1):
                planes[dy + k, dx + k] = pair_weight[dy].T @ rho @ pair_weight[dx]
        # the estimator counts both photon orderings of every pair
        planes *= 2.0
    center = (m - 1, m - 1)
    valid = structural_validity(mode, k, (m, m), center)
    planes = np.where(valid, planes, 0.0)
    active = np.ones((2 * k + 1, 2 * k + 1), dtype=bool)
    return Jpd(mode, k, planes, valid, active, center, 0)
