"""Exhaustive 3-DoF pose solver.

The observation is resampled at K regular heading hypotheses into a
rotation stack, the stack is cross-correlated against the prior-map tile
at every position, and the best (heading, row, col) cell of the resulting
score volume is read out as the pose.  No map encoding, no learned
matching: the score is the plain inner product

    score[k, h, w] = sum over c, i, j of
        stack[c, k, i, j] * tile[c, h + i - H//2, w + j - W//2]

with out-of-tile indices contributing zero.  (h, w) is the hypothesized
ego position at tile pixel (h, w); the kernel is anchored at its center
pixel (H//2, W//2).  Ties at the peak break toward the smallest k, then
row, then column, so results are reproducible across backends.

Two backends compute the identical volume: "direct" sums in the spatial
domain (blocked matrix products), "fft" multiplies in the frequency domain
on zero-padded grids.  Bilinear interpolation is used for the rotation
resampling; samples falling outside the ego footprint contribute 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import fft as sp_fft

from .errors import ConfigError
from .raster import Grid, GridSpec, InitPrior, default_tile_spec, query_tile
from .synth import Pose, wrap_angle
from .vecmap import VectorMap

DEFAULT_K_ROTATIONS = 256
BACKENDS = ("direct", "fft")

# tensordot block size for the direct backend, bytes of expanded windows
_DIRECT_BLOCK_BYTES = 256 * 1024 * 1024
_FFT_CHUNK = 32


@dataclass(frozen=True)
class SolverConfig:
    """Solver knobs.

    search_radius restricts the position argmax to a square window of the
    given half-width in pixels (Chebyshev distance) around the tile center;
    the default 64 px spans exactly the +-32 m prior box at 0.5 m/px, which
    is also the region where the 128 px kernel stays fully supported by a
    256 px tile.  None searches the whole tile.  Interpolation is bilinear.
    """

    k_rotations: int = DEFAULT_K_ROTATIONS
    backend: str = "fft"
    search_radius: float | None = 64.0

    def __post_init__(self):
        if self.k_rotations < 1:
            raise ValueError(f"k_rotations must be >= 1, got {self.k_rotations}")
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.search_radius is not None and self.search_radius <= 0:
            raise ValueError("search_radius must be positive or None")


def angle_grid(k_rotations: int) -> np.ndarray:
    """Heading hypotheses 2*pi*k/K wrapped to (-pi, pi]; index 0 is exactly 0."""
    if k_rotations < 1:
        raise ValueError("k_rotations must be >= 1")
    angles = 2.0 * math.pi * np.arange(k_rotations) / k_rotations
    angles[angles > math.pi] -= 2.0 * math.pi
    return angles


def _resample_plan(angles: tuple[float, ...], h: int, w: int):
    """Bilinear gather plan for rotating a square grid about its center.

    For every heading and output pixel, the output pixel-center offset is
    rotated by -theta into the input frame; the plan holds the four flat
    neighbor indices and their weights (weight 0 where the sample falls
    outside the grid).  Coordinates stay in pixel units, so exactness does
    not depend on the resolution.
    """
    ang = np.asarray(angles, dtype=float)
    c = np.cos(ang)[:, None, None]
    s = np.sin(ang)[:, None, None]
    ux = (np.arange(w) + 0.5 - w / 2)[None, None, :]   # pixel offsets, east positive
    uy = (h / 2 - np.arange(h) - 0.5)[None, :, None]   # north positive
    col_f = (c * ux + s * uy) + w / 2 - 0.5            # R(-theta) @ output offsets
    row_f = h / 2 - 0.5 - (-s * ux + c * uy)
    r0 = np.floor(row_f).astype(np.int64)
    c0 = np.floor(col_f).astype(np.int64)
    fr = row_f - r0
    fc = col_f - c0
    idx = np.empty((4, ang.size * h * w), dtype=np.int32)
    wgt = np.empty((4, ang.size * h * w), dtype=float)
    for i, (dr, dc) in enumerate(((0, 0), (0, 1), (1, 0), (1, 1))):
        r = r0 + dr
        col = c0 + dc
        valid = (r >= 0) & (r < h) & (col >= 0) & (col < w)
        weight = (fr if dr else 1.0 - fr) * (fc if dc else 1.0 - fc) * valid
        idx[i] = (np.clip(r, 0, h - 1) * w + np.clip(col, 0, w - 1)).ravel()
        wgt[i] = weight.ravel()
    return idx, wgt


@lru_cache(maxsize=2)
def _resample_plan_f32(angles: tuple[float, ...], h: int, w: int):
    idx, wgt = _resample_plan(angles, h, w)
    return idx, wgt.astype(np.float32)


def _resample_at_angles(data: np.ndarray, angles: tuple[float, ...]) -> np.ndarray:
    """Rotated copies of all channels: (C, H, W) -> (C, len(angles), H, W)."""
    chans, h, w = data.shape
    if data.dtype == np.float32:
        idx, wgt = _resample_plan_f32(angles, h, w)
    else:
        idx, wgt = _resample_plan(angles, h, w)
        wgt = wgt.astype(data.dtype, copy=False)
    flat = np.ascontiguousarray(data.reshape(chans, h * w))
    out = np.take(flat, idx[0], axis=1)
    out *= wgt[0]
    tmp = np.empty_like(out)
    for i in range(1, 4):
        np.take(flat, idx[i], axis=1, out=tmp)
        tmp *= wgt[i]
        out += tmp
    return out.reshape(chans, len(angles), h, w)


def rotate_observation(obs: Grid, theta: float) -> np.ndarray:
    """Resample the ego-frame observation onto the north-up grid under the
    hypothesis that the ego heading is theta.

    Each output pixel center is rotated by -theta into the ego frame and
    sampled bilinearly; samples outside the ego footprint contribute 0.
    At theta = 0 this is exactly the identity.
    """
    data = obs.data
    _, h, w = data.shape
    if h != w:
        raise ConfigError(f"rotation needs a square observation, got {h}x{w}")
    if obs.spec.center != (0.0, 0.0):
        raise ValueError("observation must be ego-centered (spec center (0, 0))")
    return _resample_at_angles(data, (float(theta),))[:, 0]


@dataclass(frozen=True, eq=False)
class RotationStack:
    """Observation resampled at every heading hypothesis: (channels, K, H, W)."""

    data: np.ndarray
    angles: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 4:
            raise ValueError(f"stack must be (channels, K, H, W), got shape {self.data.shape}")
        if len(self.angles) != self.data.shape[1]:
            raise ValueError("angle count does not match stack depth")


def build_rotation_stack(obs: Grid, config: SolverConfig | None = None) -> RotationStack:
    """Stack slice k equals rotate_observation(obs, angles[k]); the batch
    shares one gather plan with the single-angle path, so the two are
    bitwise identical."""
    if config is None:
        config = SolverConfig()
    _, h, w = obs.data.shape
    if h != w:
        raise ConfigError(f"rotation needs a square observation, got {h}x{w}")
    if obs.spec.center != (0.0, 0.0):
        raise ValueError("observation must be ego-centered (spec center (0, 0))")
    angles = angle_grid(config.k_rotations)
    data = _resample_at_angles(obs.data, tuple(float(a) for a in angles))
    return RotationStack(data=data, angles=angles)


@dataclass(frozen=True, eq=False)
class ScoreVolume:
    """Matching scores over (heading index, tile row, tile col)."""

    data: np.ndarray
    tile_spec: GridSpec
    angles: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ValueError(f"score volume must be (K, H, W), got shape {self.data.shape}")
        if self.data.shape[0] != len(self.angles):
            raise ValueError("angle count does not match volume depth")
        if self.data.shape[1:] != (self.tile_spec.height, self.tile_spec.width):
            raise ValueError("volume shape does not match tile spec")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("score volume contains non-finite values")


def _check_correlate_shapes(stack: RotationStack, tile: Grid):
    chans, k, hb, wb = stack.data.shape
    tc, hm, wm = tile.data.shape
    if tc != chans:
        raise ValueError(f"channel mismatch: stack has {chans}, tile has {tc}")
    if hm < hb or wm < wb:
        raise ValueError(f"tile {hm}x{wm} smaller than observation {hb}x{wb}")
    return chans, k, hb, wb, hm, wm


def correlate_direct(stack: RotationStack, tile: Grid) -> ScoreVolume:
    """Spatial-domain evaluation of the score volume (zero padding at the
    tile border), blocked into matrix products over row bands."""
    chans, k, hb, wb, hm, wm = _check_correlate_shapes(stack, tile)
    a, b = hb // 2, wb // 2
    dtype = np.result_type(stack.data.dtype, tile.data.dtype)
    padded = np.zeros((chans, hm + hb - 1, wm + wb - 1), dtype=dtype)
    padded[:, a:a + hm, b:b + wm] = tile.data
    windows = sliding_window_view(padded, (hb, wb), axis=(1, 2))  # (C, hm, wm, hb, wb)
    kernel = np.ascontiguousarray(stack.data, dtype=dtype)
    out = np.empty((k, hm, wm), dtype=dtype)
    bytes_per_row = chans * hb * wb * wm * dtype.itemsize
    block = max(1, _DIRECT_BLOCK_BYTES // bytes_per_row)
    for h0 in range(0, hm, block):
        blk = windows[:, h0:h0 + block]
        out[:, h0:h0 + block] = np.tensordot(kernel, blk, axes=([0, 2, 3], [0, 3, 4]))
    return ScoreVolume(data=out, tile_spec=tile.spec, angles=stack.angles)


def correlate_fft(stack: RotationStack, tile: Grid) -> ScoreVolume:
    """Frequency-domain evaluation; numerically equal to correlate_direct
    within floating-point tolerance.

    Channel spectra are fused before the inverse transform, so each rotation
    costs two forward transforms and one inverse.  Multiplying by the
    conjugated tile spectrum (instead of conjugating every kernel spectrum)
    yields the index-reversed correlation, which the final gather undoes.
    """
    chans, k, hb, wb, hm, wm = _check_correlate_shapes(stack, tile)
    a, b = hb // 2, wb // 2
    fh = sp_fft.next_fast_len(hm + hb - 1)
    fw = sp_fft.next_fast_len(wm + wb - 1)
    tile_conj = np.conj(sp_fft.rfft2(tile.data, s=(fh, fw)))
    out = np.empty((k, hm, wm), dtype=np.result_type(stack.data.dtype, tile.data.dtype))
    rows = (a - np.arange(hm)) % fh
    cols = (b - np.arange(wm)) % fw
    for k0 in range(0, k, _FFT_CHUNK):
        # two-pass forward transform: only hb rows are nonzero, so padding
        # the last axis first skips most of the wasted row transforms
        part = sp_fft.rfft(stack.data[:, k0:k0 + _FFT_CHUNK], n=fw, axis=-1, workers=-1)
        kernel_f = sp_fft.fft(part, n=fh, axis=-2, workers=-1)
        kernel_f *= tile_conj[:, None]
        spectrum = kernel_f[0]
        for c in range(1, chans):
            spectrum += kernel_f[c]
        corr = sp_fft.irfft2(spectrum, s=(fh, fw), workers=-1)
        out[k0:k0 + _FFT_CHUNK] = corr[:, rows[:, None], cols[None, :]]
    return ScoreVolume(data=out, tile_spec=tile.spec, angles=stack.angles)


def correlate(stack: RotationStack, tile: Grid, backend: str = "fft") -> ScoreVolume:
    if backend == "direct":
        return correlate_direct(stack, tile)
    if backend == "fft":
        return correlate_fft(stack, tile)
    raise ValueError(f"unknown backend {backend!r}")


@dataclass(frozen=True)
class PoseEstimate:
    """Solver output: the winning pose plus its raw score, volume index and
    softmax likelihood."""

    pose: Pose
    peak_score: float
    peak_index: tuple[int, int, int]
    max_likelihood: float

    def to_dict(self) -> dict:
        k, row, col = self.peak_index
        return {
            "x": self.pose.x,
            "y": self.pose.y,
            "theta_rad": self.pose.theta,
            "peak_score": self.peak_score,
            "max_likelihood": self.max_likelihood,
            "k": k,
            "row": row,
            "col": col,
        }


def _search_window(config: SolverConfig, hm: int, wm: int):
    """Row/col ranges of the restricted search: pixels within search_radius
    of the tile center in Chebyshev (per-axis) distance.  The default 64 px
    window is exactly the prior box, which is a square, not a disc."""
    if config.search_radius is None:
        return 0, hm, 0, wm
    rad = config.search_radius
    rc, cc = (hm - 1) / 2, (wm - 1) / 2
    r0 = max(0, math.ceil(rc - rad))
    r1 = min(hm, math.floor(rc + rad) + 1)
    c0 = max(0, math.ceil(cc - rad))
    c1 = min(wm, math.floor(cc + rad) + 1)
    if r0 >= r1 or c0 >= c1:
        raise ValueError("search_radius excludes every tile pixel")
    return r0, r1, c0, c1


def extract_pose(volume: ScoreVolume, config: SolverConfig | None = None) -> PoseEstimate:
    """Argmax over the (restricted) volume, mapped to world coordinates via
    the tile's pixel-center convention.  The likelihood reported for the
    peak is its softmax probability over the whole volume."""
    if config is None:
        config = SolverConfig(k_rotations=len(volume.angles))
    _, hm, wm = volume.data.shape
    r0, r1, c0, c1 = _search_window(config, hm, wm)
    window = volume.data[:, r0:r1, c0:c1]
    flat = int(np.argmax(window))  # first occurrence: smallest k, then row, then col
    k, row, col = np.unravel_index(flat, window.shape)
    row += r0
    col += c0
    peak = float(volume.data[k, row, col])
    vmax = float(volume.data.max())
    denom = float(np.exp(volume.data - vmax).sum(dtype=np.float64))
    x, y = volume.tile_spec.pixel_to_world(int(row), int(col))
    return PoseEstimate(
        pose=Pose(x, y, wrap_angle(float(volume.angles[k]))),
        peak_score=peak,
        peak_index=(int(k), int(row), int(col)),
        max_likelihood=math.exp(peak - vmax) / denom,
    )


def likelihood(volume: ScoreVolume) -> tuple[np.ndarray, np.ndarray, float]:
    """Softmax normalization of the volume (max-subtracted for stability).

    Returns the probability volume (sums to 1), the position heatmap
    marginalized over heading, and the maximum probability.
    """
    shifted = volume.data - volume.data.max()
    probs = np.exp(shifted, dtype=np.float64)
    probs /= probs.sum()
    heatmap = probs.sum(axis=0)
    return probs, heatmap, float(probs.max())


def localize_frame(obs: Grid, vmap: VectorMap, prior: InitPrior,
                   config: SolverConfig | None = None, sd_width: float | None = None,
                   tile_spec: GridSpec | None = None, return_volume: bool = False):
    """Full single-frame pipeline: query the tile around the prior, build
    the rotation stack, correlate with the configured backend, extract the
    pose.  With return_volume=True also hands back the score volume (for
    likelihood maps)."""
    if config is None:
        config = SolverConfig()
    if tile_spec is None:
        tile_spec = default_tile_spec()
    tile = query_tile(vmap, prior, tile_spec, sd_width)
    stack = build_rotation_stack(obs, config)
    volume = correlate(stack, tile, config.backend)
    estimate = extract_pose(volume, config)
    if return_volume:
        return estimate, volume
    return estimate
