"""Rasterization of vector maps into 2-channel grids, and grid file I/O.

Grid convention, fixed once here: row 0 is the north edge and columns
increase eastward.  The center of pixel (row, col) sits at the world offset

    x = (col + 0.5 - width / 2) * resolution
    y = (height / 2 - row - 0.5) * resolution

relative to the grid center.  Channel 0 holds roads, channel 1 buildings.
Occupancy is decided by pixel-center sampling: a pixel is set iff its
center point satisfies the geometry predicate, which keeps every raster
checkable against an exact per-point oracle.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import GridFormatError
from .vecmap import VectorMap, mask_in_buildings, mask_near_roads

ROAD_CHANNEL = 0
BUILDING_CHANNEL = 1
CHANNEL_NAMES = ("roads", "buildings")


@dataclass(frozen=True)
class GridSpec:
    """Geometry of a north-up grid: shape, meters per pixel, world center."""

    height: int
    width: int
    resolution: float
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.height <= 0 or self.width <= 0:
            raise ValueError(f"grid shape must be positive, got {self.height}x{self.width}")
        if not self.resolution > 0.0:
            raise ValueError(f"resolution must be > 0, got {self.resolution}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    def x_centers(self) -> np.ndarray:
        """World x of every column's pixel centers, west to east."""
        return self.center[0] + (np.arange(self.width) + 0.5 - self.width / 2) * self.resolution

    def y_centers(self) -> np.ndarray:
        """World y of every row's pixel centers, north to south."""
        return self.center[1] + (self.height / 2 - np.arange(self.height) - 0.5) * self.resolution

    def pixel_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Flat (x, y) arrays of all pixel centers in row-major order."""
        xs = self.x_centers()
        ys = self.y_centers()
        px = np.broadcast_to(xs[None, :], (self.height, self.width)).ravel()
        py = np.broadcast_to(ys[:, None], (self.height, self.width)).ravel()
        return px, py

    def pixel_to_world(self, row: int, col: int) -> tuple[float, float]:
        x = self.center[0] + (col + 0.5 - self.width / 2) * self.resolution
        y = self.center[1] + (self.height / 2 - row - 0.5) * self.resolution
        return float(x), float(y)


@dataclass(frozen=True)
class InitPrior:
    """Coarse initial position estimate, meters in the local frame."""

    position: tuple[float, float]

    def __post_init__(self):
        pos = (float(self.position[0]), float(self.position[1]))
        if not all(np.isfinite(pos)):
            raise ValueError("prior position must be finite")
        object.__setattr__(self, "position", pos)


@dataclass(frozen=True, eq=False)
class Grid:
    """A channel stack over a GridSpec.

    Serves both as the binary prior-map tile ({0,1} values, centered on the
    initial position) and the ego-frame observation (real values, center
    (0, 0), the vehicle at the grid center).
    """

    spec: GridSpec
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3:
            raise ValueError(f"grid data must be (channels, height, width), got shape {data.shape}")
        if data.shape[1] != self.spec.height or data.shape[2] != self.spec.width:
            raise ValueError(
                f"data shape {data.shape[1]}x{data.shape[2]} does not match "
                f"spec {self.spec.height}x{self.spec.width}"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError("grid data contains non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def channels(self) -> int:
        return self.data.shape[0]


def default_tile_spec(center=(0.0, 0.0), size: int = 256, resolution: float = 0.5) -> GridSpec:
    """Prior-map tile geometry: 256x256 pixels at 0.5 m/px (128 m square)."""
    return GridSpec(height=size, width=size, resolution=resolution, center=center)


def rasterize_roads(vmap: VectorMap, spec: GridSpec, sd_width: float | None = None) -> np.ndarray:
    """Binary road channel: pixel centers within half the effective corridor
    width of any centerline segment.  Roads without their own width use
    sd_width; in hd mode every road carries one."""
    px, py = spec.pixel_centers()
    mask = mask_near_roads(px, py, vmap.roads, sd_width)
    return mask.reshape(spec.height, spec.width).astype(np.float32)


def rasterize_buildings(vmap: VectorMap, spec: GridSpec) -> np.ndarray:
    """Binary building channel: pixel centers inside any footprint
    (even-odd rule, boundary inclusive)."""
    px, py = spec.pixel_centers()
    mask = mask_in_buildings(px, py, vmap.buildings)
    return mask.reshape(spec.height, spec.width).astype(np.float32)


def query_tile(vmap: VectorMap, prior: InitPrior, spec_template: GridSpec | None = None,
               sd_width: float | None = None) -> Grid:
    """Rasterize both channels on a north-up tile centered at the prior
    position.  Regions beyond the map content are simply zero."""
    if spec_template is None:
        spec_template = default_tile_spec()
    spec = GridSpec(spec_template.height, spec_template.width, spec_template.resolution,
                    center=prior.position)
    data = np.stack([rasterize_roads(vmap, spec, sd_width), rasterize_buildings(vmap, spec)])
    return Grid(spec=spec, data=data)


def mask_channels(grid: Grid, channels: str) -> Grid:
    """Zero out all but the requested channels ("roads", "buildings", "both").

    Used for map-element ablations; the kept channel is copied unchanged.
    """
    if channels == "both":
        return grid
    if channels not in CHANNEL_NAMES:
        raise ValueError(f"channels must be one of 'roads', 'buildings', 'both', got {channels!r}")
    keep = CHANNEL_NAMES.index(channels)
    data = np.zeros_like(grid.data)
    data[keep] = grid.data[keep]
    return Grid(spec=grid.spec, data=data)


# ---------------------------------------------------------------------------
# BSG1 binary grid format
#
#   bytes 0-3   ASCII "BSG1"
#   u32 channels, u32 height, u32 width        (little endian)
#   f32 resolution (m/px)
#   f64 center_x, f64 center_y                 (meters, local frame)
#   channels*height*width f32 values, channel-major then row-major
# ---------------------------------------------------------------------------

_MAGIC = b"BSG1"
_HEADER = struct.Struct("<4sIIIfdd")
_MAX_CELLS = 1 << 31


def write_grid(grid: Grid, path) -> None:
    """Write a grid; payload values are stored as float32, so the round trip
    is bit-exact for float32 data."""
    data = np.ascontiguousarray(grid.data, dtype="<f4")
    c, h, w = data.shape
    header = _HEADER.pack(_MAGIC, c, h, w, grid.spec.resolution,
                          grid.spec.center[0], grid.spec.center[1])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def read_grid(path) -> Grid:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise GridFormatError(f"{path}: truncated header ({len(blob)} bytes)")
    magic, c, h, w, res, cx, cy = _HEADER.unpack_from(blob)
    if magic != _MAGIC:
        raise GridFormatError(f"{path}: bad magic {magic!r}")
    if c == 0 or h == 0 or w == 0 or c * h * w > _MAX_CELLS:
        raise GridFormatError(f"{path}: unreasonable dimensions {c}x{h}x{w}")
    expected = _HEADER.size + 4 * c * h * w
    if len(blob) != expected:
        raise GridFormatError(f"{path}: payload is {len(blob)} bytes, expected {expected}")
    data = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size).reshape(c, h, w)
    spec = GridSpec(height=int(h), width=int(w), resolution=float(res), center=(cx, cy))
    return Grid(spec=spec, data=data.copy())


def write_pgm(channel: np.ndarray, path) -> None:
    """8-bit binary PGM of one channel for eyeballing: {0,1} data maps to
    0/255, anything else is min-max scaled."""
    arr = np.asarray(channel, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"PGM export needs a single 2-D channel, got shape {arr.shape}")
    values = np.unique(arr)
    if np.all(np.isin(values, (0.0, 1.0))):
        img = (arr * 255).astype(np.uint8)
    else:
        lo, hi = float(arr.min()), float(arr.max())
        if hi > lo:
            img = np.round((arr - lo) / (hi - lo) * 255).astype(np.uint8)
        else:
            img = np.zeros(arr.shape, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
