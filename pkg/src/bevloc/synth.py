"""Synthetic maps, ground-truth BEV observations, and evaluation scenarios.

This module stands in for both a driving dataset and a live segmentation
source: it builds procedural city maps, renders what a perfect top-down
segmentation of such a map would look like from an arbitrary pose, and
corrupts that rendering to mimic an imperfect one.

Observation encodings: "bipolar" writes +1 for occupied, -1 for free
(0 is reserved for unobserved content such as occlusions), "binary" writes
1/0.  Bipolar is the default because the matcher then rewards agreement and
punishes disagreement symmetrically instead of favoring dense map regions.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import GenerationError, SamplingError
from .raster import Grid, GridSpec, InitPrior
from .vecmap import Building, LocalFrame, Road, VectorMap, map_bounds, mask_in_buildings, mask_near_roads

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    wrapped = math.fmod(theta + math.pi, TWO_PI)
    if wrapped <= 0.0:
        wrapped += TWO_PI
    return wrapped - math.pi


@dataclass(frozen=True)
class Pose:
    """Planar pose: meters east/north plus heading in radians, measured
    counterclockwise from east, wrapped to (-pi, pi]."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y) and np.isfinite(self.theta)):
            raise ValueError("pose components must be finite")
        if not (-math.pi < self.theta <= math.pi):
            raise ValueError(f"theta {self.theta} outside (-pi, pi]; wrap it first")


@dataclass(frozen=True)
class NoiseParams:
    """Observation corruption: dropout flips occupied pixels to free,
    Gaussian noise perturbs values, occlusion blocks zero out rectangles
    (zero meaning "unobserved" under the bipolar encoding)."""

    dropout_prob: float = 0.0
    logit_noise_sigma: float = 0.0
    occlusion_blocks: int = 0
    occlusion_block_size: int = 8

    def __post_init__(self):
        if not 0.0 <= self.dropout_prob <= 1.0:
            raise ValueError(f"dropout_prob {self.dropout_prob} outside [0, 1]")
        if self.logit_noise_sigma < 0.0:
            raise ValueError("logit_noise_sigma must be >= 0")
        if self.occlusion_blocks < 0 or self.occlusion_block_size <= 0:
            raise ValueError("occlusion block count must be >= 0 and size > 0")

    @property
    def is_noop(self) -> bool:
        return self.dropout_prob == 0.0 and self.logit_noise_sigma == 0.0 and self.occlusion_blocks == 0


@dataclass(frozen=True)
class Scenario:
    """One evaluation case: where the vehicle truly is, and the coarse
    position prior handed to the solver."""

    gt_pose: Pose
    prior: InitPrior
    seed: int


def default_bev_spec(size: int = 128, resolution: float = 0.5) -> GridSpec:
    """Ego observation geometry: 128x128 at 0.5 m/px covers (-32 m, 32 m)."""
    return GridSpec(height=size, width=size, resolution=resolution, center=(0.0, 0.0))


def generate_map(seed: int, extent: float = 512.0, spacing: float = 50.0, jitter: float = 3.0,
                 building_density: float = 0.6, mode: str = "sd",
                 hd_width_range: tuple[float, float] = (6.0, 12.0)) -> VectorMap:
    """Deterministic procedural city: a jittered grid of road polylines plus
    rectangular buildings placed inside blocks with random setbacks.

    With jitter 0 the network is an exact grid with floor(extent/spacing)+1
    lines per direction.  Jitter perturbs both the line positions and every
    polyline vertex, which is what makes each neighborhood distinguishable
    to the matcher.  In "hd" mode every road gets its own corridor width
    drawn from hd_width_range; in "sd" mode widths stay unset.
    """
    if extent <= 0 or spacing <= 0 or jitter < 0 or not 0.0 <= building_density <= 1.0:
        raise ValueError("extent/spacing must be > 0, jitter >= 0, density in [0, 1]")
    rng = np.random.default_rng(seed)
    n_lines = int(extent // spacing) + 1
    if n_lines < 2:
        raise GenerationError(f"extent {extent} with spacing {spacing} yields fewer than 2 grid lines")
    span = (n_lines - 1) * spacing
    base = -span / 2 + spacing * np.arange(n_lines)
    ticks = base.copy()  # vertex stations along each road

    roads: list[Road] = []
    x_lines = base + rng.uniform(-jitter, jitter, n_lines)
    y_lines = base + rng.uniform(-jitter, jitter, n_lines)
    for x0 in x_lines:  # north-south roads
        pts = np.column_stack([np.full(n_lines, x0), ticks]) + rng.uniform(-jitter, jitter, (n_lines, 2))
        width = float(rng.uniform(*hd_width_range)) if mode == "hd" else None
        roads.append(Road(pts, width))
    for y0 in y_lines:  # east-west roads
        pts = np.column_stack([ticks, np.full(n_lines, y0)]) + rng.uniform(-jitter, jitter, (n_lines, 2))
        width = float(rng.uniform(*hd_width_range)) if mode == "hd" else None
        roads.append(Road(pts, width))
    if not roads:
        raise GenerationError("no roads generated")

    buildings: list[Building] = []
    for i in range(n_lines - 1):
        for j in range(n_lines - 1):
            if rng.random() >= building_density:
                continue
            bx0, bx1 = x_lines[i], x_lines[i + 1]
            by0, by1 = y_lines[j], y_lines[j + 1]
            for _ in range(int(rng.integers(1, 4))):
                setback = rng.uniform(8.0, 14.0)
                avail_x = bx1 - bx0 - 2 * setback
                avail_y = by1 - by0 - 2 * setback
                if avail_x < 6.0 or avail_y < 6.0:
                    continue
                w = rng.uniform(6.0, min(24.0, avail_x))
                h = rng.uniform(6.0, min(24.0, avail_y))
                cx = rng.uniform(bx0 + setback + w / 2, bx1 - setback - w / 2)
                cy = rng.uniform(by0 + setback + h / 2, by1 - setback - h / 2)
                corners = np.array([
                    [cx - w / 2, cy - h / 2],
                    [cx + w / 2, cy - h / 2],
                    [cx + w / 2, cy + h / 2],
                    [cx - w / 2, cy + h / 2],
                ])
                buildings.append(Building(corners))
    return VectorMap(frame=LocalFrame(0.0, 0.0), roads=tuple(roads),
                     buildings=tuple(buildings), mode=mode)


def render_observation(vmap: VectorMap, pose: Pose, bev_spec: GridSpec | None = None,
                       sd_width: float | None = None, encoding: str = "bipolar") -> Grid:
    """Ground-truth ego-frame observation at a pose.

    Every BEV pixel center is mapped into the world through the pose (the
    ego grid coincides with the north-up world grid at theta = 0, so heading
    rotates the view counterclockwise) and tested against the map geometry
    with exactly the same point predicates the rasterizer uses.
    """
    if bev_spec is None:
        bev_spec = default_bev_spec()
    if bev_spec.center != (0.0, 0.0):
        raise ValueError("observation spec must be ego-centered (center (0, 0))")
    if encoding not in ("bipolar", "binary"):
        raise ValueError(f"encoding must be 'bipolar' or 'binary', got {encoding!r}")
    ex, ey = bev_spec.pixel_centers()
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    wx = pose.x + c * ex - s * ey
    wy = pose.y + s * ex + c * ey
    shape = (bev_spec.height, bev_spec.width)
    occ_roads = mask_near_roads(wx, wy, vmap.roads, sd_width).reshape(shape)
    occ_builds = mask_in_buildings(wx, wy, vmap.buildings).reshape(shape)
    stacked = np.stack([occ_roads, occ_builds])
    if encoding == "bipolar":
        data = np.where(stacked, np.float32(1.0), np.float32(-1.0))
    else:
        data = stacked.astype(np.float32)
    return Grid(spec=bev_spec, data=data)


def corrupt(obs: Grid, noise: NoiseParams, seed: int, free_value: float = -1.0) -> Grid:
    """Corrupt an observation, deterministically in the seed.

    Order: dropout (occupied -> free_value), additive Gaussian noise, then
    block occlusions written as 0.  free_value defaults to the bipolar
    "free" code; pass 0.0 for binary observations.
    """
    rng = np.random.default_rng(seed)
    data = obs.data.astype(np.float32).copy()
    if noise.dropout_prob > 0.0:
        flips = rng.random(data.shape) < noise.dropout_prob
        data[flips & (data > 0.0)] = np.float32(free_value)
    if noise.logit_noise_sigma > 0.0:
        data += rng.normal(0.0, noise.logit_noise_sigma, data.shape).astype(np.float32)
    h, w = obs.spec.height, obs.spec.width
    size = min(noise.occlusion_block_size, h, w)
    for _ in range(noise.occlusion_blocks):
        r0 = int(rng.integers(0, h - size + 1))
        c0 = int(rng.integers(0, w - size + 1))
        data[:, r0:r0 + size, c0:c0 + size] = 0.0
    return Grid(spec=obs.spec, data=data)


def sample_scenario(vmap: VectorMap, seed: int, max_offset: float = 32.0,
                    margin: float | None = None) -> Scenario:
    """Draw a ground-truth pose uniformly over the margin-inset map interior
    (heading uniform over the full circle) and a prior offset uniform in
    the +-max_offset square around it.

    The default margin keeps the whole prior tile inside generated content:
    half the 128 m tile extent plus the prior offset range.
    """
    if max_offset < 0:
        raise ValueError("max_offset must be >= 0")
    if margin is None:
        margin = max_offset + 64.0
    xmin, ymin, xmax, ymax = map_bounds(vmap)
    if xmax - xmin <= 2 * margin or ymax - ymin <= 2 * margin:
        raise SamplingError(
            f"map extent {xmax - xmin:.0f}x{ymax - ymin:.0f} m too small for margin {margin:.0f} m")
    rng = np.random.default_rng(seed)
    x = rng.uniform(xmin + margin, xmax - margin)
    y = rng.uniform(ymin + margin, ymax - margin)
    theta = math.pi - rng.uniform(0.0, TWO_PI)  # lands in (-pi, pi]
    dx, dy = rng.uniform(-max_offset, max_offset, 2)
    return Scenario(gt_pose=Pose(float(x), float(y), float(theta)),
                    prior=InitPrior((float(x + dx), float(y + dy))), seed=seed)


def save_scenarios(path, scenarios) -> None:
    """JSON-lines: one {"seed", "gt": {...}, "prior": {...}} object per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for sc in scenarios:
            fh.write(json.dumps({
                "seed": sc.seed,
                "gt": {"x": sc.gt_pose.x, "y": sc.gt_pose.y, "theta": sc.gt_pose.theta},
                "prior": {"x": sc.prior.position[0], "y": sc.prior.position[1]},
            }) + "\n")


def load_scenarios(path) -> list[Scenario]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            out.append(Scenario(
                gt_pose=Pose(obj["gt"]["x"], obj["gt"]["y"], obj["gt"]["theta"]),
                prior=InitPrior((obj["prior"]["x"], obj["prior"]["y"])),
                seed=int(obj["seed"]),
            ))
    return out
