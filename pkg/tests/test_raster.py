import math
import struct

import numpy as np
import pytest

from bevloc.errors import ConfigError, GridFormatError
from bevloc.raster import (
    BUILDING_CHANNEL,
    ROAD_CHANNEL,
    Grid,
    GridSpec,
    InitPrior,
    default_tile_spec,
    mask_channels,
    query_tile,
    rasterize_buildings,
    rasterize_roads,
    read_grid,
    write_grid,
    write_pgm,
)
from bevloc.vecmap import Building, LocalFrame, Road, VectorMap

FRAME = LocalFrame(0.0, 0.0)


def _map(roads=(), buildings=(), mode="sd"):
    return VectorMap(frame=FRAME, roads=tuple(roads), buildings=tuple(buildings), mode=mode)


# -- independent oracles ----------------------------------------------------

def _dist_point_segment(px, py, a, b):
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    t = ((px - ax) * dx + (py - ay) * dy) / (dx * dx + dy * dy)
    t = min(1.0, max(0.0, t))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def _oracle_road_mask(spec, roads, sd_width):
    out = np.zeros((spec.height, spec.width), dtype=np.float32)
    xs, ys = spec.x_centers(), spec.y_centers()
    for r in range(spec.height):
        for c in range(spec.width):
            for road in roads:
                w = road.width if road.width is not None else sd_width
                pts = road.centerline
                for s in range(len(pts) - 1):
                    if _dist_point_segment(xs[c], ys[r], pts[s], pts[s + 1]) <= w / 2:
                        out[r, c] = 1.0
    return out


def _oracle_point_in_polygon(px, py, poly):
    # crossing-number with an upward ray, plus boundary-on-edge inclusion
    inside = False
    n = len(poly)
    for s in range(n):
        (ax, ay), (bx, by) = poly[s], poly[(s + 1) % n]
        if _dist_point_segment(px, py, (ax, ay), (bx, by)) <= 1e-9:
            return True
        if (ay > py) != (by > py):
            if px < ax + (py - ay) * (bx - ax) / (by - ay):
                inside = not inside
    return inside


class TestGridSpec:
    def test_pixel_center_convention(self):
        spec = GridSpec(4, 4, 0.5, center=(10.0, 20.0))
        # row 0 is the north edge, columns increase eastward
        assert spec.pixel_to_world(0, 0) == (10.0 + (0.5 - 2) * 0.5, 20.0 + (2 - 0.5) * 0.5)
        assert spec.y_centers()[0] > spec.y_centers()[-1]
        assert spec.x_centers()[0] < spec.x_centers()[-1]

    def test_validation(self):
        with pytest.raises(ValueError):
            GridSpec(0, 4, 0.5)
        with pytest.raises(ValueError):
            GridSpec(4, 4, -0.5)

    def test_default_tile_is_256_at_half_meter(self):
        spec = default_tile_spec()
        assert (spec.height, spec.width, spec.resolution) == (256, 256, 0.5)


class TestRasterizeRoads:
    def test_horizontal_stripe_against_distance_oracle(self):
        # 10 m wide road through the grid center at 0.5 m/px: 20 rows set
        spec = GridSpec(40, 40, 0.5)
        road = Road(np.array([[-20.0, 0.0], [20.0, 0.0]]), width=10.0)
        vmap = _map(roads=[road])
        got = rasterize_roads(vmap, spec)
        rows_set = np.nonzero(got.any(axis=1))[0]
        assert len(rows_set) == 20
        assert np.all(got[rows_set] == 1.0)
        np.testing.assert_array_equal(got, _oracle_road_mask(spec, [road], None))

    def test_diagonal_road_matches_oracle(self):
        spec = GridSpec(24, 24, 0.5)
        road = Road(np.array([[-6.0, -5.0], [4.0, 6.0]]), width=3.0)
        got = rasterize_roads(_map(roads=[road]), spec)
        np.testing.assert_array_equal(got, _oracle_road_mask(spec, [road], None))

    def test_empty_map_is_all_zero(self):
        spec = GridSpec(16, 16, 0.5)
        vmap = _map(buildings=[Building(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]))])
        assert not rasterize_roads(vmap, spec).any()

    def test_sd_road_without_width_needs_sd_width(self):
        spec = GridSpec(8, 8, 0.5)
        vmap = _map(roads=[Road(np.array([[-2.0, 0.0], [2.0, 0.0]]))])
        with pytest.raises(ConfigError):
            rasterize_roads(vmap, spec)
        assert rasterize_roads(vmap, spec, sd_width=2.0).any()

    def test_width_monotonicity(self):
        rng = np.random.default_rng(3)
        spec = GridSpec(32, 32, 0.5)
        pts = rng.uniform(-7, 7, (4, 2))
        vmap = _map(roads=[Road(pts)])
        prev = np.zeros((32, 32), dtype=bool)
        for width in (0.5, 1.5, 3.0, 6.0, 12.0):
            cur = rasterize_roads(vmap, spec, sd_width=width) > 0
            assert np.all(prev <= cur)
            prev = cur

    def test_centerline_coverage_at_minimum_width(self):
        # a polyline running exactly through pixel centers stays covered
        spec = GridSpec(16, 16, 0.5)
        xs, ys = spec.x_centers(), spec.y_centers()
        pts = np.array([[xs[2], ys[10]], [xs[12], ys[10]], [xs[12], ys[3]]])
        got = rasterize_roads(_map(roads=[Road(pts)]), spec, sd_width=0.5)
        assert got[10, 2] == 1.0 and got[10, 12] == 1.0 and got[3, 12] == 1.0


class TestRasterizeBuildings:
    def test_square_covering_exact_pixel_block(self):
        # [0,2]x[0,2] on a 0.5 m grid covers a 4x4 block of pixel centers
        spec = GridSpec(8, 8, 0.5, center=(0.0, 0.0))
        sq = Building(np.array([[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]]))
        got = rasterize_buildings(_map(buildings=[sq]), spec)
        assert got.sum() == 16
        assert np.all(got[0:4, 4:8] == 1.0)  # north-east quadrant

    def test_empty_building_list(self):
        spec = GridSpec(8, 8, 0.5)
        vmap = _map(roads=[Road(np.array([[0.0, 0.0], [1.0, 0.0]]), width=1.0)])
        assert not rasterize_buildings(vmap, spec).any()

    def test_concave_polygon_against_point_oracle(self):
        spec = GridSpec(20, 20, 0.5)
        lshape = Building(np.array([
            [-4.0, -4.0], [4.0, -4.0], [4.0, 0.0], [0.0, 0.0], [0.0, 4.0], [-4.0, 4.0]]))
        got = rasterize_buildings(_map(buildings=[lshape]), spec)
        xs, ys = spec.x_centers(), spec.y_centers()
        expected = np.zeros((20, 20), dtype=np.float32)
        for r in range(20):
            for c in range(20):
                expected[r, c] = _oracle_point_in_polygon(xs[c], ys[r], lshape.boundary)
        np.testing.assert_array_equal(got, expected)
        assert got[2, 15] == 0.0  # the notch quadrant stays empty


class TestQueryTile:
    def _city(self):
        return _map(
            roads=[Road(np.array([[-40.0, 0.0], [40.0, 0.0]]), width=6.0),
                   Road(np.array([[0.0, -40.0], [0.0, 40.0]]), width=4.0)],
            buildings=[Building(np.array([[5.0, 5.0], [11.0, 5.0], [11.0, 11.0], [5.0, 11.0]]))],
        )

    def test_east_shift_moves_content_west(self):
        vmap = self._city()
        spec = GridSpec(32, 32, 0.5)
        a = query_tile(vmap, InitPrior((0.0, 0.0)), spec)
        b = query_tile(vmap, InitPrior((0.5, 0.0)), spec)
        np.testing.assert_array_equal(b.data[:, :, :-1], a.data[:, :, 1:])

    def test_prior_at_building_centroid(self):
        vmap = self._city()
        spec = GridSpec(31, 31, 0.5)  # odd size: an exact center pixel exists
        tile = query_tile(vmap, InitPrior((8.0, 8.0)), spec)
        assert tile.data[BUILDING_CHANNEL, 15, 15] == 1.0
        assert tile.data[ROAD_CHANNEL, 15, 15] == 0.0

    def test_channels_and_zero_outside_map(self):
        vmap = self._city()
        tile = query_tile(vmap, InitPrior((500.0, 500.0)), GridSpec(16, 16, 0.5))
        assert tile.channels == 2
        assert not tile.data.any()

    def test_translation_consistency_bitwise(self):
        # dyadic coordinates: shifting map and tile center together is exact
        base = self._city()
        spec = GridSpec(32, 32, 0.5, center=(0.0, 0.0))
        shift = np.array([16.25, -8.5])
        moved = VectorMap(
            frame=FRAME,
            roads=tuple(Road(r.centerline + shift, r.width) for r in base.roads),
            buildings=tuple(Building(b.boundary + shift) for b in base.buildings),
        )
        a = query_tile(base, InitPrior((0.0, 0.0)), spec)
        b = query_tile(moved, InitPrior(tuple(shift)), spec)
        np.testing.assert_array_equal(a.data, b.data)


class TestMaskChannels:
    def test_masking_never_flips_the_other_channel(self):
        rng = np.random.default_rng(5)
        grid = Grid(GridSpec(8, 8, 0.5), rng.random((2, 8, 8)).astype(np.float32))
        roads_only = mask_channels(grid, "roads")
        np.testing.assert_array_equal(roads_only.data[ROAD_CHANNEL], grid.data[ROAD_CHANNEL])
        assert not roads_only.data[BUILDING_CHANNEL].any()
        builds_only = mask_channels(grid, "buildings")
        np.testing.assert_array_equal(builds_only.data[BUILDING_CHANNEL], grid.data[BUILDING_CHANNEL])
        assert not builds_only.data[ROAD_CHANNEL].any()
        assert mask_channels(grid, "both") is grid

    def test_unknown_selector(self):
        grid = Grid(GridSpec(2, 2, 0.5), np.zeros((2, 2, 2), dtype=np.float32))
        with pytest.raises(ValueError):
            mask_channels(grid, "walls")


class TestGridIO:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(9)
        data = rng.standard_normal((3, 7, 5)).astype(np.float32)
        grid = Grid(GridSpec(7, 5, 0.25, center=(-3.5, 12.0)), data)
        path = tmp_path / "grid.bsg1"
        write_grid(grid, path)
        back = read_grid(path)
        np.testing.assert_array_equal(back.data, data)
        assert back.data.dtype == np.float32
        assert back.spec == grid.spec

    def test_hand_assembled_layout(self, tmp_path):
        # 2 channels x 2 rows x 2 cols, channel-major then row-major
        values = [1.0, 2.0, 3.0, 4.0, 10.0, 20.0, 30.0, 40.0]
        blob = struct.pack("<4sIIIfdd", b"BSG1", 2, 2, 2, 0.5, 1.0, -2.0)
        blob += struct.pack("<8f", *values)
        path = tmp_path / "hand.bsg1"
        path.write_bytes(blob)
        grid = read_grid(path)
        assert grid.spec == GridSpec(2, 2, 0.5, center=(1.0, -2.0))
        np.testing.assert_array_equal(grid.data[0], [[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(grid.data[1], [[10.0, 20.0], [30.0, 40.0]])

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.bsg1"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(GridFormatError):
            read_grid(path)

    def test_truncated_payload(self, tmp_path):
        grid = Grid(GridSpec(4, 4, 0.5), np.ones((2, 4, 4), dtype=np.float32))
        path = tmp_path / "trunc.bsg1"
        write_grid(grid, path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-8])
        with pytest.raises(GridFormatError):
            read_grid(path)

    def test_dimension_overflow(self, tmp_path):
        blob = struct.pack("<4sIIIfdd", b"BSG1", 1 << 20, 1 << 20, 1 << 20, 0.5, 0.0, 0.0)
        path = tmp_path / "huge.bsg1"
        path.write_bytes(blob)
        with pytest.raises(GridFormatError):
            read_grid(path)


class TestPgm:
    def test_binary_channel_maps_to_0_255(self, tmp_path):
        channel = np.array([[0.0, 1.0], [1.0, 0.0]])
        path = tmp_path / "bin.pgm"
        write_pgm(channel, path)
        blob = path.read_bytes()
        assert blob.startswith(b"P5\n2 2\n255\n")
        assert blob[-4:] == bytes([0, 255, 255, 0])

    def test_real_channel_is_min_max_scaled(self, tmp_path):
        channel = np.array([[0.0, 5.0], [10.0, 2.5]])
        path = tmp_path / "real.pgm"
        write_pgm(channel, path)
        assert path.read_bytes()[-4:] == bytes([0, 128, 255, 64])

    def test_constant_channel(self, tmp_path):
        path = tmp_path / "flat.pgm"
        write_pgm(np.full((2, 2), 7.0), path)
        assert path.read_bytes()[-4:] == bytes([0, 0, 0, 0])
