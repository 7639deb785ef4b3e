"""bevloc: 3-DoF vehicle localization by exhaustive BEV-to-map matching.

A bird's-eye-view occupancy observation (roads + buildings) is matched
against a rasterized prior-map tile over all headings and positions; the
correlation peak is the pose.  Prior maps come from OSM extracts, vector
JSON files, or the procedural generator in :mod:`bevloc.synth`.
"""

__version__ = "0.1.0"

from .errors import (
    BevLocError,
    ConfigError,
    EmptyMapError,
    GenerationError,
    GridFormatError,
    OsmIngestError,
    OsmParseError,
    SamplingError,
)
from .vecmap import (
    EARTH_RADIUS_M,
    Building,
    LocalFrame,
    Road,
    VectorMap,
    load_vector_map,
    map_bounds,
    mask_in_buildings,
    mask_near_roads,
    polygon_area,
    project_wgs84_to_local,
    save_vector_map,
)
from .osm import ExtractStats, OsmNode, OsmWay, extract_vector_map, load_osm_file, parse_osm_xml
from .raster import (
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
from .synth import (
    NoiseParams,
    Pose,
    Scenario,
    corrupt,
    default_bev_spec,
    generate_map,
    load_scenarios,
    render_observation,
    sample_scenario,
    save_scenarios,
    wrap_angle,
)
from .solver import (
    PoseEstimate,
    RotationStack,
    ScoreVolume,
    SolverConfig,
    angle_grid,
    build_rotation_stack,
    correlate,
    correlate_direct,
    correlate_fft,
    extract_pose,
    likelihood,
    localize_frame,
    rotate_observation,
)
from .metrics import (
    FrameResult,
    MetricsReport,
    aggregate,
    make_frame_result,
    orientation_error,
    position_error,
    write_frames_csv,
)
