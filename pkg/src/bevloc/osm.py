"""Parse a practical subset of OSM XML and extract roads and buildings.

Only <node>, <way>, <nd ref>, and <tag> elements are consumed; relations
and metadata are ignored.  Ways tagged highway=* become road centerlines,
closed ways tagged building=* become footprints.  Everything else is
dropped and counted.
"""
from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass

import numpy as np

from .errors import OsmIngestError, OsmParseError
from .vecmap import Building, LocalFrame, Road, VectorMap, project_wgs84_to_local


@dataclass(frozen=True)
class OsmNode:
    id: int
    lat: float
    lon: float


@dataclass(frozen=True)
class OsmWay:
    id: int
    node_refs: tuple[int, ...]
    tags: dict


@dataclass
class ExtractStats:
    """Bookkeeping for one extraction: ways_in == roads + buildings + dropped."""

    ways_in: int = 0
    roads: int = 0
    buildings: int = 0
    dropped_untagged: int = 0
    dropped_unclosed: int = 0
    dropped_degenerate: int = 0

    @property
    def dropped(self) -> int:
        return self.dropped_untagged + self.dropped_unclosed + self.dropped_degenerate


def parse_osm_xml(text: str) -> tuple[list[OsmNode], list[OsmWay]]:
    """Parse an OSM XML document into raw nodes and ways."""
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise OsmParseError(f"malformed OSM XML at line {exc.position[0]}, "
                            f"column {exc.position[1]}: {exc}") from exc
    if root.tag != "osm":
        raise OsmParseError(f"expected <osm> root element, got <{root.tag}>")
    nodes: list[OsmNode] = []
    ways: list[OsmWay] = []
    seen_ids = set()
    for child in root:
        if child.tag == "node":
            nid = int(child.attrib["id"])
            if "lat" not in child.attrib or "lon" not in child.attrib:
                raise OsmParseError(f"node {nid} is missing lat/lon")
            if nid in seen_ids:
                raise OsmParseError(f"duplicate node id {nid}")
            seen_ids.add(nid)
            nodes.append(OsmNode(nid, float(child.attrib["lat"]), float(child.attrib["lon"])))
        elif child.tag == "way":
            refs = []
            tags = {}
            for item in child:
                if item.tag == "nd":
                    refs.append(int(item.attrib["ref"]))
                elif item.tag == "tag":
                    tags[item.attrib["k"]] = item.attrib["v"]
            ways.append(OsmWay(int(child.attrib["id"]), tuple(refs), tags))
        # relations and anything else are ignored
    return nodes, ways


def _way_points(way: OsmWay, node_xy: dict, frame: LocalFrame) -> np.ndarray:
    pts = []
    for ref in way.node_refs:
        if ref not in node_xy:
            raise OsmIngestError(f"way {way.id} references unknown node {ref}")
        pts.append(node_xy[ref])
    return np.asarray(pts, dtype=float)


def _dedupe_consecutive(pts: np.ndarray) -> np.ndarray:
    if len(pts) < 2:
        return pts
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.any(pts[1:] != pts[:-1], axis=1)
    return pts[keep]


def extract_vector_map(nodes, ways, frame: LocalFrame, mode: str = "sd") -> tuple[VectorMap, ExtractStats]:
    """Turn parsed OSM elements into a VectorMap.

    highway=* ways become roads (width unset); closed building=* ways become
    footprints with the closing duplicate vertex dropped.  Degenerate
    geometry (zero length, zero area) and unclosed building ways are dropped
    and counted, never raised.
    """
    node_xy = {}
    for n in nodes:
        x, y = project_wgs84_to_local(n.lat, n.lon, frame)
        node_xy[n.id] = (float(x), float(y))
    stats = ExtractStats(ways_in=len(ways))
    roads: list[Road] = []
    buildings: list[Building] = []
    for way in ways:
        if "highway" in way.tags:
            pts = _dedupe_consecutive(_way_points(way, node_xy, frame))
            if len(pts) < 2:
                stats.dropped_degenerate += 1
                continue
            roads.append(Road(pts))
            stats.roads += 1
        elif "building" in way.tags:
            if len(way.node_refs) < 4 or way.node_refs[0] != way.node_refs[-1]:
                stats.dropped_unclosed += 1
                continue
            pts = _dedupe_consecutive(_way_points(way, node_xy, frame)[:-1])
            if len(pts) < 3 or _zero_area(pts):
                stats.dropped_degenerate += 1
                continue
            buildings.append(Building(pts))
            stats.buildings += 1
        else:
            stats.dropped_untagged += 1
    return VectorMap(frame=frame, roads=tuple(roads), buildings=tuple(buildings), mode=mode), stats


def _zero_area(pts: np.ndarray) -> bool:
    x, y = pts[:, 0], pts[:, 1]
    return abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))) == 0.0


def load_osm_file(path, frame: LocalFrame, mode: str = "sd") -> tuple[VectorMap, ExtractStats]:
    with open(path, "r", encoding="utf-8") as fh:
        nodes, ways = parse_osm_xml(fh.read())
    return extract_vector_map(nodes, ways, frame, mode=mode)
