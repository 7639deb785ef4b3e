"""
Building prior maps: procedural generation and OSM ingestion
============================================================

Every localization run starts from a vector map: road centerlines plus
building footprints in a flat east-north frame.  This script builds one
procedurally, round-trips it through the JSON format, ingests a small OSM
snippet, and renders both as PGM images you can open in any viewer.
"""
from pathlib import Path

import bevloc as bl

out = Path("demo_output")
out.mkdir(exist_ok=True)

# A seeded city: a jittered road grid with rectangular buildings per block.
# The jitter is what makes neighborhoods distinguishable to the matcher.
city = bl.generate_map(seed=7, extent=512.0, spacing=50.0, jitter=3.0,
                       building_density=0.6)
print(f"generated {len(city.roads)} roads and {len(city.buildings)} buildings")
print(f"bounds: {bl.map_bounds(city, sd_width=10.0)}")

bl.save_vector_map(city, out / "city.json")
reloaded = bl.load_vector_map(out / "city.json")
assert len(reloaded.roads) == len(city.roads)

# Rasterize a 256x256 tile (128 m at 0.5 m/px) around a position of interest.
tile = bl.query_tile(city, bl.InitPrior((0.0, 0.0)), sd_width=10.0)
bl.write_pgm(tile.data[bl.ROAD_CHANNEL], out / "city_roads.pgm")
bl.write_pgm(tile.data[bl.BUILDING_CHANNEL], out / "city_buildings.pgm")
print(f"road pixels: {int(tile.data[bl.ROAD_CHANNEL].sum())}, "
      f"building pixels: {int(tile.data[bl.BUILDING_CHANNEL].sum())}")

# The same types come out of OSM XML: highway=* ways become roads,
# closed building=* ways become footprints.
snippet = """<?xml version="1.0"?>
<osm version="0.6">
  <node id="1" lat="0.0" lon="-0.0005"/>
  <node id="2" lat="0.0" lon="0.0005"/>
  <node id="3" lat="-0.0004" lon="0.0"/>
  <node id="4" lat="0.0004" lon="0.0"/>
  <node id="5" lat="0.0001" lon="0.0001"/>
  <node id="6" lat="0.0001" lon="0.0003"/>
  <node id="7" lat="0.0003" lon="0.0003"/>
  <node id="8" lat="0.0003" lon="0.0001"/>
  <way id="10"><nd ref="1"/><nd ref="2"/><tag k="highway" v="primary"/></way>
  <way id="11"><nd ref="3"/><nd ref="4"/><tag k="highway" v="residential"/></way>
  <way id="12"><nd ref="5"/><nd ref="6"/><nd ref="7"/><nd ref="8"/><nd ref="5"/>
    <tag k="building" v="yes"/></way>
</osm>
"""
frame = bl.LocalFrame(origin_lat=0.0, origin_lon=0.0)
nodes, ways = bl.parse_osm_xml(snippet)
osm_map, stats = bl.extract_vector_map(nodes, ways, frame)
print(f"OSM snippet: {stats.roads} roads, {stats.buildings} buildings, "
      f"{stats.dropped} of {stats.ways_in} ways dropped")

osm_tile = bl.query_tile(osm_map, bl.InitPrior((0.0, 0.0)),
                         bl.GridSpec(128, 128, 0.5), sd_width=10.0)
bl.write_pgm(osm_tile.data[bl.ROAD_CHANNEL], out / "osm_roads.pgm")
print(f"wrote PGM previews to {out}/")
