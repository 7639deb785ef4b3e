"""Exception types raised across the package."""


class BevLocError(Exception):
    """Base class for errors raised by this package."""


class EmptyMapError(BevLocError):
    """Operation requires a vector map with at least one element."""


class OsmParseError(BevLocError):
    """OSM XML document could not be parsed."""


class OsmIngestError(BevLocError):
    """OSM elements could not be turned into map geometry."""


class GridFormatError(BevLocError):
    """Binary grid file is malformed or inconsistent."""


class GenerationError(BevLocError):
    """Procedural map generation produced no usable geometry."""


class SamplingError(BevLocError):
    """Scenario sampling is impossible for the given map and margins."""


class ConfigError(BevLocError):
    """Inconsistent or incomplete configuration."""
