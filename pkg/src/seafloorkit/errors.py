"""Exception hierarchy shared across the toolkit."""


class SeafloorError(Exception):
    """Base class for all toolkit errors."""


# --- geometry / imagery ---

class InsideNadir(SeafloorError):
    """Slant range shorter than sensor altitude: no seafloor intersection."""


class NoFirstReturn(SeafloorError):
    """Altitude estimation found no ping crossing the first-return threshold."""


class ImageTooSmall(SeafloorError):
    """Image cannot contain a single snippet window."""


class RasterFormatError(SeafloorError):
    """Malformed raster header or sidecar/dimension mismatch."""


# --- simulation ---

class UnknownClass(SeafloorError):
    """Terrain class id/name not in the catalog."""


class InvalidParams(SeafloorError):
    """Terrain generation parameters out of range."""


class TrajectoryOutOfBounds(SeafloorError):
    """Trajectory leaves the terrain extent (including swath margin)."""


# --- contact insertion ---

class FootprintOutsideImage(SeafloorError):
    """Object footprint not fully inside the ensonified region."""


class PlacementInfeasible(SeafloorError):
    """Random placement failed to satisfy separation within retry budget."""


# --- clustering / mapping ---

class TooFewSamples(SeafloorError):
    """Fewer training samples than clusters."""


class DegenerateSnippet(SeafloorError):
    """Snippet contains non-finite pixels."""


class NotSurjective(SeafloorError):
    """Label mapping leaves at least one class unused."""


class EntryOutOfRange(SeafloorError):
    """Label mapping entry outside [0, C)."""


class TooManyClasses(SeafloorError):
    """More classes than clusters (C > P)."""


class DuplicateRank(SeafloorError):
    """Two classes share a complexity rank."""


class ExtractorMismatch(SeafloorError):
    """Feature extractor config hash differs from the model's."""


class MappingMismatch(SeafloorError):
    """LabelMapping P differs from the model's cluster count."""


class GridMismatch(SeafloorError):
    """Grids with incompatible geometry combined."""


class EmptyInput(SeafloorError):
    """Operation requires at least one element."""


# --- performance map / repair ---

class NoTrials(SeafloorError):
    """Performance map has no trialed cell."""


class EmptyGrid(SeafloorError):
    """Grid has no cells."""
