"""Exception types raised across the package."""


class FootprintError(Exception):
    """Base class for all package errors."""


class DegenerateError(FootprintError, ValueError):
    """Input points are collinear or otherwise cannot form a polygon."""


class FrameMismatchError(FootprintError, ValueError):
    """Two polygons tagged with different coordinate frames were combined."""


class EmptyMaskError(FootprintError, ValueError):
    """An operation needed at least one foreground pixel."""


class BehindCameraError(FootprintError, ValueError):
    """A point that had to be projected lies at or behind the camera plane."""


class NoHitError(FootprintError, RuntimeError):
    """A ray that had to reach the ground plane missed it."""


class ObjParseError(FootprintError, ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class ObjIndexError(ObjParseError):
    """A face references a vertex index that does not exist."""


class DimensionMismatchError(FootprintError, ValueError):
    """Images or masks of different shapes were compared."""


class TooSmallError(FootprintError, ValueError):
    """Image is smaller than the metric window."""


class EmptyGroundTruthError(FootprintError, ValueError):
    """Coverage ratio is undefined for an empty ground-truth mask."""


class BadParamsError(FootprintError, ValueError):
    """Parameters violate an operation's preconditions."""


class SchemaError(FootprintError, ValueError):
    """A CSV file does not have the expected columns or is empty."""


class PipelineError(FootprintError, RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


class BadConfigError(BadParamsError):
    """Refinement configuration is invalid."""
