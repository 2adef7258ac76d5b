"""Exception hierarchy shared across the toolkit."""


class MiniaError(Exception):
    """Base class for all toolkit errors."""


class UnsupportedFormat(MiniaError):
    """The file is not one of the supported mesh interchange formats."""


class MalformedFile(MiniaError):
    """The file matched a known format but could not be parsed.

    Carries the byte offset at which parsing failed.
    """

    def __init__(self, message: str, byte_offset: int = 0):
        super().__init__(f"{message} (byte offset {byte_offset})")
        self.byte_offset = byte_offset


class EmptyMesh(MiniaError):
    """A mesh ended up with zero faces after cleanup."""


class EmptyInput(MiniaError):
    """An aggregate operation received an empty collection."""


class DegenerateBox(MiniaError):
    """A bounding box has no usable extent."""


class DegenerateProjection(MiniaError):
    """Both in-plane extents are zero; nothing can be framed."""


class DimensionMismatch(MiniaError):
    """Two rasters that must share a shape do not."""


class ScorerUnavailable(MiniaError):
    """The perceptual scorer cannot be reached or has failed."""


class ScorerError(MiniaError):
    """The scorer answered a request with an error payload."""


class ProtocolViolation(MiniaError):
    """The scorer wire protocol was broken (bad frame, id mismatch, ...)."""


class Timeout(MiniaError):
    """The scorer did not answer within the configured window."""


class TooFewMethods(MiniaError):
    """A pairwise study needs at least two methods."""


class InsufficientRaters(MiniaError):
    """Concordance needs at least two raters."""


class OrphanTrialId(MiniaError):
    """A response references a trial that is not in the plan."""


class ManifestInvalid(MiniaError):
    """A dataset manifest failed validation."""
