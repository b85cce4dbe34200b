"""Exception types raised by the airsig toolkit.

Everything inherits from :class:`AirsigError` so callers can catch the
whole family at once (the service layer maps them to HTTP 4xx).
"""


class AirsigError(Exception):
    """Base class for all airsig errors."""


class InsufficientData(AirsigError):
    """A trace or series is too short for the requested operation."""


class MalformedTrace(AirsigError):
    """Trace data violates its invariants (e.g. non-monotonic timestamps)."""


class InvalidWindow(AirsigError):
    """Smoothing window is even, non-positive, or longer than the trace."""


class InvalidLength(AirsigError):
    """Requested fixed length is not positive."""


class MissingSensor(AirsigError):
    """A required sensor trace is absent from a sample."""


class EmptySequence(AirsigError):
    """DTW input sequence has no frames."""


class EmptyEnrollment(AirsigError):
    """Verification called with an empty enrollment set."""


class NonUnitQuaternion(AirsigError):
    """Rotation requested with a quaternion that is not unit-norm."""


class LengthMismatch(AirsigError):
    """Two series that must share a grid have different lengths."""


class InvalidCutoff(AirsigError):
    """High-pass cutoff outside (0, rate/2)."""


class DegenerateGeometry(AirsigError):
    """Point cloud has no usable planar spread (collinear or empty)."""


class ParseError(AirsigError):
    """A dataset file violates the on-disk schema."""


class MissingManifest(AirsigError):
    """Dataset path does not contain a manifest file."""


class EmptyScores(AirsigError):
    """EER/DET requested with an empty score list."""


class MissingArtifact(AirsigError):
    """A required input artifact (e.g. embedding file) was not supplied."""


class MissingEmbedding(AirsigError):
    """Embedding file does not cover a sample required by the protocol."""


class DimensionMismatch(AirsigError):
    """Embedding vectors do not share a common dimension."""
