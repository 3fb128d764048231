"""Exception types shared across the package."""


class BeamnetError(Exception):
    """Base class for all beamnet errors."""


class ConfigError(BeamnetError):
    """Inconsistent or out-of-range configuration."""


class DimensionMismatch(BeamnetError):
    """Array shapes do not agree for the requested operation."""


class LengthMismatch(BeamnetError):
    """Paired vectors have different lengths."""


class EmptyInput(BeamnetError):
    """An operation that needs at least one element received none."""


class EmptyDataset(BeamnetError):
    """Training or evaluation was asked to run on an empty dataset."""


class DegenerateData(BeamnetError):
    """Data cannot be normalized (zero scale)."""


class FormatError(BeamnetError):
    """A binary or text artifact failed validation on read."""


class GraphError(BeamnetError):
    """Invalid differentiation request (e.g. non-scalar root)."""


class NonFiniteGradient(BeamnetError):
    """A gradient contained NaN or Inf."""


class NonFiniteLoss(BeamnetError):
    """The training loss became NaN or Inf."""


class MetaMismatch(BeamnetError):
    """Model and dataset carry different normalization metadata."""
