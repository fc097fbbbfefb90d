"""Exception types shared across the toolkit.

Plain argument problems raise the builtin ValueError; file-system problems
raise the builtin OSError family. Everything that benefits from a separate
except-clause gets a class here.
"""


class DimensionError(ValueError):
    """Array shapes or axes are inconsistent with an operation's contract."""


class FormatError(ValueError):
    """A file's bytes do not match the expected on-disk format."""


class VersionError(FormatError):
    """A model file declares a format version this build cannot read."""


class ModelError(ValueError):
    """Weights are inconsistent with the declared architecture."""


class StructureError(ValueError):
    """A wavelet pyramid (or a pair of them) is structurally inconsistent."""


class DataError(ValueError):
    """A dataset directory cannot supply the requested training data."""


class NumericError(ArithmeticError):
    """A non-finite value appeared where finite math is required."""


class TrainingError(RuntimeError):
    """Training aborted; the message carries the failing step's diagnostic."""
