"""Exception taxonomy.

Every error raised for an invalid input derives from :class:`ValidationError`
so the CLI can map it to exit code 2; genuine runtime failures (I/O, etc.)
propagate as-is and exit 1.
"""


class ValidationError(Exception):
    """Base class for rejected inputs."""


# audio_io
class NotPcm16(ValidationError):
    pass


class NotMono(ValidationError):
    pass


class WrongSampleRate(ValidationError):
    pass


class TruncatedFile(ValidationError):
    pass


class EmptyClip(ValidationError):
    pass


# spectral
class ClipTooShort(ValidationError):
    pass


# interchange
class BadMagic(ValidationError):
    pass


class VersionMismatch(ValidationError):
    pass


class DimMismatch(ValidationError):
    pass


class Truncated(ValidationError):
    pass


class NonFiniteValue(ValidationError):
    pass


# tensor
class ShapeMismatch(ValidationError):
    pass


class GraphNotBuilt(ValidationError):
    pass


# model
class EmptyInput(ValidationError):
    pass


class InputTooShort(ValidationError):
    pass


# training
class StepOutOfRange(ValidationError):
    pass


class SingleClassTrainSet(ValidationError):
    pass


class EmptyDataset(ValidationError):
    pass


# dataset
class DuplicateId(ValidationError):
    pass


class BadLabel(ValidationError):
    pass


class BadSplit(ValidationError):
    pass


class MissingReport(ValidationError):
    pass


class EmptySplit(ValidationError):
    pass


# metrics
class MissingClass(ValidationError):
    pass


# analysis
class ArchitectureMismatch(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


# cli
class MissingFeatures(ValidationError):
    pass
