"""Exception hierarchy. The class name is the structured error name reported by the CLI."""


class SmnError(Exception):
    """Base class for every pipeline error."""


class MissingFile(SmnError):
    pass


class CorruptHeader(SmnError):
    pass


class DimensionMismatch(SmnError):
    pass


class DuplicateClipId(SmnError):
    pass


class UnknownClass(SmnError):
    pass


class InvalidDataset(SmnError):
    pass


class InvalidSpec(SmnError):
    pass


class IoFailure(SmnError):
    pass


class TargetBelowObserved(SmnError):
    pass


class InsufficientData(SmnError):
    pass


class TooFewPoints(SmnError):
    pass


class InvalidCounts(SmnError):
    pass


class EmptyClass(SmnError):
    pass


class NoCandidateNeighbors(SmnError):
    pass


class EmptyRosterClass(SmnError):
    pass


class DivergedLoss(SmnError):
    pass


class RosterMismatch(SmnError):
    pass


class MissingClassMean(SmnError):
    pass


class MissingMemberBank(SmnError):
    pass


class EmptyTestSet(SmnError):
    pass


class UntrainedStream(SmnError):
    pass


class ClassTooSmall(SmnError):
    pass


class InvalidConfig(SmnError):
    pass
