"""Exception hierarchy.

Every error carries the CLI exit code it maps to: 2 for bad or unusable
data, 3 for numerical failures. Usage errors (exit 1) come from argparse.
"""


class BirkhoffError(Exception):
    exit_code = 2


class DataError(BirkhoffError, ValueError):
    exit_code = 2


class NumericalError(BirkhoffError, ArithmeticError):
    exit_code = 3


# midi_io
class MalformedFile(DataError):
    pass


class EmptySequence(DataError):
    pass


# alignment
class EmptyInput(DataError):
    pass


class InsufficientMatches(DataError):
    pass


# features
class ZeroReference(DataError):
    pass


class LengthMismatch(DataError):
    pass


class ZeroVector(DataError):
    pass


class EmptyHistogram(DataError):
    pass


class TooFewNotes(DataError):
    pass


class TooFewSamples(DataError):
    pass


class InsufficientAlignment(DataError):
    pass


class CompressorFailure(NumericalError):
    pass


# model
class SingleClass(DataError):
    pass


class MissingClass(DataError):
    pass


class NonFiniteLoss(NumericalError):
    pass


# evaluation
class EmptyMatrix(DataError):
    pass


# corpus
class MissingFile(DataError):
    pass


class BadLabel(DataError):
    pass


class DuplicatePieceEntry(DataError):
    pass


class TooFewPieces(DataError):
    pass
