"""Exception hierarchy shared by every stage of the pipeline."""


class SemcorrError(Exception):
    """Base class for all errors raised by semcorr."""

    #: CLI exit code used when the error escapes a subcommand.
    exit_code = 3


class InputError(SemcorrError):
    exit_code = 2


class NumericalError(SemcorrError):
    exit_code = 3


class ParseError(InputError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TopologyError(InputError):
    pass


class DimensionMismatch(InputError, ValueError):
    pass


class LengthMismatch(DimensionMismatch):
    pass


class DegenerateGeometry(NumericalError):
    pass


class NotConnected(NumericalError):
    pass


class ConvergenceFailure(NumericalError):
    pass


class EmptySourceSet(InputError, ValueError):
    pass


class CameraInsideMesh(NumericalError):
    pass


class AllInvisible(NumericalError):
    pass


class NoLabeledVertices(InputError):
    pass


class MissingEmbedding(InputError, KeyError):
    pass


class NonFiniteCost(InputError, ValueError):
    pass


class EmptyRegion(InputError):
    pass


class UnknownRegionInPrior(InputError, KeyError):
    pass


class SingularSystem(NumericalError):
    pass


class EmptyPairSet(InputError, ValueError):
    pass


class NonFiniteGradient(NumericalError):
    pass


class DivergenceDetected(NumericalError):
    pass


class BasisTooSmall(InputError, ValueError):
    pass


class UnsortedThresholds(InputError, ValueError):
    pass
