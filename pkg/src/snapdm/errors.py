"""Exception hierarchy.

Data-format errors carry the offending file and byte offset so corrupt
inputs can be located without a debugger.
"""


class SnapdmError(Exception):
    """Base class for all package errors."""


class UsageError(SnapdmError):
    """Bad arguments or flag combinations (CLI exit code 1)."""


class DataError(SnapdmError):
    """Invalid or unreadable input data (CLI exit code 2)."""


class InvalidDataset(DataError):
    """Dataset violates a structural invariant."""


class DataFormatError(DataError):
    """On-disk format violation."""

    def __init__(self, message, path=None, offset=None):
        self.path = str(path) if path is not None else None
        self.offset = offset
        loc = ""
        if self.path is not None:
            loc = f" [{self.path}" + (f" @ byte {offset}]" if offset is not None else "]")
        super().__init__(message + loc)


class MagicMismatch(DataFormatError):
    pass


class VersionUnsupported(DataFormatError):
    pass


class ShapeMismatch(DataFormatError):
    pass


class AlphabetViolation(DataFormatError):
    pass


class TruncatedBlob(DataFormatError):
    pass


class ChecksumMismatch(DataFormatError):
    pass


class NumericalError(SnapdmError):
    """Numerical failure (CLI exit code 3)."""


class InsufficientSamples(NumericalError):
    """Fewer than two snapshots; covariance undefined."""


class DegenerateKernel(NumericalError):
    """All ensembles statistically identical; no kernel scale exists."""


class NumericalFailure(NumericalError):
    """Eigensolver or optimizer did not converge."""


class NoTransition(NumericalError):
    """Fitted step amplitude indistinguishable from the residual noise."""


class NonConvergence(NumericalError):
    """Fit did not converge; carries the best iterate as .report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class UnstableDetection(NumericalError):
    """Too many bootstrap replicates failed to produce a fit."""


class AmbiguousClustering(NumericalError):
    """Cluster labels interleave along the parameter axis."""


class NoAtoms(NumericalError):
    """Every shot in the ensemble is empty."""


class EmptySeries(SnapdmError):
    """Nothing to plot."""
