"""Exception hierarchy shared across the package."""


class SsltlError(Exception):
    """Base class for all package errors."""


class ModelError(SsltlError):
    """Malformed or invalid model / specification data."""


class HoaError(SsltlError):
    """Malformed, non-deterministic, incomplete or unsupported automaton."""


class LumpabilityError(SsltlError):
    """Aggregation found representative-dependent rows; the partition is not
    ordinarily lumpable on the given chain."""


class PolicyError(SsltlError):
    """Missing policy entries or a corrupt solver assignment."""


class SolverError(SsltlError):
    """External solver could not be launched, timed out, or produced
    unparseable output."""


class NoAcceptingStructureError(SsltlError):
    """The product has no accepting maximal end component; the instance is
    structurally infeasible."""


class EnumerationLimitError(SsltlError):
    """Instance exceeds the exhaustive-enumeration bound."""
