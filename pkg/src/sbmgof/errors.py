"""Exception types raised by the library."""


class SbmGofError(Exception):
    """Base class for all library errors."""


class ParameterError(SbmGofError, ValueError):
    """Invalid or inconsistent parameters."""


class EdgeListParseError(SbmGofError, ValueError):
    """Malformed edge-list or label file."""

    def __init__(self, message: str, path=None, line_number: int | None = None):
        self.path = path
        self.line_number = line_number
        where = []
        if path is not None:
            where.append(str(path))
        if line_number is not None:
            where.append(f"line {line_number}")
        super().__init__(f"{':'.join(where)}: {message}" if where else message)


class NumericError(SbmGofError, ArithmeticError):
    """Non-finite input or a numerical routine that failed to converge."""


class DegenerateClusterError(NumericError):
    """A within-cluster block probability is undefined (cluster of size 1)."""

    def __init__(self, cluster: int):
        self.cluster = cluster
        super().__init__(f"cluster {cluster} has a single node; diagonal block probability undefined")


class DegenerateBootstrapError(NumericError):
    """Bootstrap extreme eigenvalues have zero sample spread."""
