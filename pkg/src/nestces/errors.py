"""Exception types raised across the package."""


class NestCesError(Exception):
    """Base class for all package errors."""


class DomainError(NestCesError, ValueError):
    """Capital or labor input is not strictly positive."""


class NonPositiveAggregate(NestCesError, ValueError):
    """A bracketed CES aggregate is <= 0 for some observation."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class InadmissibleStart(NestCesError):
    """Initial parameters are not admissible on the data."""


class EmptyGrid(NestCesError, ValueError):
    pass


class AllCellsFailed(NestCesError):
    pass


class DegenerateData(NestCesError, ValueError):
    pass


class MissingColumn(NestCesError, ValueError):
    pass


class BadRow(NestCesError, ValueError):
    def __init__(self, row, reason):
        super().__init__(f"row {row}: {reason}")
        self.row = row
        self.reason = reason


class EmptyDataset(NestCesError, ValueError):
    pass


class InadmissibleParams(NestCesError, ValueError):
    pass


class MissingTag(NestCesError, ValueError):
    pass
