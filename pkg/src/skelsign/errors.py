"""Exception types shared across the toolkit."""


class SkelsignError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(SkelsignError):
    """A file does not conform to the expected column/field schema."""


class OrderingError(SkelsignError):
    """Frame indices are out of order or gapped."""


class CoordinateRangeError(SkelsignError):
    """A coordinate lies outside the tolerated range."""


class ValidationError(SkelsignError):
    """An input value violates a documented precondition."""


class StageFailureError(SkelsignError):
    """A benchmark stage raised; carries the partial report collected so far."""

    def __init__(self, message: str, partial_report=None):
        super().__init__(message)
        self.partial_report = partial_report
