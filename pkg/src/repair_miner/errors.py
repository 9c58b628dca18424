"""Exception hierarchy. CLI maps ``InputError`` subclasses to exit code 2."""


class RepairMinerError(Exception):
    pass


class InputError(RepairMinerError):
    """Bad user input: malformed files, invalid arguments, domain violations."""


class ParseError(InputError):
    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class UnsupportedConstructError(ParseError):
    pass


class TaxonomyError(InputError):
    def __init__(self, message, kind=None):
        super().__init__(message)
        self.kind = kind


class TreeInvariantError(InputError):
    pass


class InconsistentMatchingError(RepairMinerError):
    pass


class UnclassifiableChangeError(RepairMinerError):
    pass


class UnknownFeatureError(InputError):
    pass


class NotMinedError(InputError):
    pass


class EnvironmentToolError(RepairMinerError):
    """The version-control tool could not be run."""


class DimensionError(InputError):
    pass


class UnsupportedSizeError(InputError):
    pass


class DomainError(InputError):
    pass


class TrainingError(InputError):
    pass


class EmptyShapeError(InputError):
    pass


class UnknownActionError(InputError):
    pass


class NonterminatingOracleError(InputError):
    pass


class SplitError(InputError):
    pass
