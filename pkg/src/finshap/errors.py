"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures onto
its documented process exit statuses without a lookup table.
"""


class FinshapError(Exception):
    exit_code = 1


class ConfigError(FinshapError, ValueError):
    exit_code = 2


class DataError(FinshapError, ValueError):
    exit_code = 3


class SchemaError(DataError):
    pass


class ParseError(DataError):
    pass


class DuplicationError(DataError):
    pass


class EmptyDatasetError(DataError):
    pass


class SplitError(DataError):
    pass


class ShapeError(DataError):
    pass


class NumericalError(FinshapError, ArithmeticError):
    exit_code = 4


class CapacityError(ConfigError):
    pass


class PartitionError(ConfigError):
    pass


class UndefinedMetricError(DataError):
    pass
