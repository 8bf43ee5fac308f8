"""Shared exception types.

ParameterError: caller passed arguments violating a documented precondition.
DataError: inputs were well-formed but their contents are unusable.
Format problems in tensor files raise tensor_io.SptnError.
"""


class ParameterError(ValueError):
    pass


class DataError(ValueError):
    pass
