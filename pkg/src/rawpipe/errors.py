"""Exception hierarchy.

The CLI maps these to exit codes: data/format problems exit 2, numeric
problems exit 3.
"""


class RawpipeError(Exception):
    """Base class for all library errors."""


class DataError(RawpipeError):
    """Input data does not satisfy an operation's contract."""


class RangeError(DataError, ValueError):
    pass


class DimensionError(DataError, ValueError):
    pass


class EncodingError(DataError, TypeError):
    pass


class ParameterError(DataError, ValueError):
    pass


class ParseError(DataError):
    """Malformed file. ``offset`` is the byte position where parsing failed."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class NumericError(RawpipeError, ArithmeticError):
    """Non-finite value produced. ``block`` names the flow block, if any."""

    def __init__(self, message, block=None):
        self.block = block
        if block is not None:
            message = f"{message} (block {block})"
        super().__init__(message)


class SingularityError(NumericError):
    pass
