"""Exception types raised across the package."""


class DesapError(Exception):
    """Base class for every error raised by desap."""


class ShapeError(DesapError, ValueError):
    pass


class BudgetError(DesapError, ValueError):
    pass


class ConfigError(DesapError, ValueError):
    pass


class ConsistencyError(DesapError, ValueError):
    pass


class FormatError(DesapError, ValueError):
    """Malformed tensor file. ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset
