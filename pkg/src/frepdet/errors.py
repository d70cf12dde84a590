"""Typed errors raised across the package.

The CLI maps every ``FrepdetError`` to exit code 2.
"""


class FrepdetError(Exception):
    pass


class InvalidInputError(FrepdetError, ValueError):
    """Non-finite or otherwise malformed input values."""


class ShapeError(FrepdetError, ValueError):
    pass


class EmptyInputError(FrepdetError, ValueError):
    pass


class RangeError(FrepdetError, ValueError):
    pass


class ConfigError(FrepdetError, ValueError):
    pass


class InvalidLabelError(FrepdetError, ValueError):
    pass


class InvalidDatasetError(FrepdetError, ValueError):
    pass


class LayoutError(FrepdetError, ValueError):
    """Dataset directory does not follow ``root/{real,fake}``."""


class UndefinedMetricError(FrepdetError, ValueError):
    pass


class CheckpointError(FrepdetError):
    pass


class TrainingDivergenceError(FrepdetError):
    def __init__(self, step, what):
        super().__init__(f"non-finite {what} at step {step}")
        self.step = step
        self.what = what
