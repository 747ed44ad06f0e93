"""Exception hierarchy shared by all gridrep modules.

The CLI maps each family onto a process exit code:
``InvalidInputError`` -> 2, ``DataError`` -> 3, ``NumericalError`` -> 4.
"""


class GridrepError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(GridrepError, ValueError):
    """Arguments violate an operation's preconditions (shape, range, config)."""


class DataError(GridrepError):
    """Problems with on-disk data: bad magic, truncation, misalignment."""


class FormatError(DataError):
    pass


class AlignmentError(DataError):
    pass


class DegenerateLabelsError(InvalidInputError):
    """Binary labels contain a single class."""


class NumericalError(GridrepError, ArithmeticError):
    pass


class TrainingDivergedError(NumericalError):
    def __init__(self, epoch, loss):
        super().__init__(f"training diverged at epoch {epoch}: loss={loss!r}")
        self.epoch = epoch
        self.loss = loss
