"""
Exception types raised across the toolkit.

Every error derives from CardDeckError so the CLI and the web server can
catch toolkit failures in one place, and from the closest builtin so plain
``except ValueError`` still works for callers that do not know about us.
"""


class CardDeckError(Exception):
    """Base class for all toolkit errors"""


class DimensionError(CardDeckError, ValueError):
    """Tensor shape does not match what a layer or operation expects"""

    def __init__(self, message, expected=None, actual=None):
        self.expected = expected
        self.actual = actual
        if expected is not None or actual is not None:
            message = f"{message} (expected {expected}, got {actual})"
        super().__init__(message)


class ScheduleError(CardDeckError, ValueError):
    """Learning-rate or sparsity schedule queried outside its domain"""


class PruneError(CardDeckError, ValueError):
    """Invalid pruning request or pruning state"""


class TrainingDivergedError(CardDeckError, ArithmeticError):
    """Loss became NaN or infinite during training"""

    def __init__(self, epoch, iteration, loss):
        self.epoch = epoch
        self.iteration = iteration
        self.loss = loss
        super().__init__(
            f"Non-finite loss {loss} at epoch {epoch}, iteration {iteration}"
        )


class DatasetError(CardDeckError, ValueError):
    """Dataset or manifest is malformed"""


class CheckpointError(CardDeckError, ValueError):
    """Checkpoint or index file cannot be decoded"""


class GateError(CardDeckError, ValueError):
    """Signature index cannot be built or queried"""


class DeckError(CardDeckError, ValueError):
    """Deck is empty or cannot serve the requested mode"""


class SpectralError(CardDeckError, ValueError):
    """Frequency index out of range or incompatible heatmaps"""
