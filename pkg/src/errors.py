"""
Error hierarchy shared by every mmir package
"""


class MMIRError(Exception):
    """Base class for all mmir errors"""


class DimensionError(MMIRError, ValueError):
    """Operand shapes do not agree"""


class DomainError(MMIRError, ValueError):
    """Input outside the mathematical domain of an op (e.g. log of 0)"""


class LabelIndexError(MMIRError, IndexError):
    """Class label outside [0, C)"""


class TapeStateError(MMIRError):
    """Tape used in the wrong order (backward before forward, non-scalar loss)"""


class NonFiniteGradientError(MMIRError):
    """A NaN/Inf gradient reached the optimizer"""


class ConfigError(MMIRError, ValueError):
    """Invalid or infeasible configuration"""


class InputError(MMIRError, ValueError):
    """Malformed model input (missing modality, wrong width)"""


class ContractViolationError(MMIRError):
    """Caller broke an operation's precondition"""


class EpisodeStateError(MMIRError):
    """Agent asked to act with no valid action left"""


class UndefinedMetricError(MMIRError):
    """Metric requested over an empty set"""


class CheckpointError(MMIRError):
    """Checkpoint missing, corrupt or written for another config"""


class TrainingAbortedError(MMIRError):
    """Training stopped on a non-finite loss or gradient"""

    def __init__(self, message: str, checkpoint_path=None):
        super().__init__(message)
        self.checkpoint_path = checkpoint_path


class ReportError(MMIRError):
    """Reporting inputs (runs, mask dumps) missing or unreadable"""
