"""Exception hierarchy shared across the toolkit."""


class SubfaceError(Exception):
    """Base class for all toolkit errors."""


class ContractError(SubfaceError, ValueError):
    """A documented precondition was violated by the caller."""


class DimensionError(SubfaceError, ValueError):
    """Shapes or lengths of the inputs do not line up."""


class RankError(SubfaceError, ValueError):
    """More dimensions requested than the data numerically supports.

    ``attainable`` carries the largest usable dimensionality.
    """

    def __init__(self, message, attainable=None):
        super().__init__(message)
        self.attainable = attainable


class ConvergenceError(SubfaceError, RuntimeError):
    """An iterative solver failed to converge or diverged.

    ``final_delta`` carries the last observed update magnitude.
    """

    def __init__(self, message, final_delta=None):
        super().__init__(message)
        self.final_delta = final_delta


class SingularityError(SubfaceError, ValueError):
    """A scatter matrix was singular and no usable ridge was supplied."""


class DiscriminantError(SubfaceError, ValueError):
    """Discriminant training asked for with degenerate class structure."""


class IngestionError(SubfaceError):
    """An image file could not be read."""


class LabelingError(SubfaceError):
    """A filename does not follow the documented naming scheme."""


class SplitError(SubfaceError):
    """A probe subset could not be constructed from the sample pool."""


class EvaluationError(SubfaceError, ValueError):
    """Evaluation inputs are inconsistent (missing truth, unpaired probes)."""


class ConfigError(SubfaceError, ValueError):
    """An experiment configuration is malformed."""


class StageError(SubfaceError):
    """A pipeline stage failed; carries the stage and algorithm tags."""

    def __init__(self, stage, message, algorithm=None):
        where = f"stage={stage}" + (f" algorithm={algorithm}" if algorithm else "")
        super().__init__(f"[{where}] {message}")
        self.stage = stage
        self.algorithm = algorithm
