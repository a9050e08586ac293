"""Exception types shared across the package."""


class HamsearchError(Exception):
    """Base class for all package-specific failures."""


class DatasetFormatError(HamsearchError, ValueError):
    """A code file does not look like the format it claims to be."""


class DatasetCorruptError(HamsearchError, ValueError):
    """A code file has a valid header but a damaged payload."""


class EmptyDatasetError(HamsearchError, ValueError):
    """A dataset with zero codes or zero-length codes was given."""


class HexCodeError(HamsearchError, ValueError):
    """A hex-encoded code has the wrong length or bad characters."""


class IndexFormatError(HamsearchError, ValueError):
    """An index file is malformed or inconsistent with its dataset."""


class PermutationMismatchError(HamsearchError, ValueError):
    """Index and permutation sidecar do not belong together."""


class InsufficientDataError(HamsearchError, ValueError):
    """Not enough codes to estimate the requested statistic."""


class EngineNotReadyError(HamsearchError, RuntimeError):
    """A search strategy needs a component the engine was built without."""


class StrategyDisagreementError(HamsearchError, RuntimeError):
    """Two strategies returned different neighbor sets for one query.

    This is a correctness failure: every strategy must return exactly the
    same r-neighbor set.
    """

    def __init__(self, message, *, query_hex, radius, strategy_a, strategy_b):
        super().__init__(message)
        self.query_hex = query_hex
        self.radius = radius
        self.strategy_a = strategy_a
        self.strategy_b = strategy_b
