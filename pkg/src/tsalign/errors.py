"""Exception hierarchy shared by every module."""


class TsAlignError(Exception):
    """Base class for all library errors."""


# dataset
class MalformedRow(TsAlignError, ValueError):
    pass


class InconsistentChannels(TsAlignError, ValueError):
    pass


class UnknownLabel(TsAlignError, ValueError):
    pass


class EmptyDataset(TsAlignError, ValueError):
    pass


class InvalidSpec(TsAlignError, ValueError):
    pass


class IoFailure(TsAlignError, OSError):
    pass


# alignment
class InsufficientLength(TsAlignError, ValueError):
    def __init__(self, message, job_id=None):
        super().__init__(message)
        self.job_id = job_id


class EmptySeries(TsAlignError, ValueError):
    pass


# scaling / pca / classifiers
class EmptyMatrix(TsAlignError, ValueError):
    pass


class DimensionMismatch(TsAlignError, ValueError):
    pass


class RankTooSmall(TsAlignError, ValueError):
    pass


class DegenerateInput(TsAlignError, ValueError):
    pass


class KTooLarge(TsAlignError, ValueError):
    pass


# model selection
class ClassTooSmall(TsAlignError, ValueError):
    pass


class EmptyGrid(TsAlignError, ValueError):
    pass
