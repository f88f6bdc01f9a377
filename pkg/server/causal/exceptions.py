class CausalError(ValueError):
    """Base error of the causal app. Carries the offending field when there is one."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ParameterError(CausalError):
    pass


class ArmMissingError(CausalError):
    pass


class InBagEverywhereError(CausalError):
    pass


class SplitlessForestError(CausalError):
    pass


class NonFiniteScoreError(CausalError):
    pass


class DegenerateRegressorError(CausalError):
    pass


class EmptyGridError(CausalError):
    pass


class ModelFormatError(CausalError):
    pass
