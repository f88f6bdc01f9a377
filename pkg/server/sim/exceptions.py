class SimulationError(ValueError):
    """Base error of the simulation app."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class SpecError(SimulationError):
    pass


class CovarianceError(SimulationError):
    pass


class EffectVariantError(SimulationError):
    pass
