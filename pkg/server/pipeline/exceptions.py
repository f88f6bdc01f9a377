class PipelineError(ValueError):
    """Base error of the pipeline app."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ConfigError(PipelineError):
    pass


class SingleClassError(PipelineError):
    pass


class StageError(PipelineError):
    """A stage failed after its configuration was accepted."""

    def __init__(self, stage, message):
        super().__init__(f"Stage {stage!r} failed: {message}", field="stages")
        self.stage = stage
