class EegError(ValueError):
    """Base error of the EEG app. Carries the offending field when there is one."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class MalformedHeaderError(EegError):
    pass


class SampleCountMismatchError(EegError):
    pass


class RecordingFormatError(EegError):
    """The recording files on disk are missing or unreadable."""


class DuplicateChannelError(EegError):
    pass


class MissingColumnError(EegError):
    pass


class TreatmentDomainError(EegError):
    pass


class NonNumericCovariateError(EegError):
    pass


class UnknownChannelError(EegError):
    pass


class MissingPositionError(EegError):
    pass


class FilterSpecError(EegError):
    pass


class EpochingError(EegError):
    pass


class RejectionError(EegError):
    pass


class SpectralError(EegError):
    pass
