"""Exception hierarchy shared by all modules."""


class KernelNoiseError(Exception):
    """Base class for library errors."""


class InvalidSetError(KernelNoiseError, IndexError):
    pass


class SpaceMismatchError(KernelNoiseError, ValueError):
    pass


class DegeneratePartitionError(KernelNoiseError, ValueError):
    pass


class PartitionError(KernelNoiseError, ValueError):
    pass


class DomainError(KernelNoiseError, ValueError):
    pass


class NumericError(KernelNoiseError, ValueError):
    pass


class NotRepresentableError(KernelNoiseError):
    """The candidate function is not in the range of the sampled Gram matrix."""


class DegenerateError(KernelNoiseError, ValueError):
    pass


class InsufficientDataError(KernelNoiseError, ValueError):
    pass


class UnsupportedError(KernelNoiseError, NotImplementedError):
    pass


class UnsupportedDerivativeError(UnsupportedError):
    pass


class NormalizationError(KernelNoiseError, ValueError):
    pass


class WindowError(KernelNoiseError, ValueError):
    pass


class StaleCertificateError(KernelNoiseError):
    pass


class LookupFailure(KernelNoiseError, KeyError):
    pass


class InputError(KernelNoiseError, ValueError):
    pass


class NonPositiveDefiniteError(KernelNoiseError, ValueError):
    """Raised when a kernel metric radicand is negative beyond slack."""


class ConfigError(KernelNoiseError, ValueError):
    pass
