class BucketeerError(ValueError):
    """Base class for all validation errors raised by the package."""


class ConfigError(BucketeerError):
    pass


class InputError(BucketeerError):
    pass


class SampleSizeError(BucketeerError):
    """Too few observations for the chi-square approximation to hold."""


class NumericalError(ArithmeticError):
    pass
