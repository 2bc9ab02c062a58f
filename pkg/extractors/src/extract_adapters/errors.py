"""Adapter-side error types."""


class ExtractError(Exception):
    """Base class for extraction errors."""


class ModelLoadFailure(ExtractError):
    pass


class EmptyCaption(ExtractError):
    pass


class ImageDecodeFailure(ExtractError):
    pass


class PoolingUnsupported(ExtractError):
    pass


class DuplicateId(ExtractError):
    pass


class DimensionMismatch(ExtractError):
    pass


class NonFiniteValue(ExtractError):
    pass


class IoFailure(ExtractError):
    pass
