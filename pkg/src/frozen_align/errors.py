"""Exception types shared across the engine.

Every error raised by the public API derives from FrozenAlignError so
callers (and the CLI) can map failures to exit codes in one place.
"""


class FrozenAlignError(Exception):
    """Base class for all engine errors."""


# --- feature store ---

class DimensionMismatch(FrozenAlignError):
    pass


class DuplicateId(FrozenAlignError):
    pass


class NonFiniteValue(FrozenAlignError):
    pass


class IoFailure(FrozenAlignError):
    pass


class BadMagic(FrozenAlignError):
    pass


class VersionUnsupported(FrozenAlignError):
    pass


class TruncatedFile(FrozenAlignError):
    pass


class UnresolvedId(FrozenAlignError):
    pass


class EmptyCaptionList(FrozenAlignError):
    pass


# --- projection network ---

class InvalidConfig(FrozenAlignError):
    pass


class BatchTooSmall(FrozenAlignError):
    pass


class WidthMismatch(FrozenAlignError):
    pass


class StaleCache(FrozenAlignError):
    pass


# --- contrastive loss ---

class ZeroVector(FrozenAlignError):
    pass


class NotNormalized(FrozenAlignError):
    pass


class ShapeMismatch(FrozenAlignError):
    pass


class InvalidTau(FrozenAlignError):
    pass


# --- optimizer ---

class NonFiniteGradient(FrozenAlignError):
    pass


# --- trainer ---

class TooSmall(FrozenAlignError):
    pass


class BatchExceedsDataset(FrozenAlignError):
    pass


class DimMismatch(FrozenAlignError):
    pass


class NonFiniteLoss(FrozenAlignError):
    pass


# --- class representations ---

class BadTemplate(FrozenAlignError):
    pass


class EmptyInput(FrozenAlignError):
    pass


class MissingEmbedding(FrozenAlignError):
    pass


# --- evaluation ---

class EmptyClass(FrozenAlignError):
    pass


class KExceedsCorpus(FrozenAlignError):
    pass


# --- seen/unseen benchmark ---

class OverlapDetected(FrozenAlignError):
    pass


class CountMismatch(FrozenAlignError):
    pass


class LeakDetected(FrozenAlignError):
    pass


class MissingDataset(FrozenAlignError):
    pass
