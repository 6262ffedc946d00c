"""Exception types raised across the package."""


class FolkmError(Exception):
    """Base class for all folkm errors."""


# --- clause lexing / parsing ---

class ClauseError(FolkmError):
    """Base for clause lexer/parser errors; carries a source position."""

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at column {position})"
        super().__init__(message)
        self.position = position


class UnknownCharacter(ClauseError):
    pass


class UnterminatedIdentifier(ClauseError):
    pass


class ClauseSyntaxError(ClauseError):
    pass


class UnboundVariable(ClauseError):
    pass


class UnknownPredicate(ClauseError):
    pass


class ArityMismatch(ClauseError):
    def __init__(self, predicate, expected, got, position=None):
        super().__init__(
            f"predicate '{predicate}' expects {expected} argument(s), got {got}",
            position,
        )
        self.predicate = predicate
        self.expected = expected
        self.got = got


# --- data loading ---

class DataError(FolkmError):
    pass


class MissingFile(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class DanglingSampleId(DataError):
    pass


class DuplicateSampleId(DataError):
    pass


class ConfigError(DataError):
    pass


# --- kernels ---

class KernelError(FolkmError):
    pass


class LengthMismatch(KernelError):
    pass


# --- grounding / evaluation ---

class GroundingError(FolkmError):
    pass


class DomainError(GroundingError):
    pass


class NonFinite(GroundingError):
    pass


class GroundingTooLarge(GroundingError):
    def __init__(self, count, cap):
        super().__init__(f"clause grounds to {count} tuples, cap is {cap}")
        self.count = count
        self.cap = cap


class UnknownGuardPredicate(GroundingError):
    pass


class MissingAtomValue(GroundingError):
    pass


class GraphNotEvaluated(GroundingError):
    pass


# --- objective / training ---

class ObjectiveError(FolkmError):
    pass


class EmptyLabeledSet(ObjectiveError):
    def __init__(self, predicate):
        super().__init__(f"predicate '{predicate}' has a fitting weight but no labeled examples")
        self.predicate = predicate


class TrainingError(FolkmError):
    pass


class SupportCapExceeded(TrainingError):
    def __init__(self, predicate, size, cap):
        super().__init__(f"support set for '{predicate}' has {size} tuples, cap is {cap}")
        self.predicate = predicate
        self.size = size
        self.cap = cap


class DivergenceDetected(TrainingError):
    pass


class NonFiniteLoss(TrainingError):
    pass
