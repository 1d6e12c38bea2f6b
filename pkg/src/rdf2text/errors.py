"""Exception hierarchy shared across the pipeline modules."""


class Rdf2TextError(Exception):
    """Base class for all errors raised by this package."""


class InputError(Rdf2TextError):
    """Malformed or inconsistent caller-supplied data."""


class UsageError(Rdf2TextError):
    """Missing or contradictory command-line arguments; exits with status 2."""


class TemplateParseError(Rdf2TextError):
    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class TemplateConflictError(Rdf2TextError):
    def __init__(self, predicate):
        super().__init__(f"duplicate template for predicate {predicate!r}")
        self.predicate = predicate


class MissingTemplateError(Rdf2TextError):
    def __init__(self, predicate, index=None):
        at = f" (triple {index})" if index is not None else ""
        super().__init__(f"no template for predicate {predicate!r}{at}")
        self.predicate = predicate
        self.index = index


class PlaceholderCollisionError(Rdf2TextError):
    """A triple field contains a literal placeholder token such as '<s>'."""


class SequenceTooLongError(Rdf2TextError):
    def __init__(self, length, limit):
        super().__init__(f"sequence of {length} tokens exceeds limit {limit}")
        self.length = length
        self.limit = limit


class BackendUnavailableError(Rdf2TextError):
    """A required model backend (checkpoint, library) is not available."""


class ContractViolationError(Rdf2TextError):
    """An internal precondition was broken by the caller."""


class GenerationError(Rdf2TextError):
    """A generator failed to produce usable output."""


class CorruptExampleError(Rdf2TextError):
    """A corpus example violates its own label/sentence consistency laws."""


class EvaluationError(Rdf2TextError):
    """A metric could not be computed for an example."""


class StageError(Rdf2TextError):
    """A pipeline stage failed; carries the stage name for diagnostics."""

    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
