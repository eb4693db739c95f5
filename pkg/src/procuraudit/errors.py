"""Exception hierarchy shared by the pipeline stages."""


class ProcurauditError(Exception):
    """Base class for every error raised by this package."""


class SchemaError(ProcurauditError):
    """Schema configuration is invalid or a mapped CSV header is missing."""


class ParseError(ProcurauditError):
    """The CSV stream is structurally malformed."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DegenerateInput(ProcurauditError):
    """Input has zero variance or is otherwise too degenerate to summarize."""


class AlignmentError(ProcurauditError):
    """Feature blocks disagree on row count or row keys."""


class EmptyVocabulary(ProcurauditError):
    """No token survived stopword removal and document-frequency pruning."""


class InsufficientData(ProcurauditError):
    """Too few rows to fit a model."""


class DimensionError(ProcurauditError):
    """A feature row or design matrix has the wrong width."""


class SingularDesign(ProcurauditError):
    """The regression design matrix does not have full column rank."""


class DegenerateAfterExclusion(ProcurauditError):
    """Outlier exclusion left too few rows to identify the regression."""


class SingleClassError(ProcurauditError):
    """Classifier labels contain only one class."""
