"""Exception types shared across the package."""


class PCLDAError(Exception):
    """Base class for all pclda errors."""


class InvalidParameterError(PCLDAError, ValueError):
    """Model parameters or latent variables violate a numerical precondition."""


class DataFormatError(PCLDAError, ValueError):
    """A corpus, labels, or checkpoint file failed to parse or validate."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class TrainingDivergedError(PCLDAError, RuntimeError):
    """The optimizer produced a non-finite loss; names the epoch and term."""

    def __init__(self, epoch, term):
        super().__init__(f"non-finite loss at epoch {epoch} (term: {term})")
        self.epoch = epoch
        self.term = term


class UndefinedMetricError(PCLDAError, ValueError):
    """A metric (e.g. AUC with a single-class label column) is undefined."""
