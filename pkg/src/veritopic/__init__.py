"""veritopic: fake-news classification from LDA topics fused with document embeddings."""

__version__ = "0.1.0"

from .errors import DataError, FormatError, VeritopicError

__all__ = ["DataError", "FormatError", "VeritopicError", "__version__"]
