"""Exception hierarchy shared across the toolkit.

CLI exit-code mapping: usage problems exit 1 (handled by argparse), any
VeritopicError exits 2.
"""


class VeritopicError(Exception):
    """Base class for all toolkit errors."""


class DataError(VeritopicError):
    """Bad input data: malformed CSV, unknown labels, duplicate ids, ..."""


class FormatError(DataError):
    """A binary or TSV artifact does not conform to its documented layout."""
