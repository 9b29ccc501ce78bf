"""Exception hierarchy shared by every stage of the anthem analysis pipeline."""

from typing import List, Optional


class AnthemAnalysisError(Exception):
    """Base class for all errors raised by this package."""


class SmfError(AnthemAnalysisError):
    """Malformed Standard MIDI File input."""

    def __init__(self, message: str, offset: Optional[int] = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class UnsupportedSmfError(SmfError):
    """Valid SMF feature this reader deliberately does not handle (SMPTE division)."""


class EmptyPerformanceError(AnthemAnalysisError):
    """A parsed file holds no pitched notes."""


class DegeneratePerformanceError(AnthemAnalysisError):
    """A performance whose span makes a feature undefined."""


class CountryNameError(AnthemAnalysisError):
    pass


class IndexCsvError(AnthemAnalysisError):
    """Index CSV rejected; `rows` lists every row-level problem found."""

    def __init__(self, message: str, rows: Optional[List[str]] = None):
        self.rows = list(rows or [])
        if self.rows:
            message = message + ": " + "; ".join(self.rows)
        super().__init__(message)


class JoinError(AnthemAnalysisError):
    pass


class ClusteringError(AnthemAnalysisError):
    pass


class UndefinedCorrelationError(AnthemAnalysisError):
    pass


class ConfigError(AnthemAnalysisError):
    pass
