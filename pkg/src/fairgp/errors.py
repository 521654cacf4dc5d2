"""Exception types shared across the package."""


class FairGPError(Exception):
    """Base class for package errors."""


class SchemaError(FairGPError):
    """A required column is missing or the file layout is wrong."""


class ParseError(FairGPError):
    """A cell could not be parsed; message carries row/column location."""


class ValidationError(FairGPError):
    """Input violates a documented precondition (e.g. non-binary labels)."""
