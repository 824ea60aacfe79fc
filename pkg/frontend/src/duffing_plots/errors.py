class PlotsError(Exception):
    """Base class for rendering errors."""


class SchemaError(PlotsError, ValueError):
    """Input CSV does not match the expected schema."""
