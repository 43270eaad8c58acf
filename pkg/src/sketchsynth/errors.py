"""Exception types shared across the package."""


class ShapeError(ValueError):
    """A buffer or tensor does not match the expected shape/channel contract."""


class ConfigError(ValueError):
    """Invalid network or pipeline configuration."""


class DomainError(ValueError):
    """A numeric input is outside the mathematical domain of an operation."""


class StrokeError(ValueError):
    """A stroke is malformed or out of canvas bounds."""

    def __init__(self, message: str, stroke_index: int | None = None):
        super().__init__(message)
        self.stroke_index = stroke_index


class CheckpointError(ValueError):
    """A checkpoint archive is missing, corrupt, or from an unknown format version."""
