"""Exception types shared across the package."""


class ParseError(ValueError):
    """A record, token, or file did not match its expected format."""


class SchemaError(ValueError):
    """An edge or metapath step violates the typed-graph schema."""


class NotFoundError(KeyError):
    """A node or token is not present in the graph or vocabulary."""


class ConfigError(ValueError):
    """A configuration value is out of range or internally inconsistent."""


class TrainingDiverged(RuntimeError):
    """A non-finite value appeared during optimization (learning rate too high)."""


class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
