class DomainError(ValueError):
    """An input lies outside the domain where a model or routine is defined."""


class DegenerateWaveformError(DomainError):
    pass


class ResourceError(RuntimeError):
    """A requested computation exceeds the configured cost guard."""


class TrainingError(RuntimeError):
    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class DatasetParseError(ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ModelLoadError(ValueError):
    pass


class ConfigError(ValueError):
    pass
