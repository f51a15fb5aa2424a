class ConfigError(ValueError):
    """Invalid configuration, trace contents, or CLI arguments.

    ``source`` and ``lineno`` locate the offending input line when known.
    """

    def __init__(self, message, source=None, lineno=None):
        self.message = message
        self.source = source
        self.lineno = lineno
        super().__init__(str(self))

    def __str__(self):
        if self.source is not None and self.lineno is not None:
            return f"{self.source}:{self.lineno}: {self.message}"
        if self.lineno is not None:
            return f"line {self.lineno}: {self.message}"
        return self.message
