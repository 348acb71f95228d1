"""Exception hierarchy shared across the linker."""


class LinkerError(Exception):
    pass


class ConfigError(LinkerError):
    pass


class InputError(LinkerError, ValueError):
    pass


class ParseError(LinkerError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class ValidationError(ParseError):
    pass


class IntegrityError(LinkerError):
    pass


class BackendError(LinkerError):
    """Retryable failure talking to a knowledge-graph service."""


class ProtocolError(LinkerError):
    """The knowledge-graph service answered with something we cannot read."""


class SequencingError(LinkerError):
    pass
