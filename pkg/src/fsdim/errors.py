"""Exception hierarchy shared by the library and the command line."""


class FsdimError(Exception):
    """Base class for data and model errors (CLI exit status 2)."""


class SourceExhausted(FsdimError):
    def __init__(self, source, requested, available):
        self.requested = requested
        self.available = available
        super().__init__(
            f"source {source} holds {available} bits, {requested} requested "
            f"(short by {requested - available})"
        )


class MachineSpecError(FsdimError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ReducibleChainError(FsdimError):
    pass


class PreconditionError(FsdimError):
    pass
