"""Exception hierarchy shared by all runtime modules."""


class AgentRuntimeError(Exception):
    """Base class for every error raised by the runtime."""


class AddressParseError(AgentRuntimeError, ValueError):
    pass


class ValidationError(AgentRuntimeError, ValueError):
    pass


class RegistrationError(AgentRuntimeError):
    pass


class EncodeError(AgentRuntimeError):
    def __init__(self, message: str, type_name: str | None = None):
        super().__init__(message)
        self.type_name = type_name


class DecodeError(AgentRuntimeError):
    def __init__(self, message: str, tag: int | None = None):
        super().__init__(message)
        self.tag = tag


class LifecycleError(AgentRuntimeError):
    pass


class BackwardTimeError(AgentRuntimeError, ValueError):
    pass


class QuiescenceTimeout(AgentRuntimeError, TimeoutError):
    def __init__(self, message: str, busy: list[str]):
        super().__init__(message)
        self.busy = busy


class ProtocolError(AgentRuntimeError):
    pass


class StepError(AgentRuntimeError):
    def __init__(self, message: str, participant: str | None = None):
        super().__init__(message)
        self.participant = participant


class ProcessTaskError(AgentRuntimeError):
    pass


class SpawnError(AgentRuntimeError):
    pass


class ConfigError(AgentRuntimeError):
    def __init__(self, message: str, path: str = "", line: int | None = None):
        location = path or "<root>"
        if line is not None:
            location = f"{location} (line {line})"
        super().__init__(f"{location}: {message}")
        self.path = path
        self.line = line
        self.reason = message
