"""Exception hierarchy shared across the engine."""


class IpsError(Exception):
    """Base class for every error raised by this package."""


class DecodeError(IpsError):
    pass


class TruncatedFrame(DecodeError):
    pass


class BadHeaderLength(DecodeError):
    pass


class UnsupportedArp(DecodeError):
    pass


class CaptureError(IpsError):
    pass


class BadMagic(CaptureError):
    pass


class UnsupportedLinktype(CaptureError):
    pass


class TruncatedCapture(CaptureError):
    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"truncated capture record {index}")


class IoFailure(CaptureError):
    pass


class SinkError(IpsError):
    """A replay consumer raised while handling record ``index``."""

    def __init__(self, index, cause):
        self.index = index
        self.cause = cause
        super().__init__(f"sink failed on record {index}: {cause!r}")


class RuleError(IpsError):
    pass


class RuleSyntaxError(RuleError):
    def __init__(self, message, line=1, column=1):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class UnknownVariable(RuleError):
    pass


class DuplicateSid(RuleError):
    pass


class UnknownRule(RuleError):
    pass


class ConfigError(IpsError):
    pass


class MalformedLine(IpsError):
    def __init__(self, index, text):
        self.index = index
        self.text = text
        super().__init__(f"malformed line {index}: {text!r}")


class UnreadableSource(IpsError):
    def __init__(self, path, cause):
        self.path = path
        self.cause = cause
        super().__init__(f"cannot read {path}: {cause}")


class EmptySeries(IpsError):
    pass


class InvalidParams(IpsError):
    pass
