"""Exception types shared across the package."""


class ExprSyntaxError(SyntaxError):
    """Malformed selection expression. ``offset`` is the 0-based byte offset."""

    def __init__(self, msg: str, source: str, offset: int):
        super().__init__(f"{msg} at offset {offset}")
        self.msg = msg
        self.source = source
        self.offset = offset


class DomainError(ValueError):
    """Value outside an operation's domain; ``offset`` is set for expression input."""

    def __init__(self, msg: str, offset=None):
        super().__init__(msg)
        self.offset = offset


class EvalError(ArithmeticError):
    pass


class StateError(RuntimeError):
    pass


class StabilityError(RuntimeError):
    pass


class SingularityError(RuntimeError):
    """Canonical-equation curvature became non-negative."""

    def __init__(self, msg: str, t: float):
        super().__init__(f"{msg} (t={t:.6g})")
        self.t = t


class ConfigError(ValueError):
    pass
