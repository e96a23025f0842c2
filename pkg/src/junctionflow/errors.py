"""Exception taxonomy shared across the package.

Exit-code mapping used by the command line tool: ConfigError -> 2,
ConsistencyError -> 3, verification failures -> 1.
"""

from __future__ import annotations


class ConfigError(ValueError):
    """Invalid configuration: syntax, unknown key, range or topology violation."""

    def __init__(self, message: str, kind: str = "config", line: int | None = None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}[{kind}] {message}")
        self.kind = kind
        self.line = line


class ConsistencyError(RuntimeError):
    """An internal invariant that should hold in exact arithmetic was violated."""


class PreconditionError(ValueError):
    """A documented operation precondition does not hold for the given input."""
