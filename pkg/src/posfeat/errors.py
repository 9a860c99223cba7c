"""Exception hierarchy shared by the core, the service and the CLI.

Every error carries a short machine-parsable ``slug`` in addition to the
human-readable message; the service maps slugs to HTTP status codes and the
CLI prints them in its one-line error format.
"""

from __future__ import annotations


class PosfeatError(Exception):
    """Base class for all errors raised by this package."""

    slug = "error"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class InputError(PosfeatError):
    """Invalid argument values (non-finite inputs, bad shapes, bad ranges)."""

    slug = "invalid-input"


class ConfigError(PosfeatError):
    """Configuration violates a documented invariant."""

    slug = "invalid-config"


class DegeneratePoseError(PosfeatError):
    """Relative pose cannot produce an epipolar constraint (zero baseline)."""

    slug = "degenerate-pose"


class DegenerateLineError(PosfeatError):
    """The epipolar line is undefined for this point (epipole or infinity)."""

    slug = "degenerate-line"


class FormatError(PosfeatError):
    """A binary or text artifact does not conform to its documented format."""

    slug = "bad-format"


class MissingCheckpointError(PosfeatError):
    """A required checkpoint file is absent."""

    slug = "missing-descriptor-checkpoint"
