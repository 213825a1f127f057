"""Exception taxonomy shared across the package.

Each class carries the process exit code the CLI maps it to; library callers
can catch the base class or any specific failure mode.
"""

from __future__ import annotations


class SeamforgeError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(SeamforgeError):
    """Invalid, inconsistent, or unresolvable configuration."""

    exit_code = 2


class IngestionError(SeamforgeError):
    """Malformed or unreadable dataset input."""

    exit_code = 3


class TrainingError(SeamforgeError):
    """Training aborted: non-finite loss, invalid batch, bad update."""

    exit_code = 4


class StorageError(SeamforgeError):
    """Run-directory, checkpoint, buffer, or trace-log failure."""

    exit_code = 5


class RoleError(TrainingError):
    """Operation not permitted for the policy's role (e.g. updating a snapshot)."""


class LengthError(SeamforgeError):
    """Prompt or sequence exceeds a configured token budget."""


class TransportError(SeamforgeError):
    """Remote executor call failed after exhausting retries."""
