"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, transport/backend
failures -> 3, QuotaExhaustedError -> 4.
"""


class SynthsetError(Exception):
    """Base class for all package errors."""


class ConfigError(SynthsetError):
    """Invalid configuration, plan, or catalog state."""


class CatalogParseError(SynthsetError):
    """Malformed catalog row; message names the offending line."""


class TemplateError(SynthsetError):
    """Prompt template contains unknown placeholders or lacks the subject group."""


class InputError(SynthsetError):
    """Invalid operand to a pixel/geometry operation (degenerate bbox etc.)."""


class TransportError(SynthsetError):
    """Backend unreachable or timed out; retryable."""


class RequestError(SynthsetError):
    """Backend rejected the request (4xx-equivalent); not retryable."""


class ProtocolError(SynthsetError):
    """Backend response violates the wire contract (bad shape, wrong dims)."""


class ConsistencyError(SynthsetError):
    """Internal invariant broken (e.g. manifest id out of sequence)."""


class ResumeError(SynthsetError):
    """Output directory cannot be resumed (tampered or mismatched snapshot)."""


class QuotaExhaustedError(SynthsetError):
    """A label slot ran out of attempts; carries the failure distribution."""

    def __init__(self, message: str, failures: dict[tuple[str, str], int] | None = None):
        super().__init__(message)
        self.failures = failures or {}
