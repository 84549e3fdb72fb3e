from __future__ import annotations

import abc
import math
from dataclasses import asdict, dataclass
from typing import Any

from ..contexts import PromptBundle
from .gate import RateGate


class BackendError(Exception):
    """Base class for completion failures."""


class ConfigurationError(BackendError):
    """Backend cannot be used as configured (e.g. missing credential)."""


class TransportError(BackendError):
    """Network failure, timeout or non-2xx response that outlived all retries."""

    def __init__(self, message: str, attempts: int, reason: str = "transport"):
        super().__init__(message)
        self.attempts = attempts
        self.reason = reason


class FixtureError(BackendError):
    """A replay fixture has no recorded result for the requested key."""


@dataclass(frozen=True)
class CompletionParams:
    temperature: float = 1.0
    max_output_tokens: int = 1024
    seed: int | None = None

    def __post_init__(self) -> None:
        if not self.temperature >= 0:
            raise ValueError("temperature must be >= 0")
        if not self.max_output_tokens > 0:
            raise ValueError("max_output_tokens must be > 0")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class CompletionResult:
    text: str
    input_tokens: int
    output_tokens: int
    latency_s: float = 0.0
    attempt: int = 1
    tokens_estimated: bool = False

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def estimate_tokens(text: str) -> int:
    """Rough token count (chars / 4) for providers that report no usage."""
    return math.ceil(len(text) / 4)


def bundle_chars(bundle: PromptBundle) -> str:
    return "".join(m.content for m in bundle.messages)


class Backend(abc.ABC):
    """A chat-completion source identified by a model name.

    Implementations must be safe to call from several worker threads.
    """

    kind = "abstract"

    def __init__(self, model: str, gate: RateGate | None = None):
        self.model = model
        self.gate = gate if gate is not None else RateGate()

    @abc.abstractmethod
    def complete(
        self,
        bundle: PromptBundle,
        params: CompletionParams,
        *,
        trial: int | None = None,
        call: int = 0,
    ) -> CompletionResult:
        """Return one completion for ``bundle``.

        ``trial`` and ``call`` identify the request within a run (call 0 is the
        first ask, call 1 a re-ask); live backends ignore them.
        """

    def validate(self) -> None:
        """Raise :class:`ConfigurationError` if the backend cannot run."""

    def describe(self) -> dict[str, Any]:
        return {"kind": self.kind, "model": self.model, "rate_limit": self.gate.to_dict()}

    def close(self) -> None:
        self.gate.close()
