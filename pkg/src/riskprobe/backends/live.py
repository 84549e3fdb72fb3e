"""OpenAI-compatible chat-completion client."""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass
from typing import Any

import httpx
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt, wait_exponential

from ..contexts import PromptBundle
from .base import (
    Backend,
    CompletionParams,
    CompletionResult,
    ConfigurationError,
    TransportError,
    bundle_chars,
    estimate_tokens,
)
from .gate import RateGate

log = logging.getLogger(__name__)

DEFAULT_MAX_ATTEMPTS = 3


@dataclass(frozen=True)
class BackendId:
    provider: str
    model: str
    endpoint: str
    auth_ref: str  # name of the environment variable holding the API key


class _Transient(Exception):
    def __init__(self, reason: str, detail: str):
        super().__init__(detail)
        self.reason = reason


class LiveBackend(Backend):
    kind = "live"

    def __init__(
        self,
        ident: BackendId,
        *,
        gate: RateGate | None = None,
        timeout_s: float = 120.0,
        max_attempts: int = DEFAULT_MAX_ATTEMPTS,
        backoff_base_s: float = 1.0,
        supports_system_role: bool = True,
        token_param: str = "max_tokens",
        transport: httpx.BaseTransport | None = None,
    ):
        super().__init__(ident.model, gate)
        self.ident = ident
        self.timeout_s = timeout_s
        self.max_attempts = max_attempts
        self.backoff_base_s = backoff_base_s
        self.supports_system_role = supports_system_role
        self.token_param = token_param
        self._client = httpx.Client(timeout=timeout_s, transport=transport)

    def validate(self) -> None:
        self._api_key()

    def _api_key(self) -> str:
        key = os.environ.get(self.ident.auth_ref)
        if not key:
            raise ConfigurationError(
                f"environment variable {self.ident.auth_ref!r} is not set (needed for model {self.model!r})"
            )
        return key

    def request_body(self, bundle: PromptBundle, params: CompletionParams) -> dict[str, Any]:
        if not self.supports_system_role:
            bundle = bundle.without_system_role()
        body: dict[str, Any] = {
            "model": self.ident.model,
            "messages": bundle.to_wire(),
            "temperature": params.temperature,
            self.token_param: params.max_output_tokens,
        }
        if params.seed is not None:
            body["seed"] = params.seed
        return body

    def serialize_request(self, bundle: PromptBundle, params: CompletionParams) -> bytes:
        return json.dumps(self.request_body(bundle, params), ensure_ascii=False).encode("utf-8")

    def _post_once(self, payload: bytes, key: str) -> dict[str, Any]:
        headers = {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}
        try:
            with self.gate.slot():
                resp = self._client.post(self.ident.endpoint, content=payload, headers=headers)
        except httpx.TimeoutException as exc:
            raise _Transient("timeout", str(exc)) from exc
        except httpx.TransportError as exc:
            raise _Transient("network", str(exc)) from exc
        if not 200 <= resp.status_code < 300:
            raise _Transient(f"http_{resp.status_code}", resp.text[:500])
        try:
            return resp.json()
        except ValueError as exc:
            raise _Transient("bad_json", resp.text[:500]) from exc

    def complete(
        self,
        bundle: PromptBundle,
        params: CompletionParams,
        *,
        trial: int | None = None,
        call: int = 0,
    ) -> CompletionResult:
        key = self._api_key()
        payload = self.serialize_request(bundle, params)
        retrying = Retrying(
            stop=stop_after_attempt(self.max_attempts),
            wait=wait_exponential(multiplier=self.backoff_base_s, max=60),
            retry=retry_if_exception_type(_Transient),
            reraise=True,
        )
        start = time.perf_counter()
        attempt_no = 0
        try:
            for attempt in retrying:
                with attempt:
                    attempt_no = attempt.retry_state.attempt_number
                    data = self._post_once(payload, key)
        except _Transient as exc:
            log.warning("%s: giving up after %d attempts (%s)", self.model, attempt_no, exc.reason)
            raise TransportError(str(exc), attempts=attempt_no, reason=exc.reason) from exc
        latency = time.perf_counter() - start

        try:
            text = data["choices"][0]["message"].get("content") or ""
        except (KeyError, IndexError, TypeError, AttributeError):
            text = ""
        usage = data.get("usage") or {}
        prompt_tokens = usage.get("prompt_tokens")
        completion_tokens = usage.get("completion_tokens")
        estimated = prompt_tokens is None or completion_tokens is None
        if prompt_tokens is None:
            prompt_tokens = estimate_tokens(bundle_chars(bundle))
        if completion_tokens is None:
            completion_tokens = estimate_tokens(text)
        return CompletionResult(
            text=text,
            input_tokens=int(prompt_tokens),
            output_tokens=int(completion_tokens),
            latency_s=latency,
            attempt=attempt_no,
            tokens_estimated=estimated,
        )

    def describe(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "provider": self.ident.provider,
            "model": self.ident.model,
            "endpoint": self.ident.endpoint,
            "auth_env": self.ident.auth_ref,
            "timeout_s": self.timeout_s,
            "max_attempts": self.max_attempts,
            "backoff_base_s": self.backoff_base_s,
            "supports_system_role": self.supports_system_role,
            "token_param": self.token_param,
            "rate_limit": self.gate.to_dict(),
        }

    def close(self) -> None:
        super().close()
        self._client.close()
