"""Completion backends: live HTTP, synthetic CRRA agents, and fixture replay."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Mapping

from ..lottery import CrraParams, TieBreak
from .base import (
    Backend,
    BackendError,
    CompletionParams,
    CompletionResult,
    ConfigurationError,
    FixtureError,
    TransportError,
    estimate_tokens,
)
from .gate import GateClosed, RateGate
from .live import BackendId, LiveBackend
from .replay import ReplayBackend, read_fixture, write_fixture
from .synthetic import SyntheticAgentSpec, SyntheticBackend

__all__ = [
    "Backend",
    "BackendError",
    "BackendId",
    "CompletionParams",
    "CompletionResult",
    "ConfigurationError",
    "FixtureError",
    "GateClosed",
    "LiveBackend",
    "RateGate",
    "ReplayBackend",
    "SyntheticAgentSpec",
    "SyntheticBackend",
    "TransportError",
    "backend_from_config",
    "estimate_tokens",
    "read_fixture",
    "write_fixture",
]


def _gate_from_config(cfg: Mapping[str, Any] | None) -> RateGate:
    cfg = cfg or {}
    return RateGate(
        requests_per_interval=cfg.get("requests_per_interval"),
        interval_s=float(cfg.get("interval_s", 60.0)),
        max_in_flight=cfg.get("max_in_flight"),
    )


def backend_from_config(entry: Mapping[str, Any], base_dir: Path | None = None) -> Backend:
    """Build a backend from one ``backends:`` entry of a run config.

    ``Backend.describe()`` produces entries this function accepts, which is how
    a resumed run rebuilds its backends from the manifest.
    """
    kind = entry.get("kind", "live")
    gate = _gate_from_config(entry.get("rate_limit"))
    if kind == "live":
        ident = BackendId(
            provider=entry.get("provider", ""),
            model=entry["model"],
            endpoint=entry["endpoint"],
            auth_ref=entry["auth_env"],
        )
        return LiveBackend(
            ident,
            gate=gate,
            timeout_s=float(entry.get("timeout_s", 120.0)),
            max_attempts=int(entry.get("max_attempts", 3)),
            backoff_base_s=float(entry.get("backoff_base_s", 1.0)),
            supports_system_role=bool(entry.get("supports_system_role", True)),
            token_param=entry.get("token_param", "max_tokens"),
        )
    if kind == "synthetic":
        tie = TieBreak(entry.get("tie_break", TieBreak.PREFER_B.value))
        r_map = {ctx: CrraParams(float(r), tie) for ctx, r in (entry.get("context_r") or {}).items()}
        default = entry.get("default_r")
        spec = SyntheticAgentSpec(
            model=entry["model"],
            context_r_map=r_map,
            noise=entry.get("noise"),
            rng_seed=int(entry.get("rng_seed", 0)),
            default=None if default is None else CrraParams(float(default), tie),
        )
        return SyntheticBackend(spec, gate=gate)
    if kind == "replay":
        fixture = Path(entry["fixture"])
        if base_dir is not None and not fixture.is_absolute():
            fixture = base_dir / fixture
        return ReplayBackend(entry["model"], fixture, gate=gate)
    raise ConfigurationError(f"unknown backend kind {kind!r}")
