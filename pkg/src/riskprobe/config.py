"""Experiment configuration and its YAML form.

Example::

    trials_per_context: 35
    contexts: all                 # or a list of ids
    contexts_file: battery.txt    # optional extra/overriding contexts
    params: {temperature: 1.0, max_output_tokens: 1024, seed: null}
    output_dir: runs/pilot
    followup: false
    lenient_parsing: false
    workers: 4
    backends:
      - kind: live
        provider: deepseek
        model: deepseek-chat
        endpoint: https://api.deepseek.com/chat/completions
        auth_env: DEEPSEEK_API_KEY
        rate_limit: {requests_per_interval: 60, interval_s: 60, max_in_flight: 4}
      - kind: synthetic
        model: crra-neutral
        default_r: 0.0
        context_r: {risk_avoiding: 1.2, risk_loving: -0.5}
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import yaml

from .backends import Backend, CompletionParams, ConfigurationError, backend_from_config
from .contexts import DEFAULT_FOLLOWUP_QUESTION, Category, ContextSpec, catalog, catalog_by_id, load_contexts

DEFAULT_TRIALS = 35


@dataclass
class ExperimentConfig:
    backends: list[Backend | dict[str, Any]]
    output_dir: Path
    contexts: list[str] = field(default_factory=lambda: [c.id for c in catalog()])
    trials_per_context: int = DEFAULT_TRIALS
    params: CompletionParams = field(default_factory=CompletionParams)
    followup_enabled: bool = False
    followup_question: str = DEFAULT_FOLLOWUP_QUESTION
    lenient_parsing: bool = False
    reask_unwanted: bool = True
    workers: int = 4
    custom_contexts: list[ContextSpec] = field(default_factory=list)
    fsync_every: int = 25
    base_dir: Path | None = None

    def __post_init__(self) -> None:
        self.output_dir = Path(self.output_dir)
        if self.trials_per_context < 1:
            raise ConfigurationError("trials_per_context must be > 0")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")

    def context_specs(self) -> list[ContextSpec]:
        known = catalog_by_id(self.custom_contexts)
        unknown = [c for c in self.contexts if c not in known]
        if unknown:
            raise ConfigurationError(f"unknown context ids: {unknown}")
        if len(set(self.contexts)) != len(self.contexts):
            raise ConfigurationError("context ids must be unique")
        return [known[c] for c in self.contexts]

    def build_backends(self) -> list[Backend]:
        out = [b if isinstance(b, Backend) else backend_from_config(b, self.base_dir) for b in self.backends]
        models = [b.model for b in out]
        if len(set(models)) != len(models):
            raise ConfigurationError(f"backend model names must be unique, got {models}")
        return out

    def snapshot(self, backends: Sequence[Backend] | None = None) -> dict[str, Any]:
        backends = backends if backends is not None else self.build_backends()
        return {
            "backends": [b.describe() for b in backends],
            "contexts": list(self.contexts),
            "context_specs": [
                {"id": c.id, "category": c.category.value, "legend": c.legend, "text": c.text}
                for c in self.context_specs()
            ],
            "trials_per_context": self.trials_per_context,
            "params": self.params.to_dict(),
            "output_dir": str(self.output_dir),
            "followup_enabled": self.followup_enabled,
            "followup_question": self.followup_question,
            "lenient_parsing": self.lenient_parsing,
            "reask_unwanted": self.reask_unwanted,
            "workers": self.workers,
            "fresh_conversation_per_trial": True,
        }

    @classmethod
    def from_snapshot(cls, snap: Mapping[str, Any], output_dir: Path | None = None) -> "ExperimentConfig":
        specs = [ContextSpec(d["id"], Category(d["category"]), d["legend"], d["text"]) for d in snap.get("context_specs", [])]
        canonical = catalog_by_id()
        custom = [s for s in specs if canonical.get(s.id) != s]
        return cls(
            backends=list(snap["backends"]),
            output_dir=Path(output_dir if output_dir is not None else snap["output_dir"]),
            contexts=list(snap["contexts"]),
            trials_per_context=int(snap["trials_per_context"]),
            params=CompletionParams(**snap["params"]),
            followup_enabled=bool(snap.get("followup_enabled", False)),
            followup_question=snap.get("followup_question", DEFAULT_FOLLOWUP_QUESTION),
            lenient_parsing=bool(snap.get("lenient_parsing", False)),
            reask_unwanted=bool(snap.get("reask_unwanted", True)),
            workers=int(snap.get("workers", 4)),
            custom_contexts=custom,
        )


def config_from_dict(raw: Mapping[str, Any], base_dir: Path | None = None) -> ExperimentConfig:
    base_dir = base_dir or Path.cwd()
    if "backends" not in raw or not raw["backends"]:
        raise ConfigurationError("config must list at least one backend")
    if "output_dir" not in raw:
        raise ConfigurationError("config must set output_dir")

    custom: list[ContextSpec] = []
    if raw.get("contexts_file"):
        path = Path(raw["contexts_file"])
        custom = load_contexts(path if path.is_absolute() else base_dir / path)

    contexts = raw.get("contexts", "all")
    if contexts == "all":
        contexts = [c.id for c in catalog()] + [c.id for c in custom if c.id not in catalog_by_id()]
    elif not isinstance(contexts, list):
        raise ConfigurationError("contexts must be 'all' or a list of ids")

    params = CompletionParams(**(raw.get("params") or {}))
    out = Path(raw["output_dir"])
    cfg = ExperimentConfig(
        backends=list(raw["backends"]),
        output_dir=out if out.is_absolute() else base_dir / out,
        contexts=[str(c) for c in contexts],
        trials_per_context=int(raw.get("trials_per_context", DEFAULT_TRIALS)),
        params=params,
        followup_enabled=bool(raw.get("followup", False)),
        followup_question=raw.get("followup_question", DEFAULT_FOLLOWUP_QUESTION),
        lenient_parsing=bool(raw.get("lenient_parsing", False)),
        reask_unwanted=bool(raw.get("reask_unwanted", True)),
        workers=int(raw.get("workers", 4)),
        custom_contexts=custom,
        base_dir=base_dir,
    )
    cfg.context_specs()  # reject unknown ids before any call
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: expected a mapping at top level")
    return config_from_dict(raw, base_dir=path.parent.resolve())
