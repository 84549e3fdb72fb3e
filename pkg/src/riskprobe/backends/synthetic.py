"""Synthetic CRRA agents that answer the lottery task like a textbook subject.

Without noise an agent answers its predicted switch point under the ``r``
mapped to the prompt's context. With a logit scale ``noise > 0`` each decision
is sampled with ``P(B) = 1 / (1 + exp(-(EU_B - EU_A) / noise))`` in order and
the first sampled B is the answer.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Any, Mapping

from ..contexts import PromptBundle
from ..lottery import N_DECISIONS, TASK_SHEET, CrraParams, expected_utility, predicted_switch_point
from .base import Backend, CompletionParams, CompletionResult, ConfigurationError, bundle_chars, estimate_tokens
from .gate import RateGate


@dataclass(frozen=True)
class SyntheticAgentSpec:
    model: str
    context_r_map: Mapping[str, CrraParams] = field(default_factory=dict)
    noise: float | None = None
    rng_seed: int = 0
    default: CrraParams | None = None

    def __post_init__(self) -> None:
        if self.noise is not None and self.noise < 0:
            raise ValueError("noise scale must be >= 0")
        object.__setattr__(
            self,
            "context_r_map",
            {k: v if isinstance(v, CrraParams) else CrraParams(float(v)) for k, v in self.context_r_map.items()},
        )
        if self.default is not None and not isinstance(self.default, CrraParams):
            object.__setattr__(self, "default", CrraParams(float(self.default)))

    def params_for(self, context_id: str) -> CrraParams:
        try:
            return self.context_r_map[context_id]
        except KeyError:
            if self.default is None:
                raise ConfigurationError(
                    f"synthetic agent {self.model!r} has no r for context {context_id!r} and no default"
                ) from None
            return self.default


def _logistic(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def sample_switch(params: CrraParams, noise: float, rng: random.Random) -> int:
    for d in TASK_SHEET:
        diff = expected_utility(d, "B", params) - expected_utility(d, "A", params)
        if rng.random() < _logistic(diff / noise):
            return d.index
    # B dominates on the last row; an all-A draw is recorded as the last row
    return N_DECISIONS


class SyntheticBackend(Backend):
    kind = "synthetic"

    def __init__(self, spec: SyntheticAgentSpec, gate: RateGate | None = None):
        super().__init__(spec.model, gate)
        self.spec = spec

    def switch_for(self, context_id: str, trial: int | None = None, call: int = 0) -> int:
        params = self.spec.params_for(context_id)
        if not self.spec.noise:
            return predicted_switch_point(params)
        # seeded per request so results do not depend on worker scheduling
        rng = random.Random(f"{self.spec.rng_seed}|{self.model}|{context_id}|{trial}|{call}")
        return sample_switch(params, self.spec.noise, rng)

    def validate(self) -> None:
        pass

    def complete(
        self,
        bundle: PromptBundle,
        params: CompletionParams,
        *,
        trial: int | None = None,
        call: int = 0,
    ) -> CompletionResult:
        switch = self.switch_for(bundle.context_id, trial, call)
        if bundle.is_followup:
            text = (
                f"I compared the expected utility of both options row by row and first preferred "
                f"Option B at decision {switch}, where its utility overtook Option A."
            )
        else:
            text = str(switch)
        with self.gate.slot():
            pass
        return CompletionResult(
            text=text,
            input_tokens=estimate_tokens(bundle_chars(bundle)),
            output_tokens=estimate_tokens(text),
            latency_s=0.0,
            attempt=1,
            tokens_estimated=True,
        )

    def describe(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "model": self.model,
            "context_r": {k: v.r for k, v in sorted(self.spec.context_r_map.items())},
            "tie_break": _tie_break_of(self.spec),
            "default_r": None if self.spec.default is None else self.spec.default.r,
            "noise": self.spec.noise,
            "rng_seed": self.spec.rng_seed,
            "rate_limit": self.gate.to_dict(),
        }


def _tie_break_of(spec: SyntheticAgentSpec) -> str:
    values = {p.tie_break.value for p in spec.context_r_map.values()}
    if spec.default is not None:
        values.add(spec.default.tie_break.value)
    if len(values) > 1:
        raise ValueError("mixed tie-break settings cannot be described in one config entry")
    return values.pop() if values else "PreferB"
