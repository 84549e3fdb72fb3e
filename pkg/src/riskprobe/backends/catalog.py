"""Reference metadata for commercially hosted models evaluated with this task.

Static data only. ``azure_quality`` is the provider-published quality score
(None where unavailable); the ``reported_*`` columns are the published
per-model accounting totals, kept for comparison with local runs.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ModelInfo:
    company: str
    model: str
    reasoning: str | None
    azure_quality: float | None
    reported_input_tokens: int
    reported_unwanted: int
    reported_api_requests: int


REFERENCE_MODELS: tuple[ModelInfo, ...] = (
    ModelInfo("OpenAI", "gpt-5", "minimal reasoning", 0.91, 366_420, 0, 455),
    ModelInfo("OpenAI", "gpt-5-mini", "minimal reasoning", 0.89, 366_420, 0, 455),
    ModelInfo("xAI", "grok-3", "Non-reasoning but trained on reasoning-rich content", 0.85, 383_251, 4, 476),
    ModelInfo("xAI", "grok-3-mini", "Lightweight reasoning", 0.87, 502_518, 0, 455),
    ModelInfo("Deepseek", "deepseek-chat", None, None, 624_211, 2, 776),
    ModelInfo("Deepseek", "deepseek-reasoner", "significantly improved depth of reasoning", 0.87, 368_808, 0, 458),
    ModelInfo("Meta", "meta.llama3-1-8b-instruct-v1:0", None, None, 371_992, 138, 450),
    ModelInfo("Meta", "meta.llama3-1-70b-instruct-v1:0", None, None, 371_992, 0, 462),
    ModelInfo("Google", "gemini-2.0-flash-lite", None, None, 921_427, 0, 868),
    ModelInfo("Google", "gemma-3-27b-it", None, None, 579_504, 31, 725),
)


def lookup(model: str) -> ModelInfo | None:
    for m in REFERENCE_MODELS:
        if m.model == model:
            return m
    return None
