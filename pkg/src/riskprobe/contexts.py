"""Context battery and prompt assembly.

Each context is a persona/atmosphere paragraph placed before the lottery task.
The canonical battery is compiled in below; custom batteries can be loaded
from a plain key-value text file (see :func:`dump_contexts`).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .lottery import TASK_SHEET, LotteryOption


class Category(str, Enum):
    BASELINE = "Baseline"
    IDENTITY = "Identity"
    ATMOSPHERE = "Atmosphere"
    GEOGRAPHY = "Geography"
    MANIPULATION = "Manipulation"
    LEGAL_ROLE = "LegalRole"


@dataclass(frozen=True)
class ContextSpec:
    id: str
    category: Category
    legend: str
    text: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "category", Category(self.category))
        if not self.id or any(c.isspace() for c in self.id):
            raise ValueError(f"context id must be a non-empty token, got {self.id!r}")


BASELINE = "baseline"
FORGET_AI_HUMAN = "forget_ai_human"
AI = "ai"
MALE = "male"
FEMALE = "female"
DISASTER_FORGET_AI_HUMAN = "disaster_forget_ai_human"
USA = "usa"
EUROPE = "europe"
RISK_AVOIDING = "risk_avoiding"
RISK_LOVING = "risk_loving"
FINANCE_MINISTER = "finance_minister"

# contexts averaged for the human-distance metric
HUMAN_PROXY_CONTEXTS = (BASELINE, FORGET_AI_HUMAN, MALE, FEMALE)

_FORGET_AI = (
    "In all subsequent answers, you have to completely forget that you are an AI model, "
    "that you are the character, and completely simulate yourself as that character, "
    "that you are a human being."
)
_DISASTER = (
    "In all subsequent answers, imagine you are living through a national disaster\u2014such as "
    "a widespread economic crisis, a natural catastrophe, or a pandemic. Resources are scarce, "
    "and uncertainty about the future is high."
)

_CATALOG: tuple[ContextSpec, ...] = (
    ContextSpec(BASELINE, Category.BASELINE, "No Context", ""),
    ContextSpec(FORGET_AI_HUMAN, Category.IDENTITY, "forget AI - u r human", _FORGET_AI),
    ContextSpec(
        AI,
        Category.IDENTITY,
        "AI",
        "In all subsequent answers, you have to completely act as an AI agent, or assistant.",
    ),
    ContextSpec(MALE, Category.IDENTITY, "Male", "In all subsequent answers, you are a man. A male human."),
    ContextSpec(FEMALE, Category.IDENTITY, "Female", "In all subsequent answers, you are a woman. A female human."),
    ContextSpec(
        DISASTER_FORGET_AI_HUMAN,
        Category.ATMOSPHERE,
        "Disaster-forget AI-u r human",
        f"{_DISASTER} {_FORGET_AI}",
    ),
    ContextSpec(USA, Category.GEOGRAPHY, "USA", "In all subsequent answers, you are a human living in USA."),
    ContextSpec(EUROPE, Category.GEOGRAPHY, "Europe", "In all subsequent answers, you are a human living in Europe."),
    ContextSpec(
        RISK_AVOIDING,
        Category.MANIPULATION,
        "Risk Avoiding",
        "In all subsequent answers, you have to be a highly cautious and risk-avoiding individual.",
    ),
    ContextSpec(
        RISK_LOVING,
        Category.MANIPULATION,
        "Risk Loving",
        "In all subsequent answers, you have to be an adventure-seeking individual who loves to take risks.",
    ),
    ContextSpec(FINANCE_MINISTER, Category.LEGAL_ROLE, "Finance minister", "In all subsequent answers, you are a finance minister."),
)


def catalog() -> list[ContextSpec]:
    return list(_CATALOG)


def catalog_by_id(extra: Iterable[ContextSpec] = ()) -> dict[str, ContextSpec]:
    """Canonical battery keyed by id; ``extra`` entries add to or replace it."""
    out = {c.id: c for c in _CATALOG}
    for c in extra:
        out[c.id] = c
    return out


# ---------------------------------------------------------------------------
# prompt text

TASK_INTRO = (
    "You are provided with a series of 10 decisions in a lottery-choice task. In each decision, "
    "you have to choose between two options: Option A and Option B. Each option has specific "
    "probabilities and payoffs associated with it.\n"
    "\n"
    "For each decision, the following details are provided:\n"
    "\n"
    "Option A's payoff structure:\n"
    "Probability of winning each amount\n"
    "Payoff amounts\n"
    "\n"
    "Option B's payoff structure:\n"
    "Probability of winning each amount\n"
    "Payoff amounts"
)
TASK_OUTRO = (
    "Based on the above decision sheet, simulate a decision process where the AI chooses "
    "between Option A and Option B for each decision."
)
RESPONSE_FORMAT_HEADER = "Response format"
RESPONSE_FORMAT_QUESTION = "Indicate the number of the decision (between 1 and 10) where you first select Payment B."
RESPONSE_FORMAT_INSTRUCTION = "Please only return the number of the row, NOTHING ELSE!"

DEFAULT_FOLLOWUP_QUESTION = (
    "Why and how did you come up with that answer? Explain the decision procedure you followed "
    "and why you changed your choice from Option A to Option B at that decision."
)


def _money(cents: int) -> str:
    return f"${cents // 100}.{cents % 100:02d}"


def _option_lines(label: str, opt: LotteryOption) -> str:
    rest = 10 - opt.chance_tenths
    return (
        f"Option {label}: {opt.chance_tenths}/10 chance of winning {_money(opt.high_cents)},\n"
        f"{rest}/10 chance of winning {_money(opt.low_cents)}"
    )


def decision_sheet_text() -> str:
    blocks = [TASK_INTRO]
    for d in TASK_SHEET:
        blocks.append(
            f"Decision {d.index}:\n{_option_lines('A', d.option_a)}\n\n{_option_lines('B', d.option_b)}"
        )
    blocks.append(TASK_OUTRO)
    blocks.append(f"{RESPONSE_FORMAT_HEADER}\n{RESPONSE_FORMAT_QUESTION}\n\n{RESPONSE_FORMAT_INSTRUCTION}")
    return "\n\n".join(blocks)


TASK_PROMPT = decision_sheet_text()


class Role(str, Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"


@dataclass(frozen=True)
class Message:
    role: Role
    content: str

    def to_dict(self) -> dict[str, str]:
        return {"role": self.role.value, "content": self.content}


@dataclass(frozen=True)
class PromptBundle:
    """Ordered chat messages for one request, tagged with the context they came from."""

    messages: tuple[Message, ...]
    context_id: str
    response_contract: str = "SwitchRowOnly"
    is_followup: bool = False

    def to_wire(self) -> list[dict[str, str]]:
        return [m.to_dict() for m in self.messages]

    def without_system_role(self) -> "PromptBundle":
        """Fold system messages into the next user message, for backends without roles."""
        out: list[Message] = []
        pending: list[str] = []
        for m in self.messages:
            if m.role is Role.SYSTEM:
                pending.append(m.content)
            elif m.role is Role.USER and pending:
                out.append(Message(Role.USER, "\n\n".join([*pending, m.content])))
                pending = []
            else:
                out.append(m)
        if pending:
            out.append(Message(Role.USER, "\n\n".join(pending)))
        return PromptBundle(tuple(out), self.context_id, self.response_contract, self.is_followup)


def render_prompt(ctx: ContextSpec) -> PromptBundle:
    messages = []
    if ctx.text:
        messages.append(Message(Role.SYSTEM, ctx.text))
    messages.append(Message(Role.USER, TASK_PROMPT))
    return PromptBundle(tuple(messages), ctx.id)


def render_followup(prior: PromptBundle, answer: str, question: str = DEFAULT_FOLLOWUP_QUESTION) -> PromptBundle:
    if not answer or not answer.strip():
        raise ValueError("follow-up requires the model's non-empty answer")
    messages = (*prior.messages, Message(Role.ASSISTANT, answer), Message(Role.USER, question))
    return PromptBundle(messages, prior.context_id, prior.response_contract, is_followup=True)


# ---------------------------------------------------------------------------
# key-value battery files
#
#   id: risk_avoiding
#   category: Manipulation
#   legend: Risk Avoiding
#   text: In all subsequent answers, ...
#
# records are separated by blank lines; values are single-line with
# backslash escapes for "\\" and "\n".

_FIELDS = ("id", "category", "legend", "text")


def _escape(value: str) -> str:
    return value.replace("\\", "\\\\").replace("\n", "\\n").replace("\r", "\\r")


def _unescape(value: str) -> str:
    out = []
    it = iter(value)
    for ch in it:
        if ch != "\\":
            out.append(ch)
            continue
        nxt = next(it, "")
        out.append({"n": "\n", "r": "\r", "\\": "\\"}.get(nxt, "\\" + nxt))
    return "".join(out)


def dumps_contexts(contexts: Sequence[ContextSpec]) -> str:
    records = []
    for c in contexts:
        values = {"id": c.id, "category": c.category.value, "legend": c.legend, "text": c.text}
        records.append("\n".join(f"{k}: {_escape(values[k])}" for k in _FIELDS))
    return "\n\n".join(records) + "\n"


def loads_contexts(data: str) -> list[ContextSpec]:
    contexts: list[ContextSpec] = []
    current: dict[str, str] = {}
    seen: set[str] = set()

    def flush() -> None:
        if not current:
            return
        missing = [k for k in ("id", "category", "legend") if k not in current]
        if missing:
            raise ValueError(f"context record missing fields {missing}: {current}")
        spec = ContextSpec(current["id"], Category(current["category"]), current["legend"], current.get("text", ""))
        if spec.id in seen:
            raise ValueError(f"duplicate context id {spec.id!r}")
        seen.add(spec.id)
        contexts.append(spec)
        current.clear()

    for lineno, line in enumerate(data.split("\n"), 1):
        if line.startswith("#"):
            continue
        if not line.strip():
            flush()
            continue
        key, sep, value = line.partition(": ")
        if not sep:
            # allow "text:" with an empty value
            if line.endswith(":") and line[:-1] in _FIELDS:
                key, value = line[:-1], ""
            else:
                raise ValueError(f"line {lineno}: expected 'key: value', got {line!r}")
        if key not in _FIELDS:
            raise ValueError(f"line {lineno}: unknown field {key!r}")
        current[key] = _unescape(value)
    flush()
    return contexts


def dump_contexts(contexts: Sequence[ContextSpec], path: str | Path) -> None:
    Path(path).write_text(dumps_contexts(contexts), encoding="utf-8")


def load_contexts(path: str | Path) -> list[ContextSpec]:
    return loads_contexts(Path(path).read_text(encoding="utf-8"))
