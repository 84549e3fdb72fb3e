"""Parse a model reply into a switch point or an unwanted-answer reason.

Strict mode accepts a whitespace-padded ``1``..``10`` and nothing else.
Lenient mode also accepts one short line containing exactly one integer in
range (``"Decision 6."``). :func:`parse_response` never raises.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .lottery import N_DECISIONS

LENIENT_MAX_CHARS = 80

_BARE_INT = re.compile(r"\s*([+-]?[0-9]+)\s*")
_CANONICAL = re.compile(r"\s*(10|[1-9])\s*")
_INT_TOKEN = re.compile(r"(?<![0-9.])[0-9]+(?:\.[0-9]+)?(?![0-9])")


class Reason(str, Enum):
    EMPTY = "empty"
    NON_NUMERIC = "non-numeric"
    OUT_OF_RANGE = "out-of-range"
    MULTI_ANSWER = "multi-answer"
    MALFORMED = "malformed"
    TRANSPORT = "transport"


@dataclass(frozen=True)
class Unwanted:
    reason: Reason
    detail: str = ""


def parse_response(raw: str | None, lenient: bool = False) -> int | Unwanted:
    if raw is None:
        return Unwanted(Reason.EMPTY)
    try:
        return _parse(raw, lenient)
    except Exception as exc:  # totality guard
        return Unwanted(Reason.MALFORMED, f"parser error: {exc!r}")


def _parse(raw: str, lenient: bool) -> int | Unwanted:
    if not raw.strip():
        return Unwanted(Reason.EMPTY)
    m = _CANONICAL.fullmatch(raw)
    if m:
        return int(m.group(1))
    m = _BARE_INT.fullmatch(raw)
    if m:
        token = m.group(1)
        value = int(token)
        if 1 <= value <= N_DECISIONS:
            # "05", "+5": right value, wrong form
            return Unwanted(Reason.MALFORMED, token)
        return Unwanted(Reason.OUT_OF_RANGE, token)

    tokens = _INT_TOKEN.findall(raw)
    if len(tokens) > 1:
        return Unwanted(Reason.MULTI_ANSWER, ",".join(tokens[:5]))
    if not tokens:
        return Unwanted(Reason.NON_NUMERIC)
    if not lenient:
        return Unwanted(Reason.NON_NUMERIC, tokens[0])

    text = raw.strip()
    if "\n" in text or len(text) > LENIENT_MAX_CHARS:
        return Unwanted(Reason.NON_NUMERIC, tokens[0])
    token = tokens[0]
    if "." in token:
        return Unwanted(Reason.NON_NUMERIC, token)
    value = int(token)
    if 1 <= value <= N_DECISIONS:
        return value
    return Unwanted(Reason.OUT_OF_RANGE, token)
