"""Extracts the fenced contract block from raw provider output and
classifies the result so the agent can decide whether to repair."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from .model import InvalidModel, ParseFailure, ThreatModel, parse_canonical
from .prompting import CONTRACT_FENCE_TAG

MAX_RAW_BYTES = 1 << 20  # runaway-output guard

_FENCE_OPEN = re.compile(
    r"^```[ \t]*" + re.escape(CONTRACT_FENCE_TAG) + r"[ \t]*$", re.MULTILINE)


@dataclass(frozen=True)
class Parsed:
    model: ThreatModel


@dataclass(frozen=True)
class Repairable:
    detail: str


@dataclass(frozen=True)
class Unrepairable:
    reason: str


ExtractionResult = Union[Parsed, Repairable, Unrepairable]


def _fenced_blocks(raw: str) -> list[str]:
    blocks = []
    lines = raw.split("\n")  # not splitlines(): JSON strings may hold \x85 etc.
    i = 0
    while i < len(lines):
        if _FENCE_OPEN.match(lines[i]):
            body: list[str] = []
            i += 1
            while i < len(lines) and lines[i].strip() != "```":
                body.append(lines[i])
                i += 1
            if i >= len(lines):
                blocks.append(None)  # unterminated
            else:
                blocks.append("\n".join(body))
        i += 1
    return blocks


def extract_model(raw: str) -> ExtractionResult:
    """Total, deterministic classification of raw provider output."""
    if not isinstance(raw, str) or not raw.strip():
        return Unrepairable("empty response")
    if len(raw.encode("utf-8", errors="replace")) > MAX_RAW_BYTES:
        return Unrepairable("response exceeds 1 MiB limit")

    blocks = _fenced_blocks(raw)
    if len(blocks) > 1:
        return Repairable("multiple contract blocks")
    if len(blocks) == 1:
        if blocks[0] is None:
            return Repairable("unterminated contract block")
        candidate = blocks[0]
    elif raw.lstrip().startswith("{"):
        # tolerance rule: bare top-level document accepted when no fence
        candidate = raw
    else:
        return Repairable(
            f"no fenced block tagged {CONTRACT_FENCE_TAG} and no bare JSON document")

    try:
        return Parsed(parse_canonical(candidate))
    except ParseFailure as e:
        return Repairable(str(e))
    except InvalidModel as e:
        return Repairable("schema violations: " + str(e))
