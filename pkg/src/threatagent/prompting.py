"""Prompt classification and assembly for the generation/repair/refine steps.

Classification follows a fixed, versioned lexicon (flow-marker verbs and
component keywords) shipped in data/prompting_lexicon.json so the three
prompt classes are reproducible without an LLM.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import TYPE_CHECKING, Optional

from .model import ParseFailure, SystemDescription, ThreatModel, render_canonical

if TYPE_CHECKING:
    from .fewshot import FewShotExample

CONTRACT_FENCE_TAG = "threatmodel-json"


class PromptClass(Enum):
    SIMPLE = "simple"
    COMPOUND = "compound"
    COMPLEX = "complex"


class BudgetExceeded(Exception):
    """Prompt exceeds the unit budget even with all examples dropped."""


@dataclass(frozen=True)
class AssembledPrompt:
    prompt_class: PromptClass
    system_instructions: str
    output_contract: str
    examples_included: tuple[str, ...]
    user_section: str
    total_unit_estimate: int
    text: str


def _load_lexicon() -> dict:
    raw = resources.files("threatagent.data").joinpath(
        "prompting_lexicon.json").read_text(encoding="utf-8")
    return json.loads(raw)


_LEXICON = _load_lexicon()
FLOW_MARKERS: tuple[str, ...] = tuple(_LEXICON["flow_markers"])
COMPONENT_KEYWORDS: dict[str, tuple[str, ...]] = {
    kind: tuple(words) for kind, words in _LEXICON["component_keywords"].items()
}


def estimate_units(text: str) -> int:
    """Coarse provider-independent token estimate: chars / 4, monotone."""
    return len(text) // 4


def _matched_component_keywords(narrative: str) -> set[str]:
    low = narrative.lower()
    return {
        kw
        for words in COMPONENT_KEYWORDS.values()
        for kw in words
        if kw in low
    }


def classify_prompt(desc: SystemDescription) -> PromptClass:
    """Total classification into the three prompt classes.

    Component count is the explicit hint list when given, otherwise the
    number of distinct component keywords matched in the narrative.
    """
    if desc.components:
        component_count = len(desc.components)
    else:
        component_count = len(_matched_component_keywords(desc.narrative))
    low = desc.narrative.lower()
    has_flow = any(marker in low for marker in FLOW_MARKERS)

    if component_count == 0:
        return PromptClass.COMPLEX
    if component_count >= 3 and has_flow:
        return PromptClass.SIMPLE
    return PromptClass.COMPOUND


_SYSTEM_INSTRUCTIONS = """\
You are a security threat-modeling assistant. Given a system description,
produce a complete threat model with five sections: assets, entry points,
attacker profiles, threats (with vulnerabilities), and mitigations.
Classify every threat with exactly one STRIDE category and cite concrete
framework identifiers: MITRE ATT&CK technique ids (Txxxx), CVE ids
(CVE-YYYY-NNNN) and NIST control ids (e.g. AC-2). Every asset must be
targeted by at least one threat, every threat addressed by at least one
mitigation, and every entry point used by at least one threat."""


def _output_contract(contract_version: str) -> str:
    return (
        f"Respond with exactly one fenced code block tagged "
        f"`{CONTRACT_FENCE_TAG}` containing a single JSON document with "
        f"top-level keys model_id, system, assets, entry_points, "
        f"attacker_profiles, threats, vulnerabilities, mitigations, "
        f"revision, produced_at (contract version {contract_version}). "
        f"No other fenced block may carry that tag."
    )


def _escape_fences(text: str) -> str:
    """Neutralize fence markers so answers cannot open a contract block."""
    return text.replace("```", "`\u200b``")


def _example_section(ex: "FewShotExample") -> str:
    rendered = render_canonical(ex.canonical_model)
    return (f"### Example request\n{ex.prompt_text}\n"
            f"### Example threat model\n```json\n{rendered}```\n")


def _user_section(desc: SystemDescription) -> str:
    lines = [f"System: {desc.title}", "", desc.narrative]
    if desc.components:
        lines.append("")
        lines.append("Known components:")
        for c in desc.components:
            detail = f" ({c.detail})" if c.detail else ""
            lines.append(f"- {c.name} [{c.kind.value}]{detail}")
    if desc.tags:
        lines.append("")
        lines.append("Domain tags: " + ", ".join(desc.tags))
    return "\n".join(lines)


def assemble_generation_prompt(desc: SystemDescription,
                               examples: list["FewShotExample"],
                               contract_version: str = "1",
                               unit_limit: Optional[int] = None,
                               ) -> AssembledPrompt:
    """Deterministically assemble instructions + contract + examples + user.

    When the unit budget is tight, the lowest-ranked examples are dropped
    first; if even zero examples does not fit, BudgetExceeded is raised.
    """
    contract = _output_contract(contract_version)
    user = _user_section(desc)

    kept = list(examples)
    while True:
        parts = [_SYSTEM_INSTRUCTIONS, "", contract, ""]
        for ex in kept:
            parts.append(_example_section(ex))
        parts.append("### Request")
        parts.append(user)
        if kept:
            parts.append("")
            parts.append(f"(Prompt includes {len(kept)} worked example"
                         f"{'s' if len(kept) != 1 else ''}.)")
        text = "\n".join(parts) + "\n"
        units = estimate_units(text)
        if unit_limit is None or units <= unit_limit:
            return AssembledPrompt(
                prompt_class=classify_prompt(desc),
                system_instructions=_SYSTEM_INSTRUCTIONS,
                output_contract=contract,
                examples_included=tuple(ex.example_id for ex in kept),
                user_section=user,
                total_unit_estimate=units,
                text=text,
            )
        if not kept:
            raise BudgetExceeded(
                f"prompt needs {units} units, limit is {unit_limit}")
        kept.pop()  # drop the lowest-ranked example first


def assemble_repair_prompt(previous_output: str, failure: str | ParseFailure) -> str:
    """Ask the provider to re-emit its answer strictly inside the contract."""
    detail = str(failure) if failure else "(no detail)"
    shown = previous_output if previous_output.strip() else "(empty response)"
    return (
        "Your previous answer could not be accepted: "
        f"{detail}\n\n"
        "Previous answer:\n"
        f"{_escape_fences(shown)}\n\n"
        "Re-emit the complete threat model strictly within exactly one "
        f"fenced code block tagged `{CONTRACT_FENCE_TAG}`, as a single "
        "JSON document. Output nothing outside that block.\n"
    )


def assemble_refinement_prompt(draft: ThreatModel,
                               qa: list[tuple[str, str]]) -> str:
    """Embed the draft and the Q/A transcript; demand the full revised model."""
    if not qa:
        raise ValueError("qa must be non-empty")
    rendered = render_canonical(draft)
    lines = [
        "Here is the current draft threat model:",
        "```json",
        rendered.rstrip("\n"),
        "```",
        "",
        "The user answered the following clarification questions:",
    ]
    for i, (question, answer) in enumerate(qa, start=1):
        lines.append(f"Q{i}: {_escape_fences(question)}")
        lines.append(f"A{i}: {_escape_fences(answer)}")
    lines.extend([
        "",
        "Integrate this information and return the FULL revised threat "
        "model (not a diff), with revision set to "
        f"{draft.revision + 1}, inside exactly one fenced code block "
        f"tagged `{CONTRACT_FENCE_TAG}`.",
    ])
    return "\n".join(lines) + "\n"
