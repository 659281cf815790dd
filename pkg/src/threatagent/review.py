"""Rule-based completeness reviewer and clarification-question generator.

The reviewer is deliberately deterministic: the LLM is consulted only for
content generation, never for control decisions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from importlib import resources

from .knowledge import KbSnapshot, ground
from .model import InvalidModel, ThreatModel, validate_model

DEFAULT_Q_MAX = 5

# advisory threshold: fewer than this many distinct STRIDE categories
STRIDE_COVERAGE_MIN = 4


class FindingSeverity(Enum):
    BLOCKING = "blocking"
    ADVISORY = "advisory"


@dataclass(frozen=True)
class ReviewFinding:
    rule_id: str
    severity: FindingSeverity
    subject_path: str
    subject: str
    detail: str


@dataclass(frozen=True)
class ClarificationQuestion:
    question_id: str
    text: str
    rationale: str
    target_path: str


@dataclass(frozen=True)
class RefinementContext:
    draft: ThreatModel
    qa: tuple[tuple[str, str], ...]


class UnknownQuestionId(Exception):
    def __init__(self, question_id: str):
        self.question_id = question_id
        super().__init__(f"unknown question id: {question_id}")


def _load_templates() -> dict[str, str]:
    raw = resources.files("threatagent.data").joinpath(
        "review_templates.json").read_text(encoding="utf-8")
    return json.loads(raw)["templates"]


QUESTION_TEMPLATES = _load_templates()


def review(m: ThreatModel, kb: KbSnapshot) -> list[ReviewFinding]:
    """Evaluate the fixed rule set R1-R7 against a valid draft."""
    violations = validate_model(m)
    if violations:
        raise InvalidModel(violations)

    findings: list[ReviewFinding] = []
    b, a = FindingSeverity.BLOCKING, FindingSeverity.ADVISORY

    targeted = {aid for t in m.threats for aid in t.target_asset_ids}
    for i, asset in enumerate(m.assets):
        if asset.id not in targeted:
            findings.append(ReviewFinding(
                "R1", b, f"assets[{i}]", asset.name,
                f"asset '{asset.name}' ({asset.id}) has no threat targeting it"))

    addressed = {tid for g in m.mitigations for tid in g.addresses_threat_ids}
    for i, threat in enumerate(m.threats):
        if threat.id not in addressed:
            findings.append(ReviewFinding(
                "R2", b, f"threats[{i}]", threat.title,
                f"threat '{threat.title}' ({threat.id}) has no mitigation"))

    used_eps = {eid for t in m.threats for eid in t.via_entry_point_ids}
    for i, ep in enumerate(m.entry_points):
        if ep.id not in used_eps:
            findings.append(ReviewFinding(
                "R3", b, f"entry_points[{i}]", ep.name,
                f"entry point '{ep.name}' ({ep.id}) is referenced by no threat"))

    categories = {t.stride for t in m.threats}
    if len(categories) < STRIDE_COVERAGE_MIN:
        findings.append(ReviewFinding(
            "R4", a, "threats", "STRIDE coverage",
            f"only {len(categories)} distinct STRIDE categories covered "
            f"(advisory threshold {STRIDE_COVERAGE_MIN})"))

    report = ground(m, kb)
    for kind, path, ident in report.entries():
        findings.append(ReviewFinding(
            "R5", b, path, ident, f"{kind.replace('_', ' ')}: {ident}"))

    if not any(p.access.value == "insider" for p in m.attacker_profiles):
        findings.append(ReviewFinding(
            "R6", a, "attacker_profiles", "insider access",
            "no attacker profile with insider access"))

    for i, g in enumerate(m.mitigations):
        if not g.nist_control_ids:
            findings.append(ReviewFinding(
                "R7", a, f"mitigations[{i}]", g.description,
                f"mitigation {g.id} cites no NIST control id"))

    findings.sort(key=lambda f: (f.severity.value != "blocking",
                                 f.rule_id, f.subject_path))
    return findings


def generate_questions(findings: list[ReviewFinding],
                       q_max: int = DEFAULT_Q_MAX) -> list[ClarificationQuestion]:
    """One templated question per blocking finding, deduplicated per
    (rule_id, subject), capped at q_max in (rule_id, subject) order."""
    blocking = sorted(
        (f for f in findings if f.severity is FindingSeverity.BLOCKING),
        key=lambda f: (f.rule_id, f.subject))
    questions: list[ClarificationQuestion] = []
    seen: set[tuple[str, str]] = set()
    for f in blocking:
        if (f.rule_id, f.subject) in seen:
            continue
        seen.add((f.rule_id, f.subject))
        template = QUESTION_TEMPLATES.get(f.rule_id)
        if template is None:
            continue
        questions.append(ClarificationQuestion(
            question_id=f"Q{len(questions) + 1}",
            text=template.format(subject=f.subject),
            rationale=f"{f.rule_id}: {f.subject}",
            target_path=f.subject_path,
        ))
        if len(questions) >= q_max:
            break
    return questions


def integrate_answers(m: ThreatModel,
                      issued: list[ClarificationQuestion],
                      answers: dict[str, str]) -> RefinementContext:
    """Package draft + Q/A for the refinement prompt; no local merging.

    Unanswered or blank answers are retained with a marker so the
    refinement prompt shows the full transcript.
    """
    issued_ids = {q.question_id for q in issued}
    for qid in answers:
        if qid not in issued_ids:
            raise UnknownQuestionId(qid)
    qa = tuple(
        (q.text, answers.get(q.question_id, "").strip() or "(no answer provided)")
        for q in issued
    )
    return RefinementContext(draft=m, qa=qa)
