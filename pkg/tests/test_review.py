import pytest

from test_model import minimal_model
from threatagent.model import (
    Access,
    Asset,
    AttackerProfile,
    Capability,
    Channel,
    EntryPoint,
    Exposure,
    InvalidModel,
    Level,
    Mitigation,
    StrideCategory,
    Threat,
)
from threatagent.review import (
    FindingSeverity,
    UnknownQuestionId,
    generate_questions,
    integrate_answers,
    review,
)


def threat(tid, title="Threat", stride=StrideCategory.TAMPERING,
           targets=("A1",), eps=("E1",), tech=(), cves=()):
    return Threat(tid, title, "d", stride, tuple(tech), tuple(cves),
                  tuple(targets), tuple(eps), Level.MEDIUM)


def covered_model(**overrides):
    """Model passing every rule: all assets targeted, threats mitigated,
    entry points used, >= 4 STRIDE categories, insider profile, grounded."""
    base = dict(
        assets=(Asset("A1", "Data", "", Level.HIGH),),
        entry_points=(EntryPoint("E1", "API", Channel.API, Exposure.PUBLIC),),
        attacker_profiles=(
            AttackerProfile("P1", "Outsider", "m", Capability.SKILLED,
                            Access.EXTERNAL),
            AttackerProfile("P2", "Insider", "m", Capability.OPPORTUNISTIC,
                            Access.INSIDER),
        ),
        threats=(
            threat("T1", "Spoof", StrideCategory.SPOOFING, tech=("T1566",)),
            threat("T2", "Tamper", StrideCategory.TAMPERING),
            threat("T3", "Leak", StrideCategory.INFORMATION_DISCLOSURE),
            threat("T4", "Flood", StrideCategory.DENIAL_OF_SERVICE),
        ),
        mitigations=(
            Mitigation("M1", "Control A", ("SC-8",), ("T1", "T2")),
            Mitigation("M2", "Control B", ("AC-2",), ("T3", "T4")),
        ),
    )
    base.update(overrides)
    return minimal_model(**base)


def rules_fired(findings, severity=None):
    return [f.rule_id for f in findings
            if severity is None or f.severity is severity]


class TestRuleMatrix:
    """Each minimal fixture triggers exactly its rule and no other
    blocking rule."""

    def test_clean_model_no_findings(self, kb):
        assert review(covered_model(), kb) == []

    def test_r1_untargeted_asset(self, kb):
        m = covered_model(assets=(
            Asset("A1", "Data", "", Level.HIGH),
            Asset("A2", "Orphan", "", Level.LOW),
        ))
        findings = review(m, kb)
        assert rules_fired(findings, FindingSeverity.BLOCKING) == ["R1"]
        assert findings[0].subject == "Orphan"

    def test_r2_unmitigated_threat(self, kb):
        m = covered_model(mitigations=(
            Mitigation("M1", "Control A", ("SC-8",), ("T1", "T2", "T3")),))
        findings = review(m, kb)
        assert rules_fired(findings, FindingSeverity.BLOCKING) == ["R2"]
        assert findings[0].subject == "Flood"

    def test_r3_unused_entry_point(self, kb):
        m = covered_model(entry_points=(
            EntryPoint("E1", "API", Channel.API, Exposure.PUBLIC),
            EntryPoint("E2", "Console", Channel.PHYSICAL,
                       Exposure.PHYSICAL_PROXIMITY),
        ))
        findings = review(m, kb)
        assert rules_fired(findings, FindingSeverity.BLOCKING) == ["R3"]

    def test_r4_low_stride_coverage_advisory(self, kb):
        m = covered_model(
            threats=(
                threat("T1", "Spoof", StrideCategory.SPOOFING, tech=("T1566",)),
                threat("T2", "Tamper", StrideCategory.TAMPERING),
                threat("T3", "Leak", StrideCategory.INFORMATION_DISCLOSURE),
            ),
            mitigations=(
                Mitigation("M1", "Control A", ("SC-8",), ("T1", "T2", "T3")),),
        )
        findings = review(m, kb)
        assert rules_fired(findings, FindingSeverity.BLOCKING) == []
        assert "R4" in rules_fired(findings, FindingSeverity.ADVISORY)

    def test_r5_unknown_framework_id(self, kb):
        m = covered_model(threats=(
            threat("T1", "Spoof", StrideCategory.SPOOFING, tech=("T9999",)),
            threat("T2", "Tamper", StrideCategory.TAMPERING),
            threat("T3", "Leak", StrideCategory.INFORMATION_DISCLOSURE),
            threat("T4", "Flood", StrideCategory.DENIAL_OF_SERVICE),
        ))
        findings = review(m, kb)
        assert rules_fired(findings, FindingSeverity.BLOCKING) == ["R5"]
        assert findings[0].subject == "T9999"

    def test_r6_no_insider_profile_advisory(self, kb):
        m = covered_model(attacker_profiles=(
            AttackerProfile("P1", "Outsider", "m", Capability.SKILLED,
                            Access.EXTERNAL),))
        findings = review(m, kb)
        assert rules_fired(findings, FindingSeverity.BLOCKING) == []
        assert rules_fired(findings) == ["R6"]

    def test_r7_mitigation_without_controls_advisory(self, kb):
        m = covered_model(mitigations=(
            Mitigation("M1", "Control A", ("SC-8",), ("T1", "T2")),
            Mitigation("M2", "Control B", (), ("T3", "T4")),
        ))
        findings = review(m, kb)
        assert rules_fired(findings, FindingSeverity.BLOCKING) == []
        assert rules_fired(findings) == ["R7"]

    def test_blocking_sorted_before_advisory(self, kb):
        m = covered_model(
            attacker_profiles=(
                AttackerProfile("P1", "Outsider", "m", Capability.SKILLED,
                                Access.EXTERNAL),),
            mitigations=(
                Mitigation("M1", "Control A", ("SC-8",), ("T1", "T2", "T3")),),
        )
        findings = review(m, kb)
        severities = [f.severity for f in findings]
        assert severities == sorted(
            severities, key=lambda s: s is not FindingSeverity.BLOCKING)

    def test_invalid_model_rejected(self, kb):
        bad = covered_model(mitigations=(
            Mitigation("M1", "x", (), ("T99",)),))
        with pytest.raises(InvalidModel):
            review(bad, kb)

    def test_review_deterministic(self, kb):
        m = covered_model(mitigations=(), revision=0)
        assert review(m, kb) == review(m, kb)


class TestQuestions:
    def test_r2_template_instantiated_with_threat_title(self, kb):
        m = covered_model(
            threats=(
                threat("T1", "Spoof", StrideCategory.SPOOFING, tech=("T1566",)),
                threat("T2", "GPS spoofing", StrideCategory.SPOOFING),
                threat("T3", "Leak", StrideCategory.INFORMATION_DISCLOSURE),
                threat("T4", "Flood", StrideCategory.DENIAL_OF_SERVICE),
            ),
            mitigations=(
                Mitigation("M1", "Control A", ("SC-8",), ("T1", "T3", "T4")),),
        )
        questions = generate_questions(review(m, kb))
        assert [q.text for q in questions] == [
            "Which mitigations or controls address the threat 'GPS spoofing'?"]

    def test_zero_blocking_findings_no_questions(self, kb):
        assert generate_questions(review(covered_model(), kb)) == []

    def test_cap_at_q_max_deterministic(self, kb):
        assets = tuple(Asset(f"A{i}", f"Asset {i:02d}", "", Level.LOW)
                       for i in range(1, 10))
        m = covered_model(assets=assets)  # A2..A9 untargeted: 8 R1 findings
        findings = review(m, kb)
        blocking = [f for f in findings
                    if f.severity is FindingSeverity.BLOCKING]
        assert len(blocking) == 8
        questions = generate_questions(findings, q_max=5)
        assert len(questions) == 5
        assert questions == generate_questions(review(m, kb), q_max=5)

    def test_questions_end_with_question_mark_and_unique(self, kb):
        m = covered_model(mitigations=(), revision=0, entry_points=(
            EntryPoint("E1", "API", Channel.API, Exposure.PUBLIC),
            EntryPoint("E2", "Console", Channel.PHYSICAL,
                       Exposure.PHYSICAL_PROXIMITY),
        ))
        questions = generate_questions(review(m, kb))
        texts = [q.text for q in questions]
        assert all(t.endswith("?") for t in texts)
        assert len(set(texts)) == len(texts)


class TestIntegrateAnswers:
    def test_valid_answers_packaged_in_ask_order(self, kb):
        m = covered_model(mitigations=(), revision=0)
        questions = generate_questions(review(m, kb))
        answers = {q.question_id: f"answer for {q.question_id}"
                   for q in questions}
        context = integrate_answers(m, questions, answers)
        assert [a for _, a in context.qa] == [
            f"answer for {q.question_id}" for q in questions]

    def test_unknown_question_id_rejected(self, kb):
        m = covered_model(mitigations=(), revision=0)
        questions = generate_questions(review(m, kb))
        with pytest.raises(UnknownQuestionId, match="Q99"):
            integrate_answers(m, questions, {"Q99": "whatever"})

    def test_blank_answer_marked(self, kb):
        m = covered_model(mitigations=(), revision=0)
        questions = generate_questions(review(m, kb))
        context = integrate_answers(m, questions,
                                    {questions[0].question_id: "   "})
        assert context.qa[0][1] == "(no answer provided)"
