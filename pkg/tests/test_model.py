import json
import random

import pytest
from hypothesis import given, settings

from strategies import threat_models
from threatagent.model import (
    Asset,
    AttackerProfile,
    Access,
    Capability,
    Channel,
    EntryPoint,
    Exposure,
    InvalidModel,
    InvalidIdToken,
    Level,
    Mitigation,
    ParseFailure,
    StrideCategory,
    SystemDescription,
    Threat,
    ThreatModel,
    attack_technique_id,
    cve_id,
    nist_control_id,
    parse_canonical,
    render_canonical,
    validate_model,
)


def minimal_model(**overrides) -> ThreatModel:
    base = dict(
        model_id="m1",
        system=SystemDescription(title="Sys", narrative="One service."),
        assets=(Asset("A1", "Data", "Records", Level.HIGH),),
        entry_points=(EntryPoint("E1", "API", Channel.API, Exposure.PUBLIC),),
        attacker_profiles=(AttackerProfile(
            "P1", "Outsider", "Money", Capability.SKILLED, Access.EXTERNAL),),
        threats=(Threat("T1", "Theft", "Data theft",
                        StrideCategory.INFORMATION_DISCLOSURE,
                        (), (), ("A1",), ("E1",), Level.HIGH),),
        vulnerabilities=(),
        mitigations=(Mitigation("M1", "Encrypt", ("SC-8",), ("T1",)),),
        revision=1,
        produced_at="2025-06-01T12:00:00Z",
    )
    base.update(overrides)
    return ThreatModel(**base)


class TestValidate:
    def test_minimal_valid_model_has_no_violations(self):
        assert validate_model(minimal_model()) == []

    def test_dangling_asset_reference(self):
        m = minimal_model(threats=(Threat(
            "T1", "Theft", "d", StrideCategory.SPOOFING,
            (), (), ("A9",), (), Level.LOW),))
        violations = validate_model(m)
        assert any(v.path == "threats[0].target_asset_ids" for v in violations)

    def test_unknown_stride_token_rejected_on_parse(self):
        doc = json.loads(render_canonical(minimal_model()))
        doc["threats"][0]["stride"] = "eavesdropping"
        with pytest.raises(InvalidModel) as exc:
            parse_canonical(json.dumps(doc))
        assert any("stride" in v.path for v in exc.value.violations)

    def test_empty_lists_allowed_only_at_revision_zero(self):
        m = minimal_model(threats=(), mitigations=(), revision=0)
        assert validate_model(m) == []
        m1 = minimal_model(threats=(), mitigations=(), revision=1)
        assert validate_model(m1)

    def test_duplicate_ids_flagged(self):
        m = minimal_model(assets=(
            Asset("A1", "X", "", Level.LOW), Asset("A1", "Y", "", Level.LOW)))
        assert any("duplicate id" in v.rule for v in validate_model(m))

    def test_validate_is_pure(self):
        m = minimal_model()
        assert validate_model(m) == validate_model(m) == []


class TestCanonical:
    def test_render_deterministic(self):
        m = minimal_model()
        assert render_canonical(m) == render_canonical(m)

    def test_injective_on_severity(self):
        a = minimal_model()
        b = minimal_model(threats=(Threat(
            "T1", "Theft", "Data theft",
            StrideCategory.INFORMATION_DISCLOSURE,
            (), (), ("A1",), ("E1",), Level.CRITICAL),))
        assert render_canonical(a) != render_canonical(b)

    def test_revision_zero_empty_sections_render_all_keys(self):
        m = ThreatModel(
            model_id="m0",
            system=SystemDescription(title="T", narrative="N"),
            assets=(), entry_points=(), attacker_profiles=(),
            threats=(), vulnerabilities=(), mitigations=(),
            revision=0)
        doc = json.loads(render_canonical(m))
        for key in ("assets", "entry_points", "attacker_profiles",
                    "threats", "vulnerabilities", "mitigations"):
            assert doc[key] == []

    def test_render_invalid_model_raises(self):
        bad = minimal_model(mitigations=(
            Mitigation("M1", "x", (), ("T9",)),))
        with pytest.raises(InvalidModel):
            render_canonical(bad)

    def test_truncated_document_parse_failure_offset(self):
        text = render_canonical(minimal_model())
        truncated = text[: len(text) // 2]
        with pytest.raises(ParseFailure) as exc:
            parse_canonical(truncated)
        assert 0 <= exc.value.offset <= len(truncated)

    def test_duplicate_asset_ids_surface_as_schema_violation(self):
        doc = json.loads(render_canonical(minimal_model()))
        doc["assets"].append(dict(doc["assets"][0]))
        with pytest.raises(InvalidModel) as exc:
            parse_canonical(json.dumps(doc))
        assert any("duplicate id" in v.rule for v in exc.value.violations)

    @settings(max_examples=60, deadline=None)
    @given(threat_models())
    def test_round_trip(self, m):
        assert parse_canonical(render_canonical(m)) == m


class TestStride:
    def test_exactly_six_members(self):
        assert len(StrideCategory) == 6

    def test_token_bijection(self):
        tokens = {c.value for c in StrideCategory}
        assert tokens == {
            "spoofing", "tampering", "repudiation", "information_disclosure",
            "denial_of_service", "elevation_of_privilege"}
        for c in StrideCategory:
            assert StrideCategory(c.value) is c


def _mutate(token: str, rng: random.Random) -> str:
    choice = rng.randrange(3)
    if choice == 0:
        return "9" + token[1:]          # wrong prefix
    if choice == 1:
        return token + str(rng.randrange(10)) * 8   # wrong digit count
    return token.replace("-", "_") if "-" in token else token[:-1] + "!"


class TestIdPatterns:
    @pytest.mark.parametrize("ctor,make", [
        (attack_technique_id,
         lambda rng: f"T{rng.randrange(10000):04d}"
         + (f".{rng.randrange(1000):03d}" if rng.random() < 0.5 else "")),
        (cve_id,
         lambda rng: f"CVE-{rng.randrange(1999, 2026)}-"
         + str(rng.randrange(1000, 10**7))),
        (nist_control_id,
         lambda rng: "".join(rng.choice("ABCDEFGHIJKLMNOPQRSTUVWXYZ")
                             for _ in range(2))
         + f"-{rng.randrange(1, 100)}"
         + (f"({rng.randrange(1, 30)})" if rng.random() < 0.4 else "")),
    ])
    def test_corpus_of_100_accepted_and_100_mutations_rejected(self, ctor, make):
        rng = random.Random(7)
        accepted = [make(rng) for _ in range(100)]
        for token in accepted:
            assert ctor(token) == token
        rejected = 0
        for token in accepted:
            bad = _mutate(token, rng)
            if bad == token:
                continue
            with pytest.raises(InvalidIdToken):
                ctor(bad)
            rejected += 1
        assert rejected >= 95
