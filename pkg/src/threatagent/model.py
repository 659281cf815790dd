"""Threat-model domain schema, identifiers and canonical JSON serialization.

Every other module consumes these types. All types are immutable values
after construction; the operations here are pure functions.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional


class StrideCategory(Enum):
    SPOOFING = "spoofing"
    TAMPERING = "tampering"
    REPUDIATION = "repudiation"
    INFORMATION_DISCLOSURE = "information_disclosure"
    DENIAL_OF_SERVICE = "denial_of_service"
    ELEVATION_OF_PRIVILEGE = "elevation_of_privilege"


class Level(Enum):
    """4-level ordinal scale used for both severity and sensitivity."""

    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    CRITICAL = "critical"


class ComponentKind(Enum):
    APPLICATION = "application"
    SERVER = "server"
    DATASTORE = "datastore"
    NETWORK = "network"
    DEVICE = "device"
    HUMAN = "human"
    OTHER = "other"


class Channel(Enum):
    WEB = "web"
    API = "api"
    NETWORK_PORT = "network_port"
    WIRELESS = "wireless"
    PHYSICAL = "physical"
    MOBILE_APP = "mobile_app"
    OTHER = "other"


class Exposure(Enum):
    PUBLIC = "public"
    AUTHENTICATED = "authenticated"
    INTERNAL = "internal"
    PHYSICAL_PROXIMITY = "physical_proximity"


class Capability(Enum):
    OPPORTUNISTIC = "opportunistic"
    SKILLED = "skilled"
    ORGANIZED = "organized"
    NATION_STATE = "nation_state"


class Access(Enum):
    EXTERNAL = "external"
    INSIDER = "insider"
    PHYSICAL = "physical"


_TECHNIQUE_RE = re.compile(r"^T\d{4}(\.\d{3})?$")
_CVE_RE = re.compile(r"^CVE-\d{4}-\d{4,7}$")
_NIST_RE = re.compile(r"^[A-Z]{2}-\d{1,2}(\(\d+\))?$")


class InvalidIdToken(ValueError):
    """A framework identifier token does not match its required pattern."""


def attack_technique_id(token: str) -> str:
    if not isinstance(token, str) or not _TECHNIQUE_RE.match(token):
        raise InvalidIdToken(f"not an ATT&CK technique id: {token!r}")
    return token


def cve_id(token: str) -> str:
    if not isinstance(token, str) or not _CVE_RE.match(token):
        raise InvalidIdToken(f"not a CVE id: {token!r}")
    return token


def nist_control_id(token: str) -> str:
    if not isinstance(token, str) or not _NIST_RE.match(token):
        raise InvalidIdToken(f"not a NIST control id: {token!r}")
    return token


def is_attack_technique_id(token: str) -> bool:
    return isinstance(token, str) and bool(_TECHNIQUE_RE.match(token))


def is_cve_id(token: str) -> bool:
    return isinstance(token, str) and bool(_CVE_RE.match(token))


def is_nist_control_id(token: str) -> bool:
    return isinstance(token, str) and bool(_NIST_RE.match(token))


@dataclass(frozen=True)
class SchemaViolation:
    path: str
    rule: str

    def __str__(self) -> str:
        return f"{self.path}: {self.rule}"


class InvalidModel(Exception):
    """Raised when an operation requires a valid model and gets violations."""

    def __init__(self, violations: list[SchemaViolation]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


class ParseFailure(Exception):
    """Syntactic or structural failure while parsing a canonical document."""

    def __init__(self, offset: int, expected: str):
        self.offset = offset
        self.expected = expected
        super().__init__(f"at offset {offset}: expected {expected}")


@dataclass(frozen=True)
class ComponentHint:
    name: str
    kind: ComponentKind
    detail: Optional[str] = None


@dataclass(frozen=True)
class SystemDescription:
    title: str
    narrative: str
    components: tuple[ComponentHint, ...] = ()
    tags: tuple[str, ...] = ()


@dataclass(frozen=True)
class Asset:
    id: str
    name: str
    description: str
    sensitivity: Level


@dataclass(frozen=True)
class EntryPoint:
    id: str
    name: str
    channel: Channel
    exposed_to: Exposure


@dataclass(frozen=True)
class AttackerProfile:
    id: str
    label: str
    motivation: str
    capability: Capability
    access: Access


@dataclass(frozen=True)
class Threat:
    id: str
    title: str
    description: str
    stride: StrideCategory
    attack_technique_ids: tuple[str, ...]
    cve_ids: tuple[str, ...]
    target_asset_ids: tuple[str, ...]
    via_entry_point_ids: tuple[str, ...]
    severity: Level


@dataclass(frozen=True)
class Vulnerability:
    id: str
    description: str
    cve_ids: tuple[str, ...]
    affected_asset_ids: tuple[str, ...]


@dataclass(frozen=True)
class Mitigation:
    id: str
    description: str
    nist_control_ids: tuple[str, ...]
    addresses_threat_ids: tuple[str, ...]


@dataclass(frozen=True)
class ThreatModel:
    model_id: str
    system: SystemDescription
    assets: tuple[Asset, ...]
    entry_points: tuple[EntryPoint, ...]
    attacker_profiles: tuple[AttackerProfile, ...]
    threats: tuple[Threat, ...]
    vulnerabilities: tuple[Vulnerability, ...]
    mitigations: tuple[Mitigation, ...]
    revision: int = 0
    produced_at: str = "1970-01-01T00:00:00Z"


def normalize_item_id(token: str) -> str:
    """Item ids are short caller-supplied tokens, normalized to uppercase."""
    return token.strip().upper()


# ---------------------------------------------------------------------------
# validation

def validate_model(m: ThreatModel) -> list[SchemaViolation]:
    """Check every schema invariant; returns an empty list iff all hold."""
    out: list[SchemaViolation] = []

    if not m.system.title.strip():
        out.append(SchemaViolation("system.title", "must be non-empty"))
    if not m.system.narrative.strip():
        out.append(SchemaViolation("system.narrative", "must be non-empty"))
    seen_names: set[str] = set()
    for i, c in enumerate(m.system.components):
        low = c.name.lower()
        if low in seen_names:
            out.append(SchemaViolation(
                f"system.components[{i}].name",
                f"duplicate component name (case-insensitive): {c.name!r}"))
        seen_names.add(low)

    if m.revision < 0:
        out.append(SchemaViolation("revision", "must be non-negative"))

    def check_unique(items, path):
        seen: set[str] = set()
        for i, item in enumerate(items):
            if item.id in seen:
                out.append(SchemaViolation(
                    f"{path}[{i}].id", f"duplicate id {item.id!r}"))
            seen.add(item.id)
        return seen

    asset_ids = check_unique(m.assets, "assets")
    ep_ids = check_unique(m.entry_points, "entry_points")
    check_unique(m.attacker_profiles, "attacker_profiles")
    threat_ids = check_unique(m.threats, "threats")
    check_unique(m.vulnerabilities, "vulnerabilities")
    check_unique(m.mitigations, "mitigations")

    if m.revision > 0:
        for name, items in (("assets", m.assets),
                            ("entry_points", m.entry_points),
                            ("attacker_profiles", m.attacker_profiles),
                            ("threats", m.threats),
                            ("mitigations", m.mitigations)):
            if not items:
                out.append(SchemaViolation(
                    name, "must be non-empty once revision > 0"))

    for i, a in enumerate(m.assets):
        if not a.name.strip():
            out.append(SchemaViolation(f"assets[{i}].name", "must be non-empty"))
    for i, e in enumerate(m.entry_points):
        if not e.name.strip():
            out.append(SchemaViolation(f"entry_points[{i}].name", "must be non-empty"))
    for i, p in enumerate(m.attacker_profiles):
        if not p.label.strip():
            out.append(SchemaViolation(f"attacker_profiles[{i}].label", "must be non-empty"))

    for i, t in enumerate(m.threats):
        if not t.target_asset_ids:
            out.append(SchemaViolation(
                f"threats[{i}].target_asset_ids", "must be non-empty"))
        for tid in t.target_asset_ids:
            if tid not in asset_ids:
                out.append(SchemaViolation(
                    f"threats[{i}].target_asset_ids",
                    f"references unknown asset id {tid!r}"))
        for eid in t.via_entry_point_ids:
            if eid not in ep_ids:
                out.append(SchemaViolation(
                    f"threats[{i}].via_entry_point_ids",
                    f"references unknown entry point id {eid!r}"))

    for i, v in enumerate(m.vulnerabilities):
        if not v.affected_asset_ids:
            out.append(SchemaViolation(
                f"vulnerabilities[{i}].affected_asset_ids", "must be non-empty"))
        for aid in v.affected_asset_ids:
            if aid not in asset_ids:
                out.append(SchemaViolation(
                    f"vulnerabilities[{i}].affected_asset_ids",
                    f"references unknown asset id {aid!r}"))

    for i, mi in enumerate(m.mitigations):
        if not mi.addresses_threat_ids:
            out.append(SchemaViolation(
                f"mitigations[{i}].addresses_threat_ids", "must be non-empty"))
        for tid in mi.addresses_threat_ids:
            if tid not in threat_ids:
                out.append(SchemaViolation(
                    f"mitigations[{i}].addresses_threat_ids",
                    f"references unknown threat id {tid!r}"))

    return out


# ---------------------------------------------------------------------------
# canonical serialization

def _system_to_dict(s: SystemDescription) -> dict:
    return {
        "title": s.title,
        "narrative": s.narrative,
        "components": [
            {"name": c.name, "kind": c.kind.value,
             **({"detail": c.detail} if c.detail is not None else {})}
            for c in s.components
        ],
        "tags": list(s.tags),
    }


def model_to_dict(m: ThreatModel) -> dict:
    return {
        "model_id": m.model_id,
        "system": _system_to_dict(m.system),
        "assets": [
            {"id": a.id, "name": a.name, "description": a.description,
             "sensitivity": a.sensitivity.value}
            for a in m.assets
        ],
        "entry_points": [
            {"id": e.id, "name": e.name, "channel": e.channel.value,
             "exposed_to": e.exposed_to.value}
            for e in m.entry_points
        ],
        "attacker_profiles": [
            {"id": p.id, "label": p.label, "motivation": p.motivation,
             "capability": p.capability.value, "access": p.access.value}
            for p in m.attacker_profiles
        ],
        "threats": [
            {"id": t.id, "title": t.title, "description": t.description,
             "stride": t.stride.value,
             "attack_technique_ids": list(t.attack_technique_ids),
             "cve_ids": list(t.cve_ids),
             "target_asset_ids": list(t.target_asset_ids),
             "via_entry_point_ids": list(t.via_entry_point_ids),
             "severity": t.severity.value}
            for t in m.threats
        ],
        "vulnerabilities": [
            {"id": v.id, "description": v.description,
             "cve_ids": list(v.cve_ids),
             "affected_asset_ids": list(v.affected_asset_ids)}
            for v in m.vulnerabilities
        ],
        "mitigations": [
            {"id": g.id, "description": g.description,
             "nist_control_ids": list(g.nist_control_ids),
             "addresses_threat_ids": list(g.addresses_threat_ids)}
            for g in m.mitigations
        ],
        "revision": m.revision,
        "produced_at": m.produced_at,
    }


def render_canonical(m: ThreatModel) -> str:
    """Deterministic canonical UTF-8 JSON rendering of a valid model."""
    violations = validate_model(m)
    if violations:
        raise InvalidModel(violations)
    return json.dumps(model_to_dict(m), indent=2, ensure_ascii=False) + "\n"


class _Reader:
    """Structural reader collecting schema violations with field paths."""

    def __init__(self):
        self.violations: list[SchemaViolation] = []

    def fail(self, path: str, rule: str):
        self.violations.append(SchemaViolation(path, rule))

    def str_field(self, obj: dict, key: str, path: str, default=None) -> str:
        v = obj.get(key, default)
        if not isinstance(v, str):
            self.fail(f"{path}.{key}", "must be a string")
            return ""
        return v

    def list_field(self, obj: dict, key: str, path: str) -> list:
        v = obj.get(key, [])
        if not isinstance(v, list):
            self.fail(f"{path}.{key}", "must be an array")
            return []
        return v

    def enum_field(self, obj: dict, key: str, path: str, enum_cls):
        raw = self.str_field(obj, key, path)
        try:
            return enum_cls(raw)
        except ValueError:
            allowed = ", ".join(e.value for e in enum_cls)
            self.fail(f"{path}.{key}", f"token {raw!r} not one of: {allowed}")
            return next(iter(enum_cls))

    def id_list(self, obj: dict, key: str, path: str, checker, label: str):
        out = []
        for j, tok in enumerate(self.list_field(obj, key, path)):
            if not checker(tok):
                self.fail(f"{path}.{key}[{j}]", f"not a valid {label}: {tok!r}")
            else:
                out.append(tok)
        return tuple(out)


def _system_from_dict(d: Any, r: _Reader) -> SystemDescription:
    if not isinstance(d, dict):
        r.fail("system", "must be an object")
        return SystemDescription(title="", narrative="")
    components = []
    for i, c in enumerate(r.list_field(d, "components", "system")):
        if not isinstance(c, dict):
            r.fail(f"system.components[{i}]", "must be an object")
            continue
        components.append(ComponentHint(
            name=r.str_field(c, "name", f"system.components[{i}]"),
            kind=r.enum_field(c, "kind", f"system.components[{i}]", ComponentKind),
            detail=c.get("detail"),
        ))
    tags = tuple(str(t) for t in r.list_field(d, "tags", "system"))
    return SystemDescription(
        title=r.str_field(d, "title", "system"),
        narrative=r.str_field(d, "narrative", "system"),
        components=tuple(components),
        tags=tags,
    )


def model_from_dict(doc: Any) -> ThreatModel:
    """Build a ThreatModel from decoded JSON; raises InvalidModel on any
    structural or schema violation."""
    if not isinstance(doc, dict):
        raise InvalidModel([SchemaViolation("$", "document must be an object")])
    r = _Reader()

    assets = tuple(
        Asset(
            id=normalize_item_id(r.str_field(a, "id", f"assets[{i}]")),
            name=r.str_field(a, "name", f"assets[{i}]"),
            description=r.str_field(a, "description", f"assets[{i}]", ""),
            sensitivity=r.enum_field(a, "sensitivity", f"assets[{i}]", Level),
        )
        for i, a in enumerate(r.list_field(doc, "assets", "$"))
        if isinstance(a, dict)
    )
    entry_points = tuple(
        EntryPoint(
            id=normalize_item_id(r.str_field(e, "id", f"entry_points[{i}]")),
            name=r.str_field(e, "name", f"entry_points[{i}]"),
            channel=r.enum_field(e, "channel", f"entry_points[{i}]", Channel),
            exposed_to=r.enum_field(e, "exposed_to", f"entry_points[{i}]", Exposure),
        )
        for i, e in enumerate(r.list_field(doc, "entry_points", "$"))
        if isinstance(e, dict)
    )
    profiles = tuple(
        AttackerProfile(
            id=normalize_item_id(r.str_field(p, "id", f"attacker_profiles[{i}]")),
            label=r.str_field(p, "label", f"attacker_profiles[{i}]"),
            motivation=r.str_field(p, "motivation", f"attacker_profiles[{i}]", ""),
            capability=r.enum_field(p, "capability", f"attacker_profiles[{i}]", Capability),
            access=r.enum_field(p, "access", f"attacker_profiles[{i}]", Access),
        )
        for i, p in enumerate(r.list_field(doc, "attacker_profiles", "$"))
        if isinstance(p, dict)
    )
    threats = tuple(
        Threat(
            id=normalize_item_id(r.str_field(t, "id", f"threats[{i}]")),
            title=r.str_field(t, "title", f"threats[{i}]"),
            description=r.str_field(t, "description", f"threats[{i}]", ""),
            stride=r.enum_field(t, "stride", f"threats[{i}]", StrideCategory),
            attack_technique_ids=r.id_list(
                t, "attack_technique_ids", f"threats[{i}]",
                is_attack_technique_id, "ATT&CK technique id"),
            cve_ids=r.id_list(t, "cve_ids", f"threats[{i}]", is_cve_id, "CVE id"),
            target_asset_ids=tuple(
                normalize_item_id(str(x))
                for x in r.list_field(t, "target_asset_ids", f"threats[{i}]")),
            via_entry_point_ids=tuple(
                normalize_item_id(str(x))
                for x in r.list_field(t, "via_entry_point_ids", f"threats[{i}]")),
            severity=r.enum_field(t, "severity", f"threats[{i}]", Level),
        )
        for i, t in enumerate(r.list_field(doc, "threats", "$"))
        if isinstance(t, dict)
    )
    vulnerabilities = tuple(
        Vulnerability(
            id=normalize_item_id(r.str_field(v, "id", f"vulnerabilities[{i}]")),
            description=r.str_field(v, "description", f"vulnerabilities[{i}]", ""),
            cve_ids=r.id_list(v, "cve_ids", f"vulnerabilities[{i}]", is_cve_id, "CVE id"),
            affected_asset_ids=tuple(
                normalize_item_id(str(x))
                for x in r.list_field(v, "affected_asset_ids", f"vulnerabilities[{i}]")),
        )
        for i, v in enumerate(r.list_field(doc, "vulnerabilities", "$"))
        if isinstance(v, dict)
    )
    mitigations = tuple(
        Mitigation(
            id=normalize_item_id(r.str_field(g, "id", f"mitigations[{i}]")),
            description=r.str_field(g, "description", f"mitigations[{i}]", ""),
            nist_control_ids=r.id_list(
                g, "nist_control_ids", f"mitigations[{i}]",
                is_nist_control_id, "NIST control id"),
            addresses_threat_ids=tuple(
                normalize_item_id(str(x))
                for x in r.list_field(g, "addresses_threat_ids", f"mitigations[{i}]")),
        )
        for i, g in enumerate(r.list_field(doc, "mitigations", "$"))
        if isinstance(g, dict)
    )

    revision = doc.get("revision", 0)
    if not isinstance(revision, int) or isinstance(revision, bool):
        r.fail("revision", "must be an integer")
        revision = 0

    m = ThreatModel(
        model_id=r.str_field(doc, "model_id", "$"),
        system=_system_from_dict(doc.get("system"), r),
        assets=assets,
        entry_points=entry_points,
        attacker_profiles=profiles,
        threats=threats,
        vulnerabilities=vulnerabilities,
        mitigations=mitigations,
        revision=revision,
        produced_at=r.str_field(doc, "produced_at", "$", "1970-01-01T00:00:00Z"),
    )
    violations = r.violations + validate_model(m)
    if violations:
        raise InvalidModel(violations)
    return m


def parse_canonical(text: str) -> ThreatModel:
    """Inverse of render_canonical on its image.

    Raises ParseFailure for malformed JSON (with byte offset) and
    InvalidModel for schema violations.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseFailure(e.pos, e.msg) from e
    return model_from_dict(doc)
