"""Framework knowledge base: ATT&CK, CVE/NVD, NIST controls, advisories.

Sources are ingested from local files into an in-memory snapshot which is
then frozen; lookups and grounding checks run against the frozen snapshot.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from typing import Optional

from .model import (
    InvalidModel,
    ThreatModel,
    is_attack_technique_id,
    is_cve_id,
    is_nist_control_id,
    validate_model,
)


class MalformedSource(Exception):
    """Source document does not have the expected structure."""


class EmptySource(Exception):
    """Source document parsed but contained zero usable records."""


class SnapshotFrozen(Exception):
    """Mutation attempted on a frozen snapshot."""


@dataclass(frozen=True)
class TechniqueRecord:
    technique_id: str
    name: str
    tactics: tuple[str, ...]
    deprecated: bool = False


@dataclass(frozen=True)
class CveRecord:
    cve: str
    summary: str
    cvss_base: Optional[float] = None
    published: Optional[str] = None


@dataclass(frozen=True)
class ControlRecord:
    control_id: str
    family: str
    title: str


@dataclass(frozen=True)
class AdvisoryRecord:
    source: str  # "cisa" | "other"
    identifier: str
    title: str
    referenced_cve_ids: tuple[str, ...]


@dataclass
class KbSnapshot:
    techniques: dict[str, TechniqueRecord] = field(default_factory=dict)
    cves: dict[str, CveRecord] = field(default_factory=dict)
    controls: dict[str, ControlRecord] = field(default_factory=dict)
    advisories: list[AdvisoryRecord] = field(default_factory=list)
    loaded_from: list[tuple[str, str]] = field(default_factory=list)  # (descriptor, sha256)
    warnings: list[str] = field(default_factory=list)
    _frozen: bool = False

    def freeze(self) -> "KbSnapshot":
        self._frozen = True
        return self

    def _check_mutable(self):
        if self._frozen:
            raise SnapshotFrozen("snapshot is frozen; build a new one")

    def _record_source(self, descriptor: str, document: str):
        digest = hashlib.sha256(document.encode("utf-8")).hexdigest()
        entry = (descriptor, digest)
        if entry not in self.loaded_from:
            self.loaded_from.append(entry)

    def content_hash(self) -> str:
        """Stable hash of the snapshot contents, used for idempotence checks."""
        payload = json.dumps({
            "techniques": {k: [v.name, list(v.tactics), v.deprecated]
                           for k, v in sorted(self.techniques.items())},
            "cves": {k: [v.summary, v.cvss_base, v.published]
                     for k, v in sorted(self.cves.items())},
            "controls": {k: [v.family, v.title]
                         for k, v in sorted(self.controls.items())},
            "advisories": [[a.source, a.identifier, a.title,
                            list(a.referenced_cve_ids)]
                           for a in self.advisories],
        }, sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    # -- ingestion ---------------------------------------------------------

    def ingest_attack_stix(self, document: str) -> int:
        """Load attack-pattern objects from a STIX 2.1 bundle.

        Objects without an external technique id are skipped. Deprecated or
        revoked techniques are loaded but flagged.
        """
        self._check_mutable()
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as e:
            raise MalformedSource(f"not JSON: {e.msg}") from e
        if not isinstance(doc, dict) or doc.get("type") != "bundle" \
                or not isinstance(doc.get("objects"), list):
            raise MalformedSource("not a STIX 2.1 bundle")

        count = 0
        for obj in doc["objects"]:
            if not isinstance(obj, dict) or obj.get("type") != "attack-pattern":
                continue
            ext_id = None
            for ref in obj.get("external_references", []):
                candidate = ref.get("external_id")
                if is_attack_technique_id(candidate or ""):
                    ext_id = candidate
                    break
            if ext_id is None:
                self.warnings.append(
                    f"attack-pattern {obj.get('id', '?')} has no technique id; skipped")
                continue
            tactics = tuple(
                phase.get("phase_name", "")
                for phase in obj.get("kill_chain_phases", [])
                if phase.get("kill_chain_name") == "mitre-attack"
            )
            deprecated = bool(obj.get("x_mitre_deprecated") or obj.get("revoked"))
            self.techniques[ext_id] = TechniqueRecord(
                technique_id=ext_id,
                name=obj.get("name", ""),
                tactics=tactics,
                deprecated=deprecated,
            )
            count += 1
        if count == 0:
            raise EmptySource("bundle contains no usable attack-pattern objects")
        self._record_source("attack-stix", document)
        return count

    def ingest_nvd_feed(self, document: str) -> int:
        """Load CVE items from an NVD feed (1.1-style wrapper or bare array)."""
        self._check_mutable()
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as e:
            raise MalformedSource(f"not JSON: {e.msg}") from e
        if isinstance(doc, dict) and isinstance(doc.get("CVE_Items"), list):
            items = doc["CVE_Items"]
        elif isinstance(doc, list):
            items = doc
        else:
            raise MalformedSource("expected an NVD feed with a CVE item array")

        count = 0
        for item in items:
            if not isinstance(item, dict):
                self.warnings.append("non-object CVE item skipped")
                continue
            parsed = self._parse_nvd_item(item)
            if parsed is None:
                continue
            self.cves[parsed.cve] = parsed
            count += 1
        self._record_source("nvd-feed", document)
        return count

    def _parse_nvd_item(self, item: dict) -> Optional[CveRecord]:
        if "cve" in item:  # NVD 1.1 shape
            meta = item.get("cve", {})
            ident = meta.get("CVE_data_meta", {}).get("ID", "")
            descs = meta.get("description", {}).get("description_data", [])
            summary = descs[0].get("value", "") if descs else ""
            score = (item.get("impact", {})
                         .get("baseMetricV3", {})
                         .get("cvssV3", {})
                         .get("baseScore"))
            published = item.get("publishedDate")
        else:  # simplified shape
            ident = item.get("id", "")
            summary = item.get("summary", "")
            score = item.get("cvss_base")
            published = item.get("published")
        if not is_cve_id(ident):
            self.warnings.append(f"invalid CVE id skipped: {ident!r}")
            return None
        if score is not None:
            if isinstance(score, (int, float)) and 0.0 <= float(score) <= 10.0:
                score = float(score)
            else:
                self.warnings.append(
                    f"{ident}: CVSS base score {score!r} out of range; dropped")
                score = None
        return CveRecord(cve=ident, summary=summary, cvss_base=score,
                         published=published)

    def ingest_nist_catalog(self, document: str) -> int:
        """Load controls from a CSV catalog with header id,family,title."""
        self._check_mutable()
        if not document.strip():
            raise MalformedSource("empty control catalog")
        reader = csv.DictReader(io.StringIO(document))
        if reader.fieldnames is None or "id" not in reader.fieldnames:
            raise MalformedSource("control catalog needs an 'id' column")
        count = 0
        for row in reader:
            cid = (row.get("id") or "").strip()
            if not is_nist_control_id(cid):
                self.warnings.append(f"invalid control id skipped: {cid!r}")
                continue
            if cid in self.controls:
                self.warnings.append(f"duplicate control id {cid}; last wins")
            self.controls[cid] = ControlRecord(
                control_id=cid,
                family=(row.get("family") or "").strip(),
                title=(row.get("title") or "").strip(),
            )
            count += 1
        if count == 0:
            raise MalformedSource("control catalog contains no valid rows")
        self._record_source("nist-catalog", document)
        return count

    def ingest_advisories(self, document: str) -> int:
        """Load advisories from CSV: source,identifier,title,cve_ids (;-sep)."""
        self._check_mutable()
        if not document.strip():
            raise MalformedSource("empty advisories file")
        reader = csv.DictReader(io.StringIO(document))
        if reader.fieldnames is None or "identifier" not in reader.fieldnames:
            raise MalformedSource("advisories file needs an 'identifier' column")
        loaded: list[AdvisoryRecord] = []
        for row in reader:
            source = (row.get("source") or "other").strip().lower()
            if source not in ("cisa", "other"):
                source = "other"
            cve_tokens = [t.strip() for t in (row.get("cve_ids") or "").split(";")
                          if t.strip()]
            valid = tuple(t for t in cve_tokens if is_cve_id(t))
            for t in cve_tokens:
                if not is_cve_id(t):
                    self.warnings.append(f"advisory cites invalid CVE id {t!r}")
            loaded.append(AdvisoryRecord(
                source=source,
                identifier=(row.get("identifier") or "").strip(),
                title=(row.get("title") or "").strip(),
                referenced_cve_ids=valid,
            ))
        known = {(a.source, a.identifier) for a in self.advisories}
        for adv in loaded:
            if (adv.source, adv.identifier) not in known:
                self.advisories.append(adv)
        self._record_source("advisories", document)
        return len(loaded)


@dataclass(frozen=True)
class GroundingReport:
    unknown_technique_ids: tuple[tuple[str, str], ...] = ()
    unknown_cve_ids: tuple[tuple[str, str], ...] = ()
    unknown_control_ids: tuple[tuple[str, str], ...] = ()
    deprecated_technique_ids: tuple[tuple[str, str], ...] = ()

    def is_empty(self) -> bool:
        return not (self.unknown_technique_ids or self.unknown_cve_ids
                    or self.unknown_control_ids or self.deprecated_technique_ids)

    def entries(self) -> list[tuple[str, str, str]]:
        out = []
        for kind, rows in (("unknown_technique", self.unknown_technique_ids),
                           ("unknown_cve", self.unknown_cve_ids),
                           ("unknown_control", self.unknown_control_ids),
                           ("deprecated_technique", self.deprecated_technique_ids)):
            out.extend((kind, path, ident) for path, ident in rows)
        return out


def ground(m: ThreatModel, kb: KbSnapshot) -> GroundingReport:
    """Resolve every framework id cited by the model against the snapshot."""
    violations = validate_model(m)
    if violations:
        raise InvalidModel(violations)

    unknown_t: list[tuple[str, str]] = []
    unknown_c: list[tuple[str, str]] = []
    unknown_n: list[tuple[str, str]] = []
    deprecated: list[tuple[str, str]] = []

    for i, t in enumerate(m.threats):
        for j, tid in enumerate(t.attack_technique_ids):
            path = f"threats[{i}].attack_technique_ids[{j}]"
            rec = kb.techniques.get(tid)
            if rec is None:
                unknown_t.append((path, tid))
            elif rec.deprecated:
                deprecated.append((path, tid))
        for j, cid in enumerate(t.cve_ids):
            if cid not in kb.cves:
                unknown_c.append((f"threats[{i}].cve_ids[{j}]", cid))
    for i, v in enumerate(m.vulnerabilities):
        for j, cid in enumerate(v.cve_ids):
            if cid not in kb.cves:
                unknown_c.append((f"vulnerabilities[{i}].cve_ids[{j}]", cid))
    for i, g in enumerate(m.mitigations):
        for j, nid in enumerate(g.nist_control_ids):
            if nid not in kb.controls:
                unknown_n.append((f"mitigations[{i}].nist_control_ids[{j}]", nid))

    return GroundingReport(
        unknown_technique_ids=tuple(unknown_t),
        unknown_cve_ids=tuple(unknown_c),
        unknown_control_ids=tuple(unknown_n),
        deprecated_technique_ids=tuple(deprecated),
    )


def load_snapshot(kb_dir) -> KbSnapshot:
    """Build a frozen snapshot from the conventional files in a KB directory.

    Recognized files: attack.json (STIX bundle), nvd.json (feed),
    nist.csv (catalog), advisories.csv. Missing files are simply skipped.
    """
    from pathlib import Path
    kb_dir = Path(kb_dir)
    kb = KbSnapshot()
    attack = kb_dir / "attack.json"
    if attack.exists():
        kb.ingest_attack_stix(attack.read_text(encoding="utf-8"))
    nvd = kb_dir / "nvd.json"
    if nvd.exists():
        kb.ingest_nvd_feed(nvd.read_text(encoding="utf-8"))
    nist = kb_dir / "nist.csv"
    if nist.exists():
        kb.ingest_nist_catalog(nist.read_text(encoding="utf-8"))
    adv = kb_dir / "advisories.csv"
    if adv.exists():
        kb.ingest_advisories(adv.read_text(encoding="utf-8"))
    return kb.freeze()
