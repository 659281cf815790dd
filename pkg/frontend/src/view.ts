// Pure presentation logic: derive view state from API responses and
// render the delivered model as HTML. Nothing here mutates model
// content; export is a byte-exact passthrough of the server document.

import type {
  PendingQuestion,
  SessionEvent,
  SessionResource,
  ThreatModelDoc,
} from "./types";

// ---------------------------------------------------------------- view state

export interface QuestionFormState {
  questionId: string;
  text: string;
  answer: string;
  disabled: boolean;
}

export interface UiSessionView {
  sessionId: string;
  state: string;
  revision: number | null;
  planSteps: string[];
  /** Index into planSteps to highlight, or null once terminal. */
  activeStepIndex: number | null;
  questions: QuestionFormState[];
  canAnswer: boolean;
  delivered: boolean;
  failed: boolean;
}

// Non-terminal agent states mapped onto the five plan steps, monotone so
// the highlight only ever moves forward.
const STATE_TO_STEP: Record<string, number> = {
  planning: 0,
  drafting: 1,
  verifying: 2,
  reviewing: 3,
  awaiting_clarification: 4,
  refining: 4,
};

export function planFromEvents(events: readonly SessionEvent[]): string[] {
  for (const e of events) {
    if (e.kind === "started" && Array.isArray(e.payload["plan"])) {
      return e.payload["plan"] as string[];
    }
  }
  return [];
}

export function deriveView(
  resource: SessionResource,
  planSteps: string[],
): UiSessionView {
  const awaiting = resource.state === "awaiting_clarification";
  return {
    sessionId: resource.session_id,
    state: resource.state,
    revision: resource.revision,
    planSteps,
    activeStepIndex: STATE_TO_STEP[resource.state] ?? null,
    questions: resource.pending_questions.map((q: PendingQuestion) => ({
      questionId: q.question_id,
      text: q.text,
      answer: "",
      disabled: !awaiting,
    })),
    canAnswer: awaiting && resource.pending_questions.length > 0,
    delivered: resource.state === "delivered",
    failed: resource.state === "failed",
  };
}

/** True when the model carries the reviewer's best-effort annotation. */
export function hasUnresolvedFindings(
  events: readonly SessionEvent[],
): boolean {
  return events.some(
    (e) => e.kind === "annotation" && e.payload["note"] === "unresolved findings",
  );
}

// ------------------------------------------------------------------- badges

export type BadgeKind = "stride" | "technique" | "cve" | "control" | "plain";

const STRIDE_TOKENS = new Set([
  "spoofing",
  "tampering",
  "repudiation",
  "information_disclosure",
  "denial_of_service",
  "elevation_of_privilege",
]);
const TECHNIQUE_RE = /^T\d{4}(\.\d{3})?$/;
const CVE_RE = /^CVE-\d{4}-\d{4,7}$/;
const CONTROL_RE = /^[A-Z]{2}-\d{1,2}(\(\d+\))?$/;

export function badgeKind(token: string): BadgeKind {
  if (STRIDE_TOKENS.has(token)) return "stride";
  if (TECHNIQUE_RE.test(token)) return "technique";
  if (CVE_RE.test(token)) return "cve";
  if (CONTROL_RE.test(token)) return "control";
  return "plain";
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderBadge(token: string): string {
  return `<span class="badge badge-${badgeKind(token)}">${escapeHtml(token)}</span>`;
}

const badges = (tokens: string[]) => tokens.map(renderBadge).join(" ");

// -------------------------------------------------------------- model review

function table(
  section: string,
  heading: string,
  columns: string[],
  rows: string[][],
): string {
  const head = columns.map((c) => `<th>${escapeHtml(c)}</th>`).join("");
  const body = rows
    .map((cells) => `<tr>${cells.map((c) => `<td>${c}</td>`).join("")}</tr>`)
    .join("");
  return (
    `<section data-section="${section}"><h2>${escapeHtml(heading)}</h2>` +
    `<table><thead><tr>${head}</tr></thead><tbody>${body}</tbody></table></section>`
  );
}

/** The delivered model as section tables with framework-id badges. */
export function renderModelReview(doc: ThreatModelDoc): string {
  const sections: string[] = [];
  sections.push(
    table(
      "assets",
      "Assets",
      ["Id", "Name", "Sensitivity", "Description"],
      doc.assets.map((a) => [
        escapeHtml(a.id),
        escapeHtml(a.name),
        escapeHtml(a.sensitivity),
        escapeHtml(a.description),
      ]),
    ),
  );
  sections.push(
    table(
      "entry_points",
      "Entry points",
      ["Id", "Name", "Channel", "Exposed to"],
      doc.entry_points.map((e) => [
        escapeHtml(e.id),
        escapeHtml(e.name),
        escapeHtml(e.channel),
        escapeHtml(e.exposed_to),
      ]),
    ),
  );
  sections.push(
    table(
      "attacker_profiles",
      "Attacker profiles",
      ["Id", "Label", "Capability", "Access", "Motivation"],
      doc.attacker_profiles.map((p) => [
        escapeHtml(p.id),
        escapeHtml(p.label),
        escapeHtml(p.capability),
        escapeHtml(p.access),
        escapeHtml(p.motivation),
      ]),
    ),
  );
  sections.push(
    table(
      "threats",
      "Threats",
      ["Id", "Title", "STRIDE", "Severity", "References", "Targets", "Via"],
      doc.threats.map((t) => [
        escapeHtml(t.id),
        escapeHtml(t.title),
        renderBadge(t.stride),
        escapeHtml(t.severity),
        badges([...t.attack_technique_ids, ...t.cve_ids]),
        escapeHtml(t.target_asset_ids.join(", ")),
        escapeHtml(t.via_entry_point_ids.join(", ")),
      ]),
    ),
  );
  sections.push(
    table(
      "mitigations",
      "Mitigations",
      ["Id", "Description", "Controls", "Addresses"],
      doc.mitigations.map((m) => [
        escapeHtml(m.id),
        escapeHtml(m.description),
        badges(m.nist_control_ids),
        escapeHtml(m.addresses_threat_ids.join(", ")),
      ]),
    ),
  );
  if (doc.vulnerabilities.length > 0) {
    sections.push(
      table(
        "vulnerabilities",
        "Vulnerabilities",
        ["Id", "Description", "CVEs", "Affects"],
        doc.vulnerabilities.map((v) => [
          escapeHtml(v.id),
          escapeHtml(v.description),
          badges(v.cve_ids),
          escapeHtml(v.affected_asset_ids.join(", ")),
        ]),
      ),
    );
  }
  return sections.join("\n");
}

/**
 * Export payload: the verbatim server document. Kept as an explicit
 * function so the byte-exactness contract has a single owner.
 */
export function exportDocument(canonicalText: string): string {
  return canonicalText;
}

export function exportFilename(doc: ThreatModelDoc): string {
  return `${doc.model_id}-r${doc.revision}.json`;
}
