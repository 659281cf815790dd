// Wire types for the session API. These mirror the server's JSON shapes;
// the client never mutates model content, only presents it.

export interface PendingQuestion {
  question_id: string;
  text: string;
}

export interface SessionResource {
  session_id: string;
  state: string;
  revision: number | null;
  pending_questions: PendingQuestion[];
  links: { events: string; model: string };
}

export interface SessionEvent {
  seq: number;
  at: string;
  kind: string;
  payload: Record<string, unknown>;
}

export interface AnswerSubmission {
  question_id: string;
  answer: string;
}

export interface DescriptionForm {
  title: string;
  narrative: string;
  tags?: string[];
}

export interface Asset {
  id: string;
  name: string;
  description: string;
  sensitivity: string;
}

export interface EntryPoint {
  id: string;
  name: string;
  channel: string;
  exposed_to: string;
}

export interface AttackerProfile {
  id: string;
  label: string;
  motivation: string;
  capability: string;
  access: string;
}

export interface Threat {
  id: string;
  title: string;
  description: string;
  stride: string;
  attack_technique_ids: string[];
  cve_ids: string[];
  target_asset_ids: string[];
  via_entry_point_ids: string[];
  severity: string;
}

export interface Vulnerability {
  id: string;
  description: string;
  cve_ids: string[];
  affected_asset_ids: string[];
}

export interface Mitigation {
  id: string;
  description: string;
  nist_control_ids: string[];
  addresses_threat_ids: string[];
}

export interface ThreatModelDoc {
  model_id: string;
  system: { title: string; narrative: string; tags?: string[] };
  assets: Asset[];
  entry_points: EntryPoint[];
  attacker_profiles: AttackerProfile[];
  threats: Threat[];
  vulnerabilities: Vulnerability[];
  mitigations: Mitigation[];
  revision: number;
  produced_at: string;
}
