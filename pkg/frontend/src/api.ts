// Thin typed client over the session HTTP API. Every non-2xx response
// carries {error, detail}; that pair is surfaced on ApiRequestError so
// the UI can render the server's own wording inline.

import type {
  AnswerSubmission,
  DescriptionForm,
  SessionEvent,
  SessionResource,
} from "./types";

export class ApiRequestError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    readonly detail: string,
  ) {
    super(`${status} ${code}: ${detail}`);
  }
}

async function raiseForStatus(res: Response): Promise<void> {
  if (res.ok) return;
  let code = "error";
  let detail = res.statusText;
  try {
    const body = await res.json();
    if (typeof body?.error === "string") code = body.error;
    if (typeof body?.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiRequestError(res.status, code, detail);
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly token?: string,
  ) {}

  private headers(json: boolean): Record<string, string> {
    const h: Record<string, string> = {};
    if (json) h["content-type"] = "application/json";
    if (this.token) h["authorization"] = `Bearer ${this.token}`;
    return h;
  }

  async health(): Promise<boolean> {
    try {
      const res = await fetch(`${this.baseUrl}/healthz`);
      return res.ok;
    } catch {
      return false;
    }
  }

  async createSession(form: DescriptionForm): Promise<SessionResource> {
    const res = await fetch(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: this.headers(true),
      body: JSON.stringify(form),
    });
    await raiseForStatus(res);
    return res.json();
  }

  async getSession(sessionId: string): Promise<SessionResource> {
    const res = await fetch(`${this.baseUrl}/sessions/${sessionId}`, {
      headers: this.headers(false),
    });
    await raiseForStatus(res);
    return res.json();
  }

  async postAnswers(
    sessionId: string,
    answers: AnswerSubmission[],
  ): Promise<number> {
    const res = await fetch(`${this.baseUrl}/sessions/${sessionId}/answers`, {
      method: "POST",
      headers: this.headers(true),
      body: JSON.stringify(answers),
    });
    await raiseForStatus(res);
    const body = await res.json();
    return body.accepted as number;
  }

  /** Long-polls the server; returns [] when nothing new arrived in time. */
  async getEvents(sessionId: string, after: number): Promise<SessionEvent[]> {
    const res = await fetch(
      `${this.baseUrl}/sessions/${sessionId}/events?after=${after}`,
      { headers: this.headers(false) },
    );
    await raiseForStatus(res);
    const body = await res.json();
    return body.events as SessionEvent[];
  }

  /** Raw canonical document, byte-exact; export must pass this through. */
  async getModelText(sessionId: string): Promise<string> {
    const res = await fetch(`${this.baseUrl}/sessions/${sessionId}/model`, {
      headers: this.headers(false),
    });
    await raiseForStatus(res);
    return res.text();
  }
}
