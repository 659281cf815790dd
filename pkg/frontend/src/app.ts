// Single-page flow: create form -> live progress -> model review.
// The session id lives in the URL fragment; the bearer token, when the
// server requires one, is entered once and kept in session storage.

import { ApiClient, ApiRequestError } from "./api";
import { EventLog, pollEvents } from "./poll";
import type { SessionEvent, ThreatModelDoc } from "./types";
import {
  deriveView,
  exportDocument,
  exportFilename,
  hasUnresolvedFindings,
  planFromEvents,
  renderModelReview,
} from "./view";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

function makeClient(): ApiClient {
  const token = sessionStorage.getItem("threatagent-token") ?? undefined;
  return new ApiClient(window.location.origin, token);
}

function setError(text: string): void {
  const banner = $("error-banner");
  banner.textContent = text;
  banner.hidden = text === "";
}

function renderTimelineEvent(e: SessionEvent): void {
  const item = document.createElement("li");
  item.dataset.seq = String(e.seq);
  item.dataset.kind = e.kind;
  item.textContent = `${e.at}  ${e.kind}`;
  $("timeline").appendChild(item);
}

async function refresh(client: ApiClient, sessionId: string, log: EventLog) {
  const resource = await client.getSession(sessionId);
  const view = deriveView(resource, planFromEvents(log.all()));

  const steps = $("plan-steps");
  steps.innerHTML = "";
  view.planSteps.forEach((label, i) => {
    const li = document.createElement("li");
    li.textContent = label;
    if (i === view.activeStepIndex) li.classList.add("active");
    steps.appendChild(li);
  });

  const form = $<HTMLFormElement>("answers-form");
  form.hidden = !view.canAnswer;
  if (view.canAnswer) {
    const fields = $("question-fields");
    fields.innerHTML = "";
    for (const q of view.questions) {
      const label = document.createElement("label");
      label.textContent = q.text;
      const input = document.createElement("input");
      input.name = q.questionId;
      input.disabled = q.disabled;
      label.appendChild(input);
      fields.appendChild(label);
    }
  }

  if (view.delivered) {
    const text = await client.getModelText(sessionId);
    const doc = JSON.parse(text) as ThreatModelDoc;
    $("review").innerHTML = renderModelReview(doc);
    $("warning-banner").hidden = !hasUnresolvedFindings(log.all());
    const button = $<HTMLButtonElement>("export-button");
    button.hidden = false;
    button.onclick = () => {
      // byte-exact passthrough of the server document
      const blob = new Blob([exportDocument(text)], {
        type: "application/json",
      });
      const a = document.createElement("a");
      a.href = URL.createObjectURL(blob);
      a.download = exportFilename(doc);
      a.click();
      URL.revokeObjectURL(a.href);
    };
  }
  $("state-badge").textContent = view.state;
}

async function openSession(client: ApiClient, sessionId: string) {
  $("create-page").hidden = true;
  $("session-page").hidden = false;
  const log = new EventLog();
  const poll = pollEvents(client, sessionId, log, (e) => {
    renderTimelineEvent(e);
    void refresh(client, sessionId, log).catch((err) =>
      setError(String(err)),
    );
  });
  try {
    await refresh(client, sessionId, log);
    await poll;
    await refresh(client, sessionId, log);
  } catch (err) {
    if (err instanceof ApiRequestError && err.status === 404) {
      setError(`session not found: ${sessionId}`);
    } else {
      setError(String(err));
    }
  }
}

export function main(): void {
  const client = makeClient();

  $<HTMLFormElement>("create-form").onsubmit = async (ev) => {
    ev.preventDefault();
    const title = $<HTMLInputElement>("title").value.trim();
    const narrative = $<HTMLTextAreaElement>("narrative").value.trim();
    if (!title || !narrative) {
      setError("title and narrative must be non-empty");
      return; // mirror of the server-side 400, no request sent
    }
    setError("");
    try {
      const resource = await client.createSession({ title, narrative });
      window.location.hash = resource.session_id;
      await openSession(client, resource.session_id);
    } catch (err) {
      if (err instanceof ApiRequestError) {
        setError(err.detail);
      } else {
        setError("server unreachable; check the service and retry");
      }
    }
  };

  $<HTMLFormElement>("answers-form").onsubmit = async (ev) => {
    ev.preventDefault();
    const form = ev.target as HTMLFormElement;
    const sessionId = window.location.hash.slice(1);
    const answers = Array.from(form.querySelectorAll("input")).map((i) => ({
      question_id: i.name,
      answer: i.value, // blank answers are allowed and sent as empty text
    }));
    for (const input of form.querySelectorAll("input")) {
      input.disabled = true; // prevents double-submit
    }
    try {
      await client.postAnswers(sessionId, answers);
      form.hidden = true;
    } catch (err) {
      setError(err instanceof ApiRequestError ? err.detail : String(err));
    }
  };

  const fragment = window.location.hash.slice(1);
  if (fragment) void openSession(client, fragment);
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  main();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", main);
}
