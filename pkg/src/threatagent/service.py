"""Session-oriented HTTP API exposing the agent loop to remote clients.

In-memory session store; per-session agent operations are serialized, and
event reads long-poll so a UI can follow a live run. Optional snapshot of
event logs to disk on shutdown, reloaded read-only on start.
"""

from __future__ import annotations

import json
import os
import threading
from contextlib import asynccontextmanager
import uuid
from pathlib import Path
from typing import Callable, Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from .agent import AgentRunner, AgentState, Session, SessionEvent, TERMINAL_STATES
from .model import (
    ComponentHint,
    ComponentKind,
    SystemDescription,
    render_canonical,
)
from .review import UnknownQuestionId

AUTH_TOKEN_ENV = "THREATGPT_SERVICE_TOKEN"
LONG_POLL_S = 25.0


class SessionRun:
    """One live session plus its runner, lock and change signal."""

    def __init__(self, runner: AgentRunner, session: Session):
        self.runner = runner
        self.session = session
        self.lock = threading.Lock()
        self.changed = threading.Condition()
        self.thread: Optional[threading.Thread] = None

    def _notify(self):
        with self.changed:
            self.changed.notify_all()

    def advance_async(self):
        """Drive the session until terminal or awaiting, off-thread."""
        def loop():
            while True:
                with self.lock:
                    state = self.session.state
                    if state in TERMINAL_STATES or \
                            state is AgentState.AWAITING_CLARIFICATION:
                        break
                    self.runner.step(self.session)
                self._notify()
            self._notify()
        self.thread = threading.Thread(target=loop, daemon=True)
        self.thread.start()

    def snapshot(self) -> dict:
        with self.lock:
            s = self.session
            return {
                "session_id": s.session_id,
                "state": s.state.value,
                "revision": s.draft.revision if s.draft else None,
                "pending_questions": [
                    {"question_id": q.question_id, "text": q.text}
                    for q in s.pending_questions
                ],
                "links": {
                    "events": f"/sessions/{s.session_id}/events",
                    "model": f"/sessions/{s.session_id}/model",
                },
            }

    def events_after(self, after: int) -> list[SessionEvent]:
        with self.lock:
            return [e for e in self.session.events if e.seq > after]


class RestoredSession:
    """Read-only view reloaded from a snapshot directory."""

    def __init__(self, session_id: str, state: str, revision,
                 events: list[dict], model_text: Optional[str]):
        self.session_id = session_id
        self.state = state
        self.revision = revision
        self.events = events
        self.model_text = model_text


def _error(status: int, code: str, detail: str) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"error": code, "detail": detail})


def _description_from_body(body: dict) -> SystemDescription:
    for field_name in ("title", "narrative"):
        value = body.get(field_name)
        if not isinstance(value, str) or not value.strip():
            raise ValueError(f"{field_name} must be a non-empty string")
    components = []
    for c in body.get("components", []) or []:
        if not isinstance(c, dict) or not c.get("name"):
            raise ValueError("components entries need a name")
        try:
            kind = ComponentKind(c.get("kind", "other"))
        except ValueError:
            kind = ComponentKind.OTHER
        components.append(ComponentHint(name=c["name"], kind=kind,
                                        detail=c.get("detail")))
    tags = tuple(str(t).lower() for t in body.get("tags", []) or [])
    return SystemDescription(title=body["title"], narrative=body["narrative"],
                             components=tuple(components), tags=tags)


def create_app(runner_factory: Callable[[], AgentRunner],
               snapshot_dir: Optional[str] = None,
               long_poll_s: float = LONG_POLL_S) -> FastAPI:
    runs: dict[str, SessionRun] = {}
    restored: dict[str, RestoredSession] = {}
    store_lock = threading.Lock()
    token = os.environ.get(AUTH_TOKEN_ENV)

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        yield
        if snapshot_dir:
            _write_snapshots(Path(snapshot_dir), runs)

    app = FastAPI(title="threatagent service", lifespan=lifespan)

    if snapshot_dir:
        _load_snapshots(Path(snapshot_dir), restored)

    @app.middleware("http")
    async def auth(request: Request, call_next):
        if token and request.url.path != "/healthz":
            supplied = request.headers.get("authorization", "")
            if supplied != f"Bearer {token}":
                return _error(401, "unauthorized", "missing or bad bearer token")
        return await call_next(request)

    @app.get("/healthz")
    def healthz():
        return PlainTextResponse("ok")

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _error(400, "bad_request", "body must be JSON")
        if not isinstance(body, dict):
            return _error(400, "bad_request", "body must be a JSON object")
        try:
            desc = _description_from_body(body)
        except ValueError as e:
            return _error(400, "bad_request", str(e))
        try:
            runner = runner_factory()
        except Exception as e:
            return _error(503, "provider_unavailable", str(e))
        session = runner.start_session(desc)
        session.session_id = uuid.uuid4().hex  # service-scoped id
        run = SessionRun(runner, session)
        with store_lock:
            runs[session.session_id] = run
        run.advance_async()
        return JSONResponse(status_code=201, content=run.snapshot())

    def _get_run(session_id: str) -> Optional[SessionRun]:
        with store_lock:
            return runs.get(session_id)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        run = _get_run(session_id)
        if run:
            return run.snapshot()
        rest = restored.get(session_id)
        if rest:
            return {
                "session_id": rest.session_id,
                "state": rest.state,
                "revision": rest.revision,
                "pending_questions": [],
                "links": {"events": f"/sessions/{session_id}/events",
                          "model": f"/sessions/{session_id}/model"},
            }
        return _error(404, "not_found", f"no session {session_id}")

    @app.post("/sessions/{session_id}/answers", status_code=202)
    async def post_answers(session_id: str, request: Request):
        run = _get_run(session_id)
        if run is None:
            return _error(404, "not_found", f"no session {session_id}")
        try:
            body = await request.json()
        except Exception:
            return _error(400, "bad_request", "body must be JSON")
        if not isinstance(body, list):
            return _error(400, "bad_request",
                          "body must be a list of {question_id, answer}")
        answers = {}
        for item in body:
            if not isinstance(item, dict) or "question_id" not in item:
                return _error(400, "bad_request", "each item needs question_id")
            answers[str(item["question_id"])] = str(item.get("answer", ""))
        with run.lock:
            if run.session.state is not AgentState.AWAITING_CLARIFICATION:
                return _error(409, "wrong_state",
                              f"session is {run.session.state.value}")
            try:
                run.runner.submit_answers(run.session, answers)
            except UnknownQuestionId as e:
                return _error(422, "unknown_question_id", str(e))
        run._notify()
        run.advance_async()
        return JSONResponse(status_code=202,
                            content={"accepted": len(answers)})

    @app.get("/sessions/{session_id}/events")
    def get_events(session_id: str, after: int = 0):
        run = _get_run(session_id)
        if run is None:
            rest = restored.get(session_id)
            if rest:
                return {"events": [e for e in rest.events
                                   if e.get("seq", 0) > after]}
            return _error(404, "not_found", f"no session {session_id}")
        events = run.events_after(after)
        if not events:
            with run.changed:
                run.changed.wait(timeout=long_poll_s)
            events = run.events_after(after)
        return {"events": [
            {"seq": e.seq, "at": e.at, "kind": e.kind, "payload": e.payload}
            for e in events
        ]}

    @app.get("/sessions/{session_id}/model")
    def get_model(session_id: str):
        run = _get_run(session_id)
        if run is None:
            rest = restored.get(session_id)
            if rest is not None:
                if rest.model_text is None:
                    return _error(409, "not_delivered",
                                  f"session is {rest.state}")
                return PlainTextResponse(rest.model_text,
                                         media_type="application/json")
            return _error(404, "not_found", f"no session {session_id}")
        with run.lock:
            if run.session.state is not AgentState.DELIVERED:
                return _error(409, "not_delivered",
                              f"session is {run.session.state.value}")
            text = render_canonical(run.session.draft)
        return PlainTextResponse(text, media_type="application/json")

    return app


def _write_snapshots(directory: Path, runs: dict[str, SessionRun]):
    directory.mkdir(parents=True, exist_ok=True)
    index = []
    for session_id, run in runs.items():
        with run.lock:
            s = run.session
            (directory / f"{session_id}.events.jsonl").write_text(
                s.events_jsonl(), encoding="utf-8")
            index.append({
                "session_id": session_id,
                "state": s.state.value,
                "revision": s.draft.revision if s.draft else None,
            })
    (directory / "index.json").write_text(
        json.dumps(index, indent=2) + "\n", encoding="utf-8")


def _load_snapshots(directory: Path, restored: dict[str, RestoredSession]):
    index_path = directory / "index.json"
    if not index_path.exists():
        return
    for entry in json.loads(index_path.read_text(encoding="utf-8")):
        session_id = entry["session_id"]
        events_path = directory / f"{session_id}.events.jsonl"
        events = []
        model_text = None
        if events_path.exists():
            for line in events_path.read_text(encoding="utf-8").splitlines():
                event = json.loads(line)
                events.append(event)
                if event.get("kind") == "model_parsed" \
                        and entry.get("state") == "delivered":
                    model_text = event["payload"].get("canonical")
        restored[session_id] = RestoredSession(
            session_id=session_id,
            state=entry.get("state", "failed"),
            revision=entry.get("revision"),
            events=events,
            model_text=model_text,
        )
