"""Orchestrator state machine driving one session from user request to
delivered threat model: draft, verify/repair, review, clarification pause,
refinement, delivery.

A session is single-threaded; distinct sessions may run concurrently
sharing the frozen knowledge snapshot and corpus.
"""

from __future__ import annotations

import json
import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from . import extraction, prompting, review as review_mod
from .fewshot import FewShotExample, select_examples
from .knowledge import KbSnapshot
from .model import SystemDescription, ThreatModel, render_canonical
from .provider import Clock, ProviderError, SystemClock, rfc3339
from .review import ClarificationQuestion, FindingSeverity

PLAN_STEPS = (
    "asset identification",
    "entry point analysis",
    "threat mapping",
    "vulnerability assessment",
    "mitigation suggestions",
)


class AgentState(Enum):
    PLANNING = "planning"
    DRAFTING = "drafting"
    VERIFYING = "verifying"
    REVIEWING = "reviewing"
    AWAITING_CLARIFICATION = "awaiting_clarification"
    REFINING = "refining"
    DELIVERED = "delivered"
    FAILED = "failed"


TERMINAL_STATES = {AgentState.DELIVERED, AgentState.FAILED}

# legal transition relation, asserted on every recorded transition
TRANSITIONS = {
    (AgentState.PLANNING, AgentState.DRAFTING),
    (AgentState.DRAFTING, AgentState.VERIFYING),
    (AgentState.VERIFYING, AgentState.VERIFYING),
    (AgentState.VERIFYING, AgentState.REVIEWING),
    (AgentState.VERIFYING, AgentState.FAILED),
    (AgentState.DRAFTING, AgentState.FAILED),
    (AgentState.REFINING, AgentState.FAILED),
    (AgentState.REVIEWING, AgentState.AWAITING_CLARIFICATION),
    (AgentState.REVIEWING, AgentState.DELIVERED),
    (AgentState.AWAITING_CLARIFICATION, AgentState.REFINING),
    (AgentState.REFINING, AgentState.VERIFYING),
}


class ConfigInvalid(Exception):
    pass


class WrongState(Exception):
    pass


class IllegalTransition(AssertionError):
    pass


@dataclass(frozen=True)
class AgentConfig:
    a_max: int = 2            # format repairs per generation
    c_max: int = 2            # clarification rounds
    k_examples: int = 3
    q_max: int = 5
    unit_limit: Optional[int] = None
    contract_version: str = "1"

    def as_dict(self) -> dict:
        return {
            "a_max": self.a_max, "c_max": self.c_max,
            "k_examples": self.k_examples, "q_max": self.q_max,
            "unit_limit": self.unit_limit,
            "contract_version": self.contract_version,
        }


@dataclass(frozen=True)
class SessionEvent:
    seq: int
    at: str
    kind: str
    payload: dict

    def to_json(self) -> str:
        return json.dumps(
            {"seq": self.seq, "at": self.at, "kind": self.kind,
             "payload": self.payload},
            ensure_ascii=False, sort_keys=True)


@dataclass
class Session:
    session_id: str
    state: AgentState
    description: SystemDescription
    plan: tuple[str, ...]
    config: AgentConfig
    draft: Optional[ThreatModel] = None
    pending_questions: list[ClarificationQuestion] = field(default_factory=list)
    qa_history: list[tuple[str, str]] = field(default_factory=list)
    events: list[SessionEvent] = field(default_factory=list)
    repair_attempts: int = 0       # cumulative across the session
    clarify_rounds: int = 0
    provider_calls: int = 0
    # internal bookkeeping
    _round_repairs: int = 0
    _pending_prompt: Optional[str] = None
    _last_response: Optional[str] = None
    _expected_revision: Optional[int] = None
    _last_round_qa: list[tuple[str, str]] = field(default_factory=list)
    _question_counter: int = 0

    def events_jsonl(self) -> str:
        return "".join(e.to_json() + "\n" for e in self.events)


AnswerFn = Callable[[list[ClarificationQuestion]], dict[str, str]]


class AgentRunner:
    """Owns the shared collaborators and applies operations to sessions."""

    def __init__(self, kb: KbSnapshot, corpus: list[FewShotExample],
                 provider, config: Optional[AgentConfig] = None,
                 clock: Optional[Clock] = None):
        self.kb = kb
        self.corpus = corpus
        self.provider = provider
        self.config = config or AgentConfig()
        self.clock = clock or SystemClock()

    # -- event plumbing ------------------------------------------------

    def _emit(self, session: Session, kind: str, payload: dict):
        session.events.append(SessionEvent(
            seq=len(session.events) + 1,
            at=rfc3339(self.clock.now()),
            kind=kind,
            payload=payload,
        ))

    def _transition(self, session: Session, to: AgentState):
        frm = session.state
        if (frm, to) not in TRANSITIONS:
            raise IllegalTransition(f"{frm.value} -> {to.value}")
        session.state = to
        self._emit(session, "transition", {"from": frm.value, "to": to.value})

    # -- operations ------------------------------------------------------

    def start_session(self, desc: SystemDescription) -> Session:
        if not desc.title.strip() or not desc.narrative.strip():
            raise ConfigInvalid("description title and narrative must be non-empty")
        names = [c.name.lower() for c in desc.components]
        if len(names) != len(set(names)):
            raise ConfigInvalid("component names must be unique (case-insensitive)")
        if self.config.a_max < 0 or self.config.c_max < 0:
            raise ConfigInvalid("a_max and c_max must be non-negative")
        session = Session(
            session_id=uuid.uuid4().hex,
            state=AgentState.PLANNING,
            description=desc,
            plan=PLAN_STEPS,
            config=self.config,
        )
        self._emit(session, "started", {
            "title": desc.title,
            "plan": list(PLAN_STEPS),
            "config": self.config.as_dict(),
        })
        return session

    def _call_provider(self, session: Session, prompt: str) -> Optional[str]:
        """One provider call; logs the exchange or fails the session."""
        try:
            exchange = self.provider.complete(prompt)
        except ProviderError as e:
            session.provider_calls += 1
            self._emit(session, "provider_error", {"cause": str(e)})
            self._transition(session, AgentState.FAILED)
            return None
        session.provider_calls += 1
        self._emit(session, "exchange", {
            "provider": exchange.provider_name,
            "attempt": exchange.attempt,
            "latency_ms": exchange.latency_ms,
            "completed_at": exchange.completed_at,
            "response_text": exchange.response_text,
        })
        return exchange.response_text

    def step(self, session: Session) -> Session:
        """Execute exactly one state-machine transition."""
        if session.state in TERMINAL_STATES:
            raise WrongState(f"session is terminal ({session.state.value})")
        if session.state is AgentState.AWAITING_CLARIFICATION:
            raise WrongState("awaiting clarification; call submit_answers")

        if session.state is AgentState.PLANNING:
            examples = select_examples(
                session.description, self.corpus, self.config.k_examples
            ) if self.corpus else []
            assembled = prompting.assemble_generation_prompt(
                session.description, examples,
                contract_version=self.config.contract_version,
                unit_limit=self.config.unit_limit,
            )
            session._pending_prompt = assembled.text
            self._emit(session, "prompt_assembled", {
                "class": assembled.prompt_class.value,
                "examples": list(assembled.examples_included),
                "units": assembled.total_unit_estimate,
            })
            self._transition(session, AgentState.DRAFTING)

        elif session.state is AgentState.DRAFTING:
            response = self._call_provider(session, session._pending_prompt)
            if response is None:
                return session
            session._last_response = response
            self._transition(session, AgentState.VERIFYING)

        elif session.state is AgentState.VERIFYING:
            result = extraction.extract_model(session._last_response or "")
            if isinstance(result, extraction.Parsed):
                expected = session._expected_revision
                if expected is not None and result.model.revision != expected:
                    result = extraction.Repairable(
                        f"revision must be {expected}, got {result.model.revision}")
            if isinstance(result, extraction.Parsed):
                session.draft = result.model
                self._emit(session, "model_parsed", {
                    "revision": result.model.revision,
                    "canonical": render_canonical(result.model),
                })
                self._transition(session, AgentState.REVIEWING)
            elif (isinstance(result, extraction.Repairable)
                    and session._round_repairs < self.config.a_max):
                self._emit(session, "repair", {"detail": result.detail})
                repair = prompting.assemble_repair_prompt(
                    session._last_response or "", result.detail)
                session._round_repairs += 1
                session.repair_attempts += 1
                response = self._call_provider(session, repair)
                if response is None:
                    return session
                session._last_response = response
                self._transition(session, AgentState.VERIFYING)
            else:
                detail = (result.detail if isinstance(result, extraction.Repairable)
                          else result.reason)
                self._emit(session, "error", {"cause": f"unusable output: {detail}"})
                self._transition(session, AgentState.FAILED)

        elif session.state is AgentState.REVIEWING:
            findings = review_mod.review(session.draft, self.kb)
            self._emit(session, "findings", {
                "findings": [
                    {"rule": f.rule_id, "severity": f.severity.value,
                     "path": f.subject_path, "detail": f.detail}
                    for f in findings
                ],
            })
            blocking = [f for f in findings
                        if f.severity is FindingSeverity.BLOCKING]
            if not blocking:
                self._emit(session, "delivered",
                           {"revision": session.draft.revision})
                self._transition(session, AgentState.DELIVERED)
            elif session.clarify_rounds < self.config.c_max:
                questions = review_mod.generate_questions(
                    blocking, q_max=self.config.q_max)
                renumbered = []
                for q in questions:
                    session._question_counter += 1
                    renumbered.append(ClarificationQuestion(
                        question_id=f"Q{session._question_counter}",
                        text=q.text, rationale=q.rationale,
                        target_path=q.target_path))
                session.pending_questions = renumbered
                self._emit(session, "questions", {
                    "questions": [
                        {"id": q.question_id, "text": q.text,
                         "rationale": q.rationale, "target": q.target_path}
                        for q in renumbered
                    ],
                })
                self._transition(session, AgentState.AWAITING_CLARIFICATION)
            else:
                self._emit(session, "annotation", {
                    "note": "unresolved findings",
                    "blocking": [f.detail for f in blocking],
                })
                self._emit(session, "delivered",
                           {"revision": session.draft.revision})
                self._transition(session, AgentState.DELIVERED)

        elif session.state is AgentState.REFINING:
            prompt = prompting.assemble_refinement_prompt(
                session.draft, list(session._last_round_qa))
            session._expected_revision = session.draft.revision + 1
            session._round_repairs = 0  # fresh repair budget per generation
            response = self._call_provider(session, prompt)
            if response is None:
                return session
            session._last_response = response
            self._transition(session, AgentState.VERIFYING)

        return session

    def submit_answers(self, session: Session,
                       answers: dict[str, str]) -> Session:
        if session.state is not AgentState.AWAITING_CLARIFICATION:
            raise WrongState(
                f"cannot submit answers in state {session.state.value}")
        context = review_mod.integrate_answers(
            session.draft, session.pending_questions, answers)
        session.qa_history.extend(context.qa)
        session._last_round_qa = list(context.qa)
        session.pending_questions = []
        session.clarify_rounds += 1
        self._emit(session, "answers", {
            "qa": [{"question": q, "answer": a} for q, a in context.qa],
        })
        self._transition(session, AgentState.REFINING)
        return session

    def run_to_completion(self, session: Session,
                          answer_source: Optional[AnswerFn] = None) -> Session:
        """Loop step/submit until the session is terminal."""
        while session.state not in TERMINAL_STATES:
            if session.state is AgentState.AWAITING_CLARIFICATION:
                answers = answer_source(session.pending_questions) \
                    if answer_source else {}
                self.submit_answers(session, answers)
            else:
                self.step(session)
        return session


def max_provider_calls(config: AgentConfig) -> int:
    """Upper bound on provider calls for one session."""
    return 1 + config.a_max + config.c_max * (1 + config.a_max)


def replay_events(events: list[SessionEvent]) -> dict:
    """Fold an event log back into the observable final session summary."""
    state = AgentState.PLANNING.value
    revision = None
    repair_attempts = 0
    clarify_rounds = 0
    provider_calls = 0
    for e in events:
        if e.kind == "transition":
            state = e.payload["to"]
        elif e.kind == "model_parsed":
            revision = e.payload["revision"]
        elif e.kind == "repair":
            repair_attempts += 1
        elif e.kind == "answers":
            clarify_rounds += 1
        elif e.kind in ("exchange", "provider_error"):
            provider_calls += 1
    return {
        "state": state,
        "revision": revision,
        "repair_attempts": repair_attempts,
        "clarify_rounds": clarify_rounds,
        "provider_calls": provider_calls,
    }
