"""Command-line surface: generate, kb ingest, validate, bench, serve.

Exit codes: 0 success, 1 usage/config error, 2 domain failure.
"""

from __future__ import annotations

import json
import statistics
import sys
from pathlib import Path

import click

from .agent import AgentConfig, AgentRunner, AgentState
from .fewshot import CorpusInvalid, load_corpus
from .knowledge import (
    EmptySource,
    KbSnapshot,
    MalformedSource,
    ground,
    load_snapshot,
)
from .model import (
    ComponentHint,
    ComponentKind,
    InvalidModel,
    ParseFailure,
    SystemDescription,
    parse_canonical,
    render_canonical,
)
from .prompting import classify_prompt
from .provider import (
    API_KEY_ENV,
    FakeClock,
    ProviderError,
    RemoteProvider,
    ScriptedProvider,
    SystemClock,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DOMAIN = 2


def read_config(path) -> dict[str, str]:
    """Flat key = value config file; '#' starts a comment line."""
    out: dict[str, str] = {}
    if path is None:
        return out
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise click.ClickException(f"bad config line: {line!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def read_description(path) -> SystemDescription:
    """Plain text (title line + narrative) or a JSON description payload."""
    text = Path(path).read_text(encoding="utf-8")
    if path.endswith(".json"):
        doc = json.loads(text)
        components = tuple(
            ComponentHint(name=c["name"],
                          kind=ComponentKind(c.get("kind", "other")),
                          detail=c.get("detail"))
            for c in doc.get("components", []))
        return SystemDescription(
            title=doc["title"], narrative=doc["narrative"],
            components=components,
            tags=tuple(str(t).lower() for t in doc.get("tags", [])))
    lines = text.splitlines()
    if not lines:
        raise click.ClickException(f"{path}: empty description file")
    title = lines[0].strip()
    rest = "\n".join(lines[1:]).strip()
    tags: tuple[str, ...] = ()
    if rest.lower().startswith("tags:"):
        tag_line, _, rest2 = rest.partition("\n")
        tags = tuple(t.strip().lower() for t in tag_line[5:].split(",") if t.strip())
        rest = rest2.strip()
    return SystemDescription(title=title, narrative=rest or title, tags=tags)


def build_provider(kind, script, endpoint, deadline_s, retries, clock):
    if kind == "scripted":
        if not script:
            raise click.ClickException("--script is required with --provider scripted")
        return ScriptedProvider.from_script_file(script, clock=clock)
    if kind == "remote":
        if not endpoint:
            raise click.ClickException("--endpoint (or provider.endpoint in config) "
                                       "is required with --provider remote")
        try:
            return RemoteProvider(endpoint, deadline_s=deadline_s,
                                  retries=retries, clock=clock)
        except ProviderError as e:
            raise click.ClickException(str(e))
    raise click.ClickException(f"unknown provider kind: {kind}")


def load_kb(kb_dir) -> KbSnapshot:
    if kb_dir and Path(kb_dir).is_dir():
        return load_snapshot(kb_dir)
    return KbSnapshot().freeze()


@click.group()
def main():
    """Agentic threat-modeling engine."""


def _common_session_options(f):
    for opt in reversed([
        click.option("--config", "config_path", type=click.Path(exists=True),
                     default=None, help="Flat key=value config file."),
        click.option("--kb-dir", default=None, type=click.Path()),
        click.option("--corpus-dir", default=None, type=click.Path()),
        click.option("--provider", "provider_kind", default=None,
                     type=click.Choice(["scripted", "remote"])),
        click.option("--script", default=None, type=click.Path(),
                     help="Scripted provider response file."),
        click.option("--endpoint", default=None, help="Remote provider URL."),
        click.option("--deterministic", is_flag=True,
                     help="Use a deterministic clock (scripted runs only)."),
    ]):
        f = opt(f)
    return f


def _resolve(flag_value, config, key, default=None):
    if flag_value is not None:
        return flag_value
    return config.get(key, default)


def _make_runner(config_path, kb_dir, corpus_dir, provider_kind, script,
                 endpoint, deterministic, agent_config):
    config = read_config(config_path)
    kb_dir = _resolve(kb_dir, config, "kb_dir")
    corpus_dir = _resolve(corpus_dir, config, "corpus_dir")
    provider_kind = _resolve(provider_kind, config, "provider.kind", "remote")
    script = _resolve(script, config, "provider.script_path")
    endpoint = _resolve(endpoint, config, "provider.endpoint")
    deadline_s = float(config.get("provider.deadline_s", "60"))
    retries = int(config.get("provider.retries", "2"))

    clock = FakeClock() if deterministic else SystemClock()
    provider = build_provider(provider_kind, script, endpoint,
                              deadline_s, retries, clock)
    kb = load_kb(kb_dir)
    corpus = []
    if corpus_dir:
        corpus = load_corpus(corpus_dir)
    return AgentRunner(kb, corpus, provider, agent_config, clock=clock)


def _answer_source(answers_path, interactive):
    """Answers from a JSON file (object keyed by question id, or list in
    ask order) or interactively line-per-question after a `Q<k>>` prompt."""
    if answers_path:
        doc = json.loads(Path(answers_path).read_text(encoding="utf-8"))

        def from_file(questions):
            if isinstance(doc, list):
                return {q.question_id: a for q, a in zip(questions, doc)}
            return {q.question_id: doc[q.question_id]
                    for q in questions if q.question_id in doc}
        return from_file

    if interactive:
        def from_stdin(questions):
            answers = {}
            for k, q in enumerate(questions, start=1):
                click.echo(f"{q.text}")
                answer = click.prompt(f"Q{k}>", default="", show_default=False)
                if answer.strip():
                    answers[q.question_id] = answer
            return answers
        return from_stdin

    return lambda questions: {}


@main.command()
@_common_session_options
@click.option("--input", "input_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--trace", "trace_path", type=click.Path(), default=None)
@click.option("--answers", "answers_path", type=click.Path(exists=True),
              default=None, help="Scripted clarification answers (JSON).")
@click.option("--a-max", default=2, show_default=True)
@click.option("--c-max", default=2, show_default=True)
@click.option("--k-examples", default=3, show_default=True)
def generate(config_path, kb_dir, corpus_dir, provider_kind, script, endpoint,
             deterministic, input_path, out_path, trace_path, answers_path,
             a_max, c_max, k_examples):
    """Run one threat-modeling session."""
    try:
        agent_config = AgentConfig(a_max=a_max, c_max=c_max,
                                   k_examples=k_examples)
        runner = _make_runner(config_path, kb_dir, corpus_dir, provider_kind,
                              script, endpoint, deterministic, agent_config)
        if input_path:
            desc = read_description(input_path)
        elif sys.stdin.isatty():
            title = click.prompt("System title")
            narrative = click.prompt("Describe the system")
            desc = SystemDescription(title=title, narrative=narrative)
        else:
            raise click.ClickException("--input is required in headless mode")
        answer_source = _answer_source(answers_path, sys.stdin.isatty())
    except (click.ClickException, CorpusInvalid, MalformedSource,
            json.JSONDecodeError, KeyError, ValueError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_USAGE)

    session = runner.start_session(desc)
    runner.run_to_completion(session, answer_source)

    if trace_path:
        Path(trace_path).write_text(session.events_jsonl(), encoding="utf-8")
    if session.state is AgentState.DELIVERED:
        rendered = render_canonical(session.draft)
        if out_path:
            Path(out_path).write_text(rendered, encoding="utf-8")
        else:
            click.echo(rendered, nl=False)
        sys.exit(EXIT_OK)
    click.echo("session failed; see trace for details", err=True)
    sys.exit(EXIT_DOMAIN)


@main.group()
def kb():
    """Knowledge-base management."""


_KB_TARGETS = {
    "attack": ("attack.json", "ingest_attack_stix", "techniques"),
    "nvd": ("nvd.json", "ingest_nvd_feed", "cves"),
    "nist": ("nist.csv", "ingest_nist_catalog", "controls"),
    "advisories": ("advisories.csv", "ingest_advisories", "advisories"),
}


@kb.command("ingest")
@click.option("--source", required=True,
              type=click.Choice(sorted(_KB_TARGETS)))
@click.option("--file", "file_path", required=True, type=click.Path(exists=True))
@click.option("--kb-dir", required=True, type=click.Path())
def kb_ingest(source, file_path, kb_dir):
    """Validate a source file and install it into the snapshot directory."""
    document = Path(file_path).read_text(encoding="utf-8")
    target_name, method, label = _KB_TARGETS[source]
    snapshot = KbSnapshot()
    try:
        count = getattr(snapshot, method)(document)
    except (MalformedSource, EmptySource) as e:
        click.echo(f"error ({source}): {e}", err=True)
        sys.exit(EXIT_USAGE)
    kb_path = Path(kb_dir)
    kb_path.mkdir(parents=True, exist_ok=True)
    (kb_path / target_name).write_text(document, encoding="utf-8")
    for warning in snapshot.warnings:
        click.echo(f"warning: {warning}", err=True)
    click.echo(f"{label} loaded: {count}")
    sys.exit(EXIT_OK)


@main.command()
@click.argument("path", type=click.Path())
@click.option("--kb-dir", default=None, type=click.Path())
def validate(path, kb_dir):
    """Check a model file against the schema and the knowledge base."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_USAGE)
    try:
        m = parse_canonical(text)
    except ParseFailure as e:
        click.echo(f"error: not a threat-model document: {e}", err=True)
        sys.exit(EXIT_USAGE)
    except InvalidModel as e:
        click.echo("schema violations:")
        for v in e.violations:
            click.echo(f"  {v}")
        sys.exit(EXIT_DOMAIN)
    report = ground(m, load_kb(kb_dir))
    if report.is_empty():
        click.echo("ok: schema valid, all framework ids grounded")
        sys.exit(EXIT_OK)
    click.echo("grounding report:")
    for kind, field_path, ident in report.entries():
        click.echo(f"  {kind}: {ident} at {field_path}")
    sys.exit(EXIT_DOMAIN)


@main.command()
@_common_session_options
@click.option("--prompts", "prompts_dir", required=True, type=click.Path(exists=True))
@click.option("--repeat", "repeat", default=5, show_default=True)
@click.option("--report", "report_path", type=click.Path(), default=None)
def bench(config_path, kb_dir, corpus_dir, provider_kind, script, endpoint,
          deterministic, prompts_dir, repeat, report_path):
    """Latency benchmark: N sessions per prompt class, no clarifications."""
    if repeat < 1:
        click.echo("error: --repeat must be >= 1", err=True)
        sys.exit(EXIT_USAGE)
    prompt_files = sorted(Path(prompts_dir).glob("*.txt"))
    if not prompt_files:
        click.echo(f"error: no prompt files in {prompts_dir}", err=True)
        sys.exit(EXIT_USAGE)

    agent_config = AgentConfig(c_max=0)
    results: dict[str, dict] = {}
    provider_name = "?"
    for prompt_file in prompt_files:
        desc = read_description(str(prompt_file))
        klass = classify_prompt(desc).value
        latencies: list[int] = []
        for _ in range(repeat):
            try:
                runner = _make_runner(config_path, kb_dir, corpus_dir,
                                      provider_kind, script, endpoint,
                                      deterministic, agent_config)
            except (click.ClickException, CorpusInvalid, MalformedSource) as e:
                click.echo(f"error: {e}", err=True)
                sys.exit(EXIT_USAGE)
            provider_name = runner.provider.name
            session = runner.start_session(desc)
            runner.run_to_completion(session)
            if session.state is not AgentState.DELIVERED:
                click.echo(f"error: bench session failed for {prompt_file}",
                           err=True)
                sys.exit(EXIT_DOMAIN)
            latencies.extend(e.payload["latency_ms"] for e in session.events
                             if e.kind == "exchange")
        results[klass] = {
            "trials": repeat,
            "mean_ms": round(statistics.mean(latencies), 1),
            "min_ms": min(latencies),
            "max_ms": max(latencies),
            "provider": provider_name,
        }

    reference = "published baseline: 20-30 seconds per prompt (remote commercial API)"
    lines = [
        f"{'class':<10} {'trials':>6} {'mean_ms':>9} {'min_ms':>7} {'max_ms':>7}  provider",
    ]
    for klass, row in results.items():
        lines.append(f"{klass:<10} {row['trials']:>6} {row['mean_ms']:>9} "
                     f"{row['min_ms']:>7} {row['max_ms']:>7}  {row['provider']}")
    lines.append(reference)
    output = "\n".join(lines) + "\n"
    click.echo(output, nl=False)
    if report_path:
        Path(report_path).write_text(
            json.dumps({"classes": results, "reference": reference},
                       indent=2) + "\n",
            encoding="utf-8")
    sys.exit(EXIT_OK)


@main.command()
@_common_session_options
@click.option("--bind", default="127.0.0.1:8080", show_default=True)
@click.option("--snapshot-dir", default=None, type=click.Path())
def serve(config_path, kb_dir, corpus_dir, provider_kind, script, endpoint,
          deterministic, bind, snapshot_dir):
    """Run the session HTTP API."""
    import uvicorn

    from .service import create_app

    try:
        def runner_factory():
            return _make_runner(config_path, kb_dir, corpus_dir, provider_kind,
                                script, endpoint, deterministic, AgentConfig())
        runner_factory()  # fail fast on bad config
    except (click.ClickException, CorpusInvalid, MalformedSource) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_USAGE)

    app = create_app(runner_factory, snapshot_dir=snapshot_dir)
    host, _, port = bind.partition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or "8080"),
                log_level="warning")


if __name__ == "__main__":
    main()
