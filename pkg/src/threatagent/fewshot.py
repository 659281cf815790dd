"""Curated example corpus and deterministic relevance selection."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .model import (
    InvalidModel,
    ParseFailure,
    SystemDescription,
    ThreatModel,
    parse_canonical,
)
from .prompting import PromptClass


class CorpusInvalid(Exception):
    def __init__(self, file: str, detail: str):
        self.file = file
        self.detail = detail
        super().__init__(f"{file}: {detail}")


@dataclass(frozen=True)
class FewShotExample:
    example_id: str
    domain_tags: tuple[str, ...]
    complexity: PromptClass
    prompt_text: str
    canonical_model: ThreatModel


def load_corpus(directory) -> list[FewShotExample]:
    """Load every <id>.model.json + <id>.meta.json pair under directory.

    Any invalid example aborts the load, naming the offending file.
    """
    directory = Path(directory)
    model_files = sorted(directory.glob("*.model.json"))
    if not model_files:
        raise CorpusInvalid(str(directory), "no examples found")

    examples: list[FewShotExample] = []
    for model_path in model_files:
        example_id = model_path.name[: -len(".model.json")]
        meta_path = directory / f"{example_id}.meta.json"
        if not meta_path.exists():
            raise CorpusInvalid(str(model_path), "missing sidecar meta file")
        try:
            model = parse_canonical(model_path.read_text(encoding="utf-8"))
        except (ParseFailure, InvalidModel) as e:
            raise CorpusInvalid(str(model_path), str(e)) from e
        try:
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
            tags = tuple(str(t).lower() for t in meta["domain_tags"])
            complexity = PromptClass(meta["complexity"])
            prompt_text = str(meta["prompt_text"])
        except (json.JSONDecodeError, KeyError, ValueError) as e:
            raise CorpusInvalid(str(meta_path), f"bad metadata: {e}") from e
        if not tags:
            raise CorpusInvalid(str(meta_path), "domain_tags must be non-empty")
        examples.append(FewShotExample(
            example_id=example_id,
            domain_tags=tags,
            complexity=complexity,
            prompt_text=prompt_text,
            canonical_model=model,
        ))
    return examples


def select_examples(desc: SystemDescription,
                    corpus: list[FewShotExample],
                    k: int) -> list[FewShotExample]:
    """Rank by tag overlap with the description, ties by example_id."""
    if k <= 0:
        raise ValueError("k must be positive")
    if not corpus:
        raise ValueError("corpus must be non-empty")
    desc_tags = {t.lower() for t in desc.tags}

    def score(ex: FewShotExample) -> int:
        return len(desc_tags & set(ex.domain_tags))

    ranked = sorted(corpus, key=lambda ex: (-score(ex), ex.example_id))
    return ranked[: min(k, len(ranked))]
