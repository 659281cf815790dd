import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from threatagent.fewshot import load_corpus
from threatagent.knowledge import load_snapshot
from threatagent.model import SystemDescription

KB_DIR = ROOT / "fixtures" / "kb"
SCRIPTS_DIR = ROOT / "fixtures" / "scripts"
PROMPTS_DIR = ROOT / "fixtures" / "prompts"
CORPUS_DIR = ROOT / "corpus"
DESCRIPTIONS_DIR = ROOT / "fixtures" / "descriptions"


@pytest.fixture(scope="session")
def kb():
    return load_snapshot(KB_DIR)


@pytest.fixture(scope="session")
def corpus():
    return load_corpus(CORPUS_DIR)


@pytest.fixture
def drone_desc():
    text = (DESCRIPTIONS_DIR / "drone.txt").read_text(encoding="utf-8")
    lines = text.splitlines()
    return SystemDescription(title=lines[0],
                             narrative="\n".join(lines[1:]).strip(),
                             tags=("transport", "drone"))


def script_path(name: str) -> str:
    return str(SCRIPTS_DIR / name)
