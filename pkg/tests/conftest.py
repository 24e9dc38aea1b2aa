from __future__ import annotations

from pathlib import Path

import pytest

from cyrange import ingest

REPO = Path(__file__).resolve().parent.parent
FIXTURES = REPO / "fixtures"
GOLDENS = Path(__file__).resolve().parent / "goldens"

CORPUS_TOOLS = ("openvas", "nmap", "nikto", "msf", "zap_msf2", "zap_msf3")


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def goldens_dir() -> Path:
    return GOLDENS


def load_corpus(name: str) -> ingest.FindingSet:
    return ingest.read_jsonl((FIXTURES / "corpus" / f"{name}.jsonl").read_text(encoding="utf-8"))


def load_merged(env: str) -> ingest.FindingSet:
    return ingest.merge_all(load_corpus(f"{tool}_{env}") for tool in CORPUS_TOOLS)


@pytest.fixture(scope="session")
def seven_step_text() -> str:
    return (FIXTURES / "scenarios" / "seven_step.yaml").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def seven_step_broken_text() -> str:
    return (FIXTURES / "scenarios" / "seven_step_broken.yaml").read_text(encoding="utf-8")
