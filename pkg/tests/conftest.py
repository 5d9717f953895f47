import json
from pathlib import Path

import pytest

from vcreplay import Schedule, run

CORPUS = Path(__file__).resolve().parent.parent / "corpus"


def corpus_source(name: str) -> str:
    return (CORPUS / f"{name}.mp").read_text()


def corpus_schedule(name: str, variant: str | None = None) -> Schedule:
    stem = f"{name}.{variant}" if variant else name
    doc = json.loads((CORPUS / f"{stem}.schedule.json").read_text())
    if "moves" in doc:
        return Schedule.explicit(doc["moves"])
    return Schedule.seeded(doc["seed"])


def run_corpus(name: str, variant: str | None = None):
    return run(corpus_source(name), corpus_schedule(name, variant))


@pytest.fixture
def corpus_run():
    return run_corpus
