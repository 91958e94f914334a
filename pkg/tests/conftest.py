from __future__ import annotations

import os
import sys
from pathlib import Path

import pytest

from gusheh.corpus import load_corpus, load_tune

from synth import synthetic_corpus, write_corpus

DATA = Path(__file__).parent / "data"
CORPUS_ENV = "GUSHEH_CORPUS_DIR"


def dataset_dir() -> Path | None:
    """The released corpus, when GUSHEH_CORPUS_DIR points at it."""
    path = os.environ.get(CORPUS_ENV)
    return Path(path) if path and Path(path).is_dir() else None


@pytest.fixture
def daramad():
    """Opening of the Shour daramad as an 11-note data sheet."""
    return load_tune(DATA / "daramad_opening.csv")


@pytest.fixture(scope="session")
def fixture_corpus():
    return load_corpus(DATA / "corpus")


@pytest.fixture(scope="session")
def synth_corpus():
    return synthetic_corpus()


@pytest.fixture(scope="session")
def all_tunes(fixture_corpus, synth_corpus):
    tunes = list(fixture_corpus) + list(synth_corpus)
    if dataset_dir() is not None:
        tunes += load_corpus(dataset_dir())
    return tunes


@pytest.fixture
def corpus_dir(tmp_path):
    return write_corpus(synthetic_corpus(seed=3, n_tunes=4, lo=30, hi=60), tmp_path / "corpus")


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for i in sorted(acceptance.RESULTS):
        terminalreporter.write_line(acceptance.line(i))
