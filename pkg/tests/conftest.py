import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from hdrpatchmax import corpus, features  # noqa: E402

# (criterion number, title, passed, detail) recorded by test_acceptance.py
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, ok, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {title}  [{detail}]")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def mini_corpus():
    """The generated mini corpus held in memory (30 clips, 10 contents x 3 levels)."""
    return corpus.build_corpus(**corpus.MINI_CORPUS)


@pytest.fixture(scope="session")
def mini_features(mini_corpus):
    """summary-v1 feature matrix of the mini corpus, extracted once per session."""
    X = np.array([features.extract_frames(item["luma"], layout="summary-v1") for item in mini_corpus])
    return X


@pytest.fixture(scope="session")
def mini_corpus_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("mini_corpus")
    corpus.write_mini_corpus(str(d))
    return d


@pytest.fixture(scope="session")
def corpus_feature_csv(mini_corpus_dir):
    """full-v1 features of every mini-corpus clip, extracted once through the CLI."""
    from hdrpatchmax import cli

    out = mini_corpus_dir / "features_full.csv"
    videos = sorted(str(p) for p in mini_corpus_dir.glob("*.yuv"))
    assert cli.main(["extract", *videos, "--out", str(out), "--threads", "1"]) == 0
    return out
