"""Shared test helpers: compact paper construction and random corpora."""

import datetime

import numpy as np
import pytest

from topicdrift.corpus import CodeScheme, Corpus, EligibilityFilter, Paper


def make_paper(pid, date, authors, codes=(), refs=(), institutions=None):
    if isinstance(date, str):
        date = datetime.date.fromisoformat(date)
    return Paper(
        paper_id=pid,
        date=date,
        authors=tuple(authors),
        codes=tuple(codes),
        refs=tuple(refs),
        institutions=institutions,
    )


def random_corpus(seed, n_papers=50, n_authors=8, vocab=12, min_papers=1, max_codes=4):
    """Random multi-topic corpus over a small code vocabulary."""
    rng = np.random.default_rng(seed)
    codes = [f"{i:02d}.{j:02d}" for i in range(vocab) for j in range(3)]
    papers = []
    base = datetime.date(2000, 1, 1)
    for k in range(n_papers):
        n_codes = int(rng.integers(1, max_codes + 1))
        chosen = rng.choice(len(codes), size=n_codes, replace=False)
        n_auth = int(rng.integers(1, 4))
        authors = rng.choice(n_authors, size=n_auth, replace=False)
        papers.append(
            make_paper(
                f"p{k:04d}",
                base + datetime.timedelta(days=int(rng.integers(0, 4000))),
                [f"a{i}" for i in authors],
                [codes[i] for i in chosen],
            )
        )
    return Corpus.from_papers(papers, EligibilityFilter(min_papers=min_papers))


@pytest.fixture
def scheme():
    return CodeScheme()


# One verdict line per acceptance criterion, echoed after the test summary
# (pytest captures file descriptors, so the tests cannot print them directly).
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_line("")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
