import os

import pytest
from hypothesis import settings

from memhdc.corpus import load_corpus
from memhdc.synth import make_markov_corpus

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

# filled by tests/test_acceptance.py, printed in the terminal summary
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def markov_dir(tmp_path_factory):
    """Six overlapping-alphabet Markov languages: hard enough to expose encoder noise."""
    return make_markov_corpus(tmp_path_factory.mktemp("markov"), n_languages=6, samples_per_language=150,
                              length_range=(80, 200), concentration=0.3, seed=0)


@pytest.fixture(scope="session")
def markov_corpus(markov_dir):
    return load_corpus(markov_dir)


@pytest.fixture(scope="session")
def disjoint_dir(tmp_path_factory):
    """Three languages with disjoint letter sets."""
    return make_markov_corpus(tmp_path_factory.mktemp("disjoint"), n_languages=3, samples_per_language=40,
                              disjoint_alphabets=True, seed=1)


@pytest.fixture(scope="session")
def full_corpus_dir(tmp_path_factory):
    """The reference corpus if MEMHDC_CORPUS points at it, else the wordfreq substitute."""
    real = os.environ.get("MEMHDC_CORPUS")
    if real:
        return real
    from memhdc.synth import make_wordfreq_corpus

    return make_wordfreq_corpus(tmp_path_factory.mktemp("wordfreq"), samples_per_language=1000, seed=0)
