"""Corpus builders for when the 21-language corpus is not at hand.

``make_markov_corpus`` writes small synthetic "languages", each a random
first-order Markov chain over the 27-symbol alphabet; it is fully
self-contained and is what the test suite uses. ``make_wordfreq_corpus``
writes a larger substitute corpus of pseudo-sentences drawn word by word
from the real word-frequency tables shipped with the ``wordfreq`` package,
transliterated to ASCII with ``unidecode``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .device import make_rng
from .encoder import N_SYMBOLS, SPACE, normalize_text, symbols_to_text

TAG_MARKOV = 31
TAG_WORDS = 32

# the 21 European languages of the reference corpus, minus Estonian (absent
# from wordfreq), plus Catalan to keep 21 classes
WORDFREQ_LANGUAGES = (
    "bg", "ca", "cs", "da", "de", "el", "en", "es", "fi", "fr", "hu",
    "it", "lt", "lv", "nl", "pl", "pt", "ro", "sk", "sl", "sv",
)


def _write_language_files(out_dir, lines_by_lang: dict[str, list[str]]) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for lang, lines in lines_by_lang.items():
        (out / f"{lang}.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out


def markov_language(rng: np.random.Generator, concentration: float, alphabet: np.ndarray) -> np.ndarray:
    """27 x 27 transition matrix supported on ``alphabet`` (symbol indices, space always included)."""
    allowed = np.union1d(alphabet, [SPACE])
    trans = np.zeros((N_SYMBOLS, N_SYMBOLS))
    trans[:, allowed] = rng.dirichlet(np.full(len(allowed), concentration), size=N_SYMBOLS)
    trans[SPACE, SPACE] = 0.0
    trans[SPACE] /= trans[SPACE].sum()
    return trans


def sample_markov_text(rng: np.random.Generator, trans: np.ndarray, length: int) -> str:
    cdf = np.cumsum(trans, axis=1)
    state = SPACE
    out = []
    for u in rng.random(length):
        state = min(int(np.searchsorted(cdf[state], u * cdf[state, -1], side="right")), N_SYMBOLS - 1)
        out.append(state)
    return symbols_to_text(normalize_text(symbols_to_text(out)))


def make_markov_corpus(out_dir, n_languages: int = 3, samples_per_language: int = 100,
                       length_range: tuple[int, int] = (60, 160), concentration: float = 0.3,
                       disjoint_alphabets: bool = False, seed: int = 0) -> Path:
    """Write ``n_languages`` synthetic Markov languages named ``l00``, ``l01``, ...

    Lower ``concentration`` makes each language's transitions peakier and the
    languages easier to tell apart. With ``disjoint_alphabets`` the 26
    letters are dealt round-robin so no two languages share a letter.
    """
    letters = np.arange(26)
    lines = {}
    for lang in range(n_languages):
        rng = make_rng(seed, TAG_MARKOV, lang)
        alphabet = letters[lang::n_languages] if disjoint_alphabets else letters
        trans = markov_language(rng, concentration, alphabet)
        lengths = rng.integers(length_range[0], length_range[1] + 1, size=samples_per_language)
        lines[f"l{lang:02d}"] = [sample_markov_text(rng, trans, int(n)) for n in lengths]
    return _write_language_files(out_dir, lines)


def word_table(lang: str, vocab_size: int) -> tuple[list[str], np.ndarray]:
    """Top ``vocab_size`` words of ``lang`` transliterated to a-z, with normalized frequencies."""
    import wordfreq
    from unidecode import unidecode

    words, freqs = [], []
    for word in wordfreq.top_n_list(lang, vocab_size, wordlist="best"):
        ascii_word = symbols_to_text(normalize_text(unidecode(word)))
        if ascii_word and " " not in ascii_word:
            words.append(ascii_word)
            freqs.append(wordfreq.word_frequency(word, lang, wordlist="best"))
    p = np.asarray(freqs, dtype=np.float64)
    return words, p / p.sum()


def make_wordfreq_corpus(out_dir, languages=WORDFREQ_LANGUAGES, samples_per_language: int = 1000,
                         words_range: tuple[int, int] = (10, 30), vocab_size: int = 20000,
                         seed: int = 0) -> Path:
    """Write pseudo-sentences of ``words_range`` words, each word drawn by corpus frequency."""
    lines = {}
    for i, lang in enumerate(languages):
        words, p = word_table(lang, vocab_size)
        rng = make_rng(seed, TAG_WORDS, i)
        counts = rng.integers(words_range[0], words_range[1] + 1, size=samples_per_language)
        lines[lang] = [" ".join(words[j] for j in rng.choice(len(words), size=int(n), p=p)) for n in counts]
    return _write_language_files(out_dir, lines)

