"""Deterministic text normalization and the word-overlap gate.

Tokenization, rule-based lemmatization, and word overlap are pinned artifacts
of this package: every consumer (graph construction, dataset generation,
statistics) goes through `normalize` so that the same raw string always maps
to the same Sentence.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

_DATA_DIR = Path(__file__).parent / "data"

_APOSTROPHES = re.compile(r"[’']s\b")
_WORD = re.compile(r"[a-z0-9]+")

_VOWELS = frozenset("aeiouy")
# Consonants eligible for undoubling after -ing/-ed stripping. ll/ss/zz/ff
# stay doubled (falling -> fall, passing -> pass).
_UNDOUBLE = frozenset("bdgkmnprt")
# Stem endings that take a restored "e" regardless of syllable count
# (danc -> dance, argu -> argue, lov -> love).
_ALWAYS_E = frozenset("cuv")
# consonant+l endings that take a restored "e" (juggl -> juggle) but not
# r/w/l before the l (curl, crawl, fall stay bare).
_CL_BEFORE = frozenset("bcdfgkpstz")

OVERLAP_MODES = ("full", "lemma")


class EmptySentenceError(ValueError):
    """Raised when a raw string contains no alphanumeric token."""


class OverlapUndefinedError(ValueError):
    """Raised when a hypothesis has no content tokens to count."""


def _read_word_list(path: Path) -> list[str]:
    words = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        words.append(line)
    return words


@dataclass(frozen=True)
class StopwordList:
    """Set of function words removed before overlap counting."""

    words: frozenset[str]

    def __post_init__(self) -> None:
        if not self.words:
            raise ValueError("stopword list must be non-empty")
        bad = sorted(w for w in self.words if w != w.lower())
        if bad:
            raise ValueError(f"stopword list must be lowercase, got: {bad[:5]}")

    def __contains__(self, token: str) -> bool:
        return token in self.words

    def __len__(self) -> int:
        return len(self.words)

    @classmethod
    def from_words(cls, words: Iterable[str]) -> "StopwordList":
        return cls(frozenset(words))

    @classmethod
    def from_file(cls, path: str | Path) -> "StopwordList":
        return cls.from_words(_read_word_list(Path(path)))


_DEFAULT_STOPWORDS: StopwordList | None = None


def default_stopwords() -> StopwordList:
    global _DEFAULT_STOPWORDS
    if _DEFAULT_STOPWORDS is None:
        _DEFAULT_STOPWORDS = StopwordList.from_file(_DATA_DIR / "stopwords.txt")
    return _DEFAULT_STOPWORDS


def _has_vowel(s: str) -> bool:
    return any(c in _VOWELS for c in s)


def _vowel_groups(s: str) -> int:
    groups = 0
    prev_vowel = False
    for c in s:
        is_vowel = c in _VOWELS
        if is_vowel and not prev_vowel:
            groups += 1
        prev_vowel = is_vowel
    return groups


def _cvc(stem: str) -> bool:
    if len(stem) < 3:
        return False
    a, b, c = stem[-3], stem[-2], stem[-1]
    return a not in _VOWELS and b in _VOWELS and c not in _VOWELS and c not in "wxy"


def _repair_stem(stem: str) -> str:
    """Undouble or restore a final "e" after stripping -ing/-ed."""
    if len(stem) >= 3 and stem[-1] == stem[-2] and stem[-1] in _UNDOUBLE:
        return stem[:-1]
    if stem[-1] in _ALWAYS_E:
        return stem + "e"
    if len(stem) >= 3 and stem[-1] == "l" and stem[-2] in _CL_BEFORE:
        return stem + "e"
    if _cvc(stem) and _vowel_groups(stem) == 1:
        return stem + "e"
    return stem


class Lemmatizer:
    """Finite rule table: ordered suffix rules plus an exception list.

    Rules are applied to a fixpoint; the exception table is consulted before
    every pass, so protected forms (identity entries) stop the rules cold.
    Each rewriting pass strictly shortens the token, so iteration terminates.
    """

    def __init__(self, exceptions: Mapping[str, str]):
        self.exceptions = dict(exceptions)
        self._cache: dict[str, str] = {}

    @classmethod
    def from_file(cls, path: str | Path) -> "Lemmatizer":
        exceptions = {}
        for line in _read_word_list(Path(path)):
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"bad exception entry (want form<TAB>lemma): {line!r}")
            exceptions[parts[0]] = parts[1]
        return cls(exceptions)

    def lemma(self, token: str) -> str:
        out = self._cache.get(token)
        if out is None:
            out = self._lemma(token)
            self._cache[token] = out
        return out

    def _lemma(self, token: str) -> str:
        seen = {token}
        word = token
        while True:
            if word in self.exceptions:
                return self.exceptions[word]
            nxt = self._rule_pass(word)
            if nxt == word or nxt in seen:
                return nxt
            seen.add(nxt)
            word = nxt

    @staticmethod
    def _rule_pass(w: str) -> str:
        n = len(w)
        # plural / third-person -s
        if n >= 5 and w.endswith("sses"):
            return w[:-2]
        if n >= 5 and (w.endswith("shes") or w.endswith("ches")):
            return w[:-2]
        if n >= 5 and w.endswith("zzes"):
            return w[:-2]
        if n >= 4 and w.endswith("xes"):
            return w[:-2]
        if n >= 4 and w.endswith("zes"):
            return w[:-1]
        if n >= 5 and w.endswith("ies"):
            return w[:-3] + "y"
        if n >= 6 and w.endswith("oes"):
            return w[:-2]
        if n >= 5 and w.endswith("ses"):
            return w[:-1]
        if n >= 4 and w.endswith("s") and not w.endswith(("ss", "us", "is")):
            return w[:-1]
        # present participle
        if n >= 6 and w.endswith("ing"):
            stem = w[:-3]
            if _has_vowel(stem):
                return _repair_stem(stem)
        # past tense
        if n >= 5 and w.endswith("ied"):
            return w[:-3] + "y"
        if n >= 5 and w.endswith("ed") and not w.endswith("eed"):
            stem = w[:-2]
            if _has_vowel(stem):
                return _repair_stem(stem)
        return w


_DEFAULT_LEMMATIZER: Lemmatizer | None = None


def default_lemmatizer() -> Lemmatizer:
    global _DEFAULT_LEMMATIZER
    if _DEFAULT_LEMMATIZER is None:
        _DEFAULT_LEMMATIZER = Lemmatizer.from_file(_DATA_DIR / "lemma_exceptions.txt")
    return _DEFAULT_LEMMATIZER


@dataclass(frozen=True)
class Sentence:
    """Normalized view of one raw caption or hypothesis string."""

    raw: str
    tokens: tuple[str, ...]
    lemmas: tuple[str, ...]
    content_tokens: frozenset[str]
    content_lemmas: frozenset[str]

    def __post_init__(self) -> None:
        if not self.tokens:
            raise EmptySentenceError(f"sentence has no tokens: {self.raw!r}")
        if len(self.tokens) != len(self.lemmas):
            raise ValueError("tokens and lemmas must align")

    def token_lemma(self, token: str) -> str:
        for t, l in zip(self.tokens, self.lemmas):
            if t == token:
                return l
        raise KeyError(token)


def tokenize(raw: str) -> tuple[str, ...]:
    """Lowercase, strip possessive 's, split on non-alphanumerics."""
    lowered = raw.lower()
    lowered = _APOSTROPHES.sub("", lowered)
    return tuple(_WORD.findall(lowered))


def normalize(
    raw: str,
    stopwords: StopwordList | None = None,
    lexicon: Lemmatizer | None = None,
) -> Sentence:
    """Tokenize, lemmatize, and compute content sets for one raw string."""
    stopwords = stopwords if stopwords is not None else default_stopwords()
    lexicon = lexicon if lexicon is not None else default_lemmatizer()
    tokens = tokenize(raw)
    if not tokens:
        raise EmptySentenceError(f"no alphanumeric content in {raw!r}")
    lemmas = tuple(lexicon.lemma(t) for t in tokens)
    content_tokens = frozenset(t for t in tokens if t not in stopwords)
    content_lemmas = frozenset(
        l for t, l in zip(tokens, lemmas) if t not in stopwords
    )
    return Sentence(
        raw=raw,
        tokens=tokens,
        lemmas=lemmas,
        content_tokens=content_tokens,
        content_lemmas=content_lemmas,
    )


def word_overlap(
    hypothesis: Sentence,
    premises: Sequence[Sentence],
    mode: str = "full",
) -> float:
    """Fraction of hypothesis content token types found in any premise.

    Set semantics over hypothesis content tokens in both modes; `lemma` mode
    tests membership of each content token's lemma in the premise lemma
    union, so the result is monotonically >= the `full` mode value.
    """
    if mode not in OVERLAP_MODES:
        raise ValueError(f"mode must be one of {OVERLAP_MODES}, got {mode!r}")
    if not premises:
        raise ValueError("need at least one premise")
    content = hypothesis.content_tokens
    if not content:
        raise OverlapUndefinedError(
            f"hypothesis has no content tokens: {hypothesis.raw!r}"
        )
    if mode == "full":
        union: set[str] = set()
        for p in premises:
            union.update(p.tokens)
        matched = sum(1 for t in content if t in union)
    else:
        union = set()
        for p in premises:
            union.update(p.lemmas)
        lemma_of = dict(zip(hypothesis.tokens, hypothesis.lemmas))
        matched = sum(1 for t in content if lemma_of[t] in union)
    return matched / len(content)
