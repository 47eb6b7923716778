"""Tokenization helpers shared by the offline embedder and screening rules."""

from __future__ import annotations

import re

_WORD_RE = re.compile(r"[a-z0-9]+")

# Function words excluded from content tokens so that keyword overlap and
# bag-of-words cosine reflect topical content rather than grammar.
STOPWORDS = frozenset(
    """
    a an and are as at be been between by can could did do does for from had
    has have in into is it its may more most not of on or such than that the
    their them then there these they this to under was we were what when
    which while will with within would
    """.split()
)


def tokenize(text: str) -> list[str]:
    """Lowercase word tokens in order of appearance, stopwords removed."""
    return [t for t in _WORD_RE.findall(text.lower()) if t not in STOPWORDS]


def token_set(text: str) -> set[str]:
    return set(tokenize(text))


def split_sentences(text: str) -> list[str]:
    """Crude sentence split, good enough for extractive mock summaries."""
    parts = re.split(r"(?<=[.!?])\s+", text.strip())
    return [p for p in parts if p]
