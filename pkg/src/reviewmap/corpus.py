"""Corpus ingestion, embedding, and relevance scoring.

Articles enter as title+abstract records (CSV or line-delimited JSON),
are embedded to unit-norm vectors, and receive a relevance score equal to
the cosine between their embedding and the research-question embedding.
Relevance stays a raw cosine here; rank normalization happens in the
mapping layer.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator

import numpy as np

from .errors import DimensionMismatch, DuplicateId, EmbeddingsMissing, EmptyCorpus, MissingField

EMBED_BATCH_SIZE = 64
NORM_TOLERANCE = 1e-6


class ReadState(str, Enum):
    UNREAD = "Unread"
    READ = "Read"


class Decision(str, Enum):
    UNDECIDED = "Undecided"
    INCLUDED = "Included"
    EXCLUDED = "Excluded"


@dataclass
class ArticleRecord:
    """One title+abstract record with screening state.

    ``embedding`` is unit-norm once populated; ``relevance`` is the cosine to
    the question embedding and is populated together with the embedding.
    """

    id: str
    title: str
    abstract: str
    metadata: dict[str, str] = field(default_factory=dict)
    embedding: np.ndarray | None = None
    relevance: float | None = None
    read_state: ReadState = ReadState.UNREAD
    decision: Decision = Decision.UNDECIDED
    exclusion_reason: str = ""
    flags: set[str] = field(default_factory=set)

    @property
    def text(self) -> str:
        """The screening surface: title plus abstract."""
        return f"{self.title}. {self.abstract}" if self.abstract else self.title

    def mark_included(self) -> None:
        self.decision = Decision.INCLUDED
        self.exclusion_reason = ""

    def mark_excluded(self, reason: str) -> None:
        self.decision = Decision.EXCLUDED
        self.exclusion_reason = reason


@dataclass
class Corpus:
    """Ordered article collection plus the research question driving it."""

    articles: list[ArticleRecord]
    research_question: str
    question_embedding: np.ndarray | None = None

    def __post_init__(self) -> None:
        self._by_id = {a.id: a for a in self.articles}

    def __len__(self) -> int:
        return len(self.articles)

    def __iter__(self) -> Iterator[ArticleRecord]:
        return iter(self.articles)

    def get(self, article_id: str) -> ArticleRecord | None:
        return self._by_id.get(article_id)

    def __contains__(self, article_id: str) -> bool:
        return article_id in self._by_id

    @property
    def embedded(self) -> bool:
        return self.question_embedding is not None and all(
            a.embedding is not None for a in self.articles
        )

    def included_ids(self) -> set[str]:
        return {a.id for a in self.articles if a.decision is Decision.INCLUDED}


def _records_from_csv(text: str) -> Iterator[dict[str, str]]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        return
    yield from reader


def _records_from_jsonl(text: str) -> Iterator[dict[str, str]]:
    for line in text.splitlines():
        line = line.strip()
        if line:
            yield json.loads(line)


def parse_records(text: str) -> Iterator[dict[str, str]]:
    """Accept CSV (with a header) or line-delimited JSON records."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return _records_from_jsonl(text)
    return _records_from_csv(text)


def ingest(source: Iterable[dict[str, str]], research_question: str = "") -> Corpus:
    """Build a corpus from a record stream; embeddings and relevance unset.

    Duplicate ids are a hard error rather than a silent dedup so that
    gold-set evaluation keeps stable id identity.
    """
    articles: list[ArticleRecord] = []
    seen: set[str] = set()
    for row_number, record in enumerate(source):
        for required in ("id", "title", "abstract"):
            if record.get(required) is None:
                raise MissingField(row_number, required)
        article_id = str(record["id"]).strip()
        title = str(record["title"]).strip()
        abstract = str(record["abstract"]).strip()
        if not article_id:
            raise MissingField(row_number, "id")
        if not title:
            raise MissingField(row_number, "title")
        if article_id in seen:
            raise DuplicateId(article_id)
        seen.add(article_id)
        metadata = {
            k: str(v)
            for k, v in record.items()
            if k not in ("id", "title", "abstract") and v not in (None, "")
        }
        article = ArticleRecord(id=article_id, title=title, abstract=abstract, metadata=metadata)
        if not abstract:
            article.flags.add("abstract_missing")
        articles.append(article)
    if not articles:
        raise EmptyCorpus("no records in source")
    return Corpus(articles=articles, research_question=research_question)


def ingest_text(text: str, research_question: str = "") -> Corpus:
    return ingest(parse_records(text), research_question=research_question)


def embed_corpus(corpus: Corpus, provider) -> Corpus:
    """Populate unit-norm embeddings for every article and the question.

    Idempotent for a fixed provider: articles that already carry an embedding
    are not re-embedded. Batches are issued in order and written back in
    article order. Relevance is refreshed whenever embeddings change so the
    two fields stay populated together.
    """
    if len(corpus) == 0:
        raise EmptyCorpus("cannot embed an empty corpus")
    pending = [a for a in corpus.articles if a.embedding is None]
    for start in range(0, len(pending), EMBED_BATCH_SIZE):
        batch = pending[start : start + EMBED_BATCH_SIZE]
        vectors, flags = provider.embed_flagged([a.text for a in batch])
        for article, vector, degenerate in zip(batch, vectors, flags):
            article.embedding = vector
            if degenerate:
                article.flags.add("degenerate_embedding")
    if corpus.question_embedding is None:
        [qvec], _ = provider.embed_flagged([corpus.research_question])
        corpus.question_embedding = qvec
    dimension = len(corpus.question_embedding)
    for article in corpus.articles:
        if len(article.embedding) != dimension:
            raise DimensionMismatch(
                f"article {article.id}: dimension {len(article.embedding)} != {dimension}"
            )
        norm = float(np.linalg.norm(article.embedding))
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise DimensionMismatch(f"article {article.id}: embedding norm {norm}")
    return score_relevance(corpus)


def score_relevance(corpus: Corpus) -> Corpus:
    """Set relevance to the cosine between each article and the question."""
    if corpus.question_embedding is None or any(a.embedding is None for a in corpus.articles):
        raise EmbeddingsMissing("embed the corpus before scoring relevance")
    q = corpus.question_embedding
    for article in corpus.articles:
        article.relevance = float(np.clip(np.dot(q, article.embedding), -1.0, 1.0))
    return corpus
