"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class ReviewMapError(Exception):
    """Base class for all engine errors."""


# --- corpus ---------------------------------------------------------------

class EmptyCorpus(ReviewMapError):
    pass


class DuplicateId(ReviewMapError):
    def __init__(self, article_id: str):
        super().__init__(f"duplicate article id: {article_id!r}")
        self.article_id = article_id


class MissingField(ReviewMapError):
    def __init__(self, row: int, field: str):
        super().__init__(f"row {row}: missing required field {field!r}")
        self.row = row
        self.field = field


class EmbeddingsMissing(ReviewMapError):
    pass


class DimensionMismatch(ReviewMapError):
    pass


# --- mapping --------------------------------------------------------------

class KExceedsN(ReviewMapError):
    pass


class UnknownArticle(ReviewMapError):
    def __init__(self, article_id: str):
        super().__init__(f"unknown article id: {article_id!r}")
        self.article_id = article_id


# --- provider -------------------------------------------------------------

class ProviderUnavailable(ReviewMapError):
    pass


class ProviderTimeout(ProviderUnavailable):
    pass


class NoObjectFound(ReviewMapError):
    pass


class SchemaViolation(ReviewMapError):
    def __init__(self, field: str, detail: str = ""):
        msg = f"schema violation on field {field!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.field = field


# --- agent ----------------------------------------------------------------

class NoClusters(ReviewMapError):
    pass


class AlreadyRead(ReviewMapError):
    def __init__(self, article_id: str):
        super().__init__(f"article already read: {article_id!r}")
        self.article_id = article_id


# --- memory ---------------------------------------------------------------

class NotIncluded(ReviewMapError):
    pass


class DuplicateLeaf(ReviewMapError):
    def __init__(self, article_id: str):
        super().__init__(f"leaf already exists for article {article_id!r}")
        self.article_id = article_id


class UnknownNode(ReviewMapError):
    def __init__(self, node_id: str):
        super().__init__(f"unknown node id: {node_id!r}")
        self.node_id = node_id


class CycleDetected(ReviewMapError):
    pass


# --- synthesis ------------------------------------------------------------

class NoEvidence(ReviewMapError):
    pass


# --- metrics --------------------------------------------------------------

class EmptyGold(ReviewMapError):
    pass


# --- service --------------------------------------------------------------

class UnknownSession(ReviewMapError):
    def __init__(self, session_id: str):
        super().__init__(f"unknown session: {session_id!r}")
        self.session_id = session_id


class UnknownAgent(ReviewMapError):
    def __init__(self, agent_id: str):
        super().__init__(f"unknown agent: {agent_id!r}")
        self.agent_id = agent_id


class PhaseViolation(ReviewMapError):
    pass


class MalformedUpload(ReviewMapError):
    pass


class NotReady(ReviewMapError):
    pass
