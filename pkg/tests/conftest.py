from __future__ import annotations

import pytest

from reviewmap.provider import CompletionRequest, Provider, TransportError
from reviewmap.synthetic import FixtureCorpus, make_fixture_corpus


class ScriptedBackend:
    """Replays canned raw responses; list items may be TransportError instances."""

    def __init__(self, responses):
        self.responses = list(responses)
        self.calls = 0

    def complete(self, request: CompletionRequest) -> str:
        self.calls += 1
        item = self.responses.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


class FailingBackend:
    def __init__(self, error: Exception | None = None):
        self.error = error or TransportError("unreachable")
        self.attempts = 0

    def complete(self, request: CompletionRequest) -> str:
        self.attempts += 1
        raise self.error


@pytest.fixture
def mock_provider() -> Provider:
    return Provider()


@pytest.fixture(scope="session")
def fixture_corpus() -> FixtureCorpus:
    return make_fixture_corpus(n=200, n_relevant=20, blobs=3, seed=42)
