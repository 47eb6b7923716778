"""Edge-path coverage that the main suites only exercise indirectly."""

from __future__ import annotations

import json

import numpy as np
import pytest

from conftest import ScriptedBackend
from reviewmap.agent import AgentStatus, retrieve_step, step
from reviewmap.corpus import embed_corpus, ingest
from reviewmap.errors import DimensionMismatch, ProviderUnavailable
from reviewmap.memory import NodeCounter, ProvenanceGraph, add_leaf, merge
from reviewmap.provider import Provider, TransportError
from reviewmap.synthesis import TEMPLATE_SECTION_ORDER, final_synthesis
from test_agent import QUERY, make_runtime
from test_synthesis import build_session_graphs


class MixedDimEmbedder:
    def embed(self, texts):
        vectors = []
        for i, _ in enumerate(texts):
            dim = 4 if i % 2 == 0 else 6
            vec = np.zeros(dim)
            vec[0] = 1.0
            vectors.append(vec)
        return vectors, [False] * len(texts)


class FailingEmbedder:
    def __init__(self):
        self.attempts = 0

    def embed(self, texts):
        self.attempts += 1
        raise TransportError("down")


def test_embed_dimension_mismatch():
    corpus = ingest(
        [
            {"id": "a", "title": "t one", "abstract": "x"},
            {"id": "b", "title": "t two", "abstract": "y"},
        ]
    )
    provider = Provider(embedder=MixedDimEmbedder())
    with pytest.raises(DimensionMismatch):
        embed_corpus(corpus, provider)


def test_embed_retry_budget():
    embedder = FailingEmbedder()
    provider = Provider(embedder=embedder, sleep=lambda _: None)
    with pytest.raises(ProviderUnavailable):
        provider.embed(["text"])
    assert embedder.attempts == 3


def test_out_of_range_selection_demoted(fixture_corpus):
    corpus, agents, runtimes = make_runtime(fixture_corpus.records, k=1)
    agent = agents[0]
    rt = runtimes[agent.agent_id]
    rt.provider = Provider(
        backend=ScriptedBackend(['{"thought": "t", "selected_papers": ["99", "1"]}'])
    )
    selected = retrieve_step(agent, ["art-000", "art-001"], rt)
    assert selected == ["art-000"]  # valid index kept, out-of-range dropped

    rt.provider = Provider(
        backend=ScriptedBackend(['{"thought": "t", "selected_papers": ["99"]}'])
    )
    assert retrieve_step(agent, ["art-000"], rt) == []


def test_provider_failure_pauses_agent(fixture_corpus):
    corpus, agents, runtimes = make_runtime(fixture_corpus.records, k=1)
    agent = agents[0]
    rt = runtimes[agent.agent_id]

    class DownBackend:
        def complete(self, request):
            raise TransportError("no backend")

    rt.provider = Provider(backend=DownBackend(), sleep=lambda _: None)
    events = step(agent, rt)
    assert agent.status is AgentStatus.PAUSED
    assert events[-1]["status"] == "Paused"
    assert "reason" in events[-1]


def test_merge_strips_unknown_citation(mock_provider):
    graph = ProvenanceGraph(agent_id="agent-0", counter=NodeCounter())
    from test_memory import outcome

    text = "Velprazine improves recovery outcomes in adults with torvian syndrome."
    first = add_leaf(graph, outcome("a1", text))
    merge(graph, first, mock_provider, query=QUERY)
    second = add_leaf(graph, outcome("a2", text + " More."))
    scripted = Provider(
        backend=ScriptedBackend(
            [
                json.dumps(
                    {
                        "identified_relevant_summaries": [first],
                        "reasoning": "r",
                        "synthesized_summary": (
                            f"Key Findings:\nfinding <citation>{first}</citation>"
                            " ghost <citation>777</citation>"
                        ),
                        "thought": "t",
                    }
                )
            ]
        )
    )
    merged = merge(graph, second, scripted, query=QUERY)
    node = graph.nodes[merged]
    assert "777" not in node.text
    assert node.citations == [first]


def test_section_order_configurable(mock_provider):
    graphs, corpus, counter = build_session_graphs(mock_provider, n_agents=1)
    from reviewmap.agent import AgentConfig

    report, _ = final_synthesis(
        graphs,
        AgentConfig(research_question=QUERY),
        mock_provider,
        corpus,
        counter,
        section_order=TEMPLATE_SECTION_ORDER,
    )
    assert [name for name, _ in report.sections] == list(TEMPLATE_SECTION_ORDER)
