"""Acceptance suite: one test per acceptance criterion, offline backend only.

Each test prints a single PASS/FAIL line (run with ``pytest -v -s`` to see
them live); failures also surface through the normal assertion mechanism.
"""

from __future__ import annotations

import functools
import re
import time
from itertools import product

import numpy as np
import pytest

from reviewmap.agent import (
    AgentConfig,
    AgentRuntime,
    ChatIntervention,
    InstructIntervention,
    PathIntervention,
    spawn_agents,
    step,
)
from reviewmap.corpus import Decision, ReadState, embed_corpus, ingest
from reviewmap.errors import NoEvidence
from reviewmap.mapping import (
    MapLayout,
    NeighborGraph,
    elbow_k,
    kmeans,
    kmeans_labels,
    neighbors,
    project_layout,
)
from reviewmap.memory import NodeCounter, NodeKind, ProvenanceGraph
from reviewmap.metrics import compare_partitioning, screening_metrics
from reviewmap.provider import Provider
from reviewmap.session import EventKind, Session, SessionConfig, load_session
from reviewmap.synthesis import SECTION_NAMES
from reviewmap.synthetic import make_banded_corpus, make_blob_points, make_fixture_corpus


def criterion(name):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                detail = fn(*args, **kwargs)
            except BaseException:
                print(f"FAIL  {name}", flush=True)
                raise
            print(f"PASS  {name}" + (f" ({detail})" if detail else ""), flush=True)

        return wrapper

    return decorate


# ---------------------------------------------------------------------------
# Independent screening oracle (token overlap at threshold 0.12 plus
# required-term directives), written from scratch for this suite.
# ---------------------------------------------------------------------------

_STOPWORDS = set(
    "a an and are as at be been between by can could did do does for from had has have "
    "in into is it its may more most not of on or such than that the their them then "
    "there these they this to under was we were what when which while will with within would".split()
)


def _tokens(text: str) -> set[str]:
    return {t for t in re.findall(r"[a-z0-9]+", text.lower()) if t not in _STOPWORDS}


def oracle_included(records, question, criteria) -> set[str]:
    guide = _tokens(question) | _tokens(criteria)
    required: set[str] = set()
    for phrase in re.findall(r"must mention:\s*([^\n.;]+)", criteria, re.IGNORECASE):
        required |= _tokens(phrase)
    result = set()
    for record in records:
        candidate = _tokens(f"{record['title']} {record['abstract']}")
        if not candidate:
            continue
        if len(candidate & guide) / len(candidate) < 0.12:
            continue
        if required and not required <= candidate:
            continue
        result.add(record["id"])
    return result


# ---------------------------------------------------------------------------
# Shared fixtures: the 200-article marker corpus and the intervention script
# ---------------------------------------------------------------------------

FIXTURE = make_fixture_corpus(n=200, n_relevant=20, blobs=3, seed=42)


def new_session(directory=None) -> Session:
    config = SessionConfig(
        research_question=FIXTURE.research_question,
        inclusion_exclusion_criteria=FIXTURE.inclusion_exclusion_criteria,
        seed=42,
    )
    session = Session(config, directory=directory)
    session.upload_corpus(FIXTURE.as_csv())
    session.build_map()
    return session


@pytest.fixture(scope="module")
def intervention_script():
    """50 scripted interventions: 30 paths, 15 chats, 5 instructs.

    Built against a deterministic probe run; targets are articles the mock
    never reads organically, so every path target is unread at delivery.
    """
    probe = new_session()
    probe.run()
    agents = sorted(probe.agents)
    unread = sorted(a.id for a in probe.corpus if a.read_state is ReadState.UNREAD)
    targets = unread[::6][:30]
    plant = FIXTURE.planted_ids[0]
    plant_agent = f"agent-{probe.cluster_model.assignments[plant]}"
    script = []
    for i in range(6):
        script.append((30 + 16 * i, agents[i % len(agents)], PathIntervention(targets[i])))
    for i in range(6, 30):
        script.append((10_000 + i, agents[i % len(agents)], PathIntervention(targets[i])))
    for i in range(15):
        seq = 60 + 20 * i if i < 3 else 20_000 + i
        script.append((seq, agents[(i + 1) % len(agents)], ChatIntervention("Looks good, continue.")))
    for i in range(4):
        script.append(
            (
                30_000 + i,
                agents[i % len(agents)],
                InstructIntervention({"summarization_requirement": f"style {i}: one sentence per study"}),
            )
        )
    narrowed = FIXTURE.inclusion_exclusion_criteria + " must mention: randomized"
    script.append((40_000, plant_agent, InstructIntervention({"inclusion_exclusion_criteria": narrowed})))
    return script, plant


def run_scripted(script, directory=None, stop_at_seq=None) -> Session:
    session = new_session(directory=directory)
    session.run(script=script, stop_at_seq=stop_at_seq)
    if stop_at_seq is None:
        session.synthesize()
    return session


# ---------------------------------------------------------------------------
# Criteria
# ---------------------------------------------------------------------------

@criterion("deterministic end-to-end replay (byte-identical logs and reports)")
def test_deterministic_replay(intervention_script):
    script, _ = intervention_script
    started = time.time()
    first = run_scripted(script)
    second = run_scripted(script)
    elapsed = time.time() - started
    log_a = "\n".join(e.to_json() for e in first.event_log)
    log_b = "\n".join(e.to_json() for e in second.event_log)
    assert log_a == log_b
    assert first.report_markdown == second.report_markdown
    assert elapsed < 60.0
    return f"{len(first.event_log)} events, {elapsed:.1f}s"


@criterion("screening oracle equivalence (P = R = F1 = 1.0 against the oracle)")
def test_screening_oracle_equivalence():
    started = time.time()
    session = new_session()
    session.run()
    included = session.included_ids()
    oracle = oracle_included(
        FIXTURE.records, FIXTURE.research_question, FIXTURE.inclusion_exclusion_criteria
    )
    assert included == oracle
    result = screening_metrics(included, oracle)
    assert result.precision == result.recall == result.f1 == 1.0
    elapsed = time.time() - started
    assert elapsed < 60.0
    return f"{len(included)} included, {elapsed:.1f}s"


@criterion("multi-agent recall >= single-agent recall in >= 80/100 seeds")
def test_partitioning_directional_analogue():
    started = time.time()

    def make_corpus(seed: int):
        fixture = make_banded_corpus(seed)
        return (
            fixture.records,
            fixture.research_question,
            fixture.inclusion_exclusion_criteria,
            fixture.gold_ids,
        )

    table = compare_partitioning(make_corpus, seeds=range(100), budget=60)
    wins = table.recall_wins()
    elapsed = time.time() - started
    assert wins >= 80
    assert elapsed < 600.0
    return f"{wins}/100 seeds, {elapsed:.0f}s"


@criterion("clustering correctness (elbow k=3, exhaustive k-means oracle, WCSS monotone)")
def test_clustering_correctness():
    hits = 0
    for seed in range(100):
        points = make_blob_points(n_per_blob=30, blobs=3, separation=10.0, blob_radius=1.0, seed=seed)
        if elbow_k(points, 2, 10, seed=seed) == 3:
            hits += 1
    assert hits >= 95

    fixtures = [
        np.array([[0, 0], [0, 1], [1, 0], [10, 10], [10, 11], [11, 10]], dtype=float),
        np.array([[0, 0], [1, 1], [0.5, 0], [6, 6], [7, 7], [6.5, 6.2]], dtype=float),
        np.array([[-5, 0], [-4, 0.5], [-4.5, -0.5], [4, 0], [5, 0.2], [4.5, -0.3]], dtype=float),
    ]
    for points in fixtures:
        best, best_wcss = None, np.inf
        for labels in product([0, 1], repeat=6):
            if len(set(labels)) < 2:
                continue
            wcss = 0.0
            for cluster in (0, 1):
                members = points[[i for i in range(6) if labels[i] == cluster]]
                wcss += float(np.sum((members - members.mean(axis=0)) ** 2))
            if wcss < best_wcss - 1e-12:
                best_wcss, best = wcss, labels
        oracle = frozenset(
            frozenset(i for i in range(6) if best[i] == c) for c in (0, 1)
        )
        labels, _, _, _ = kmeans_labels(points, 2, seed=0)
        ours = frozenset(frozenset(i for i in range(6) if labels[i] == c) for c in (0, 1))
        assert ours == oracle

    rng = np.random.default_rng(1234)
    for _ in range(1000):
        n = int(rng.integers(5, 40))
        k = int(rng.integers(1, min(8, n) + 1))
        points = rng.normal(size=(n, 2)) * rng.uniform(0.5, 20)
        _, _, _, trace = kmeans_labels(points, k, seed=int(rng.integers(10_000)))
        assert all(b <= a + 1e-9 for a, b in zip(trace, trace[1:]))
    return f"elbow {hits}/100"


@criterion("receptive field matches the O(N^2) brute-force oracle (m=8)")
def test_receptive_field_correctness():
    rng = np.random.default_rng(77)
    for _ in range(100):
        n = int(rng.integers(2, 201))
        ids = [f"n{i:04d}" for i in range(n)]
        points = rng.normal(size=(n, 2)) * rng.uniform(0.1, 50)
        layout = MapLayout.from_points(ids, points)
        probe = ids[int(rng.integers(n))]
        pi = layout.index_of(probe)
        dists = np.hypot(points[:, 0] - points[pi, 0], points[:, 1] - points[pi, 1])
        oracle = [
            ids[i]
            for i in sorted((i for i in range(n) if i != pi), key=lambda i: (dists[i], ids[i]))
        ][:8]
        assert neighbors(layout, probe, m=8) == oracle
    return "100 random maps"


@criterion("provenance DAG invariants over 500 randomized sessions")
def test_dag_invariant_suite():
    rng = np.random.default_rng(2024)
    violations = 0
    sessions = 0
    for session_index in range(500):
        n = int(rng.integers(16, 41))
        n_relevant = int(rng.integers(2, 7))
        fixture = make_fixture_corpus(
            n=n, n_relevant=n_relevant, blobs=int(rng.integers(1, 4)),
            seed=int(rng.integers(100_000)), n_planted=0,
        )
        corpus = ingest(fixture.records, research_question=fixture.research_question)
        provider = Provider()
        embed_corpus(corpus, provider)
        layout = project_layout(corpus, seed=session_index)
        k = max(1, min(2, len(corpus) // 12))
        cluster_model = kmeans(layout.points, layout.ids, k, seed=session_index)
        neighbor_graph = NeighborGraph.build(layout)
        config = AgentConfig(
            research_question=fixture.research_question,
            inclusion_exclusion_criteria=fixture.inclusion_exclusion_criteria,
        )
        agents = spawn_agents(cluster_model, corpus, layout, config)
        counter = NodeCounter()
        graphs = {}
        runtimes = {}
        for agent in agents:
            graphs[agent.agent_id] = ProvenanceGraph(agent_id=agent.agent_id, counter=counter)
            runtimes[agent.agent_id] = AgentRuntime(
                corpus=corpus, layout=layout, neighbor_graph=neighbor_graph,
                cluster_model=cluster_model, provider=provider,
                graph=graphs[agent.agent_id], counter=counter,
            )
        sessions += 1
        active = True
        while active:
            active = False
            for agent in agents:
                if not agent.runnable:
                    continue
                active = True
                step(agent, runtimes[agent.agent_id])
                graph = graphs[agent.agent_id]
                # acyclicity after every mutation
                graph.verify_acyclic()
                # leaf <-> Included bijection at the step boundary
                leaf_articles = sorted(
                    node.source_article for node in graph.leaves()
                )
                included_here = sorted(
                    article_id
                    for article_id, decision, _ in agent.trajectory
                    if decision == Decision.INCLUDED.value
                )
                if leaf_articles != included_here:
                    violations += 1
                # internal nodes >= 2 children; citations within descendants
                parented = set()
                for node in graph.nodes.values():
                    parented.update(node.children)
                    if node.kind is not NodeKind.LEAF and len(node.children) < 2:
                        violations += 1
                    if not set(node.citations) <= graph.descendants(node.node_id):
                        violations += 1
                # merge conservation: roots are exactly the parentless nodes
                if sorted(graph.roots) != sorted(set(graph.nodes) - parented):
                    violations += 1
    assert violations == 0
    return f"{sessions} sessions, zero violations"


@criterion("intervention semantics over a 50-intervention script")
def test_intervention_semantics(intervention_script):
    script, plant = intervention_script
    session = run_scripted(script)
    log = session.event_log
    accepted = [e for e in log if e.kind is EventKind.INTERVENTION_ACCEPTED]
    assert len(accepted) == 50
    path_checked = chat_checked = 0
    for event in accepted:
        agent_id = event.agent_id
        iv_id = event.payload["intervention_id"]
        kind = event.payload["intervention_kind"]
        if kind == "path":
            target = event.payload["payload"]["target_article"]
            next_read = next(
                (
                    e for e in log
                    if e.seq > event.seq
                    and e.kind is EventKind.ARTICLE_READ
                    and e.agent_id == agent_id
                ),
                None,
            )
            assert next_read is not None, f"path {iv_id} never consumed"
            assert next_read.payload["article_id"] == target
            assert next_read.payload["forced_by"] == iv_id
            path_checked += 1
        else:
            next_read = next(
                (
                    e for e in log
                    if e.seq > event.seq
                    and e.kind is EventKind.ARTICLE_READ
                    and e.agent_id == agent_id
                ),
                None,
            )
            reflection = next(
                (
                    e for e in log
                    if e.seq > event.seq
                    and e.kind is EventKind.REFLECTION_COMPLETED
                    and e.agent_id == agent_id
                ),
                None,
            )
            assert reflection is not None, f"{kind} {iv_id} never reflected"
            if next_read is not None:
                assert reflection.seq < next_read.seq
            chat_checked += 1
    assert path_checked == 30 and chat_checked == 20
    # criteria-narrowing instruct flipped the planted off-criteria leaf
    assert session.corpus.get(plant).decision is Decision.EXCLUDED
    revisions = [
        r
        for e in log
        if e.kind is EventKind.REFLECTION_COMPLETED
        for r in e.payload.get("revisions", [])
    ]
    assert any(r["article_id"] == plant for r in revisions)
    return "30 paths + 20 reflections, planted leaf flipped"


@criterion("final-report contract (sections, dense citations, traceability, NoEvidence)")
def test_final_report_contract():
    session = new_session()
    session.run()
    session.synthesize()
    report = session.get_report()
    headers = [
        line[3:] for line in report["markdown"].splitlines()
        if line.startswith("## ") and line[3:] != "References"
    ]
    assert headers == list(SECTION_NAMES)
    numbers = [entry["n"] for entry in report["citation_map"]]
    assert numbers == list(range(1, len(numbers) + 1)) and numbers
    bracketed = {int(m) for m in re.findall(r"\[(\d+)\]", report["markdown"].split("## References")[0])}
    assert bracketed == set(numbers)
    included = session.included_ids()
    combined = session.provenance_graph()
    for entry in report["citation_map"]:
        node_id = entry["node_id"]
        provenance = {aid for _, aid in combined.provenance_of(node_id)}
        assert provenance, f"citation {entry['n']} resolves to no articles"
        assert provenance <= included
        assert {a["article_id"] for a in entry["articles"]} == provenance

    barren = make_fixture_corpus(n=40, n_relevant=0, blobs=3, seed=7, n_planted=0)
    config = SessionConfig(
        research_question=barren.research_question,
        inclusion_exclusion_criteria=barren.inclusion_exclusion_criteria,
        seed=7,
    )
    empty_session = Session(config)
    empty_session.upload_corpus(barren.as_csv())
    empty_session.build_map()
    empty_session.run()
    with pytest.raises(NoEvidence):
        empty_session.synthesize()
    return f"{len(numbers)} citations trace to {len(included)} included articles"


@criterion("crash recovery at 3 scripted kill points")
def test_crash_recovery(intervention_script, tmp_path):
    script, _ = intervention_script
    for index, kill_seq in enumerate((40, 120, 200)):
        directory = tmp_path / f"kill-{kill_seq}"
        session = run_scripted(script, directory=directory, stop_at_seq=kill_seq)
        assert session.last_seq >= kill_seq
        before = session.observable_state()
        recovered = load_session(directory)
        after = recovered.observable_state()
        assert after == before, f"kill point {kill_seq} diverged"
        assert after["graphs"] == before["graphs"]
        assert after["decisions"] == before["decisions"]
    return "kill seqs 40/120/200"
