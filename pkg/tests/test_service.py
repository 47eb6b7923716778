from __future__ import annotations

import json
import time

import pytest
from fastapi.testclient import TestClient

from reviewmap.errors import NotReady, PhaseViolation, UnknownArticle
from reviewmap.agent import ChatIntervention, InstructIntervention, PathIntervention
from reviewmap.service import create_app
from reviewmap.session import (
    EventKind,
    Phase,
    Session,
    SessionConfig,
    SessionStore,
    load_session,
)

def fixture_session(fixture_corpus, tmp_path=None, seed=42, budget=None) -> Session:
    config = SessionConfig(
        research_question=fixture_corpus.research_question,
        inclusion_exclusion_criteria=fixture_corpus.inclusion_exclusion_criteria,
        seed=seed,
        read_budget=budget,
    )
    directory = tmp_path / "sess" if tmp_path else None
    session = Session(config, directory=directory)
    session.upload_corpus(fixture_corpus.as_csv())
    return session


# ---------------------------------------------------------------------------
# Core lifecycle
# ---------------------------------------------------------------------------

def test_upload_counts(fixture_corpus):
    session = fixture_session(fixture_corpus)
    assert session.event_log[0].kind is EventKind.CORPUS_INGESTED
    assert session.event_log[0].payload["articles"] == 200


def test_build_map_before_upload_phase_violation():
    session = Session(SessionConfig(research_question="q"))
    with pytest.raises(PhaseViolation):
        session.build_map()


def test_start_before_map_phase_violation(fixture_corpus):
    session = fixture_session(fixture_corpus)
    with pytest.raises(PhaseViolation):
        session.start()


def test_start_twice_idempotent(fixture_corpus):
    session = fixture_session(fixture_corpus)
    session.build_map()
    session.start()
    phase_events = len(session.event_log)
    session.start()
    assert session.phase is Phase.RUNNING
    assert len(session.event_log) == phase_events  # second start emits nothing


def test_report_before_synthesis_not_ready(fixture_corpus):
    session = fixture_session(fixture_corpus)
    session.build_map()
    with pytest.raises(NotReady):
        session.get_report()


def test_full_run_and_phase_progression(fixture_corpus):
    session = fixture_session(fixture_corpus)
    session.build_map()
    assert session.phase is Phase.MAPPED
    session.run()
    assert session.phase is Phase.QUIESCED
    session.synthesize()
    assert session.phase is Phase.SYNTHESIZED
    report = session.get_report()
    assert report["markdown"].startswith("# Systematic Review Report")
    assert report["citation_map"]


def test_provenance_node_count(fixture_corpus):
    session = fixture_session(fixture_corpus)
    session.build_map()
    session.run()
    session.synthesize()
    records = session.get_provenance()
    leaves = sum(1 for r in records if r["kind"] == "Leaf")
    interims = sum(1 for r in records if r["kind"] == "Interim")
    finals = sum(1 for r in records if r["kind"] == "Final")
    assert finals == 1
    assert len(records) == leaves + interims + finals


def test_export_single_source_of_truth(fixture_corpus):
    session = fixture_session(fixture_corpus)
    session.build_map()
    session.run()
    from reviewmap.metrics import export_corpus_csv

    direct = export_corpus_csv(
        session.corpus,
        agents=[session.agents[a] for a in sorted(session.agents)],
        cluster_assignments=session.cluster_model.assignments,
        phrases=session.phrases,
    )
    assert session.get_export() == direct


# ---------------------------------------------------------------------------
# Interventions
# ---------------------------------------------------------------------------

def test_path_intervention_next_read(fixture_corpus):
    session = fixture_session(fixture_corpus)
    session.build_map()
    agent_id = sorted(session.agents)[0]
    target = session.cluster_model.members(session.agents[agent_id].cluster_id)[-1]
    session.post_intervention(agent_id, PathIntervention(target))
    session.start()
    session.run()
    reads = [
        e for e in session.event_log
        if e.kind is EventKind.ARTICLE_READ and e.agent_id == agent_id
    ]
    assert reads[0].payload["article_id"] == target
    assert reads[0].payload["forced_by"] == "iv-1"


def test_instruct_reflection_precedes_next_read(fixture_corpus):
    session = fixture_session(fixture_corpus)
    session.build_map()
    agent_id = sorted(session.agents)[0]
    session.post_intervention(
        agent_id, InstructIntervention({"summarization_requirement": "terse"})
    )
    session.start()
    session.run()
    kinds = [
        e.kind for e in session.event_log
        if e.agent_id == agent_id and e.kind in (EventKind.ARTICLE_READ, EventKind.REFLECTION_COMPLETED)
    ]
    assert kinds[0] is EventKind.REFLECTION_COMPLETED


def test_path_unknown_article_rejected(fixture_corpus):
    session = fixture_session(fixture_corpus)
    session.build_map()
    agent_id = sorted(session.agents)[0]
    before = len(session.event_log)
    with pytest.raises(UnknownArticle):
        session.post_intervention(agent_id, PathIntervention("no-such-id"))
    assert len(session.event_log) == before


def test_no_lost_interventions(fixture_corpus):
    session = fixture_session(fixture_corpus)
    session.build_map()
    agents = sorted(session.agents)
    target = session.cluster_model.members(session.agents[agents[0]].cluster_id)[-1]
    session.post_intervention(agents[0], PathIntervention(target))
    session.post_intervention(agents[0], ChatIntervention("Looks fine"))
    session.run()
    # queue one on a done agent after quiesce: it revives, consumes, re-quiesces
    session.post_intervention(agents[0], ChatIntervention("focus on randomized trials"))
    session.run()
    session.synthesize()
    accepted = {
        e.payload["intervention_id"]
        for e in session.event_log
        if e.kind is EventKind.INTERVENTION_ACCEPTED
    }
    assert accepted == session.consumed_interventions | session.expired_interventions
    assert not session.pending_interventions


def test_done_agent_revived_by_intervention(fixture_corpus):
    session = fixture_session(fixture_corpus)
    session.build_map()
    session.run()
    assert session.phase is Phase.QUIESCED
    agent_id = sorted(session.agents)[0]
    unread = [a.id for a in session.corpus if a.read_state.value == "Unread"]
    target = [a for a in unread if session.cluster_model.assignments[a] == session.agents[agent_id].cluster_id][0]
    session.post_intervention(agent_id, PathIntervention(target))
    assert session.phase is Phase.RUNNING
    session.run()
    assert session.corpus.get(target).read_state.value == "Read"


def test_pause_and_resume(fixture_corpus):
    session = fixture_session(fixture_corpus)
    session.build_map()
    agent_id = sorted(session.agents)[0]
    session.pause(agent_id)
    assert session.agents[agent_id].status.value == "Paused"
    session.start(agent_id)
    assert session.agents[agent_id].status.value == "Idle"


# ---------------------------------------------------------------------------
# Event stream semantics
# ---------------------------------------------------------------------------

def test_subscribe_replays_then_tails(fixture_corpus):
    session = fixture_session(fixture_corpus)
    session.build_map()
    backlog, live = session.subscribe(0)
    assert [e.seq for e in backlog] == list(range(1, session.last_seq + 1))
    session.run()
    tail = []
    while not live.empty():
        tail.append(live.get())
    assert tail
    assert tail[0].seq == backlog[-1].seq + 1
    seqs = [e.seq for e in backlog + tail]
    assert seqs == list(range(1, session.last_seq + 1))


def test_two_subscribers_identical(fixture_corpus):
    session = fixture_session(fixture_corpus)
    session.build_map()
    b1, q1 = session.subscribe(0)
    b2, q2 = session.subscribe(0)
    session.run()
    drain = lambda q: [e.seq for e in iter(lambda: q.get() if not q.empty() else None, None)]
    assert [e.seq for e in b1] + drain(q1) == [e.seq for e in b2] + drain(q2)


def test_resume_from_41_starts_at_42(fixture_corpus):
    session = fixture_session(fixture_corpus)
    session.build_map()
    session.run()
    assert session.last_seq > 42
    backlog, live = session.subscribe(41)
    assert backlog[0].seq == 42
    seqs = [e.seq for e in backlog]
    assert seqs == list(range(42, session.last_seq + 1))  # no gaps, no duplicates


# ---------------------------------------------------------------------------
# Crash recovery
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("kill_seq", [25, 60, 90])
def test_replay_reconstructs_observable_state(fixture_corpus, tmp_path, kill_seq):
    session = fixture_session(fixture_corpus, tmp_path=tmp_path)
    session.build_map()
    session.run(stop_at_seq=kill_seq)
    before = session.observable_state()
    recovered = load_session(tmp_path / "sess")
    assert recovered.observable_state() == before
    assert [e.to_json() for e in recovered.event_log] == [e.to_json() for e in session.event_log]


def test_recovered_session_can_finish(fixture_corpus, tmp_path):
    session = fixture_session(fixture_corpus, tmp_path=tmp_path)
    session.build_map()
    session.run(stop_at_seq=40)
    recovered = load_session(tmp_path / "sess")
    recovered.run()
    recovered.synthesize()
    assert recovered.phase is Phase.SYNTHESIZED
    assert recovered.included_ids() == fixture_corpus.gold_ids


# ---------------------------------------------------------------------------
# HTTP surface
# ---------------------------------------------------------------------------

@pytest.fixture
def client(tmp_path):
    app = create_app(SessionStore(base_dir=tmp_path))
    with TestClient(app) as test_client:
        yield test_client


def _create_and_upload(client, fixture_corpus) -> str:
    response = client.post(
        "/sessions",
        json={
            "research_question": fixture_corpus.research_question,
            "inclusion_exclusion_criteria": fixture_corpus.inclusion_exclusion_criteria,
            "seed": 42,
        },
    )
    session_id = response.json()["session_id"]
    upload = client.post(f"/sessions/{session_id}/corpus", content=fixture_corpus.as_csv())
    assert upload.json() == {"articles": 200}
    return session_id

def test_http_full_flow(client, fixture_corpus):
    session_id = _create_and_upload(client, fixture_corpus)
    info = client.post(f"/sessions/{session_id}/map").json()
    assert info["articles"] == 200
    assert client.post(f"/sessions/{session_id}/start?wait=true").status_code == 200
    assert client.post(f"/sessions/{session_id}/synthesize").status_code == 200
    report = client.get(f"/sessions/{session_id}/report").json()
    assert report["markdown"].startswith("# Systematic Review Report")
    provenance = client.get(f"/sessions/{session_id}/provenance").json()
    assert provenance
    export = client.get(f"/sessions/{session_id}/export.csv")
    assert export.headers["content-type"].startswith("text/csv")
    assert len(export.text.splitlines()) == 201
    layout = client.get(f"/sessions/{session_id}/map").json()
    assert len(layout) == 200


def test_http_error_mapping(client, fixture_corpus):
    assert client.get("/sessions/nope/report").status_code == 404
    fresh = client.post("/sessions", json={"research_question": "q"}).json()["session_id"]
    assert client.post(f"/sessions/{fresh}/corpus", content="id,title\nbad").status_code == 400
    assert client.post(f"/sessions/{fresh}/map").status_code == 409
    session_id = _create_and_upload(client, fixture_corpus)
    assert client.get(f"/sessions/{session_id}/report").status_code == 409
    assert client.post(f"/sessions/{session_id}/corpus", content="again").status_code == 409
    response = client.post(
        f"/sessions/{session_id}/agents/agent-0/interventions",
        json={"kind": "path", "target_article": "x"},
    )
    assert response.status_code == 404  # no agents before map


def test_http_intervention_and_events(client, fixture_corpus):
    session_id = _create_and_upload(client, fixture_corpus)
    client.post(f"/sessions/{session_id}/map")
    response = client.post(
        f"/sessions/{session_id}/agents/agent-0/interventions",
        json={"kind": "chat", "text": "hello"},
    )
    assert response.json()["intervention_id"] == "iv-1"
    client.post(f"/sessions/{session_id}/start?wait=true")
    client.post(f"/sessions/{session_id}/synthesize")
    with client.stream("GET", f"/sessions/{session_id}/events?from=0") as stream:
        seqs = []
        for line in stream.iter_lines():
            if line.startswith("data: "):
                seqs.append(json.loads(line[6:])["seq"])
            if line.startswith("event: end"):
                break
    assert seqs == list(range(1, len(seqs) + 1))


def test_http_event_resume_no_gaps(client, fixture_corpus):
    session_id = _create_and_upload(client, fixture_corpus)
    client.post(f"/sessions/{session_id}/map")
    client.post(f"/sessions/{session_id}/start?wait=true")
    client.post(f"/sessions/{session_id}/synthesize")
    with client.stream("GET", f"/sessions/{session_id}/events?from=41") as stream:
        seqs = []
        for line in stream.iter_lines():
            if line.startswith("data: "):
                seqs.append(json.loads(line[6:])["seq"])
            if line.startswith("event: end"):
                break
    assert seqs[0] == 42
    assert seqs == list(range(42, seqs[-1] + 1))


def test_included_id_sets_variants(fixture_corpus):
    session = fixture_session(fixture_corpus)
    session.build_map()
    agent_id = sorted(session.agents)[0]
    # force a read of an article the mock would include anyway, plus one it would not
    relevant_target = sorted(fixture_corpus.gold_ids)[0]
    irrelevant_target = sorted(set(a.id for a in session.corpus) - fixture_corpus.gold_ids)[0]
    session.post_intervention(agent_id, PathIntervention(irrelevant_target))
    session.run()
    sets = session.included_id_sets()
    assert sets["system_only"] <= sets["with_interventions"]
    assert relevant_target in sets["with_interventions"]
    # the irrelevant forced read was excluded, so it is in neither set
    assert irrelevant_target not in sets["with_interventions"]


def test_prompt_audit_log(fixture_corpus, tmp_path):
    session = fixture_session(fixture_corpus, tmp_path=tmp_path)
    session.build_map()
    session.run()
    audit_path = tmp_path / "sess" / "prompts.jsonl"
    assert audit_path.exists()
    lines = [json.loads(line) for line in audit_path.read_text().splitlines()]
    assert lines, "prompt renderings should be logged"
    assert [entry["n"] for entry in lines] == list(range(1, len(lines) + 1))
    schemas = {entry["schema"] for entry in lines}
    assert {"Retrieve", "Read", "Synthesize"} <= schemas
    assert all(entry["prompt"].strip() for entry in lines)


def test_recovery_after_synthesis_with_recheck(fixture_corpus, tmp_path):
    # A criteria-narrowing instruct detaches a leaf and leaves stale ancestors;
    # synthesis re-freshens them. Replay must reproduce the final state exactly.
    session = fixture_session(fixture_corpus, tmp_path=tmp_path, seed=42)
    session.build_map()
    plant = fixture_corpus.planted_ids[0]
    plant_agent = f"agent-{session.cluster_model.assignments[plant]}"
    narrowed = fixture_corpus.inclusion_exclusion_criteria + " must mention: randomized"
    script = [
        (10_000, plant_agent, InstructIntervention({"inclusion_exclusion_criteria": narrowed})),
    ]
    session.run(script=script)
    session.synthesize()
    assert session.corpus.get(plant).decision.value == "Excluded"
    before = session.observable_state()
    recovered = load_session(tmp_path / "sess")
    assert recovered.observable_state() == before
    assert recovered.get_report() == session.get_report()


def test_http_live_stream_with_background_runner(client, fixture_corpus):
    session_id = _create_and_upload(client, fixture_corpus)
    client.post(f"/sessions/{session_id}/map")
    client.post(f"/sessions/{session_id}/start")  # background thread
    deadline = time.time() + 30
    while time.time() < deadline:
        status = client.post(f"/sessions/{session_id}/synthesize")
        if status.status_code == 200:
            break
        time.sleep(0.05)
    assert status.status_code == 200
    with client.stream("GET", f"/sessions/{session_id}/events?from=0") as stream:
        seqs = []
        for line in stream.iter_lines():
            if line.startswith("data: "):
                seqs.append(json.loads(line[6:])["seq"])
            if line.startswith("event: end"):
                break
    assert seqs == list(range(1, len(seqs) + 1))


def test_http_store_recovers_sessions_from_disk(tmp_path, fixture_corpus):
    first = create_app(SessionStore(base_dir=tmp_path))
    with TestClient(first) as client_a:
        session_id = _create_and_upload(client_a, fixture_corpus)
        client_a.post(f"/sessions/{session_id}/map")
        client_a.post(f"/sessions/{session_id}/start?wait=true")
        client_a.post(f"/sessions/{session_id}/synthesize")
        report_a = client_a.get(f"/sessions/{session_id}/report").json()
        export_a = client_a.get(f"/sessions/{session_id}/export.csv").text
    # a fresh service over the same directory replays the persisted log
    second = create_app(SessionStore(base_dir=tmp_path))
    with TestClient(second) as client_b:
        report_b = client_b.get(f"/sessions/{session_id}/report").json()
        export_b = client_b.get(f"/sessions/{session_id}/export.csv").text
    assert report_b == report_a
    assert export_b == export_a
