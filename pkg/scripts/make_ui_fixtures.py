"""Regenerate the frontend test fixtures from a scripted session.

The UI tests validate against the primary engine's actual interface
payloads: the layout export, the full event log, the provenance export,
and the corpus CSV. Run from the repo root:

    python scripts/make_ui_fixtures.py
"""

from __future__ import annotations

import json
from pathlib import Path

from reviewmap.agent import ChatIntervention, PathIntervention
from reviewmap.corpus import ReadState
from reviewmap.session import Session, SessionConfig
from reviewmap.synthetic import make_fixture_corpus

OUT = Path(__file__).resolve().parent.parent / "frontend" / "fixtures"


def main() -> None:
    fixture = make_fixture_corpus(n=200, n_relevant=20, blobs=3, seed=42)
    config = SessionConfig(
        research_question=fixture.research_question,
        inclusion_exclusion_criteria=fixture.inclusion_exclusion_criteria,
        seed=42,
    )

    probe = Session(config)
    probe.upload_corpus(fixture.as_csv())
    probe.build_map()
    probe.run()
    unread = sorted(a.id for a in probe.corpus if a.read_state is ReadState.UNREAD)

    session = Session(config)
    session.upload_corpus(fixture.as_csv())
    session.build_map()
    script = [
        (30, "agent-0", PathIntervention(unread[0])),
        (60, "agent-1", ChatIntervention("Looks good, continue.")),
    ]
    session.run(script=script)
    session.synthesize()

    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "layout.json").write_text(
        json.dumps(session.get_map(), sort_keys=True), encoding="utf-8"
    )
    (OUT / "events.jsonl").write_text(
        "\n".join(e.to_json() for e in session.event_log) + "\n", encoding="utf-8"
    )
    (OUT / "provenance.json").write_text(
        json.dumps(session.get_provenance(), sort_keys=True), encoding="utf-8"
    )
    (OUT / "export.csv").write_text(session.get_export(), encoding="utf-8")
    (OUT / "report.json").write_text(
        json.dumps(session.get_report(), sort_keys=True), encoding="utf-8"
    )
    (OUT / "session.json").write_text(
        json.dumps(
            {
                "session_id": session.session_id,
                "research_question": config.research_question,
                "agents": [
                    {
                        "agent_id": a,
                        "cluster_id": session.agents[a].cluster_id,
                        "start_article": next(
                            e.payload["start_article"]
                            for e in session.event_log
                            if e.kind.value == "AgentSpawned" and e.agent_id == a
                        ),
                    }
                    for a in sorted(session.agents)
                ],
            },
            sort_keys=True,
        ),
        encoding="utf-8",
    )
    print(f"wrote fixtures to {OUT} ({session.last_seq} events)")


if __name__ == "__main__":
    main()
