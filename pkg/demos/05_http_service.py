"""The HTTP surface end to end: upload, map, steer, stream events, export.

Starts the service in a background thread, drives a session over plain
HTTP, tails the server-sent event stream, and fetches the report, the
provenance export, and the corpus CSV. State persists under ``./demo-data``
so a restarted service can replay the same session.
"""

import json
import threading
import time
from pathlib import Path

import requests
import uvicorn

from reviewmap.service import create_app
from reviewmap.session import SessionStore
from reviewmap.synthetic import make_fixture_corpus

PORT = 8411
BASE = f"http://127.0.0.1:{PORT}"

store = SessionStore(base_dir=Path("demo-data"))
server = uvicorn.Server(
    uvicorn.Config(create_app(store), host="127.0.0.1", port=PORT, log_level="warning")
)
thread = threading.Thread(target=server.run, daemon=True)
thread.start()
while not server.started:
    time.sleep(0.05)
print(f"service listening on {BASE}")

fixture = make_fixture_corpus(n=200, n_relevant=20, blobs=3, seed=42)
session_id = requests.post(
    f"{BASE}/sessions",
    json={
        "research_question": fixture.research_question,
        "inclusion_exclusion_criteria": fixture.inclusion_exclusion_criteria,
        "seed": 42,
    },
).json()["session_id"]
print(f"session {session_id}")

print(requests.post(f"{BASE}/sessions/{session_id}/corpus", data=fixture.as_csv()).json())
print(requests.post(f"{BASE}/sessions/{session_id}/map").json())

target = "art-001"
print(
    "path intervention:",
    requests.post(
        f"{BASE}/sessions/{session_id}/agents/agent-0/interventions",
        json={"kind": "path", "target_article": target},
    ).json(),
)

requests.post(f"{BASE}/sessions/{session_id}/start?wait=true")
requests.post(f"{BASE}/sessions/{session_id}/synthesize")

print("\nevent stream tail (first 6 and last 3 events):")
events = []
with requests.get(f"{BASE}/sessions/{session_id}/events?from=0", stream=True) as stream:
    for raw in stream.iter_lines():
        line = raw.decode("utf-8")
        if line.startswith("data: "):
            events.append(json.loads(line[6:]))
        if line.startswith("event: end"):
            break
for event in events[:6] + events[-3:]:
    print(f"  seq {event['seq']:4d}  {event['kind']:22s}  {event['agent_id'] or '-'}")
print(f"  ({len(events)} events total, dense sequence: "
      f"{[e['seq'] for e in events] == list(range(1, len(events) + 1))})")

report = requests.get(f"{BASE}/sessions/{session_id}/report").json()
print(f"\nreport: {len(report['markdown'])} chars, {len(report['citation_map'])} citations")
provenance = requests.get(f"{BASE}/sessions/{session_id}/provenance").json()
print(f"provenance export: {len(provenance)} nodes")
export = requests.get(f"{BASE}/sessions/{session_id}/export.csv").text
print(f"corpus export: {len(export.splitlines())} lines (incl. header)")

server.should_exit = True
thread.join(timeout=5)
print("\nservice stopped; session data persisted under demo-data/")
