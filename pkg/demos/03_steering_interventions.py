"""Live steering: path, chat, and instruct interventions with reflection.

Interventions are delivered mid-run at fixed event-log positions, so the
whole steered session replays byte-identically. The script shows a path
directive forcing the next read, a chat message narrowing the criteria via
reflection, and the memory re-check flipping a previously included article
that no longer satisfies the updated criteria.
"""

from reviewmap.agent import ChatIntervention, InstructIntervention, PathIntervention
from reviewmap.corpus import ReadState
from reviewmap.session import EventKind, Session, SessionConfig
from reviewmap.synthetic import make_fixture_corpus

fixture = make_fixture_corpus(n=200, n_relevant=20, blobs=3, seed=42)
plant = fixture.planted_ids[0]
print(f"planted off-criteria article (no RCT vocabulary): {plant}")


def new_session() -> Session:
    config = SessionConfig(
        research_question=fixture.research_question,
        inclusion_exclusion_criteria=fixture.inclusion_exclusion_criteria,
        seed=42,
    )
    session = Session(config)
    session.upload_corpus(fixture.as_csv())
    session.build_map()
    return session


# a probe run tells us the deterministic structure so the script can target it
probe = new_session()
probe.run()
plant_agent = f"agent-{probe.cluster_model.assignments[plant]}"
never_read = sorted(a.id for a in probe.corpus if a.read_state is ReadState.UNREAD)
path_target = never_read[0]
print(f"plant belongs to {plant_agent}; path target {path_target} is never read organically")

narrowed = fixture.inclusion_exclusion_criteria + " must mention: randomized"
script = [
    (30, "agent-0", PathIntervention(path_target)),
    (60, "agent-1", ChatIntervention("Looks good, continue.")),
    (10_000, plant_agent, InstructIntervention({"inclusion_exclusion_criteria": narrowed})),
]

session = new_session()
session.run(script=script)
session.synthesize()

print(f"\nevent log: {session.last_seq} events")
for event in session.event_log:
    if event.kind in (EventKind.INTERVENTION_ACCEPTED, EventKind.REFLECTION_COMPLETED):
        summary = event.payload.get("intervention_kind") or "reflection"
        print(f"  seq {event.seq:4d}  {event.agent_id}  {event.kind.value}  ({summary})")

forced = next(
    e for e in session.event_log
    if e.kind is EventKind.ARTICLE_READ and e.payload["forced_by"]
)
print(f"\npath directive consumed: {forced.payload['article_id']} read at seq {forced.seq} "
      f"(decision {forced.payload['decision']})")

article = session.corpus.get(plant)
print(f"after criteria narrowing, {plant} is {article.decision.value}: {article.exclusion_reason}")

revisions = [
    r for e in session.event_log if e.kind is EventKind.REFLECTION_COMPLETED
    for r in e.payload.get("revisions", [])
]
print(f"memory re-check revisions: {[(r['article_id'], r['reason']) for r in revisions]}")
