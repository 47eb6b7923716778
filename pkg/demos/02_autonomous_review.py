"""Full autonomous run: map, screen, merge evidence, synthesize the report.

One agent per cluster reads outward from the map center under the offline
backend; included summaries merge into per-agent provenance DAGs, and the
final stage integrates every agent's roots into a five-section report with
renumbered citations. The run is fully deterministic for a fixed seed.
"""

from reviewmap.session import Session, SessionConfig
from reviewmap.synthetic import make_fixture_corpus

fixture = make_fixture_corpus(n=200, n_relevant=20, blobs=3, seed=42)
config = SessionConfig(
    research_question=fixture.research_question,
    inclusion_exclusion_criteria=fixture.inclusion_exclusion_criteria,
    seed=42,
)
session = Session(config)
session.upload_corpus(fixture.as_csv())
info = session.build_map()
print(f"mapped {info['articles']} articles into {info['k']} clusters")

session.run()
included = session.included_ids()
print(f"agents quiesced after {session.last_seq} events; included {len(included)} articles")
print(f"screening vs the construction gold set: "
      f"{'exact match' if included == fixture.gold_ids else 'MISMATCH'}")

for agent_id in sorted(session.agents):
    agent = session.agents[agent_id]
    graph = session.graphs[agent_id]
    print(f"  {agent_id}: cluster {agent.cluster_id}, read {len(agent.trajectory)}, "
          f"leaves {len(graph.leaves())}, roots {len(graph.roots)}")

session.synthesize()
report = session.get_report()
print("\n" + "=" * 72)
print(report["markdown"][:1500])
print("..." if len(report["markdown"]) > 1500 else "")
print(f"citation map: {[(c['n'], c['node_id'], len(c['articles'])) for c in report['citation_map']]}")
