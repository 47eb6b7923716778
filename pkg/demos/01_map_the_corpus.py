"""Stage 1 walkthrough: ingest, embed, and map a corpus.

Builds a synthetic 200-abstract corpus (20 on the marker topic, three
semantic blobs), embeds it with the offline hashing embedder, projects the
radial relevance-and-similarity layout, and partitions it with
elbow-selected k-means. Prints the structure at each stage and, when
matplotlib is available, saves the map to ``corpus_map.png``.
"""

from reviewmap.corpus import embed_corpus, ingest
from reviewmap.mapping import NeighborGraph, auto_k, kmeans, neighbors, project_layout
from reviewmap.provider import Provider
from reviewmap.synthetic import make_fixture_corpus

fixture = make_fixture_corpus(n=200, n_relevant=20, blobs=3, seed=42)
print(f"research question: {fixture.research_question}")

corpus = ingest(fixture.records, research_question=fixture.research_question)
print(f"ingested {len(corpus)} articles")

provider = Provider()  # offline deterministic backend + hashing embedder
embed_corpus(corpus, provider)
by_relevance = sorted(corpus, key=lambda a: -a.relevance)
print("\nmost relevant articles (cosine to the question):")
for article in by_relevance[:5]:
    marker = "*" if article.id in fixture.gold_ids else " "
    print(f"  {marker} {article.relevance:+.3f}  {article.id}  {article.title[:70]}")
print("least relevant:")
for article in by_relevance[-3:]:
    print(f"    {article.relevance:+.3f}  {article.id}  {article.title[:70]}")

layout = project_layout(corpus, seed=42)
print("\nradial layout: radius = relevance rank (0 at the center), angle = spectral similarity")
center = by_relevance[0]
index = layout.index_of(center.id)
print(f"  center article {center.id}: radius {layout.radius[index]:.3f}, angle {layout.angle[index]:.2f} rad")

k = auto_k(layout.points, seed=42)
model = kmeans(layout.points, layout.ids, k, seed=42)
print(f"\nelbow-selected k = {k}; cluster sizes: "
      f"{[len(model.members(c)) for c in range(k)]}, WCSS = {model.wcss:.3f}")

graph = NeighborGraph.build(layout, m=8)
probe = center.id
print(f"\nreceptive field of {probe} (8 nearest): {neighbors(layout, probe, m=8)}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 7))
    colors = [model.assignments[a] for a in layout.ids]
    relevant = [a in fixture.gold_ids for a in layout.ids]
    ax.scatter(layout.x, layout.y, c=colors, s=18, cmap="tab10", alpha=0.7)
    ax.scatter(
        [x for x, r in zip(layout.x, relevant) if r],
        [y for y, r in zip(layout.y, relevant) if r],
        marker="*", s=120, edgecolors="black", facecolors="gold", label="marker topic",
    )
    ax.set_aspect("equal")
    ax.legend()
    ax.set_title("Radial corpus map (relevance = radius, similarity = angle)")
    fig.savefig("corpus_map.png", dpi=120)
    print("\nsaved corpus_map.png")
except ImportError:
    print("\nmatplotlib not installed; skipping the plot")
