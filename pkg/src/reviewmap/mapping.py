"""Radial relevance-and-similarity layout, clustering, and neighbor queries.

Radius encodes relevance rank (most relevant at the center), angle comes
from a two-direction spectral projection of the mean-centered embeddings so
semantically similar articles land at nearby angles.  Clustering runs on
the 2D layout coordinates, with the cluster count picked by the elbow of
the within-cluster sum-of-squares curve.  Everything is deterministic given
(points, k, seed); ties break by ascending article id.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus, ReadState
from .errors import EmbeddingsMissing, KExceedsN, UnknownArticle

POWER_ITERATIONS = 100
MAX_LLOYD_ITERATIONS = 100
DEFAULT_RECEPTIVE_FIELD = 8
ELBOW_KMIN = 2
ELBOW_KMAX_CAP = 15


@dataclass
class MapLayout:
    """Polar position per article, with derived cartesian coordinates."""

    ids: list[str]
    radius: np.ndarray
    angle: np.ndarray
    x: np.ndarray = field(init=False)
    y: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.x = self.radius * np.cos(self.angle)
        self.y = self.radius * np.sin(self.angle)
        self._index = {article_id: i for i, article_id in enumerate(self.ids)}

    def __len__(self) -> int:
        return len(self.ids)

    def index_of(self, article_id: str) -> int:
        if article_id not in self._index:
            raise UnknownArticle(article_id)
        return self._index[article_id]

    @property
    def points(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    @classmethod
    def from_points(cls, ids: list[str], points: np.ndarray) -> MapLayout:
        """Build directly from cartesian points (used by tests and tools).

        The given coordinates are kept exactly; recomputing them from the
        polar form would perturb equidistant ties.
        """
        points = np.asarray(points, dtype=np.float64)
        radius = np.hypot(points[:, 0], points[:, 1])
        angle = np.mod(np.arctan2(points[:, 1], points[:, 0]), 2 * np.pi)
        layout = cls(ids=list(ids), radius=radius, angle=angle)
        layout.x = points[:, 0].copy()
        layout.y = points[:, 1].copy()
        return layout

    def export_records(self, assignments: dict[str, int] | None = None) -> list[dict]:
        records = []
        for i, article_id in enumerate(self.ids):
            records.append(
                {
                    "id": article_id,
                    "radius": float(self.radius[i]),
                    "angle": float(self.angle[i]),
                    "x": float(self.x[i]),
                    "y": float(self.y[i]),
                    "cluster": int(assignments[article_id]) if assignments else 0,
                }
            )
        return records


@dataclass
class ClusterModel:
    k: int
    assignments: dict[str, int]
    centroids: np.ndarray
    wcss: float

    def members(self, cluster_id: int) -> list[str]:
        return [a for a, c in self.assignments.items() if c == cluster_id]


def _spectral_directions(embeddings: np.ndarray, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Top two covariance directions via power iteration with deflation.

    Fixed iteration count and a seed-derived start vector keep the result
    deterministic; the sign is canonicalized so equal inputs give equal
    angles across runs.
    """
    n, dim = embeddings.shape
    centered = embeddings - embeddings.mean(axis=0, keepdims=True)
    rng = np.random.default_rng(seed)

    def top_direction(deflate: np.ndarray | None) -> np.ndarray:
        v = rng.normal(size=dim)
        v /= np.linalg.norm(v)
        for _ in range(POWER_ITERATIONS):
            w = centered.T @ (centered @ v)
            if deflate is not None:
                w -= deflate * np.dot(deflate, w)
            norm = np.linalg.norm(w)
            if norm < 1e-12:
                return v
            v = w / norm
        pivot = int(np.argmax(np.abs(v)))
        if v[pivot] < 0:
            v = -v
        return v

    u1 = top_direction(None)
    u2 = top_direction(u1)
    return u1, u2


def project_layout(corpus: Corpus, seed: int = 0) -> MapLayout:
    """Project an embedded, scored corpus into the radial layout.

    Radius is the relevance rank normalized to [0, 1] (rank 0 at the center);
    a single-article corpus sits at the origin. Angle is the atan2 of the two
    spectral projection coordinates.
    """
    if not corpus.embedded or any(a.relevance is None for a in corpus.articles):
        raise EmbeddingsMissing("layout requires embeddings and relevance")
    n = len(corpus)
    ids = [a.id for a in corpus.articles]

    order = sorted(range(n), key=lambda i: (-corpus.articles[i].relevance, ids[i]))
    rank = np.empty(n, dtype=np.float64)
    for r, i in enumerate(order):
        rank[i] = r
    radius = rank / (n - 1) if n > 1 else np.zeros(1)

    if n == 1:
        angle = np.zeros(1)
    else:
        embeddings = np.stack([a.embedding for a in corpus.articles])
        u1, u2 = _spectral_directions(embeddings, seed)
        centered = embeddings - embeddings.mean(axis=0, keepdims=True)
        angle = np.mod(np.arctan2(centered @ u2, centered @ u1), 2 * np.pi)
    return MapLayout(ids=ids, radius=radius, angle=angle)


# ---------------------------------------------------------------------------
# K-means with elbow selection
# ---------------------------------------------------------------------------

def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    centroids = np.empty((k, points.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centroids[0] = points[first]
    sq_dist = np.sum((points - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = float(sq_dist.sum())
        if total <= 0.0:
            choice = int(rng.integers(n))
        else:
            choice = int(rng.choice(n, p=sq_dist / total))
        centroids[j] = points[choice]
        sq_dist = np.minimum(sq_dist, np.sum((points - centroids[j]) ** 2, axis=1))
    return centroids


def kmeans_labels(
    points: np.ndarray, k: int, seed: int
) -> tuple[np.ndarray, np.ndarray, float, list[float]]:
    """Lloyd's algorithm from k-means++ seeding until the assignment fixpoint.

    Empty clusters are repaired by reseeding to the point farthest from its
    centroid. Returns (labels, centroids, wcss, wcss_trace); the trace is
    non-increasing.
    """
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if not 1 <= k <= n:
        raise KExceedsN(f"k={k} outside [1, {n}]")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(points, k, rng)
    labels = np.full(n, -1, dtype=np.int64)
    trace: list[float] = []
    for _ in range(MAX_LLOYD_ITERATIONS):
        distances = np.sum((points[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        new_labels = np.argmin(distances, axis=1)
        repaired = False
        for cluster in range(k):
            if np.any(new_labels == cluster):
                continue
            repaired = True
            point_dist = distances[np.arange(n), new_labels]
            # Points alone in their cluster must stay put or another cluster empties.
            counts = np.bincount(new_labels, minlength=k)
            movable = counts[new_labels] > 1
            if not np.any(movable):
                movable = np.ones(n, dtype=bool)
            candidates = np.where(movable)[0]
            farthest = candidates[int(np.argmax(point_dist[candidates]))]
            new_labels[farthest] = cluster
            centroids[cluster] = points[farthest]
        if not repaired and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for cluster in range(k):
            members = points[labels == cluster]
            if len(members):
                centroids[cluster] = members.mean(axis=0)
        wcss = float(np.sum((points - centroids[labels]) ** 2))
        trace.append(wcss)
    final_wcss = float(np.sum((points - centroids[labels]) ** 2))
    if not trace:
        trace.append(final_wcss)
    return labels, centroids, final_wcss, trace


def kmeans(points: np.ndarray, ids: list[str], k: int, seed: int) -> ClusterModel:
    labels, centroids, wcss, _ = kmeans_labels(points, k, seed)
    assignments = {article_id: int(labels[i]) for i, article_id in enumerate(ids)}
    return ClusterModel(k=k, assignments=assignments, centroids=centroids, wcss=wcss)


def elbow_k(points: np.ndarray, kmin: int, kmax: int, seed: int) -> int:
    """Pick k at the elbow of the WCSS curve.

    The (k, WCSS) curve is min-max normalized on both axes, then the k with
    the largest perpendicular distance to the chord joining the endpoints
    wins.  Normalizing first makes the choice invariant to uniform coordinate
    scaling.  Degenerate inputs (fewer than 2*kmin points) fall back to k=1.
    """
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if n < 2 * kmin:
        return 1
    kmax = min(kmax, n)
    if kmax < kmin:
        return 1
    ks = np.arange(kmin, kmax + 1, dtype=np.float64)
    wcss = np.array([kmeans_labels(points, int(k), seed)[2] for k in ks])
    if len(ks) == 1:
        return int(ks[0])
    k_span = ks[-1] - ks[0]
    w_span = wcss.max() - wcss.min()
    xs = (ks - ks[0]) / k_span
    ys = (wcss - wcss.min()) / w_span if w_span > 0 else np.zeros_like(wcss)
    x1, y1 = xs[0], ys[0]
    x2, y2 = xs[-1], ys[-1]
    chord_len = np.hypot(x2 - x1, y2 - y1)
    distance = np.abs((y2 - y1) * xs - (x2 - x1) * ys + x2 * y1 - y2 * x1) / chord_len
    return int(ks[int(np.argmax(distance))])


def auto_k(points: np.ndarray, seed: int) -> int:
    """Default cluster-count selection: elbow over [2, min(15, n/10)]."""
    n = len(points)
    kmax = min(ELBOW_KMAX_CAP, n // 10)
    if kmax < ELBOW_KMIN:
        return 1
    return elbow_k(points, ELBOW_KMIN, kmax, seed)


# ---------------------------------------------------------------------------
# Nearest neighbors over the layout
# ---------------------------------------------------------------------------

def _sorted_others(layout: MapLayout, index: int) -> list[int]:
    points = layout.points
    deltas = points - points[index]
    distances = np.hypot(deltas[:, 0], deltas[:, 1])
    order = sorted(
        (i for i in range(len(layout)) if i != index),
        key=lambda i: (distances[i], layout.ids[i]),
    )
    return order


def neighbors(
    layout: MapLayout,
    article_id: str,
    m: int = DEFAULT_RECEPTIVE_FIELD,
    unread_only: bool = False,
    read_states: dict[str, ReadState] | None = None,
) -> list[str]:
    """Up to ``m`` nearest other articles by layout distance.

    Sorted ascending by distance with ties broken by id; with
    ``unread_only`` the list is restricted to unread articles and may be
    shorter only when candidates run out.
    """
    index = layout.index_of(article_id)
    result: list[str] = []
    for i in _sorted_others(layout, index):
        other = layout.ids[i]
        if unread_only and read_states is not None:
            if read_states.get(other, ReadState.UNREAD) is not ReadState.UNREAD:
                continue
        result.append(other)
        if len(result) == m:
            break
    return result


@dataclass
class NeighborGraph:
    """Precomputed distance-ordered neighbor lists (the receptive-field substrate)."""

    m: int
    lists: dict[str, list[str]]

    @classmethod
    def build(cls, layout: MapLayout, m: int = DEFAULT_RECEPTIVE_FIELD) -> NeighborGraph:
        lists = {
            article_id: neighbors(layout, article_id, m=m) for article_id in layout.ids
        }
        return cls(m=m, lists=lists)

    def of(self, article_id: str) -> list[str]:
        if article_id not in self.lists:
            raise UnknownArticle(article_id)
        return self.lists[article_id]
