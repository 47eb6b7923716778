"""Per-agent evidence base: a provenance DAG of summaries and syntheses.

Leaves hold article-level summaries; internal nodes hold interim syntheses
whose text cites descendants with ``<citation>ID</citation>`` tags. Each
merge folds the newest leaf together with whichever existing root the
backend identifies, so the root set always carries the agent's current
standalone evidence. The graph is append-only except for recheck, which may
detach leaves that no longer satisfy updated criteria.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from .errors import CycleDetected, DuplicateLeaf, NotIncluded, UnknownNode
from .provider import Provider, render_read, render_synthesize

logger = logging.getLogger(__name__)

CITATION_RE = re.compile(r"<citation>([^<]*)</citation>")
RECHECK_CAP = 10


class NodeKind(str, Enum):
    LEAF = "Leaf"
    INTERIM = "Interim"
    FINAL = "Final"


@dataclass
class SynthesisNode:
    node_id: str
    kind: NodeKind
    text: str
    agent_id: str
    timestamp: int
    children: list[str] = field(default_factory=list)
    source_article: str | None = None
    summary_phrase: str = ""
    citations: list[str] = field(default_factory=list)
    stale: bool = False

    def to_record(self) -> dict[str, Any]:
        return {
            "node_id": self.node_id,
            "kind": self.kind.value,
            "agent_id": self.agent_id,
            "timestamp": self.timestamp,
            "children": list(self.children),
            "source_article": self.source_article,
            "text": self.text,
        }


class NodeCounter:
    """Session-monotone counter doubling as node id and logical timestamp."""

    def __init__(self, start: int = 1):
        self._next = start

    def allocate(self) -> int:
        value = self._next
        self._next += 1
        return value

    def bump_past(self, value: int) -> None:
        self._next = max(self._next, value + 1)

    @property
    def peek(self) -> int:
        return self._next


@dataclass
class ProvenanceGraph:
    """One agent's DAG; ``roots`` are the parentless nodes in creation order."""

    agent_id: str
    counter: NodeCounter = field(default_factory=NodeCounter)
    nodes: dict[str, SynthesisNode] = field(default_factory=dict)
    roots: list[str] = field(default_factory=list)

    def node(self, node_id: str) -> SynthesisNode:
        if node_id not in self.nodes:
            raise UnknownNode(node_id)
        return self.nodes[node_id]

    def leaf_for_article(self, article_id: str) -> SynthesisNode | None:
        for node in self.nodes.values():
            if node.kind is NodeKind.LEAF and node.source_article == article_id:
                return node
        return None

    def leaves(self) -> list[SynthesisNode]:
        return [n for n in self.nodes.values() if n.kind is NodeKind.LEAF]

    def parent_of(self, node_id: str) -> SynthesisNode | None:
        for node in self.nodes.values():
            if node_id in node.children:
                return node
        return None

    def descendants(self, node_id: str) -> set[str]:
        seen: set[str] = set()
        stack = list(self.node(node_id).children)
        while stack:
            current = stack.pop()
            if current in seen:
                continue
            seen.add(current)
            stack.extend(self.nodes[current].children)
        return seen

    def verify_acyclic(self) -> None:
        state: dict[str, int] = {}

        def visit(node_id: str) -> None:
            state[node_id] = 1
            for child in self.nodes[node_id].children:
                mark = state.get(child, 0)
                if mark == 1:
                    raise CycleDetected(f"cycle through node {child}")
                if mark == 0:
                    visit(child)
            state[node_id] = 2

        for node_id in self.nodes:
            if state.get(node_id, 0) == 0:
                visit(node_id)

    def insert_node(self, node: SynthesisNode, as_root: bool = True) -> None:
        """Insert a fully built node (replay path); re-verifies acyclicity."""
        if node.node_id in self.nodes:
            raise CycleDetected(f"node {node.node_id} already present")
        for child in node.children:
            if child not in self.nodes:
                raise UnknownNode(child)
        self.nodes[node.node_id] = node
        try:
            self.verify_acyclic()
        except CycleDetected:
            del self.nodes[node.node_id]
            raise
        if as_root:
            for child in node.children:
                if child in self.roots:
                    self.roots.remove(child)
            self.roots.append(node.node_id)
        if node.node_id.isdigit():
            self.counter.bump_past(int(node.node_id))

    def provenance_of(self, node_id: str) -> list[tuple[str, str]]:
        """All leaf descendants as (node_id, article_id), depth-first order."""
        node = self.node(node_id)
        result: list[tuple[str, str]] = []
        seen: set[str] = set()

        def walk(current: SynthesisNode) -> None:
            if current.node_id in seen:
                return
            seen.add(current.node_id)
            if current.kind is NodeKind.LEAF:
                result.append((current.node_id, current.source_article or ""))
                return
            for child in current.children:
                walk(self.node(child))

        walk(node)
        return result

    def export_records(self) -> list[dict[str, Any]]:
        ordered = sorted(self.nodes.values(), key=lambda n: n.timestamp)
        return [n.to_record() for n in ordered]


def resolve_citations(text: str, allowed: set[str]) -> tuple[str, list[str]]:
    """Keep tags citing allowed ids; strip the rest with a warning."""
    citations: list[str] = []

    def sub(match: re.Match[str]) -> str:
        cited = match.group(1).strip()
        if cited in allowed:
            if cited not in citations:
                citations.append(cited)
            return match.group(0)
        logger.warning("stripping citation of unknown node %r", cited)
        return ""

    cleaned = CITATION_RE.sub(sub, text)
    return cleaned, citations


def strip_citation(text: str, node_id: str) -> str:
    return re.sub(rf"<citation>\s*{re.escape(node_id)}\s*</citation>", "", text)


def add_leaf(graph: ProvenanceGraph, outcome) -> str:
    """Store an included article's summary as a new root leaf.

    ``outcome`` is a read outcome carrying article_id, related_to_query,
    summary_of_the_paper and summary_phrase.
    """
    if not outcome.related_to_query:
        raise NotIncluded(f"article {outcome.article_id} was not included")
    if graph.leaf_for_article(outcome.article_id) is not None:
        raise DuplicateLeaf(outcome.article_id)
    value = graph.counter.allocate()
    node = SynthesisNode(
        node_id=str(value),
        kind=NodeKind.LEAF,
        text=outcome.summary_of_the_paper,
        agent_id=graph.agent_id,
        timestamp=value,
        summary_phrase=outcome.summary_phrase,
        source_article=outcome.article_id,
    )
    graph.nodes[node.node_id] = node
    graph.roots.append(node.node_id)
    graph.verify_acyclic()
    return node.node_id


def merge(
    graph: ProvenanceGraph,
    new_leaf_id: str,
    provider: Provider,
    *,
    query: str,
    summarization_requirement: str = "",
    inclusion_exclusion_criteria: str = "",
) -> str:
    """Fold the new leaf into the evidence base (the incremental-synthesis step).

    When the backend identifies relevant roots, a new interim node adopts
    them plus the leaf as children; otherwise the leaf stays a standalone
    root and its id is returned.
    """
    leaf = graph.node(new_leaf_id)
    if new_leaf_id not in graph.roots:
        raise UnknownNode(f"{new_leaf_id} is not a current root")
    previous = [
        {"id": r, "text": graph.nodes[r].text} for r in graph.roots if r != new_leaf_id
    ]
    request = render_synthesize(
        query=query,
        summarization_requirement=summarization_requirement,
        inclusion_exclusion_criteria=inclusion_exclusion_criteria,
        current_summary_index=new_leaf_id,
        paper_summary=leaf.text,
        previous_summaries=previous,
    )
    output = provider.complete_structured(request)
    valid_roots = {p["id"] for p in previous}
    identified = []
    for candidate in output["identified_relevant_summaries"]:
        if candidate in valid_roots:
            identified.append(candidate)
        else:
            logger.warning("backend identified non-root %r; ignoring", candidate)
    if not identified:
        return new_leaf_id

    children = [*identified, new_leaf_id]
    value = graph.counter.allocate()
    allowed = set(children)
    for child in children:
        allowed |= graph.descendants(child)
    text, citations = resolve_citations(output["synthesized_summary"], allowed)
    node = SynthesisNode(
        node_id=str(value),
        kind=NodeKind.INTERIM,
        text=text,
        agent_id=graph.agent_id,
        timestamp=value,
        children=children,
        citations=citations,
    )
    graph.nodes[node.node_id] = node
    for child in children:
        graph.roots.remove(child)
    graph.roots.append(node.node_id)
    graph.verify_acyclic()
    return node.node_id


def detach_leaf(graph: ProvenanceGraph, leaf_id: str) -> dict[str, Any]:
    """Remove a leaf whose article no longer satisfies the criteria.

    The parent loses the child and its text is flagged stale (dangling
    citation tags are stripped immediately so citation soundness holds
    continuously); a parent left with a single child collapses and the
    survivor takes its place. Returns a structural delta for the event log.
    """
    leaf = graph.node(leaf_id)
    delta: dict[str, Any] = {"detached": leaf_id, "collapsed": [], "stale": []}
    parent = graph.parent_of(leaf_id)
    if parent is None:
        graph.roots.remove(leaf_id)
    else:
        parent.children.remove(leaf_id)
        current: SynthesisNode | None = parent
        while current is not None:
            current.text = strip_citation(current.text, leaf_id)
            if leaf_id in current.citations:
                current.citations.remove(leaf_id)
            if not current.stale:
                current.stale = True
                delta["stale"].append(current.node_id)
            current = graph.parent_of(current.node_id)
        if len(parent.children) < 2:
            survivor = parent.children[0]
            grandparent = graph.parent_of(parent.node_id)
            if grandparent is None:
                position = graph.roots.index(parent.node_id)
                graph.roots[position] = survivor
            else:
                position = grandparent.children.index(parent.node_id)
                grandparent.children[position] = survivor
                grandparent.text = strip_citation(grandparent.text, parent.node_id)
                if parent.node_id in grandparent.citations:
                    grandparent.citations.remove(parent.node_id)
            delta["collapsed"].append(parent.node_id)
            del graph.nodes[parent.node_id]
    del graph.nodes[leaf_id]
    graph.verify_acyclic()
    return delta


def rank_leaves_by_similarity(
    graph: ProvenanceGraph, provider: Provider, reference_text: str, cap: int
) -> list[SynthesisNode]:
    leaves = sorted(graph.leaves(), key=lambda n: n.timestamp)
    if not leaves:
        return []
    vectors = provider.embed([reference_text] + [leaf.text for leaf in leaves])
    reference = vectors[0]
    scored = [
        (float(reference @ vec), leaf) for vec, leaf in zip(vectors[1:], leaves)
    ]
    scored.sort(key=lambda pair: (-pair[0], pair[1].timestamp))
    return [leaf for _, leaf in scored[:cap]]


def recheck(
    graph: ProvenanceGraph,
    provider: Provider,
    corpus,
    *,
    query: str,
    detailed_focus: str,
    inclusion_exclusion_criteria: str,
    changed_text: str,
    cap: int = RECHECK_CAP,
) -> list[dict[str, Any]]:
    """Re-screen stored evidence against updated requirements.

    Up to ``cap`` leaves (ranked by similarity to the changed text) get their
    read decision re-run; leaves that fail are detached and their articles
    flipped to Excluded. Returns one revision record per flipped article.
    """
    revisions: list[dict[str, Any]] = []
    for leaf in rank_leaves_by_similarity(graph, provider, changed_text, cap):
        article = corpus.get(leaf.source_article)
        if article is None:
            continue
        request = render_read(
            query=query,
            detailed_focus=detailed_focus,
            inclusion_criteria=inclusion_exclusion_criteria,
            findings_so_far="",
            already_read=[],
            paper={"id": article.id, "title": article.title, "abstract": article.abstract},
            conversation=[],
        )
        output = provider.complete_structured(request)
        if output["related_to_query"]:
            continue
        delta = detach_leaf(graph, leaf.node_id)
        article.mark_excluded(output["reason_of_exclusion"])
        article_revision = {
            "article_id": article.id,
            "leaf_id": leaf.node_id,
            "reason": output["reason_of_exclusion"],
            **delta,
        }
        revisions.append(article_revision)
    return revisions
