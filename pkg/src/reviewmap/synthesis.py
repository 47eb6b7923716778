"""Final integration of all agents' evidence into a cited five-section report.

Citation tags from the evidence base (``<citation>ID</citation>``) become
dense bracketed numbers ``[n]`` assigned by first appearance; bibliography
entries resolve every number down to article-level sources, expanding
interim-synthesis citations through the provenance graph.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from enum import Enum

from .agent import AgentConfig
from .corpus import Corpus
from .errors import NoEvidence
from .memory import (
    CITATION_RE,
    NodeCounter,
    NodeKind,
    ProvenanceGraph,
    SynthesisNode,
    resolve_citations,
)
from .provider import Provider, render_synthesize

logger = logging.getLogger(__name__)

SECTION_NAMES = ("Introduction", "Study Design", "Key Findings", "Discussion", "Conclusion")
TEMPLATE_SECTION_ORDER = ("Introduction", "Study Design", "Key Findings", "Conclusion", "Discussion")


class ReportFormat(str, Enum):
    MARKDOWN = "Markdown"
    PLAIN_TEXT = "PlainText"


@dataclass
class BibliographyEntry:
    number: int
    articles: list[tuple[str, str]]  # (article id, title)


@dataclass
class FinalReport:
    sections: list[tuple[str, str]]
    bibliography: list[BibliographyEntry]
    citation_map: dict[int, str]
    final_node_id: str


def renumber_citations(text: str, graph: ProvenanceGraph) -> tuple[str, dict[int, str]]:
    """Convert citation tags to dense ``[n]`` numbering by first appearance.

    Repeated references reuse their number; tags citing unknown nodes are
    stripped with a warning.
    """
    numbering: dict[str, int] = {}

    def sub(match: re.Match[str]) -> str:
        node_id = match.group(1).strip()
        if node_id not in graph.nodes:
            logger.warning("stripping citation of unknown node %r", node_id)
            return ""
        if node_id not in numbering:
            numbering[node_id] = len(numbering) + 1
        return f"[{numbering[node_id]}]"

    renumbered = CITATION_RE.sub(sub, text)
    citation_map = {number: node_id for node_id, number in numbering.items()}
    return renumbered, citation_map


def _split_sections(text: str) -> dict[str, str]:
    """Carve the backend's synthblock into named sections."""
    pattern = re.compile(
        rf"^({'|'.join(re.escape(n) for n in SECTION_NAMES)})\s*:\s*", re.MULTILINE
    )
    sections: dict[str, str] = {}
    matches = list(pattern.finditer(text))
    for i, match in enumerate(matches):
        end = matches[i + 1].start() if i + 1 < len(matches) else len(text)
        name = match.group(1)
        if name not in sections:
            sections[name] = text[match.end() : end].strip()
    return sections


def combine_graphs(graphs: list[ProvenanceGraph], counter: NodeCounter) -> ProvenanceGraph:
    """Session-wide view over all agents' nodes; root order follows agent order."""
    combined = ProvenanceGraph(agent_id="session", counter=counter)
    for graph in graphs:
        combined.nodes.update(graph.nodes)
        combined.roots.extend(graph.roots)
    return combined


def resynthesize_stale(
    graph: ProvenanceGraph, provider: Provider, config: AgentConfig
) -> list[str]:
    """Regenerate text for nodes whose evidence changed after a recheck."""
    refreshed = []
    for node in sorted(graph.nodes.values(), key=lambda n: n.timestamp):
        if not node.stale or node.kind is NodeKind.LEAF:
            continue
        children = [{"id": c, "text": graph.nodes[c].text} for c in node.children]
        request = render_synthesize(
            query=config.research_question,
            summarization_requirement=config.summarization_requirement,
            inclusion_exclusion_criteria=config.inclusion_exclusion_criteria,
            current_summary_index="",
            paper_summary="",
            previous_summaries=children,
            final_mode=True,
        )
        output = provider.complete_structured(request)
        allowed = set(node.children) | graph.descendants(node.node_id)
        node.text, node.citations = resolve_citations(output["synthesized_summary"], allowed)
        node.stale = False
        refreshed.append(node.node_id)
    return refreshed


def final_synthesis(
    graphs: list[ProvenanceGraph],
    config: AgentConfig,
    provider: Provider,
    corpus: Corpus,
    counter: NodeCounter,
    section_order: tuple[str, ...] = SECTION_NAMES,
) -> tuple[FinalReport, ProvenanceGraph]:
    """Stage-3 integration: one Final node over all merged roots.

    Stale interim nodes are re-synthesized first; the Final node's text is
    split into the five template sections and its citations renumbered.
    Returns the report plus the combined session graph (Final appended).
    """
    if not any(graph.leaves() for graph in graphs):
        raise NoEvidence("no included articles to synthesize")
    for graph in graphs:
        resynthesize_stale(graph, provider, config)
    combined = combine_graphs(graphs, counter)
    roots = list(combined.roots)
    request = render_synthesize(
        query=config.research_question,
        summarization_requirement=config.summarization_requirement,
        inclusion_exclusion_criteria=config.inclusion_exclusion_criteria,
        current_summary_index="",
        paper_summary="",
        previous_summaries=[{"id": r, "text": combined.nodes[r].text} for r in roots],
        final_mode=True,
    )
    output = provider.complete_structured(request)
    value = counter.allocate()
    allowed = set(roots)
    for root in roots:
        allowed |= combined.descendants(root)
    text, citations = resolve_citations(output["synthesized_summary"], allowed)
    final_node = SynthesisNode(
        node_id=str(value),
        kind=NodeKind.FINAL,
        text=text,
        agent_id="session",
        timestamp=value,
        children=roots,
        citations=citations,
    )
    combined.nodes[final_node.node_id] = final_node
    combined.roots = [final_node.node_id]
    combined.verify_acyclic()

    named = _split_sections(text)
    ordered_bodies = [(name, named.get(name, "")) for name in section_order]
    joined = "\n\x00SECTION\x00\n".join(body for _, body in ordered_bodies)
    renumbered, citation_map = renumber_citations(joined, combined)
    bodies = renumbered.split("\n\x00SECTION\x00\n")
    sections = [(name, body) for (name, _), body in zip(ordered_bodies, bodies)]

    bibliography = _build_bibliography(citation_map, combined, corpus)
    report = FinalReport(
        sections=sections,
        bibliography=bibliography,
        citation_map=citation_map,
        final_node_id=final_node.node_id,
    )
    return report, combined


def _build_bibliography(
    citation_map: dict[int, str], graph: ProvenanceGraph, corpus: Corpus
) -> list[BibliographyEntry]:
    entries = []
    for number in sorted(citation_map):
        node_id = citation_map[number]
        articles = []
        for _, article_id in graph.provenance_of(node_id):
            article = corpus.get(article_id)
            title = article.title if article else ""
            pair = (article_id, title)
            if pair not in articles:
                articles.append(pair)
        entries.append(BibliographyEntry(number=number, articles=articles))
    return entries


def render_report(report: FinalReport, format: ReportFormat = ReportFormat.MARKDOWN) -> str:
    """Deterministic serialization with the bibliography as a numbered list."""
    lines: list[str] = []
    markdown = format is ReportFormat.MARKDOWN
    if markdown:
        lines.append("# Systematic Review Report")
    else:
        lines.append("Systematic Review Report")
        lines.append("=" * len("Systematic Review Report"))
    lines.append("")
    for name, body in report.sections:
        if markdown:
            lines.append(f"## {name}")
        else:
            lines.append(name)
            lines.append("-" * len(name))
        lines.append(body.strip() if body.strip() else "(no content)")
        lines.append("")
    if markdown:
        lines.append("## References")
    else:
        lines.append("References")
        lines.append("-" * len("References"))
    for entry in report.bibliography:
        sources = "; ".join(f"{title} ({article_id})" for article_id, title in entry.articles)
        lines.append(f"{entry.number}. {sources}")
    lines.append("")
    return "\n".join(lines)


def parse_report_sections(document: str) -> list[str]:
    """Recover section names from a rendered report (round-trip check)."""
    names = []
    for line in document.splitlines():
        if line.startswith("## ") and line[3:] != "References":
            names.append(line[3:])
    return names
