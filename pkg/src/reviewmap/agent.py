"""Per-cluster reading agents.

Each agent sweeps its cluster from the map center outward: it drains any
queued user interventions (reflecting when guidance changed), builds a
receptive field of up to eight nearest unread in-cluster articles around its
current position, asks the backend which candidates to read, reads them, and
merges included summaries into its evidence base.

A retrieve skip dismisses the offered frontier for this configuration (the
deterministic backend would refuse it again) and the agent falls back to the
nearest undismissed unread article, so a cluster is always swept to
exhaustion unless the consecutive-skip limit ends the walk first.
Reflection clears dismissals and the skip counter, since new guidance can
revive previously refused articles.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any

import numpy as np

from .corpus import Corpus, Decision, ReadState
from .errors import AlreadyRead, NoClusters, ProviderUnavailable, UnknownArticle
from .mapping import ClusterModel, MapLayout, NeighborGraph
from .memory import NodeCounter, ProvenanceGraph, add_leaf, merge, recheck
from .provider import Provider, render_read, render_reflect, render_retrieve

logger = logging.getLogger(__name__)

SKIP_LIMIT = 3
FINDINGS_SNIPPET_CHARS = 400


class AgentStatus(str, Enum):
    IDLE = "Idle"
    RETRIEVING = "Retrieving"
    READING = "Reading"
    SYNTHESIZING = "Synthesizing"
    REFLECTING = "Reflecting"
    PAUSED = "Paused"
    DONE = "Done"


@dataclass
class AgentConfig:
    research_question: str
    detailed_focus: str = ""
    inclusion_exclusion_criteria: str = ""
    summarization_requirement: str = ""


@dataclass
class PathIntervention:
    target_article: str
    intervention_id: str = ""
    kind: str = "path"


@dataclass
class ChatIntervention:
    text: str
    intervention_id: str = ""
    kind: str = "chat"


@dataclass
class InstructIntervention:
    updates: dict[str, str]
    intervention_id: str = ""
    kind: str = "instruct"


Intervention = PathIntervention | ChatIntervention | InstructIntervention


@dataclass
class ReadOutcome:
    article_id: str
    timestamp: int
    analysis: str
    response_preparation_analysis: str
    related_to_query: bool
    reason_of_exclusion: str
    summary_of_the_paper: str
    summary_phrase: str
    thought: str

    def to_payload(self) -> dict[str, Any]:
        return {
            "article_id": self.article_id,
            "timestamp": self.timestamp,
            "analysis": self.analysis,
            "response_preparation_analysis": self.response_preparation_analysis,
            "related_to_query": self.related_to_query,
            "reason_of_exclusion": self.reason_of_exclusion,
            "summary_of_the_paper": self.summary_of_the_paper,
            "summary_phrase": self.summary_phrase,
            "thought": self.thought,
        }

    @classmethod
    def from_payload(cls, payload: dict[str, Any]) -> ReadOutcome:
        return cls(**{k: payload[k] for k in cls.__dataclass_fields__})


@dataclass
class AgentState:
    agent_id: str
    cluster_id: int
    config: AgentConfig
    status: AgentStatus = AgentStatus.IDLE
    current_article: str | None = None
    trajectory: list[tuple[str, str, int]] = field(default_factory=list)
    frontier: list[str] = field(default_factory=list)
    forced_next: deque[tuple[str, str]] = field(default_factory=deque)  # (article, intervention)
    consecutive_skips: int = 0
    conversation: list[tuple[str, str]] = field(default_factory=list)
    read_budget: int | None = None
    dismissed: set[str] = field(default_factory=set)
    queue: deque[Intervention] = field(default_factory=deque)

    @property
    def read_ids(self) -> set[str]:
        return {article_id for article_id, _, _ in self.trajectory}

    @property
    def budget_exhausted(self) -> bool:
        return self.read_budget is not None and len(self.trajectory) >= self.read_budget

    @property
    def runnable(self) -> bool:
        return self.status not in (AgentStatus.PAUSED, AgentStatus.DONE)


@dataclass
class AgentRuntime:
    """Shared, read-mostly dependencies handed to every step."""

    corpus: Corpus
    layout: MapLayout
    neighbor_graph: NeighborGraph
    cluster_model: ClusterModel
    provider: Provider
    graph: ProvenanceGraph
    counter: NodeCounter
    recheck_cap: int = 10
    skip_limit: int = SKIP_LIMIT


def spawn_agents(
    cluster_model: ClusterModel,
    corpus: Corpus,
    layout: MapLayout,
    base_config: AgentConfig,
    read_budget: int | None = None,
    budgets: dict[int, int] | None = None,
) -> list[AgentState]:
    """One agent per cluster, starting at the cluster's most relevant article."""
    if cluster_model.k < 1 or not cluster_model.assignments:
        raise NoClusters("clustering produced no clusters")
    agents = []
    for cluster_id in range(cluster_model.k):
        members = cluster_model.members(cluster_id)
        if not members:
            raise NoClusters(f"cluster {cluster_id} is empty")
        start = min(members, key=lambda a: (layout.radius[layout.index_of(a)], a))
        budget = budgets.get(cluster_id) if budgets else read_budget
        agents.append(
            AgentState(
                agent_id=f"agent-{cluster_id}",
                cluster_id=cluster_id,
                config=replace(base_config),
                current_article=start,
                read_budget=budget,
            )
        )
    return agents


def _is_open(agent: AgentState, rt: AgentRuntime, article_id: str) -> bool:
    article = rt.corpus.get(article_id)
    return (
        article is not None
        and article.read_state is ReadState.UNREAD
        and article_id not in agent.dismissed
        and rt.cluster_model.assignments.get(article_id) == agent.cluster_id
    )


def _nearest_open(agent: AgentState, rt: AgentRuntime) -> str | None:
    anchor = rt.layout.index_of(agent.current_article)
    points = rt.layout.points
    deltas = points - points[anchor]
    distances = np.hypot(deltas[:, 0], deltas[:, 1])
    best: tuple[float, str] | None = None
    for i, article_id in enumerate(rt.layout.ids):
        if i == anchor or not _is_open(agent, rt, article_id):
            continue
        key = (float(distances[i]), article_id)
        if best is None or key < best:
            best = key
    return best[1] if best else None


def build_frontier(agent: AgentState, rt: AgentRuntime) -> tuple[list[str], list[dict]]:
    """Receptive field around the agent's position.

    Unread, undismissed in-cluster articles among the eight nearest
    neighbors (plus the anchor itself while still unread). When that field
    is exhausted the agent moves to the nearest remaining open article and
    seeds a new field there; an empty result means the cluster is swept.
    """
    events: list[dict] = []
    frontier: list[str] = []
    if _is_open(agent, rt, agent.current_article):
        frontier.append(agent.current_article)
    frontier.extend(
        nb for nb in rt.neighbor_graph.of(agent.current_article) if _is_open(agent, rt, nb)
    )
    if not frontier:
        fallback = _nearest_open(agent, rt)
        if fallback is None:
            return [], events
        agent.current_article = fallback
        events.append({"kind": "Moved", "article_id": fallback})
        frontier = [fallback]
        frontier.extend(
            nb for nb in rt.neighbor_graph.of(fallback) if _is_open(agent, rt, nb)
        )
    agent.frontier = frontier
    return frontier, events


def _already_read_entries(agent: AgentState, rt: AgentRuntime) -> list[dict[str, str]]:
    entries = []
    for article_id, decision, _ in agent.trajectory:
        article = rt.corpus.get(article_id)
        entries.append(
            {"id": article_id, "title": article.title if article else "", "decision": decision}
        )
    return entries


def _findings_so_far(rt: AgentRuntime) -> str:
    snippets = []
    for root_id in rt.graph.roots:
        text = rt.graph.nodes[root_id].text
        snippets.append(f"[{root_id}] {text[:FINDINGS_SNIPPET_CHARS]}")
    return "\n".join(snippets)


def retrieve_step(agent: AgentState, frontier: list[str], rt: AgentRuntime) -> list[str]:
    """Ask the backend which frontier candidates to read; [] means skip."""
    candidates = []
    for position, article_id in enumerate(frontier, start=1):
        article = rt.corpus.get(article_id)
        candidates.append(
            {
                "index": str(position),
                "id": article_id,
                "title": article.title,
                "abstract": article.abstract,
            }
        )
    request = render_retrieve(
        query=agent.config.research_question,
        detailed_focus=agent.config.detailed_focus,
        inclusion_criteria=agent.config.inclusion_exclusion_criteria,
        findings_so_far=_findings_so_far(rt),
        already_read=_already_read_entries(agent, rt),
        candidates=candidates,
        conversation=agent.conversation,
    )
    output = rt.provider.complete_structured(request)
    if output.is_skip:
        return []
    selected: list[str] = []
    for index in output["selected_papers"]:
        if index.isdigit() and 1 <= int(index) <= len(frontier):
            article_id = frontier[int(index) - 1]
            if article_id not in selected:
                selected.append(article_id)
        else:
            logger.warning(
                "agent %s: backend selected out-of-range index %r; ignoring",
                agent.agent_id,
                index,
            )
    return selected


def read_step(
    agent: AgentState, article_id: str, rt: AgentRuntime, forced: bool = False
) -> ReadOutcome:
    """Read one article: record the decision and update the trajectory."""
    article = rt.corpus.get(article_id)
    if article is None:
        raise UnknownArticle(article_id)
    if article.read_state is ReadState.READ or article_id in agent.read_ids:
        raise AlreadyRead(article_id)
    request = render_read(
        query=agent.config.research_question,
        detailed_focus=agent.config.detailed_focus,
        inclusion_criteria=agent.config.inclusion_exclusion_criteria,
        findings_so_far=_findings_so_far(rt),
        already_read=_already_read_entries(agent, rt),
        paper={"id": article.id, "title": article.title, "abstract": article.abstract},
        conversation=agent.conversation,
    )
    output = rt.provider.complete_structured(request)
    outcome = ReadOutcome(
        article_id=article_id,
        timestamp=rt.counter.allocate(),
        analysis=output["analysis"],
        response_preparation_analysis=output["response_preparation_analysis"],
        related_to_query=output["related_to_query"],
        reason_of_exclusion=output["reason_of_exclusion"],
        summary_of_the_paper=output["summary_of_the_paper"],
        summary_phrase=output["summary_phrase"],
        thought=output["thought"],
    )
    article.read_state = ReadState.READ
    if outcome.related_to_query:
        article.mark_included()
        agent.consecutive_skips = 0
    else:
        article.mark_excluded(outcome.reason_of_exclusion)
        if not forced:
            agent.consecutive_skips += 1
    decision = Decision.INCLUDED if outcome.related_to_query else Decision.EXCLUDED
    agent.trajectory.append((article_id, decision.value, outcome.timestamp))
    agent.current_article = article_id
    return outcome


def reflect(
    agent: AgentState,
    rt: AgentRuntime,
    instruct_updates: dict[str, str] | None = None,
    intervention_ids: list[str] | None = None,
) -> dict[str, Any]:
    """Reconcile new guidance: update the config, re-check memory if needed."""
    pending_paths = ", ".join(target for target, _ in agent.forced_next)
    request = render_reflect(
        query=agent.config.research_question,
        include_exclude_criteria=agent.config.inclusion_exclusion_criteria,
        paper_reading_instruction=pending_paths,
        findings_so_far=_findings_so_far(rt),
        conversation=agent.conversation,
        instruct_updates=instruct_updates,
    )
    output = rt.provider.complete_structured(request)
    applied: dict[str, str] = {}
    if output["updates_on_criteria"].strip():
        agent.config.inclusion_exclusion_criteria = output["updates_on_criteria"].strip()
        applied["inclusion_exclusion_criteria"] = agent.config.inclusion_exclusion_criteria
    if output["updates_on_summarization_requirement"].strip():
        agent.config.summarization_requirement = output[
            "updates_on_summarization_requirement"
        ].strip()
        applied["summarization_requirement"] = agent.config.summarization_requirement
    if output["updates_on_additional_requirement"].strip():
        agent.config.detailed_focus = output["updates_on_additional_requirement"].strip()
        applied["detailed_focus"] = agent.config.detailed_focus
    agent.conversation.append(("agent", output["reflection"]))

    revisions: list[dict[str, Any]] = []
    needs_recheck = bool(
        output["updates_on_criteria"].strip()
        or output["updates_on_summarization_requirement"].strip()
    )
    if needs_recheck:
        changed_text = " ".join(
            part
            for part in (
                output["updates_on_criteria"].strip(),
                output["updates_on_summarization_requirement"].strip(),
            )
            if part
        )
        revisions = recheck(
            rt.graph,
            rt.provider,
            rt.corpus,
            query=agent.config.research_question,
            detailed_focus=agent.config.detailed_focus,
            inclusion_exclusion_criteria=agent.config.inclusion_exclusion_criteria,
            changed_text=changed_text,
            cap=rt.recheck_cap,
        )
    # New guidance can revive previously refused articles.
    agent.dismissed.clear()
    agent.consecutive_skips = 0
    return {
        "kind": "Reflected",
        "reflection": output["reflection"],
        "applied_updates": applied,
        "revisions": revisions,
        "intervention_ids": intervention_ids or [],
    }


def _drain_interventions(agent: AgentState, rt: AgentRuntime) -> list[dict]:
    events: list[dict] = []
    reflection_ids: list[str] = []
    instruct_updates: dict[str, str] = {}
    needs_reflection = False
    expired: list[dict] = []
    while agent.queue:
        iv = agent.queue.popleft()
        if isinstance(iv, PathIntervention):
            article = rt.corpus.get(iv.target_article)
            if article is None or article.read_state is ReadState.READ:
                logger.warning(
                    "agent %s: path target %r unavailable; expiring intervention",
                    agent.agent_id,
                    iv.target_article,
                )
                expired.append(
                    {
                        "kind": "InterventionExpired",
                        "intervention_id": iv.intervention_id,
                        "reason": "target already read or unknown",
                    }
                )
                continue
            agent.forced_next.append((iv.target_article, iv.intervention_id))
        elif isinstance(iv, ChatIntervention):
            agent.conversation.append(("user", iv.text))
            reflection_ids.append(iv.intervention_id)
            needs_reflection = True
        elif isinstance(iv, InstructIntervention):
            for fieldname, value in iv.updates.items():
                if hasattr(agent.config, fieldname):
                    setattr(agent.config, fieldname, value)
                    instruct_updates[fieldname] = value
            reflection_ids.append(iv.intervention_id)
            needs_reflection = True
    if needs_reflection:
        agent.status = AgentStatus.REFLECTING
        events.append(reflect(agent, rt, instruct_updates or None, reflection_ids))
    events.extend(expired)
    return events


def step(agent: AgentState, rt: AgentRuntime) -> list[dict]:
    """One macro-step; returns ordered event payloads.

    Provider failures pause the agent with a Paused status event instead of
    crashing the session.
    """
    if not agent.runnable:
        return []
    events: list[dict] = []
    try:
        events.extend(_drain_interventions(agent, rt))

        if agent.forced_next:
            target, intervention_id = agent.forced_next.popleft()
            agent.status = AgentStatus.READING
            outcome = read_step(agent, target, rt, forced=True)
            events.append(
                {
                    "kind": "Read",
                    "forced_by": intervention_id,
                    **outcome.to_payload(),
                }
            )
            if outcome.related_to_query:
                events.extend(_merge_included(agent, rt, outcome))
        elif not agent.budget_exhausted:
            agent.status = AgentStatus.RETRIEVING
            frontier, moved = build_frontier(agent, rt)
            events.extend(moved)
            if frontier:
                selected = retrieve_step(agent, frontier, rt)
                if not selected:
                    agent.consecutive_skips += 1
                    agent.dismissed.update(frontier)
                else:
                    for article_id in selected:
                        if agent.budget_exhausted:
                            break
                        article = rt.corpus.get(article_id)
                        if article.read_state is ReadState.READ:
                            continue
                        agent.status = AgentStatus.READING
                        outcome = read_step(agent, article_id, rt)
                        events.append({"kind": "Read", "forced_by": "", **outcome.to_payload()})
                        if outcome.related_to_query:
                            events.extend(_merge_included(agent, rt, outcome))

        status = _terminal_status(agent, rt)
        if status is AgentStatus.DONE:
            agent.status = AgentStatus.DONE
            events.append({"kind": "StatusChanged", "status": AgentStatus.DONE.value})
        else:
            agent.status = AgentStatus.IDLE
        return events
    except ProviderUnavailable as exc:
        agent.status = AgentStatus.PAUSED
        events.append(
            {"kind": "StatusChanged", "status": AgentStatus.PAUSED.value, "reason": str(exc)}
        )
        return events


def _merge_included(agent: AgentState, rt: AgentRuntime, outcome: ReadOutcome) -> list[dict]:
    agent.status = AgentStatus.SYNTHESIZING
    leaf_id = add_leaf(rt.graph, outcome)
    leaf_node = rt.graph.nodes[leaf_id]
    events = [{"kind": "Merged", "node": leaf_node.to_record(), "summary_phrase": leaf_node.summary_phrase}]
    merged_id = merge(
        rt.graph,
        leaf_id,
        rt.provider,
        query=agent.config.research_question,
        summarization_requirement=agent.config.summarization_requirement,
        inclusion_exclusion_criteria=agent.config.inclusion_exclusion_criteria,
    )
    if merged_id != leaf_id:
        merged_node = rt.graph.nodes[merged_id]
        events.append(
            {"kind": "Merged", "node": merged_node.to_record(), "summary_phrase": ""}
        )
    return events


def _terminal_status(agent: AgentState, rt: AgentRuntime) -> AgentStatus:
    if agent.budget_exhausted:
        return AgentStatus.DONE
    if agent.consecutive_skips >= rt.skip_limit:
        return AgentStatus.DONE
    if agent.forced_next:
        return AgentStatus.IDLE
    has_open = any(_is_open(agent, rt, article_id) for article_id in rt.layout.ids)
    if not has_open:
        return AgentStatus.DONE
    return AgentStatus.IDLE
