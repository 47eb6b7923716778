"""Session lifecycle: corpus upload, mapping, agent driving, events, recovery.

Every state change flows through an append-only event log with dense
sequence numbers; the log doubles as the audit trail and the recovery
source. Replaying a persisted log reconstructs the session's observable
state without any provider calls, because each event payload carries the
resulting state delta. Periodic snapshots are written alongside the log as
inspectable state dumps. Timestamps are logical (equal to the sequence
number) so replays and repeated runs are byte-identical.
"""

from __future__ import annotations

import csv
import json
import queue
import threading
import uuid
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .agent import (
    AgentConfig,
    AgentRuntime,
    AgentState,
    AgentStatus,
    ChatIntervention,
    InstructIntervention,
    Intervention,
    PathIntervention,
    spawn_agents,
    step,
)
from .corpus import Corpus, Decision, ReadState, ingest_text
from .errors import (
    MalformedUpload,
    NotReady,
    PhaseViolation,
    ReviewMapError,
    UnknownAgent,
    UnknownArticle,
    UnknownSession,
)
from .mapping import ClusterModel, MapLayout, NeighborGraph, auto_k, kmeans, project_layout
from .memory import NodeCounter, NodeKind, ProvenanceGraph, SynthesisNode, detach_leaf
from .metrics import export_corpus_csv
from .provider import Provider
from .synthesis import SECTION_NAMES, ReportFormat, final_synthesis, render_report

SNAPSHOT_INTERVAL = 200
MAX_ROUNDS = 100_000


class Phase(str, Enum):
    CREATED = "Created"
    MAPPED = "Mapped"
    RUNNING = "Running"
    QUIESCED = "Quiesced"
    SYNTHESIZED = "Synthesized"


class EventKind(str, Enum):
    CORPUS_INGESTED = "CorpusIngested"
    MAP_BUILT = "MapBuilt"
    AGENT_SPAWNED = "AgentSpawned"
    AGENT_MOVED = "AgentMoved"
    ARTICLE_READ = "ArticleRead"
    NODE_MERGED = "NodeMerged"
    REFLECTION_COMPLETED = "ReflectionCompleted"
    INTERVENTION_ACCEPTED = "InterventionAccepted"
    INTERVENTION_EXPIRED = "InterventionExpired"
    STATUS_CHANGED = "StatusChanged"
    REPORT_READY = "ReportReady"


@dataclass
class SessionEvent:
    seq: int
    timestamp: int
    agent_id: str | None
    kind: EventKind
    payload: dict[str, Any]

    def to_json(self) -> str:
        record = {
            "seq": self.seq,
            "timestamp": self.timestamp,
            "agent_id": self.agent_id,
            "kind": self.kind.value,
            "payload": self.payload,
        }
        return json.dumps(record, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> SessionEvent:
        record = json.loads(line)
        return cls(
            seq=record["seq"],
            timestamp=record["timestamp"],
            agent_id=record["agent_id"],
            kind=EventKind(record["kind"]),
            payload=record["payload"],
        )


@dataclass
class SessionConfig:
    research_question: str
    detailed_focus: str = ""
    inclusion_exclusion_criteria: str = ""
    summarization_requirement: str = ""
    seed: int = 0
    read_budget: int | None = None  # total across agents, split per cluster
    k_override: int | None = None
    recheck_cap: int = 10
    skip_limit: int = 3
    neighbor_m: int = 8
    provider: dict[str, Any] = field(default_factory=lambda: {"provider": "mock"})

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SessionConfig:
        return cls(**data)

    def agent_config(self) -> AgentConfig:
        return AgentConfig(
            research_question=self.research_question,
            detailed_focus=self.detailed_focus,
            inclusion_exclusion_criteria=self.inclusion_exclusion_criteria,
            summarization_requirement=self.summarization_requirement,
        )


def split_budget(total: int | None, k: int) -> dict[int, int] | None:
    """Distribute a total read budget across k clusters, remainder first."""
    if total is None:
        return None
    base, remainder = divmod(total, k)
    return {cluster: base + (1 if cluster < remainder else 0) for cluster in range(k)}


InterventionScript = Sequence[tuple[int, str, Intervention]]  # (target_seq, agent_id, iv)


class Session:
    """One review session; all mutations run under the session lock."""

    def __init__(
        self,
        config: SessionConfig,
        session_id: str | None = None,
        directory: Path | None = None,
        provider: Provider | None = None,
    ):
        self.session_id = session_id or uuid.uuid4().hex[:12]
        self.config = config
        self.provider = provider or Provider.from_config(config.provider)
        self.phase = Phase.CREATED
        self.corpus: Corpus | None = None
        self.corpus_text: str | None = None
        self.layout: MapLayout | None = None
        self.cluster_model: ClusterModel | None = None
        self.neighbor_graph: NeighborGraph | None = None
        self.agents: dict[str, AgentState] = {}
        self.graphs: dict[str, ProvenanceGraph] = {}
        self.counter = NodeCounter()
        self.event_log: list[SessionEvent] = []
        self.report_markdown: str | None = None
        self.report_citation_map: dict[int, str] = {}
        self.final_node: SynthesisNode | None = None
        self.phrases: dict[str, str] = {}
        self.pending_interventions: dict[str, str] = {}  # intervention id -> agent id
        self.consumed_interventions: set[str] = set()
        self.expired_interventions: set[str] = set()
        self._intervention_counter = 0
        self._lock = threading.RLock()
        self._subscribers: list[queue.Queue] = []
        self._directory = directory
        self._prompt_counter = 0
        if directory is not None:
            directory.mkdir(parents=True, exist_ok=True)
            (directory / "config.json").write_text(
                json.dumps(config.to_dict(), sort_keys=True), encoding="utf-8"
            )
            self.provider.audit = self._audit_prompt

    def _audit_prompt(self, request) -> None:
        """Verbatim prompt-rendering audit log alongside the event log."""
        self._prompt_counter += 1
        record = {
            "n": self._prompt_counter,
            "schema": request.schema_id.value,
            "prompt": request.prompt,
        }
        with open(self._directory / "prompts.jsonl", "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    # ------------------------------------------------------------------
    # Event plumbing
    # ------------------------------------------------------------------

    @property
    def last_seq(self) -> int:
        return self.event_log[-1].seq if self.event_log else 0

    def _emit(self, kind: EventKind, agent_id: str | None, payload: dict[str, Any]) -> SessionEvent:
        seq = self.last_seq + 1
        event = SessionEvent(seq=seq, timestamp=seq, agent_id=agent_id, kind=kind, payload=payload)
        self.event_log.append(event)
        if self._directory is not None:
            with open(self._directory / "events.jsonl", "a", encoding="utf-8") as fh:
                fh.write(event.to_json() + "\n")
            if seq % SNAPSHOT_INTERVAL == 0:
                self.write_snapshot()
        for subscriber in list(self._subscribers):
            subscriber.put(event)
        return event

    def subscribe(self, from_seq: int = 0) -> tuple[list[SessionEvent], queue.Queue]:
        """History newer than ``from_seq`` plus a live queue, gap-free."""
        with self._lock:
            backlog = [e for e in self.event_log if e.seq > from_seq]
            live: queue.Queue = queue.Queue()
            self._subscribers.append(live)
            return backlog, live

    def unsubscribe(self, live: queue.Queue) -> None:
        with self._lock:
            if live in self._subscribers:
                self._subscribers.remove(live)

    # ------------------------------------------------------------------
    # Lifecycle operations
    # ------------------------------------------------------------------

    def upload_corpus(self, text: str) -> int:
        with self._lock:
            if self.phase is not Phase.CREATED or self.corpus is not None:
                raise PhaseViolation("corpus already uploaded or session past upload")
            try:
                corpus = ingest_text(text, research_question=self.config.research_question)
            except ReviewMapError as exc:
                raise MalformedUpload(str(exc)) from exc
            except (json.JSONDecodeError, csv.Error) as exc:
                raise MalformedUpload(str(exc)) from exc
            self.corpus = corpus
            self.corpus_text = text
            if self._directory is not None:
                (self._directory / "corpus.csv").write_text(text, encoding="utf-8")
            self._emit(
                EventKind.CORPUS_INGESTED,
                None,
                {"articles": len(corpus), "research_question": self.config.research_question},
            )
            return len(corpus)

    def build_map(self) -> dict[str, Any]:
        from .corpus import embed_corpus

        with self._lock:
            if self.corpus is None:
                raise PhaseViolation("upload a corpus before building the map")
            if self.phase is not Phase.CREATED:
                raise PhaseViolation(f"cannot build map in phase {self.phase.value}")
            embed_corpus(self.corpus, self.provider)
            self.layout = project_layout(self.corpus, seed=self.config.seed)
            points = self.layout.points
            if self.config.k_override is not None:
                k = max(1, min(self.config.k_override, len(self.corpus)))
            else:
                k = auto_k(points, seed=self.config.seed)
            self.cluster_model = kmeans(points, self.layout.ids, k, seed=self.config.seed)
            self.neighbor_graph = NeighborGraph.build(self.layout, m=self.config.neighbor_m)
            self._persist_map()
            self._emit(EventKind.MAP_BUILT, None, {"k": k, "articles": len(self.corpus)})
            budgets = split_budget(self.config.read_budget, k)
            for agent in spawn_agents(
                self.cluster_model,
                self.corpus,
                self.layout,
                self.config.agent_config(),
                budgets=budgets,
            ):
                self.agents[agent.agent_id] = agent
                self.graphs[agent.agent_id] = ProvenanceGraph(
                    agent_id=agent.agent_id, counter=self.counter
                )
                self._emit(
                    EventKind.AGENT_SPAWNED,
                    agent.agent_id,
                    {
                        "cluster_id": agent.cluster_id,
                        "start_article": agent.current_article,
                        "read_budget": agent.read_budget,
                        "config": asdict(agent.config),
                    },
                )
            self._set_phase(Phase.MAPPED)
            return {"k": k, "articles": len(self.corpus)}

    def _persist_map(self) -> None:
        if self._directory is None or self.layout is None:
            return
        data = {
            "ids": self.layout.ids,
            "radius": [float(r) for r in self.layout.radius],
            "angle": [float(a) for a in self.layout.angle],
            "k": self.cluster_model.k,
            "assignments": self.cluster_model.assignments,
            "relevance": {a.id: a.relevance for a in self.corpus},
        }
        (self._directory / "map.json").write_text(
            json.dumps(data, sort_keys=True), encoding="utf-8"
        )

    def _set_phase(self, phase: Phase) -> None:
        if phase is self.phase:
            return
        self.phase = phase
        self._emit(EventKind.STATUS_CHANGED, None, {"phase": phase.value})

    def start(self, agent_id: str | None = None) -> None:
        with self._lock:
            if self.phase in (Phase.CREATED,):
                raise PhaseViolation("build the map before starting agents")
            if self.phase is Phase.SYNTHESIZED:
                raise PhaseViolation("session already synthesized")
            targets = self._agent_selection(agent_id)
            for agent in targets:
                if agent.status is AgentStatus.PAUSED:
                    agent.status = AgentStatus.IDLE
                    self._emit(
                        EventKind.STATUS_CHANGED,
                        agent.agent_id,
                        {"status": AgentStatus.IDLE.value},
                    )
            if self.phase in (Phase.MAPPED, Phase.QUIESCED):
                self._set_phase(Phase.RUNNING)

    def pause(self, agent_id: str | None = None) -> None:
        with self._lock:
            targets = self._agent_selection(agent_id)
            for agent in targets:
                if agent.runnable:
                    agent.status = AgentStatus.PAUSED
                    self._emit(
                        EventKind.STATUS_CHANGED,
                        agent.agent_id,
                        {"status": AgentStatus.PAUSED.value},
                    )

    def _agent_selection(self, agent_id: str | None) -> list[AgentState]:
        if agent_id is None:
            return [self.agents[a] for a in sorted(self.agents)]
        if agent_id not in self.agents:
            raise UnknownAgent(agent_id)
        return [self.agents[agent_id]]

    def post_intervention(self, agent_id: str, intervention: Intervention) -> str:
        with self._lock:
            if agent_id not in self.agents:
                raise UnknownAgent(agent_id)
            if isinstance(intervention, PathIntervention):
                if self.corpus is None or intervention.target_article not in self.corpus:
                    raise UnknownArticle(intervention.target_article)
            self._intervention_counter += 1
            intervention.intervention_id = f"iv-{self._intervention_counter}"
            agent = self.agents[agent_id]
            agent.queue.append(intervention)
            self.pending_interventions[intervention.intervention_id] = agent_id
            self._emit(
                EventKind.INTERVENTION_ACCEPTED,
                agent_id,
                {
                    "intervention_id": intervention.intervention_id,
                    "intervention_kind": intervention.kind,
                    "payload": _intervention_payload(intervention),
                },
            )
            # The user outranks termination: new guidance revives a Done agent.
            if agent.status is AgentStatus.DONE:
                agent.status = AgentStatus.IDLE
                self._emit(
                    EventKind.STATUS_CHANGED, agent_id, {"status": AgentStatus.IDLE.value}
                )
                if self.phase is Phase.QUIESCED:
                    self._set_phase(Phase.RUNNING)
            return intervention.intervention_id

    def _runtime_for(self, agent: AgentState) -> AgentRuntime:
        return AgentRuntime(
            corpus=self.corpus,
            layout=self.layout,
            neighbor_graph=self.neighbor_graph,
            cluster_model=self.cluster_model,
            provider=self.provider,
            graph=self.graphs[agent.agent_id],
            counter=self.counter,
            recheck_cap=self.config.recheck_cap,
            skip_limit=self.config.skip_limit,
        )

    def step_agent(self, agent_id: str) -> list[SessionEvent]:
        """Run one macro-step for one agent and log its events."""
        with self._lock:
            agent = self.agents[agent_id]
            if not agent.runnable:
                return []
            events = step(agent, self._runtime_for(agent))
            emitted = []
            for event in events:
                emitted.append(self._log_agent_event(agent, event))
            return emitted

    def _log_agent_event(self, agent: AgentState, event: dict[str, Any]) -> SessionEvent:
        kind = event.pop("kind")
        if kind == "Moved":
            return self._emit(EventKind.AGENT_MOVED, agent.agent_id, event)
        if kind == "Read":
            self.phrases[event["article_id"]] = event.get("summary_phrase", "")
            forced_by = event.get("forced_by", "")
            if forced_by:
                self._mark_consumed(forced_by)
            decision = (
                Decision.INCLUDED.value if event["related_to_query"] else Decision.EXCLUDED.value
            )
            return self._emit(
                EventKind.ARTICLE_READ, agent.agent_id, {**event, "decision": decision}
            )
        if kind == "Merged":
            return self._emit(EventKind.NODE_MERGED, agent.agent_id, event)
        if kind == "Reflected":
            for intervention_id in event.get("intervention_ids", []):
                self._mark_consumed(intervention_id)
            return self._emit(EventKind.REFLECTION_COMPLETED, agent.agent_id, event)
        if kind == "InterventionExpired":
            self._mark_expired(event["intervention_id"])
            return self._emit(EventKind.INTERVENTION_EXPIRED, agent.agent_id, event)
        if kind == "StatusChanged":
            return self._emit(EventKind.STATUS_CHANGED, agent.agent_id, event)
        raise ValueError(f"unknown agent event kind {kind!r}")

    def _mark_consumed(self, intervention_id: str) -> None:
        if intervention_id in self.pending_interventions:
            del self.pending_interventions[intervention_id]
        self.consumed_interventions.add(intervention_id)

    def _mark_expired(self, intervention_id: str) -> None:
        if intervention_id in self.pending_interventions:
            del self.pending_interventions[intervention_id]
        self.expired_interventions.add(intervention_id)

    def run(
        self,
        script: InterventionScript = (),
        max_rounds: int = MAX_ROUNDS,
        stop_at_seq: int | None = None,
    ) -> None:
        """Drive all agents round-robin until the session quiesces.

        ``script`` delivers (target_seq, agent_id, intervention) triples as
        soon as the log reaches each target sequence, which makes steering
        replayable. ``stop_at_seq`` halts early (crash-simulation hook).
        """
        if self.phase is Phase.CREATED:
            raise PhaseViolation("build the map before running agents")
        if self.phase in (Phase.MAPPED, Phase.QUIESCED):
            self.start()
        pending_script = sorted(script, key=lambda item: item[0])
        delivered = 0
        for _ in range(max_rounds):
            with self._lock:
                while delivered < len(pending_script) and pending_script[delivered][0] <= self.last_seq:
                    _, agent_id, intervention = pending_script[delivered]
                    self.post_intervention(agent_id, intervention)
                    delivered += 1
                runnable = [a for a in sorted(self.agents) if self.agents[a].runnable]
                if not runnable:
                    if delivered < len(pending_script):
                        # Time ran out before this item's target seq: deliver
                        # stragglers one per round so each is consumed before
                        # the next arrives.
                        _, agent_id, intervention = pending_script[delivered]
                        self.post_intervention(agent_id, intervention)
                        delivered += 1
                        runnable = [a for a in sorted(self.agents) if self.agents[a].runnable]
                    if not runnable:
                        self._set_phase(Phase.QUIESCED)
                        self.write_snapshot()
                        return
            for agent_id in runnable:
                self.step_agent(agent_id)
                if stop_at_seq is not None and self.last_seq >= stop_at_seq:
                    return
        raise RuntimeError("session did not quiesce within the round limit")

    def synthesize(self) -> str:
        with self._lock:
            if self.phase is Phase.SYNTHESIZED:
                return self.report_markdown
            if self.phase is not Phase.QUIESCED:
                raise PhaseViolation("all agents must be done or paused before synthesis")
            graphs = [self.graphs[a] for a in sorted(self.graphs)]
            stale_ids = [
                (agent_id, node.node_id)
                for agent_id in sorted(self.graphs)
                for node in sorted(self.graphs[agent_id].nodes.values(), key=lambda n: n.timestamp)
                if node.stale
            ]
            report, combined = final_synthesis(
                graphs,
                self.config.agent_config(),
                self.provider,
                self.corpus,
                self.counter,
                section_order=SECTION_NAMES,
            )
            self.final_node = combined.nodes[report.final_node_id]
            # Stale interims were re-synthesized; log their refreshed text.
            for agent_id, node_id in stale_ids:
                node = self.graphs[agent_id].nodes.get(node_id)
                if node is not None:
                    self._emit_refresh(node)
            self._emit(
                EventKind.NODE_MERGED, None, {"node": self.final_node.to_record(), "summary_phrase": ""}
            )
            self.report_markdown = render_report(report, ReportFormat.MARKDOWN)
            self.report_citation_map = report.citation_map
            for intervention_id in sorted(self.pending_interventions):
                agent_id = self.pending_interventions[intervention_id]
                self._emit(
                    EventKind.INTERVENTION_EXPIRED,
                    agent_id,
                    {"intervention_id": intervention_id, "reason": "session ended"},
                )
                self.expired_interventions.add(intervention_id)
            self.pending_interventions.clear()
            self._emit(
                EventKind.REPORT_READY,
                None,
                {
                    "markdown": self.report_markdown,
                    "citation_map": {str(k): v for k, v in self.report_citation_map.items()},
                    "final_node": self.final_node.to_record(),
                },
            )
            self._set_phase(Phase.SYNTHESIZED)
            self.write_snapshot()
            return self.report_markdown

    def _emit_refresh(self, node: SynthesisNode) -> None:
        self._emit(
            EventKind.NODE_MERGED,
            node.agent_id,
            {"node": node.to_record(), "summary_phrase": "", "refresh": True},
        )

    # ------------------------------------------------------------------
    # Views
    # ------------------------------------------------------------------

    def get_report(self) -> dict[str, Any]:
        with self._lock:
            if self.phase is not Phase.SYNTHESIZED or self.report_markdown is None:
                raise NotReady("report not synthesized yet")
            return {
                "markdown": self.report_markdown,
                "citation_map": [
                    {
                        "n": number,
                        "node_id": node_id,
                        "articles": self._citation_articles(node_id),
                    }
                    for number, node_id in sorted(self.report_citation_map.items())
                ],
            }

    def _citation_articles(self, node_id: str) -> list[dict[str, str]]:
        combined = self.provenance_graph()
        return [
            {
                "article_id": article_id,
                "title": self.corpus.get(article_id).title if self.corpus.get(article_id) else "",
            }
            for _, article_id in combined.provenance_of(node_id)
        ]

    def provenance_graph(self) -> ProvenanceGraph:
        combined = ProvenanceGraph(agent_id="session", counter=self.counter)
        for agent_id in sorted(self.graphs):
            combined.nodes.update(self.graphs[agent_id].nodes)
            combined.roots.extend(self.graphs[agent_id].roots)
        if self.final_node is not None:
            combined.nodes[self.final_node.node_id] = self.final_node
            combined.roots = [self.final_node.node_id]
        return combined

    def get_provenance(self) -> list[dict[str, Any]]:
        with self._lock:
            return self.provenance_graph().export_records()

    def get_export(self) -> str:
        with self._lock:
            if self.corpus is None:
                raise PhaseViolation("upload a corpus first")
            assignments = self.cluster_model.assignments if self.cluster_model else None
            return export_corpus_csv(
                self.corpus,
                agents=[self.agents[a] for a in sorted(self.agents)],
                cluster_assignments=assignments,
                phrases=self.phrases,
            )

    def get_map(self) -> list[dict[str, Any]]:
        with self._lock:
            if self.layout is None:
                raise NotReady("map not built yet")
            return self.layout.export_records(
                self.cluster_model.assignments if self.cluster_model else None
            )

    def included_ids(self) -> set[str]:
        return self.corpus.included_ids() if self.corpus else set()

    def included_id_sets(self) -> dict[str, set[str]]:
        """Inclusion sets with and without user-forced reads.

        Screening metrics can credit the system alone or the steered system;
        reporting both avoids guessing which the evaluation intends.
        """
        with_interventions = self.included_ids()
        forced = {
            event.payload["article_id"]
            for event in self.event_log
            if event.kind is EventKind.ARTICLE_READ and event.payload.get("forced_by")
        }
        return {
            "with_interventions": with_interventions,
            "system_only": with_interventions - forced,
        }

    def observable_state(self) -> dict[str, Any]:
        """Everything the recovery criterion compares."""
        with self._lock:
            decisions = {}
            if self.corpus is not None:
                for article in self.corpus:
                    decisions[article.id] = [
                        article.read_state.value,
                        article.decision.value,
                        article.exclusion_reason,
                    ]
            return {
                "phase": self.phase.value,
                "decisions": decisions,
                "graphs": {a: self.graphs[a].export_records() for a in sorted(self.graphs)},
                "roots": {a: list(self.graphs[a].roots) for a in sorted(self.graphs)},
                "agent_status": {a: self.agents[a].status.value for a in sorted(self.agents)},
                "trajectories": {
                    a: [list(t) for t in self.agents[a].trajectory] for a in sorted(self.agents)
                },
                "report": self.report_markdown,
            }

    # ------------------------------------------------------------------
    # Persistence
    # ------------------------------------------------------------------

    def write_snapshot(self) -> None:
        if self._directory is None:
            return
        state = {
            "seq": self.last_seq,
            "observable": self.observable_state(),
            "agents": {a: _agent_state_dict(self.agents[a]) for a in sorted(self.agents)},
            "phrases": self.phrases,
            "pending": self.pending_interventions,
            "consumed": sorted(self.consumed_interventions),
            "expired": sorted(self.expired_interventions),
            "intervention_counter": self._intervention_counter,
            "counter": self.counter.peek,
            "citation_map": {str(k): v for k, v in self.report_citation_map.items()},
        }
        (self._directory / "snapshot.json").write_text(
            json.dumps(state, sort_keys=True), encoding="utf-8"
        )


def _intervention_payload(intervention: Intervention) -> dict[str, Any]:
    if isinstance(intervention, PathIntervention):
        return {"target_article": intervention.target_article}
    if isinstance(intervention, ChatIntervention):
        return {"text": intervention.text}
    return {"updates": dict(intervention.updates)}


def intervention_from_payload(kind: str, payload: dict[str, Any], intervention_id: str) -> Intervention:
    if kind == "path":
        return PathIntervention(payload["target_article"], intervention_id=intervention_id)
    if kind == "chat":
        return ChatIntervention(payload["text"], intervention_id=intervention_id)
    if kind == "instruct":
        return InstructIntervention(dict(payload["updates"]), intervention_id=intervention_id)
    raise ValueError(f"unknown intervention kind {kind!r}")


def _agent_state_dict(agent: AgentState) -> dict[str, Any]:
    return {
        "agent_id": agent.agent_id,
        "cluster_id": agent.cluster_id,
        "config": asdict(agent.config),
        "status": agent.status.value,
        "current_article": agent.current_article,
        "trajectory": [list(t) for t in agent.trajectory],
        "forced_next": [list(t) for t in agent.forced_next],
        "consecutive_skips": agent.consecutive_skips,
        "conversation": [list(t) for t in agent.conversation],
        "read_budget": agent.read_budget,
        "dismissed": sorted(agent.dismissed),
        "queue": [
            {
                "kind": iv.kind,
                "intervention_id": iv.intervention_id,
                "payload": _intervention_payload(iv),
            }
            for iv in agent.queue
        ],
    }


def _agent_state_from_dict(data: dict[str, Any]) -> AgentState:
    agent = AgentState(
        agent_id=data["agent_id"],
        cluster_id=data["cluster_id"],
        config=AgentConfig(**data["config"]),
        status=AgentStatus(data["status"]),
        current_article=data["current_article"],
        read_budget=data["read_budget"],
        consecutive_skips=data["consecutive_skips"],
    )
    agent.trajectory = [tuple(t) for t in data["trajectory"]]
    agent.forced_next.extend(tuple(t) for t in data["forced_next"])
    agent.conversation = [tuple(t) for t in data["conversation"]]
    agent.dismissed = set(data["dismissed"])
    for item in data["queue"]:
        agent.queue.append(
            intervention_from_payload(item["kind"], item["payload"], item["intervention_id"])
        )
    return agent


# ---------------------------------------------------------------------------
# Recovery: fold the persisted event log back into a Session
# ---------------------------------------------------------------------------

def load_session(directory: Path, provider: Provider | None = None) -> Session:
    """Reconstruct a session from its directory.

    Restores the latest snapshot when one exists, then replays the event
    tail; with no snapshot the whole log is replayed from zero. Replay is
    provider-free: every event payload carries its state delta.
    """
    config = SessionConfig.from_dict(
        json.loads((directory / "config.json").read_text(encoding="utf-8"))
    )
    session = Session.__new__(Session)
    session.session_id = directory.name
    session.config = config
    session.provider = provider or Provider.from_config(config.provider)
    session.phase = Phase.CREATED
    session.corpus = None
    session.corpus_text = None
    session.layout = None
    session.cluster_model = None
    session.neighbor_graph = None
    session.agents = {}
    session.graphs = {}
    session.counter = NodeCounter()
    session.event_log = []
    session.report_markdown = None
    session.report_citation_map = {}
    session.final_node = None
    session.phrases = {}
    session.pending_interventions = {}
    session.consumed_interventions = set()
    session.expired_interventions = set()
    session._intervention_counter = 0
    session._lock = threading.RLock()
    session._subscribers = []
    session._directory = directory
    prompts_path = directory / "prompts.jsonl"
    session._prompt_counter = (
        len(prompts_path.read_text(encoding="utf-8").splitlines()) if prompts_path.exists() else 0
    )
    session.provider.audit = session._audit_prompt

    events_path = directory / "events.jsonl"
    events: list[SessionEvent] = []
    if events_path.exists():
        with open(events_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    events.append(SessionEvent.from_json(line))
    session.event_log = events
    for event in events:
        _apply_event(session, event)
    return session


def _apply_event(session: Session, event: SessionEvent) -> None:
    kind = event.kind
    payload = event.payload
    if kind is EventKind.CORPUS_INGESTED:
        text = (session._directory / "corpus.csv").read_text(encoding="utf-8")
        session.corpus = ingest_text(text, research_question=session.config.research_question)
        session.corpus_text = text
    elif kind is EventKind.MAP_BUILT:
        data = json.loads((session._directory / "map.json").read_text(encoding="utf-8"))
        session.layout = MapLayout(
            ids=data["ids"],
            radius=np.asarray(data["radius"], dtype=float),
            angle=np.asarray(data["angle"], dtype=float),
        )
        session.cluster_model = ClusterModel(
            k=data["k"],
            assignments={k: int(v) for k, v in data["assignments"].items()},
            centroids=np.zeros((data["k"], 2)),
            wcss=0.0,
        )
        for article in session.corpus:
            article.relevance = data["relevance"].get(article.id)
        session.neighbor_graph = NeighborGraph.build(session.layout, m=session.config.neighbor_m)
    elif kind is EventKind.AGENT_SPAWNED:
        agent = AgentState(
            agent_id=event.agent_id,
            cluster_id=payload["cluster_id"],
            config=AgentConfig(**payload["config"]),
            current_article=payload["start_article"],
            read_budget=payload["read_budget"],
        )
        session.agents[event.agent_id] = agent
        session.graphs[event.agent_id] = ProvenanceGraph(
            agent_id=event.agent_id, counter=session.counter
        )
    elif kind is EventKind.AGENT_MOVED:
        session.agents[event.agent_id].current_article = payload["article_id"]
    elif kind is EventKind.ARTICLE_READ:
        agent = session.agents[event.agent_id]
        article = session.corpus.get(payload["article_id"])
        article.read_state = ReadState.READ
        if payload["related_to_query"]:
            article.mark_included()
        else:
            article.mark_excluded(payload["reason_of_exclusion"])
        agent.trajectory.append(
            (payload["article_id"], payload["decision"], payload["timestamp"])
        )
        agent.current_article = payload["article_id"]
        session.phrases[payload["article_id"]] = payload.get("summary_phrase", "")
        session.counter.bump_past(payload["timestamp"])
        forced_by = payload.get("forced_by", "")
        if forced_by:
            _consume_on_replay(session, event.agent_id, forced_by)
    elif kind is EventKind.NODE_MERGED:
        record = payload["node"]
        node = SynthesisNode(
            node_id=record["node_id"],
            kind=NodeKind(record["kind"]),
            text=record["text"],
            agent_id=record["agent_id"],
            timestamp=record["timestamp"],
            children=list(record["children"]),
            source_article=record["source_article"],
            summary_phrase=payload.get("summary_phrase", ""),
        )
        if record["agent_id"] == "session":
            session.final_node = node
            session.counter.bump_past(node.timestamp)
        else:
            graph = session.graphs[record["agent_id"]]
            if node.node_id in graph.nodes:
                graph.nodes[node.node_id].text = node.text
                graph.nodes[node.node_id].stale = False
            else:
                graph.insert_node(node, as_root=True)
    elif kind is EventKind.REFLECTION_COMPLETED:
        agent = session.agents[event.agent_id]
        for intervention_id in payload.get("intervention_ids", []):
            _consume_on_replay(session, event.agent_id, intervention_id, as_chat=True)
        for fieldname, value in payload.get("applied_updates", {}).items():
            setattr(agent.config, fieldname, value)
        agent.conversation.append(("agent", payload["reflection"]))
        for revision in payload.get("revisions", []):
            graph = session.graphs[event.agent_id]
            if revision["leaf_id"] in graph.nodes:
                detach_leaf(graph, revision["leaf_id"])
            article = session.corpus.get(revision["article_id"])
            if article is not None:
                article.mark_excluded(revision["reason"])
    elif kind is EventKind.INTERVENTION_ACCEPTED:
        session._intervention_counter += 1
        intervention = intervention_from_payload(
            payload["intervention_kind"], payload["payload"], payload["intervention_id"]
        )
        agent = session.agents[event.agent_id]
        agent.queue.append(intervention)
        session.pending_interventions[payload["intervention_id"]] = event.agent_id
    elif kind is EventKind.INTERVENTION_EXPIRED:
        _drop_queued(session, event.agent_id, payload["intervention_id"])
        session.expired_interventions.add(payload["intervention_id"])
        session.pending_interventions.pop(payload["intervention_id"], None)
    elif kind is EventKind.STATUS_CHANGED:
        if event.agent_id is None:
            session.phase = Phase(payload["phase"])
        else:
            session.agents[event.agent_id].status = AgentStatus(payload["status"])
    elif kind is EventKind.REPORT_READY:
        session.report_markdown = payload["markdown"]
        session.report_citation_map = {int(k): v for k, v in payload["citation_map"].items()}


def _consume_on_replay(
    session: Session, agent_id: str, intervention_id: str, as_chat: bool = False
) -> None:
    agent = session.agents[agent_id]
    for queued in list(agent.queue):
        if queued.intervention_id != intervention_id:
            continue
        if as_chat and isinstance(queued, ChatIntervention):
            agent.conversation.append(("user", queued.text))
        if as_chat and isinstance(queued, InstructIntervention):
            for fieldname, value in queued.updates.items():
                if hasattr(agent.config, fieldname):
                    setattr(agent.config, fieldname, value)
        agent.queue.remove(queued)
    session.pending_interventions.pop(intervention_id, None)
    session.consumed_interventions.add(intervention_id)


def _drop_queued(session: Session, agent_id: str | None, intervention_id: str) -> None:
    if agent_id is None or agent_id not in session.agents:
        return
    agent = session.agents[agent_id]
    for queued in list(agent.queue):
        if queued.intervention_id == intervention_id:
            agent.queue.remove(queued)


# ---------------------------------------------------------------------------
# Session store and headless pipeline helpers
# ---------------------------------------------------------------------------

class SessionStore:
    """In-memory registry with optional per-session directories."""

    def __init__(self, base_dir: Path | None = None):
        self.base_dir = base_dir
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self, config: SessionConfig, provider: Provider | None = None) -> Session:
        with self._lock:
            session_id = uuid.uuid4().hex[:12]
            directory = self.base_dir / session_id if self.base_dir else None
            session = Session(
                config, session_id=session_id, directory=directory, provider=provider
            )
            self._sessions[session_id] = session
            return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            if session_id not in self._sessions:
                if self.base_dir and (self.base_dir / session_id).exists():
                    self._sessions[session_id] = load_session(self.base_dir / session_id)
                else:
                    raise UnknownSession(session_id)
            return self._sessions[session_id]

    def ids(self) -> list[str]:
        with self._lock:
            return sorted(self._sessions)


def run_screening(
    records: Iterable[dict[str, str]],
    research_question: str,
    inclusion_exclusion_criteria: str = "",
    seed: int = 0,
    k_override: int | None = None,
    total_read_budget: int | None = None,
    provider: Provider | None = None,
) -> tuple[set[str], int]:
    """Headless screening pass; returns (included ids, cluster count)."""
    import csv as _csv
    import io as _io

    buffer = _io.StringIO()
    writer = _csv.writer(buffer, lineterminator="\n")
    writer.writerow(["id", "title", "abstract", "year"])
    for record in records:
        writer.writerow(
            [record["id"], record["title"], record["abstract"], record.get("year", "")]
        )
    config = SessionConfig(
        research_question=research_question,
        inclusion_exclusion_criteria=inclusion_exclusion_criteria,
        seed=seed,
        k_override=k_override,
        read_budget=total_read_budget,
    )
    session = Session(config, provider=provider)
    session.upload_corpus(buffer.getvalue())
    info = session.build_map()
    session.run()
    return session.included_ids(), info["k"]
