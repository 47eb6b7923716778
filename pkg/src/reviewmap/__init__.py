"""Steerable multi-agent screening and synthesis over a literature corpus."""

from .agent import (
    AgentConfig,
    AgentState,
    AgentStatus,
    ChatIntervention,
    InstructIntervention,
    PathIntervention,
)
from .corpus import ArticleRecord, Corpus, Decision, ReadState, embed_corpus, ingest, ingest_text, score_relevance
from .errors import ReviewMapError
from .mapping import ClusterModel, MapLayout, NeighborGraph, elbow_k, kmeans, neighbors, project_layout
from .memory import NodeKind, ProvenanceGraph, SynthesisNode, add_leaf, merge, recheck
from .metrics import ScreeningResult, compare_partitioning, export_corpus_csv, screening_metrics
from .provider import MockBackend, MockEmbedder, Provider, Schema, parse_structured
from .session import Phase, Session, SessionConfig, SessionStore, load_session, run_screening
from .synthesis import FinalReport, ReportFormat, final_synthesis, render_report, renumber_citations

__version__ = "0.1.0"
