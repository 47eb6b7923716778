"""Screening evaluation, the single- vs multi-agent harness, and CSV export."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import Corpus
from .errors import EmptyGold

EXPORT_HEADER = [
    "id",
    "title",
    "cluster",
    "agent_id",
    "read_state",
    "decision",
    "reason_of_exclusion",
    "summary_phrase",
]


@dataclass
class ScreeningResult:
    predicted_included: set[str]
    gold_included: set[str]
    precision: float
    recall: float
    f1: float


def screening_metrics(predicted: Iterable[str], gold: Iterable[str]) -> ScreeningResult:
    """Precision/recall/F1 of a predicted inclusion set against a gold set.

    Empty predictions score precision 0 (not NaN) so aggregation stays stable.
    """
    predicted_set = set(predicted)
    gold_set = set(gold)
    if not gold_set:
        raise EmptyGold("gold set must be nonempty")
    hits = len(predicted_set & gold_set)
    precision = hits / len(predicted_set) if predicted_set else 0.0
    recall = hits / len(gold_set)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return ScreeningResult(
        predicted_included=predicted_set,
        gold_included=gold_set,
        precision=precision,
        recall=recall,
        f1=f1,
    )


@dataclass
class ComparisonRow:
    seed: int
    arm: str  # "multi" or "single"
    k: int
    precision: float
    recall: float
    f1: float


@dataclass
class ComparisonTable:
    rows: list[ComparisonRow]

    def aggregate(self, arm: str) -> tuple[float, float, float]:
        arm_rows = [r for r in self.rows if r.arm == arm]
        n = len(arm_rows)
        if n == 0:
            return 0.0, 0.0, 0.0
        return (
            sum(r.precision for r in arm_rows) / n,
            sum(r.recall for r in arm_rows) / n,
            sum(r.f1 for r in arm_rows) / n,
        )

    def recall_wins(self) -> int:
        """Seeds where multi-agent recall is at least single-agent recall."""
        by_seed: dict[int, dict[str, ComparisonRow]] = {}
        for row in self.rows:
            by_seed.setdefault(row.seed, {})[row.arm] = row
        return sum(
            1
            for pair in by_seed.values()
            if "multi" in pair and "single" in pair
            and pair["multi"].recall >= pair["single"].recall
        )

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["seed", "arm", "k", "precision", "recall", "f1"])
        for row in self.rows:
            writer.writerow(
                [row.seed, row.arm, row.k, f"{row.precision:.4f}", f"{row.recall:.4f}", f"{row.f1:.4f}"]
            )
        return buffer.getvalue()

    def to_text(self) -> str:
        mp, mr, mf = self.aggregate("multi")
        sp, sr, sf = self.aggregate("single")
        seeds = len({r.seed for r in self.rows})
        return "\n".join(
            [
                f"seeds: {seeds}",
                f"multi-agent   P={mp:.3f} R={mr:.3f} F1={mf:.3f}",
                f"single-agent  P={sp:.3f} R={sr:.3f} F1={sf:.3f}",
                f"multi recall >= single recall in {self.recall_wins()}/{seeds} seeds",
            ]
        )


def compare_partitioning(
    make_corpus,
    seeds: Sequence[int],
    budget: int,
    gold_for=None,
) -> ComparisonTable:
    """Run the pipeline per seed with auto-selected k and with k forced to 1.

    ``make_corpus(seed)`` returns (records, research_question, criteria,
    gold_ids); both arms share an equal total read budget. Gold defaults to
    the provided set; pass ``gold_for`` to recompute per corpus.
    """
    from .session import run_screening

    rows: list[ComparisonRow] = []
    for seed in seeds:
        records, question, criteria, gold = make_corpus(seed)
        if gold_for is not None:
            gold = gold_for(records, question, criteria)
        for arm, k_override in (("multi", None), ("single", 1)):
            included, k = run_screening(
                records,
                research_question=question,
                inclusion_exclusion_criteria=criteria,
                seed=seed,
                k_override=k_override,
                total_read_budget=budget,
            )
            result = screening_metrics(included, gold)
            rows.append(
                ComparisonRow(
                    seed=seed,
                    arm=arm,
                    k=k,
                    precision=result.precision,
                    recall=result.recall,
                    f1=result.f1,
                )
            )
    return ComparisonTable(rows=rows)


def export_corpus_csv(
    corpus: Corpus,
    agents: Sequence = (),
    cluster_assignments: dict[str, int] | None = None,
    phrases: dict[str, str] | None = None,
) -> str:
    """One row per article with screening state, stable header, RFC-style quoting."""
    owner_by_article: dict[str, str] = {}
    owner_by_cluster: dict[int, str] = {}
    for agent in agents:
        owner_by_cluster[agent.cluster_id] = agent.agent_id
        for article_id, _, _ in agent.trajectory:
            owner_by_article[article_id] = agent.agent_id
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(EXPORT_HEADER)
    for article in corpus:
        cluster = cluster_assignments.get(article.id, 0) if cluster_assignments else 0
        agent_id = owner_by_article.get(article.id, owner_by_cluster.get(cluster, ""))
        writer.writerow(
            [
                article.id,
                article.title,
                cluster,
                agent_id,
                article.read_state.value,
                article.decision.value,
                article.exclusion_reason,
                (phrases or {}).get(article.id, ""),
            ]
        )
    return buffer.getvalue()
