"""Synthetic screening corpora for demos, benchmarks, and offline tests.

Each corpus mixes a small set of marker-topic articles (on-question vocab)
into three semantically distinct filler blobs, so relevance ranking,
angular blob separation, and cluster partitioning all have signal that the
offline backend can screen deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MARKER_QUESTION = (
    "Does velprazine improve recovery outcomes in adults with torvian syndrome?"
)
MARKER_CRITERIA = (
    "Include adult human studies of velprazine for torvian syndrome reporting "
    "recovery outcomes; exclude animal studies."
)

# Tokens echoing the question/criteria; every relevant abstract leans on these.
MARKER_TOKENS = [
    "velprazine",
    "torvian",
    "syndrome",
    "recovery",
    "outcomes",
    "adults",
    "improve",
]
RCT_TOKENS = ["randomized", "controlled", "trial"]

BLOB_VOCABS = [
    [
        "cardiac", "myocardial", "arterial", "ventricular", "stenosis",
        "angiography", "perfusion", "ischemia", "valve", "aortic",
    ],
    [
        "neural", "cortical", "seizure", "cognitive", "synaptic",
        "migraine", "neuropathy", "cerebral", "axonal", "dementia",
    ],
    [
        "tumor", "oncology", "metastatic", "carcinoma", "chemotherapy",
        "biopsy", "malignant", "lymphoma", "radiotherapy", "remission",
    ],
]

GENERIC_VOCAB = [
    "cohort", "baseline", "followup", "participants", "clinical",
    "assessment", "protocol", "measured", "group", "results",
    "analysis", "methods", "enrollment", "registry", "centers",
]


@dataclass
class FixtureCorpus:
    records: list[dict[str, str]]
    research_question: str
    inclusion_exclusion_criteria: str
    gold_ids: set[str]
    planted_ids: list[str]
    blob_of: dict[str, int] = field(default_factory=dict)

    def as_csv(self) -> str:
        import csv
        import io

        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["id", "title", "abstract", "year"])
        for record in self.records:
            writer.writerow([record["id"], record["title"], record["abstract"], record["year"]])
        return buffer.getvalue()


def _sentence(rng: np.random.Generator, pool: list[str], length: int) -> str:
    words = [pool[rng.integers(len(pool))] for _ in range(length)]
    return " ".join(words).capitalize() + "."


def _relevant_record(
    rng: np.random.Generator, index: int, blob: int, with_rct: bool
) -> dict[str, str]:
    blob_vocab = BLOB_VOCABS[blob]
    marker_bits = " ".join(MARKER_TOKENS)
    rct = " ".join(RCT_TOKENS) if with_rct else "observational followup assessment"
    title = (
        f"Velprazine and recovery outcomes in adults with torvian syndrome: "
        f"{'a randomized controlled trial' if with_rct else 'an observational cohort'} "
        f"in {blob_vocab[int(rng.integers(len(blob_vocab)))]} care"
    )
    abstract = " ".join(
        [
            f"{marker_bits.capitalize()} were assessed in this {rct} enrollment.",
            _sentence(rng, blob_vocab + GENERIC_VOCAB, int(rng.integers(6, 9))),
            "Velprazine improve recovery outcomes adults torvian syndrome measured results.",
        ]
    )
    return {"title": title, "abstract": abstract, "year": str(2020 + blob)}


def _irrelevant_record(rng: np.random.Generator, blob: int) -> dict[str, str]:
    blob_vocab = BLOB_VOCABS[blob]
    title = _sentence(rng, blob_vocab, int(rng.integers(4, 7)))[:-1]
    abstract = " ".join(
        _sentence(rng, blob_vocab + GENERIC_VOCAB, int(rng.integers(7, 11)))
        for _ in range(3)
    )
    return {"title": title, "abstract": abstract, "year": str(2018 + blob)}


def make_fixture_corpus(
    n: int = 200,
    n_relevant: int = 20,
    blobs: int = 3,
    seed: int = 42,
    n_planted: int = 1,
) -> FixtureCorpus:
    """Corpus of ``n`` abstracts, ``n_relevant`` on the marker topic.

    Relevant articles round-robin across blobs; ``n_planted`` of them omit
    the randomized-controlled-trial vocabulary so a criteria-narrowing
    intervention has something to flip.
    """
    rng = np.random.default_rng(seed)
    relevant_slots = sorted(
        int(i) for i in rng.choice(n, size=n_relevant, replace=False)
    )
    records: list[dict[str, str]] = []
    gold: set[str] = set()
    planted: list[str] = []
    blob_of: dict[str, int] = {}
    relevant_seen = 0
    for index in range(n):
        article_id = f"art-{index:03d}"
        blob = index % blobs
        if index in relevant_slots:
            with_rct = relevant_seen >= n_planted
            record = _relevant_record(rng, index, blob, with_rct)
            gold.add(article_id)
            if not with_rct:
                planted.append(article_id)
            relevant_seen += 1
        else:
            record = _irrelevant_record(rng, blob)
        record["id"] = article_id
        records.append(record)
        blob_of[article_id] = blob
    return FixtureCorpus(
        records=records,
        research_question=MARKER_QUESTION,
        inclusion_exclusion_criteria=MARKER_CRITERIA,
        gold_ids=gold,
        planted_ids=planted,
        blob_of=blob_of,
    )


def make_banded_corpus(seed: int, n: int = 240, decoys_per_blob: int = 9) -> FixtureCorpus:
    """Corpus with a near-topic decoy belt between strong and weak relevants.

    Token counts are exact so the overlap fractions are guaranteed: strong
    relevants carry all 7 marker tokens among 18 distinct content tokens,
    decoys 6 among 51 (just under the 0.12 threshold), weak relevants 3
    among 25 (0.12 exactly, so they pass). By hashed-BOW cosine the decoys
    rank between the strong and weak bands: a single agent sweeping outward
    from the global center meets the full three-blob belt at once and burns
    its skip tolerance inside it, while each cluster agent only has to cross
    its own third of the belt to reach its weak relevants. Relevant items
    are split across the three blobs (2 strong + 2 weak each, 12 total).
    """
    rng = np.random.default_rng(seed)
    records: list[dict[str, str]] = []
    gold: set[str] = set()
    blob_of: dict[str, int] = {}
    unique_counter = 0

    def fresh(count: int) -> list[str]:
        nonlocal unique_counter
        tokens = [f"term{unique_counter + i:04d}" for i in range(count)]
        unique_counter += count
        return tokens

    def blob_words(blob: int, count: int) -> list[str]:
        vocab = BLOB_VOCABS[blob]
        picks = rng.choice(len(vocab), size=count, replace=False)
        return [vocab[int(i)] for i in picks]

    def add(blob: int, markers: list[str], blob_count: int, unique_count: int, relevant: bool):
        rid = f"art-{len(records):03d}"
        blob_part = blob_words(blob, blob_count)
        unique_part = fresh(unique_count)
        title = " ".join(blob_part[:3] + markers[:2]).capitalize()
        body = markers[2:] + blob_part[3:] + unique_part
        abstract = " ".join(body).capitalize() + "."
        records.append({"id": rid, "title": title, "abstract": abstract, "year": "2021"})
        blob_of[rid] = blob
        if relevant:
            gold.add(rid)

    rows = []
    for blob in range(3):
        rows += [(blob, "strong")] * 2 + [(blob, "decoy")] * decoys_per_blob + [(blob, "weak")] * 2
    fill = n - len(rows)
    rows += [(i % 3, "noise") for i in range(fill)]
    order = rng.permutation(len(rows))
    for i in order:
        blob, band = rows[int(i)]
        if band == "strong":
            add(blob, list(MARKER_TOKENS), 5, 6, True)
        elif band == "decoy":
            picks = rng.choice(len(MARKER_TOKENS), size=6, replace=False)
            add(blob, [MARKER_TOKENS[int(p)] for p in picks], 8, 45, False)
        elif band == "weak":
            picks = rng.choice(len(MARKER_TOKENS), size=3, replace=False)
            add(blob, [MARKER_TOKENS[int(p)] for p in picks], 6, 16, True)
        else:
            add(blob, [], 10, 14, False)
    return FixtureCorpus(
        records=records,
        research_question=MARKER_QUESTION,
        inclusion_exclusion_criteria=MARKER_CRITERIA,
        gold_ids=gold,
        planted_ids=[],
        blob_of=blob_of,
    )


def make_blob_points(
    n_per_blob: int = 30,
    blobs: int = 3,
    separation: float = 10.0,
    blob_radius: float = 1.0,
    seed: int = 0,
) -> np.ndarray:
    """Well-separated planar Gaussian blobs for clustering tests."""
    rng = np.random.default_rng(seed)
    centers = []
    for i in range(blobs):
        angle = 2 * np.pi * i / blobs
        centers.append(separation * np.array([np.cos(angle), np.sin(angle)]))
    points = []
    for center in centers:
        points.append(center + rng.normal(scale=blob_radius, size=(n_per_blob, 2)))
    return np.vstack(points)
