"""Completion and embedding backends behind one interface.

Two backends ship with the engine:

* ``MockBackend`` — a deterministic, rule-based stand-in that exercises every
  schema and control path offline.  Its screening rule is a token-overlap
  threshold; its steering grammar understands ``focus on <phrase>`` in chat
  and ``must mention: <phrase>`` lines in criteria text (a required-term
  filter used to narrow screening).
* ``HttpBackend`` — a thin client for any endpoint speaking the common
  chat-completion wire format; endpoint, model and key come from
  configuration, never code.

Prompt templates live in ``prompts/*.txt`` with named ``{placeholders}``;
rendering only substitutes known names so literal braces in the embedded
JSON examples survive.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Any, Callable, Sequence

import numpy as np

from .errors import (
    NoObjectFound,
    ProviderTimeout,
    ProviderUnavailable,
    SchemaViolation,
)
from .textproc import split_sentences, token_set, tokenize

logger = logging.getLogger(__name__)

EMBED_DIM = 256
OVERLAP_THRESHOLD = 0.12
MERGE_COSINE_THRESHOLD = 0.3

REQUIRED_TERMS_RE = re.compile(r"must mention:\s*([^\n.;]+)", re.IGNORECASE)
FOCUS_RE = re.compile(r"focus(?: only)? on\s+([^\n.;!?]+)", re.IGNORECASE)
SUMMARY_STYLE_RE = re.compile(r"\b(summar\w*|format)\b", re.IGNORECASE)

REPAIR_SUFFIX = "\n\nYour previous output was invalid; emit only the JSON object."


class Schema(str, Enum):
    RETRIEVE = "Retrieve"
    READ = "Read"
    SYNTHESIZE = "Synthesize"
    REFLECT = "Reflect"


@dataclass
class CompletionRequest:
    """One structured-output request.

    ``context`` carries the raw template variables used to render ``prompt``;
    the mock backend applies its rules to the context, real backends see only
    the rendered prompt.
    """

    prompt: str
    schema_id: Schema
    deterministic: bool = True
    retry_budget: int = 3
    context: dict[str, Any] = field(default_factory=dict)


@dataclass
class StructuredOutput:
    schema_id: Schema
    fields: dict[str, Any]

    def __getitem__(self, key: str) -> Any:
        return self.fields[key]

    @property
    def is_skip(self) -> bool:
        return self.schema_id is Schema.RETRIEVE and self.fields["selected_papers"] == ["skip"]


class TransportError(Exception):
    """A backend-level failure that the provider may retry."""


class TransportTimeout(TransportError):
    pass


# ---------------------------------------------------------------------------
# Prompt templates
# ---------------------------------------------------------------------------

_TEMPLATE_FILES = {
    Schema.RETRIEVE: "retrieve.txt",
    Schema.READ: "read.txt",
    Schema.SYNTHESIZE: "synthesize.txt",
    Schema.REFLECT: "reflect.txt",
}

_PLACEHOLDER_RE = re.compile(r"\{([a-z_]+)\}")


def load_template(schema_id: Schema) -> str:
    path = resources.files("reviewmap") / "prompts" / _TEMPLATE_FILES[schema_id]
    return path.read_text(encoding="utf-8")


def render_template(schema_id: Schema, variables: dict[str, str]) -> str:
    """Substitute known placeholders, leaving all other braces untouched."""
    template = load_template(schema_id)

    def sub(match: re.Match[str]) -> str:
        name = match.group(1)
        return str(variables[name]) if name in variables else match.group(0)

    return _PLACEHOLDER_RE.sub(sub, template)


def _fmt_conversation(conversation: Sequence[tuple[str, str]]) -> str:
    if not conversation:
        return "(none)"
    return "\n".join(f"{speaker}: {text}" for speaker, text in conversation)


def _fmt_read_list(entries: Sequence[dict[str, str]]) -> str:
    if not entries:
        return "(none)"
    return "\n".join(f"- {e['id']}: {e['title']} [{e['decision']}]" for e in entries)


def _fmt_candidates(candidates: Sequence[dict[str, str]]) -> str:
    if not candidates:
        return "(none)"
    return "\n\n".join(
        f"[{c['index']}] (id={c['id']}) Title: {c['title']}\nAbstract: {c['abstract']}"
        for c in candidates
    )


def _fmt_paper(paper: dict[str, str]) -> str:
    return f"(id={paper['id']}) Title: {paper['title']}\nAbstract: {paper['abstract']}"


def _fmt_summaries(summaries: Sequence[dict[str, str]]) -> str:
    if not summaries:
        return "(none)"
    return "\n\n".join(f"{s['id']}: {s['text']}" for s in summaries)


def render_retrieve(
    *,
    query: str,
    detailed_focus: str,
    inclusion_criteria: str,
    findings_so_far: str,
    already_read: Sequence[dict[str, str]],
    candidates: Sequence[dict[str, str]],
    conversation: Sequence[tuple[str, str]],
    retry_budget: int = 3,
) -> CompletionRequest:
    variables = {
        "query": query,
        "detailed_focus": detailed_focus or "(none)",
        "inclusion_criteria": inclusion_criteria or "(none)",
        "findings_so_far": findings_so_far or "(none yet)",
        "paper_already_read": _fmt_read_list(already_read),
        "available_papers": _fmt_candidates(candidates),
        "inspiration_conversation_history": _fmt_conversation(conversation),
    }
    context = {
        "query": query,
        "detailed_focus": detailed_focus,
        "inclusion_criteria": inclusion_criteria,
        "candidates": list(candidates),
        "already_read_ids": [e["id"] for e in already_read],
    }
    return CompletionRequest(
        prompt=render_template(Schema.RETRIEVE, variables),
        schema_id=Schema.RETRIEVE,
        retry_budget=retry_budget,
        context=context,
    )


def render_read(
    *,
    query: str,
    detailed_focus: str,
    inclusion_criteria: str,
    findings_so_far: str,
    already_read: Sequence[dict[str, str]],
    paper: dict[str, str],
    conversation: Sequence[tuple[str, str]],
    retry_budget: int = 3,
) -> CompletionRequest:
    variables = {
        "query": query,
        "detailed_focus": detailed_focus or "(none)",
        "inclusion_criteria": inclusion_criteria or "(none)",
        "findings_so_far": findings_so_far or "(none yet)",
        "paper_already_read": _fmt_read_list(already_read),
        "paper_to_read": _fmt_paper(paper),
        "inspiration_conversation_history": _fmt_conversation(conversation),
    }
    context = {
        "query": query,
        "detailed_focus": detailed_focus,
        "inclusion_criteria": inclusion_criteria,
        "paper": dict(paper),
    }
    return CompletionRequest(
        prompt=render_template(Schema.READ, variables),
        schema_id=Schema.READ,
        retry_budget=retry_budget,
        context=context,
    )


def render_synthesize(
    *,
    query: str,
    summarization_requirement: str,
    inclusion_exclusion_criteria: str,
    current_summary_index: str,
    paper_summary: str,
    previous_summaries: Sequence[dict[str, str]],
    final_mode: bool = False,
    retry_budget: int = 3,
) -> CompletionRequest:
    variables = {
        "query": query,
        "summarization_requirement": summarization_requirement or "(none)",
        "inclusion_exclusion_criteria": inclusion_exclusion_criteria or "(none)",
        "current_summary_index": current_summary_index,
        "paper_summary": paper_summary,
        "previous_summaries": _fmt_summaries(previous_summaries),
    }
    context = {
        "query": query,
        "inclusion_exclusion_criteria": inclusion_exclusion_criteria,
        "current_summary_index": current_summary_index,
        "paper_summary": paper_summary,
        "previous_summaries": list(previous_summaries),
        "final_mode": final_mode,
    }
    return CompletionRequest(
        prompt=render_template(Schema.SYNTHESIZE, variables),
        schema_id=Schema.SYNTHESIZE,
        retry_budget=retry_budget,
        context=context,
    )


def render_reflect(
    *,
    query: str,
    include_exclude_criteria: str,
    paper_reading_instruction: str,
    findings_so_far: str,
    conversation: Sequence[tuple[str, str]],
    instruct_updates: dict[str, str] | None = None,
    retry_budget: int = 3,
) -> CompletionRequest:
    variables = {
        "query": query,
        "include_exclude_criteria": include_exclude_criteria or "(none)",
        "paper_reading_instruction_if_any": paper_reading_instruction or "",
        "findings_so_far": findings_so_far or "(none yet)",
        "conversation_history": _fmt_conversation(conversation),
    }
    context = {
        "query": query,
        "include_exclude_criteria": include_exclude_criteria,
        "paper_reading_instruction": paper_reading_instruction,
        "conversation": list(conversation),
        "instruct_updates": dict(instruct_updates or {}),
    }
    return CompletionRequest(
        prompt=render_template(Schema.REFLECT, variables),
        schema_id=Schema.REFLECT,
        retry_budget=retry_budget,
        context=context,
    )


# ---------------------------------------------------------------------------
# Structured-output parsing
# ---------------------------------------------------------------------------

_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)

_SCHEMA_FIELDS: dict[Schema, dict[str, type | tuple[type, ...]]] = {
    Schema.RETRIEVE: {"thought": str, "selected_papers": (list, str)},
    Schema.READ: {
        "analysis": str,
        "response_preparation_analysis": str,
        "related_to_query": bool,
        "reason_of_exclusion": str,
        "summary_of_the_paper": str,
        "summary_phrase": str,
        "thought": str,
    },
    Schema.SYNTHESIZE: {
        "identified_relevant_summaries": list,
        "reasoning": str,
        "synthesized_summary": str,
        "thought": str,
    },
    Schema.REFLECT: {
        "reflection": str,
        "updates_on_additional_requirement": str,
        "updates_on_criteria": str,
        "updates_on_summarization_requirement": str,
    },
}


def _scan_balanced(text: str, start: int) -> str | None:
    """String-aware balanced-brace span starting at ``start`` (a '{')."""
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[start : i + 1]
    return None


def _balanced_objects(text: str) -> list[str]:
    """Balanced candidates scanned from every opening brace, in order.

    Prose around the object may contain stray quotes or braces that desync
    a single left-to-right scan, so each '{' gets its own chance.
    """
    spans: list[str] = []
    for i, ch in enumerate(text):
        if ch != "{":
            continue
        span = _scan_balanced(text, i)
        if span is not None:
            spans.append(span)
    return spans


def _first_object(text: str) -> dict[str, Any]:
    candidates: list[str] = []
    for block in _FENCE_RE.findall(text):
        candidates.extend(_balanced_objects(block))
    candidates.extend(_balanced_objects(text))
    for candidate in candidates:
        try:
            parsed = json.loads(candidate)
        except json.JSONDecodeError:
            continue
        if isinstance(parsed, dict):
            return parsed
        if isinstance(parsed, list) and parsed and isinstance(parsed[0], dict):
            return parsed[0]
    raise NoObjectFound("no parseable JSON object in backend output")


def _normalize_selected(value: Any) -> list[str]:
    if isinstance(value, str):
        if value.strip().lower() == "skip":
            return ["skip"]
        raise SchemaViolation("selected_papers", "string value must be the skip marker")
    if isinstance(value, list):
        items = [str(v).strip() for v in value]
        if not items:
            raise SchemaViolation("selected_papers", "empty selection; use the skip marker")
        if any(item.lower() == "skip" for item in items):
            if len(items) != 1:
                raise SchemaViolation("selected_papers", "skip must be the sole entry")
            return ["skip"]
        return items
    raise SchemaViolation("selected_papers", f"unexpected type {type(value).__name__}")


def parse_structured(raw: str, schema_id: Schema) -> StructuredOutput:
    """Extract and validate the first balanced JSON object in ``raw``."""
    if not raw:
        raise NoObjectFound("empty backend output")
    obj = _first_object(raw)
    expected = _SCHEMA_FIELDS[schema_id]
    fields: dict[str, Any] = {}
    for name, types in expected.items():
        if name not in obj:
            raise SchemaViolation(name, "missing")
        value = obj[name]
        if not isinstance(value, types):
            raise SchemaViolation(name, f"expected {types}, got {type(value).__name__}")
        fields[name] = value

    if schema_id is Schema.RETRIEVE:
        fields["selected_papers"] = _normalize_selected(fields["selected_papers"])
    elif schema_id is Schema.READ:
        if len(fields["summary_phrase"].split()) > 3:
            raise SchemaViolation("summary_phrase", "more than three words")
        if fields["related_to_query"] and not fields["summary_of_the_paper"].strip():
            raise SchemaViolation("summary_of_the_paper", "empty for an included paper")
        if not fields["related_to_query"] and not fields["reason_of_exclusion"].strip():
            raise SchemaViolation("reason_of_exclusion", "empty for an excluded paper")
    elif schema_id is Schema.SYNTHESIZE:
        fields["identified_relevant_summaries"] = [
            str(v) for v in fields["identified_relevant_summaries"]
        ]
    return StructuredOutput(schema_id=schema_id, fields=fields)


def serialize_structured(output: StructuredOutput) -> str:
    return json.dumps(output.fields, sort_keys=True)


# ---------------------------------------------------------------------------
# Offline embedding: signed feature hashing over content tokens
# ---------------------------------------------------------------------------

def hash_features(text: str, dim: int = EMBED_DIM) -> np.ndarray:
    """Raw signed bag-of-words feature vector (order-insensitive)."""
    vec = np.zeros(dim, dtype=np.float64)
    for token in tokenize(text):
        digest = hashlib.sha256(token.encode("utf-8")).digest()
        index = int.from_bytes(digest[:4], "big") % dim
        sign = 1.0 if digest[4] % 2 == 0 else -1.0
        vec[index] += sign
    return vec


CANONICAL_DEGENERATE = 0  # index set to 1.0 when a text has no content tokens


def hash_embed(text: str, dim: int = EMBED_DIM) -> tuple[np.ndarray, bool]:
    """Unit-norm hashed embedding plus a flag for degenerate (empty) inputs."""
    vec = hash_features(text, dim)
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        canonical = np.zeros(dim, dtype=np.float64)
        canonical[CANONICAL_DEGENERATE] = 1.0
        return canonical, True
    return vec / norm, False


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


# ---------------------------------------------------------------------------
# Screening rules shared by the mock backend and test oracles
# ---------------------------------------------------------------------------

def required_terms(criteria: str) -> set[str]:
    """Tokens of every ``must mention: <phrase>`` directive in criteria text."""
    terms: set[str] = set()
    for phrase in REQUIRED_TERMS_RE.findall(criteria or ""):
        terms.update(tokenize(phrase))
    return terms


def guide_tokens(query: str, detailed_focus: str, criteria: str) -> set[str]:
    return token_set(query) | token_set(detailed_focus or "") | token_set(criteria or "")


def overlap_fraction(candidate_text: str, guide: set[str]) -> float:
    candidate = token_set(candidate_text)
    if not candidate:
        return 0.0
    return len(candidate & guide) / len(candidate)


def screening_rule(
    candidate_text: str, query: str, detailed_focus: str, criteria: str
) -> bool:
    """True when a title+abstract passes the overlap threshold and every
    required term from the criteria is present."""
    guide = guide_tokens(query, detailed_focus, criteria)
    if overlap_fraction(candidate_text, guide) < OVERLAP_THRESHOLD:
        return False
    required = required_terms(criteria)
    if required and not required.issubset(token_set(candidate_text)):
        return False
    return True


# ---------------------------------------------------------------------------
# Backends
# ---------------------------------------------------------------------------

class MockBackend:
    """Deterministic rule-based completions covering all four schemas."""

    def complete(self, request: CompletionRequest) -> str:
        handler = {
            Schema.RETRIEVE: self._retrieve,
            Schema.READ: self._read,
            Schema.SYNTHESIZE: self._synthesize,
            Schema.REFLECT: self._reflect,
        }[request.schema_id]
        return handler(request.context)

    @staticmethod
    def _emit(payload: dict[str, Any]) -> str:
        return "```json\n" + json.dumps(payload, sort_keys=True) + "\n```"

    def _retrieve(self, ctx: dict[str, Any]) -> str:
        candidates = ctx.get("candidates", [])
        already = set(ctx.get("already_read_ids", []))
        selected = []
        for cand in candidates:
            if cand["id"] in already:
                continue
            text = f"{cand['title']} {cand['abstract']}"
            if screening_rule(
                text,
                ctx.get("query", ""),
                ctx.get("detailed_focus", ""),
                ctx.get("inclusion_criteria", ""),
            ):
                selected.append(str(cand["index"]))
        thought = (
            f"Screened {len(candidates)} candidates against the question and criteria; "
            f"{len(selected)} passed."
        )
        return self._emit(
            {"thought": thought, "selected_papers": selected if selected else ["skip"]}
        )

    def _read(self, ctx: dict[str, Any]) -> str:
        paper = ctx.get("paper", {"id": "", "title": "", "abstract": ""})
        query = ctx.get("query", "")
        focus = ctx.get("detailed_focus", "")
        criteria = ctx.get("inclusion_criteria", "")
        text = f"{paper['title']} {paper['abstract']}"
        related = screening_rule(text, query, focus, criteria)
        phrase_tokens = self._phrase_tokens(text, query, focus, criteria)
        if related:
            sentences = split_sentences(paper["abstract"])
            summary = paper["title"].rstrip(".") + ". " + " ".join(sentences[:2])
            reason = ""
        else:
            summary = "not included"
            required = required_terms(criteria)
            missing = sorted(required - token_set(text))
            if missing:
                reason = "Missing required terms: " + ", ".join(missing)
            else:
                reason = "Insufficient overlap with the research question and criteria."
        return self._emit(
            {
                "analysis": f"Abstract-level screening of {paper['id']}.",
                "response_preparation_analysis": "Applied the stated criteria to the title and abstract.",
                "related_to_query": related,
                "reason_of_exclusion": reason,
                "summary_of_the_paper": summary.strip(),
                "summary_phrase": " ".join(phrase_tokens),
                "thought": f"Decision recorded for {paper['id']}.",
            }
        )

    @staticmethod
    def _phrase_tokens(text: str, query: str, focus: str, criteria: str) -> list[str]:
        guide = guide_tokens(query, focus, criteria)
        ordered = []
        for token in tokenize(text):
            if token in guide and token not in ordered:
                ordered.append(token)
            if len(ordered) == 3:
                return ordered
        if ordered:
            return ordered
        fallback = tokenize(text)[:3]
        return fallback if fallback else ["unrelated"]

    def _synthesize(self, ctx: dict[str, Any]) -> str:
        previous = ctx.get("previous_summaries", [])
        new_index = ctx.get("current_summary_index", "")
        new_summary = ctx.get("paper_summary", "")
        if ctx.get("final_mode"):
            identified = [p["id"] for p in previous]
            reasoning = "Final integration across all current roots."
        else:
            identified = []
            reasoning = "No sufficiently similar prior summary; keeping this one standalone."
            if previous and new_summary:
                new_vec, _ = hash_embed(new_summary)
                best_id, best_cos = None, 0.0
                for prev in previous:
                    prev_vec, _ = hash_embed(prev["text"])
                    c = cosine(new_vec, prev_vec)
                    if c > best_cos:
                        best_id, best_cos = prev["id"], c
                if best_id is not None and best_cos > MERGE_COSINE_THRESHOLD:
                    identified = [best_id]
                    reasoning = (
                        f"Summary {best_id} overlaps the new evidence "
                        f"(cosine {best_cos:.3f})."
                    )
        cited = []
        if new_index and new_summary:
            cited.append({"id": new_index, "text": new_summary})
        by_id = {p["id"]: p for p in previous}
        cited.extend(by_id[i] for i in identified if i in by_id)
        body = self._sections(ctx.get("query", ""), ctx.get("inclusion_exclusion_criteria", ""), cited)
        return self._emit(
            {
                "identified_relevant_summaries": identified,
                "reasoning": reasoning,
                "synthesized_summary": body,
                "thought": "Evidence base updated.",
            }
        )

    @staticmethod
    def _key_line(text: str) -> str:
        # Interim texts are sectioned; pull their first key-findings line,
        # otherwise the first sentence.
        marker = "Key Findings:"
        if marker in text:
            after = text.split(marker, 1)[1].strip()
            line = after.splitlines()[0] if after else ""
            if line:
                return re.sub(r"\s*<citation>[^<]*</citation>\s*$", "", line).strip()
        sentences = split_sentences(text)
        return sentences[0] if sentences else text.strip()

    def _sections(self, query: str, criteria: str, cited: list[dict[str, str]]) -> str:
        findings = [
            f"{self._key_line(c['text'])} <citation>{c['id']}</citation>" for c in cited
        ]
        findings_block = "\n".join(findings) if findings else "(no merged evidence)"
        return (
            f"Introduction: This synthesis addresses the question: {query}\n"
            f"Study Design: Evidence was screened from titles and abstracts under the criteria: "
            f"{criteria or '(none)'}\n"
            f"Key Findings:\n{findings_block}\n"
            f"Conclusion: The merged evidence above bears directly on the question.\n"
            f"Discussion: Screening used abstracts only; consulting full texts may resolve "
            f"remaining uncertainty."
        )

    def _reflect(self, ctx: dict[str, Any]) -> str:
        updates = {
            "reflection": "Reviewed the latest guidance.",
            "updates_on_additional_requirement": "",
            "updates_on_criteria": "",
            "updates_on_summarization_requirement": "",
        }
        instruct = ctx.get("instruct_updates", {})
        if instruct:
            if "inclusion_exclusion_criteria" in instruct:
                updates["updates_on_criteria"] = instruct["inclusion_exclusion_criteria"]
            if "summarization_requirement" in instruct:
                updates["updates_on_summarization_requirement"] = instruct[
                    "summarization_requirement"
                ]
            if "detailed_focus" in instruct or "research_question" in instruct:
                updates["updates_on_additional_requirement"] = instruct.get(
                    "detailed_focus", instruct.get("research_question", "")
                )
            updates["reflection"] = "Applied the direct parameter edits from the expert."
            return self._emit(updates)

        conversation = ctx.get("conversation", [])
        user_turns = [text for speaker, text in conversation if speaker == "user"]
        latest = user_turns[-1] if user_turns else ""
        focus_match = FOCUS_RE.search(latest)
        if focus_match:
            phrase = focus_match.group(1).strip()
            updates["updates_on_criteria"] = f"must mention: {phrase}"
            updates["reflection"] = f"Narrowing screening to studies mentioning {phrase}."
        elif latest and SUMMARY_STYLE_RE.search(latest):
            updates["updates_on_summarization_requirement"] = latest
            updates["reflection"] = "Adjusting the summarization style as requested."
        return self._emit(updates)


class HttpBackend:
    """Client for a chat-completion endpoint; all knobs from configuration."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str = "",
        timeout: float = 60.0,
        post: Callable[..., Any] | None = None,
    ):
        if post is None:
            import requests

            post = requests.post
        self._post = post
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.timeout = timeout

    def complete(self, request: CompletionRequest) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
        }
        if request.deterministic:
            body["temperature"] = 0
        try:
            response = self._post(
                self.endpoint, json=body, headers=headers, timeout=self.timeout
            )
        except Exception as exc:  # transport layer; requests types not imported here
            if "timeout" in type(exc).__name__.lower():
                raise TransportTimeout(str(exc)) from exc
            raise TransportError(str(exc)) from exc
        if getattr(response, "status_code", 500) >= 400:
            raise TransportError(f"HTTP {response.status_code}")
        payload = response.json()
        try:
            return payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed completion payload: {exc}") from exc


# ---------------------------------------------------------------------------
# Embedders
# ---------------------------------------------------------------------------

class MockEmbedder:
    """Deterministic signed-hashing embedder over content tokens."""

    def __init__(self, dim: int = EMBED_DIM):
        self.dim = dim

    def embed(self, texts: Sequence[str]) -> tuple[list[np.ndarray], list[bool]]:
        vectors, flags = [], []
        for text in texts:
            vec, degenerate = hash_embed(text, self.dim)
            vectors.append(vec)
            flags.append(degenerate)
        return vectors, flags


class HttpEmbedder:
    """Client for an embeddings endpoint with the common JSON wire format."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str = "",
        timeout: float = 60.0,
        post: Callable[..., Any] | None = None,
    ):
        if post is None:
            import requests

            post = requests.post
        self._post = post
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.timeout = timeout

    def embed(self, texts: Sequence[str]) -> tuple[list[np.ndarray], list[bool]]:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            response = self._post(
                self.endpoint,
                json={"model": self.model, "input": list(texts)},
                headers=headers,
                timeout=self.timeout,
            )
        except Exception as exc:
            raise TransportError(str(exc)) from exc
        if getattr(response, "status_code", 500) >= 400:
            raise TransportError(f"HTTP {response.status_code}")
        data = response.json()["data"]
        vectors, flags = [], []
        for item in data:
            vec = np.asarray(item["embedding"], dtype=np.float64)
            norm = float(np.linalg.norm(vec))
            if norm == 0.0:
                canonical = np.zeros(len(vec), dtype=np.float64)
                canonical[CANONICAL_DEGENERATE] = 1.0
                vectors.append(canonical)
                flags.append(True)
            else:
                vectors.append(vec / norm)
                flags.append(False)
        return vectors, flags


# ---------------------------------------------------------------------------
# Provider facade
# ---------------------------------------------------------------------------

class Provider:
    """Shared handle bundling a completion backend and an embedder.

    Calls are stateless; a semaphore bounds in-flight requests so concurrent
    agent workers respect backend rate limits.
    """

    def __init__(
        self,
        backend: Any = None,
        embedder: Any = None,
        max_inflight: int = 4,
        backoff_base: float = 0.5,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.backend = backend if backend is not None else MockBackend()
        self.embedder = embedder if embedder is not None else MockEmbedder()
        self._gate = threading.Semaphore(max_inflight)
        self._backoff_base = backoff_base
        self._sleep = sleep
        # Optional hook receiving every request verbatim (session audit log).
        self.audit: Callable[[CompletionRequest], None] | None = None

    @classmethod
    def from_config(cls, config: dict[str, Any]) -> Provider:
        """Build from a config mapping; ``provider: mock`` selects the offline pair."""
        kind = config.get("provider", "mock")
        if kind == "mock":
            return cls()
        backend = HttpBackend(
            endpoint=config["endpoint"],
            model=config.get("model", ""),
            api_key=config.get("api_key", ""),
            timeout=float(config.get("timeout", 60.0)),
        )
        embedder = HttpEmbedder(
            endpoint=config.get("embedding_endpoint", config["endpoint"]),
            model=config.get("embedding_model", config.get("model", "")),
            api_key=config.get("api_key", ""),
            timeout=float(config.get("timeout", 60.0)),
        )
        return cls(backend=backend, embedder=embedder)

    def complete(self, request: CompletionRequest) -> str:
        if self.audit is not None:
            self.audit(request)
        attempts = max(1, request.retry_budget)
        last: Exception | None = None
        for attempt in range(attempts):
            try:
                with self._gate:
                    return self.backend.complete(request)
            except TransportError as exc:
                last = exc
                if attempt < attempts - 1:
                    self._sleep(self._backoff_base * (2**attempt))
        if isinstance(last, TransportTimeout):
            raise ProviderTimeout(f"backend timed out after {attempts} attempts") from last
        raise ProviderUnavailable(f"backend failed after {attempts} attempts") from last

    def complete_structured(self, request: CompletionRequest) -> StructuredOutput:
        raw = self.complete(request)
        try:
            return parse_structured(raw, request.schema_id)
        except (SchemaViolation, NoObjectFound) as first_error:
            logger.warning("invalid structured output, retrying once: %s", first_error)
            repair = CompletionRequest(
                prompt=request.prompt + REPAIR_SUFFIX,
                schema_id=request.schema_id,
                deterministic=request.deterministic,
                retry_budget=request.retry_budget,
                context=request.context,
            )
            raw = self.complete(repair)
            return parse_structured(raw, request.schema_id)

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        vectors, _ = self.embed_flagged(texts)
        return vectors

    def embed_flagged(self, texts: Sequence[str]) -> tuple[list[np.ndarray], list[bool]]:
        if not list(texts):
            raise ValueError("embed requires at least one text")
        attempts = 3
        last: Exception | None = None
        for attempt in range(attempts):
            try:
                with self._gate:
                    return self.embedder.embed(texts)
            except TransportError as exc:
                last = exc
                if attempt < attempts - 1:
                    self._sleep(self._backoff_base * (2**attempt))
        raise ProviderUnavailable(f"embedder failed after {attempts} attempts") from last
