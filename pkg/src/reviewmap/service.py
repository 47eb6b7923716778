"""HTTP+JSON surface over the session core.

The UI and the CLI both consume this contract: JSON endpoints for lifecycle
and steering, a server-sent-event stream with explicit sequence numbers for
monitoring, and document endpoints for the report, provenance export, and
corpus CSV.
"""

from __future__ import annotations

import queue
import threading
from pathlib import Path
from typing import Any, Iterator

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse, PlainTextResponse, Response, StreamingResponse
from pydantic import BaseModel, Field

from .errors import (
    MalformedUpload,
    NotReady,
    PhaseViolation,
    ReviewMapError,
    UnknownAgent,
    UnknownArticle,
    UnknownSession,
)
from .session import (
    Phase,
    Session,
    SessionConfig,
    SessionStore,
    intervention_from_payload,
)

SSE_POLL_SECONDS = 0.2

_STATUS_CODES: list[tuple[type[ReviewMapError], int]] = [
    (UnknownSession, 404),
    (UnknownAgent, 404),
    (UnknownArticle, 404),
    (NotReady, 409),
    (PhaseViolation, 409),
    (MalformedUpload, 400),
]


class CreateSessionBody(BaseModel):
    research_question: str
    detailed_focus: str = ""
    inclusion_exclusion_criteria: str = ""
    summarization_requirement: str = ""
    seed: int = 0
    read_budget: int | None = None
    k_override: int | None = None
    provider: dict[str, Any] = Field(default_factory=lambda: {"provider": "mock"})


class InterventionBody(BaseModel):
    kind: str
    target_article: str | None = None
    text: str | None = None
    updates: dict[str, str] | None = None


def _status_for(exc: ReviewMapError) -> int:
    for exc_type, code in _STATUS_CODES:
        if isinstance(exc, exc_type):
            return code
    return 400


def create_app(store: SessionStore | None = None) -> FastAPI:
    """Build the service; state lives in the given (or a fresh) store."""
    app = FastAPI(title="reviewmap", version="0.1.0")
    app.state.store = store or SessionStore()
    app.state.runners = {}

    @app.exception_handler(ReviewMapError)
    async def handle_domain_error(request: Request, exc: ReviewMapError) -> JSONResponse:
        return JSONResponse(
            status_code=_status_for(exc),
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    def get_session(session_id: str) -> Session:
        return app.state.store.get(session_id)

    @app.post("/sessions")
    def create_session(body: CreateSessionBody) -> dict[str, str]:
        config = SessionConfig(
            research_question=body.research_question,
            detailed_focus=body.detailed_focus,
            inclusion_exclusion_criteria=body.inclusion_exclusion_criteria,
            summarization_requirement=body.summarization_requirement,
            seed=body.seed,
            read_budget=body.read_budget,
            k_override=body.k_override,
            provider=body.provider,
        )
        session = app.state.store.create(config)
        return {"session_id": session.session_id}

    @app.post("/sessions/{session_id}/corpus")
    async def upload_corpus(session_id: str, request: Request) -> dict[str, int]:
        session = get_session(session_id)
        body = await request.body()
        try:
            text = body.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedUpload(f"corpus must be UTF-8: {exc}") from exc
        count = session.upload_corpus(text)
        return {"articles": count}

    @app.post("/sessions/{session_id}/map")
    def build_map(session_id: str) -> dict[str, Any]:
        return get_session(session_id).build_map()

    def _spawn_runner(session: Session) -> None:
        running = app.state.runners.get(session.session_id)
        if running is not None and running.is_alive():
            return
        thread = threading.Thread(target=session.run, daemon=True)
        app.state.runners[session.session_id] = thread
        thread.start()

    @app.post("/sessions/{session_id}/start")
    def start_session(session_id: str, wait: bool = False) -> dict[str, str]:
        session = get_session(session_id)
        session.start()
        if wait:
            session.run()
        else:
            _spawn_runner(session)
        return {"status": "ok", "phase": session.phase.value}

    @app.post("/sessions/{session_id}/pause")
    def pause_session(session_id: str) -> dict[str, str]:
        session = get_session(session_id)
        session.pause()
        return {"status": "ok"}

    @app.post("/sessions/{session_id}/agents/{agent_id}/start")
    def start_agent(session_id: str, agent_id: str, wait: bool = False) -> dict[str, str]:
        session = get_session(session_id)
        session.start(agent_id)
        if wait:
            session.run()
        else:
            _spawn_runner(session)
        return {"status": "ok"}

    @app.post("/sessions/{session_id}/agents/{agent_id}/pause")
    def pause_agent(session_id: str, agent_id: str) -> dict[str, str]:
        session = get_session(session_id)
        session.pause(agent_id)
        return {"status": "ok"}

    @app.post("/sessions/{session_id}/agents/{agent_id}/interventions")
    def post_intervention(session_id: str, agent_id: str, body: InterventionBody) -> dict[str, str]:
        session = get_session(session_id)
        payload: dict[str, Any]
        if body.kind == "path":
            payload = {"target_article": body.target_article or ""}
        elif body.kind == "chat":
            payload = {"text": body.text or ""}
        elif body.kind == "instruct":
            payload = {"updates": body.updates or {}}
        else:
            raise MalformedUpload(f"unknown intervention kind {body.kind!r}")
        intervention = intervention_from_payload(body.kind, payload, "")
        intervention_id = session.post_intervention(agent_id, intervention)
        return {"intervention_id": intervention_id}

    @app.get("/sessions/{session_id}/events")
    def stream_events(session_id: str, request: Request, from_seq: int = Query(0, alias="from")) -> StreamingResponse:
        session = get_session(session_id)

        def generate() -> Iterator[bytes]:
            backlog, live = session.subscribe(from_seq)
            last = from_seq
            try:
                for event in backlog:
                    last = event.seq
                    yield _sse_bytes(event.to_json())
                while True:
                    if session.phase is Phase.SYNTHESIZED and live.empty():
                        yield b"event: end\ndata: {}\n\n"
                        return
                    try:
                        event = live.get(timeout=SSE_POLL_SECONDS)
                    except queue.Empty:
                        yield b": keepalive\n\n"
                        continue
                    if event.seq <= last:
                        continue
                    last = event.seq
                    yield _sse_bytes(event.to_json())
            finally:
                session.unsubscribe(live)

        return StreamingResponse(generate(), media_type="text/event-stream")

    @app.post("/sessions/{session_id}/synthesize")
    def synthesize(session_id: str) -> dict[str, str]:
        session = get_session(session_id)
        session.synthesize()
        return {"status": "ok", "phase": session.phase.value}

    @app.get("/sessions/{session_id}/report")
    def get_report(session_id: str) -> dict[str, Any]:
        return get_session(session_id).get_report()

    @app.get("/sessions/{session_id}/provenance")
    def get_provenance(session_id: str) -> list[dict[str, Any]]:
        return get_session(session_id).get_provenance()

    @app.get("/sessions/{session_id}/export.csv")
    def get_export(session_id: str) -> Response:
        csv_text = get_session(session_id).get_export()
        return PlainTextResponse(csv_text, media_type="text/csv")

    @app.get("/sessions/{session_id}/map")
    def get_map(session_id: str) -> list[dict[str, Any]]:
        return get_session(session_id).get_map()

    return app


def _sse_bytes(data: str) -> bytes:
    return f"data: {data}\n\n".encode("utf-8")


def build_default_app() -> FastAPI:
    """App factory for ``uvicorn reviewmap.service:build_default_app``."""
    import os

    base = os.environ.get("REVIEWMAP_DATA_DIR")
    store = SessionStore(base_dir=Path(base)) if base else SessionStore()
    return create_app(store)
