"""HTTP API powering judgment sessions.

Serves result lists to human judges and ingests their 0-5 votes, under
``/api/v1/``. Judging is blind by default: payloads carry an opaque
group token and never the engine identity (configurable off to
replicate an open protocol). Reports are read-only snapshots computed
from the same persisted state the batch pipeline uses.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import Depends, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from ..corpus import RunManifest, RunStore, UnknownRunError
from ..judgments import (
    ContextStore,
    DuplicateEmailError,
    Judgment,
    WeakPasswordError,
)
from ..pipeline import build_run_report
from ..report import TableReport
from .models import (
    ErrorBody,
    LoginRequest,
    LoginResponse,
    NextResponse,
    OverallProgress,
    Progress,
    RegisterRequest,
    RegisterResponse,
    ReportsResponse,
    ResultPayload,
    TablePayload,
    VoteRequest,
    VoteResponse,
)
from .sessions import GroupRef, SessionManager, group_order

EXCERPT_CHARS = 1200


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, field: str | None = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.field = field


@dataclass
class RunContext:
    """Loaded run data the session endpoints serve from."""

    manifest: RunManifest
    payloads: dict[tuple[str, str], list[ResultPayload]]
    known_results: set[tuple[str, str, str, int]] = field(default_factory=set)

    def group_size(self, engine_id: str, query_id: str) -> int:
        return len(self.payloads.get((engine_id, query_id), []))


def _load_run_context(store: RunStore, run_id: str) -> RunContext:
    manifest = store.load_manifest(run_id)
    run = store.load_run(run_id)
    serps, _ = store.load_serps(run_id)
    content_by_key: dict[tuple[str, str, int], str] = {}
    for (engine_id, query_id), triplets in run.groups.items():
        for triplet in triplets:
            if triplet.content:
                content_by_key[(engine_id, query_id, triplet.rank)] = triplet.content

    payloads: dict[tuple[str, str], list[ResultPayload]] = {}
    for serp in serps:
        payloads[(serp.engine_id, serp.query_id)] = [
            ResultPayload(
                rank=result.rank,
                title=result.title,
                url=result.url,
                snippet=result.snippet,
                excerpt=content_by_key.get(
                    (serp.engine_id, serp.query_id, result.rank), ""
                )[:EXCERPT_CHARS],
            )
            for result in serp.results
        ]
    for (engine_id, query_id), triplets in run.groups.items():
        payloads.setdefault(
            (engine_id, query_id),
            [
                ResultPayload(
                    rank=t.rank, url=t.url,
                    excerpt=(t.content or "")[:EXCERPT_CHARS],
                )
                for t in triplets
            ],
        )
    known = {
        (run_id, engine_id, query_id, payload.rank)
        for (engine_id, query_id), group in payloads.items()
        for payload in group
    }
    return RunContext(manifest=manifest, payloads=payloads, known_results=known)


def _table_payload(table: TableReport) -> TablePayload:
    return TablePayload(
        title=table.title,
        corner=table.corner,
        rows=table.rows,
        columns=table.columns,
        cells={
            row: {col: table.cell(row, col) for col in table.columns}
            for row in table.rows
        },
        flags=table.flags,
    )


def create_app(
    data_root: Path | str,
    blind: bool = True,
    allow_skip: bool = False,
    token_ttl_s: float = 8 * 3600.0,
) -> FastAPI:
    app = FastAPI(title="serpeval judgment service", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    store = RunStore(data_root)
    contexts = ContextStore(data_root)
    sessions = SessionManager()
    tokens: dict[str, tuple[str, float]] = {}
    tokens_lock = threading.Lock()
    run_cache: dict[str, RunContext] = {}
    cache_lock = threading.Lock()

    app.state.store = store
    app.state.contexts = contexts

    @app.exception_handler(ApiError)
    async def on_api_error(request: Request, exc: ApiError):
        body = ErrorBody(code=exc.code, message=exc.message, field=exc.field)
        return JSONResponse(status_code=exc.status, content=body.model_dump())

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        location = ".".join(str(part) for part in first.get("loc", []) if part != "body")
        body = ErrorBody(
            code="validation",
            message=first.get("msg", "invalid request"),
            field=location or None,
        )
        return JSONResponse(status_code=422, content=body.model_dump())

    def authorize(request: Request) -> str:
        header = request.headers.get("Authorization", "")
        token = header.removeprefix("Bearer ").strip()
        if not token:
            raise ApiError(401, "unauthorized", "missing bearer token")
        with tokens_lock:
            entry = tokens.get(token)
            if entry is None or entry[1] < time.time():
                tokens.pop(token, None)
                raise ApiError(401, "unauthorized", "invalid or expired token")
        return entry[0]

    def run_context(run_id: str) -> RunContext:
        with cache_lock:
            context = run_cache.get(run_id)
        if context is not None:
            return context
        try:
            context = _load_run_context(store, run_id)
        except UnknownRunError as exc:
            raise ApiError(404, "unknown-run", str(exc)) from exc
        with cache_lock:
            run_cache[run_id] = context
        return context

    def judged_votes(user_id: str, run_id: str) -> dict[tuple[str, str], dict[int, int]]:
        current = contexts.dynamic_context(user_id).current()
        votes: dict[tuple[str, str], dict[int, int]] = {}
        for (vote_run, engine_id, query_id, rank), judgment in current.items():
            if vote_run == run_id:
                votes.setdefault((engine_id, query_id), {})[rank] = judgment.vote
        return votes

    def fully_judged_indexes(
        context: RunContext, order: list[GroupRef], user_id: str, run_id: str
    ) -> set[int]:
        voted = judged_votes(user_id, run_id)
        done = set()
        for ref in order:
            total = context.group_size(ref.engine_id, ref.query_id)
            have = len(voted.get((ref.engine_id, ref.query_id), {}))
            if total == 0 or have >= total:
                done.add(ref.index)
        return done

    def group_progress(
        context: RunContext, ref: GroupRef, user_id: str, run_id: str
    ) -> Progress:
        total = context.group_size(ref.engine_id, ref.query_id)
        voted = judged_votes(user_id, run_id).get((ref.engine_id, ref.query_id), {})
        judged = len(voted)
        return Progress(
            judged=judged, total=total, fraction=judged / total if total else 1.0
        )

    @app.post("/api/v1/register", response_model=RegisterResponse, status_code=201)
    def api_register(payload: RegisterRequest):
        try:
            user_id = contexts.register_user(
                email=payload.connection.email,
                password=payload.connection.password,
                name=payload.personal.name,
                country=payload.personal.country,
                language=payload.personal.language,
                domains=payload.interests.domains,
                specialty=payload.interests.specialty,
                profession=payload.competence.profession,
                study_level=payload.competence.study_level,
            )
        except DuplicateEmailError as exc:
            raise ApiError(409, "duplicate-email", str(exc), "connection.email") from exc
        except WeakPasswordError as exc:
            raise ApiError(422, "weak-password", str(exc), "connection.password") from exc
        return RegisterResponse(user_id=user_id)

    @app.post("/api/v1/login", response_model=LoginResponse)
    def api_login(payload: LoginRequest):
        context = contexts.authenticate(payload.email, payload.password)
        if context is None:
            # Same response for unknown email and wrong password.
            raise ApiError(401, "invalid-credentials", "invalid credentials")
        token = uuid.uuid4().hex
        expires_at = time.time() + token_ttl_s
        with tokens_lock:
            tokens[token] = (context.user_id, expires_at)
        return LoginResponse(token=token, expires_at=expires_at)

    @app.get("/api/v1/runs/{run_id}/next", response_model=NextResponse)
    def api_next_results(run_id: str, user_id: str = Depends(authorize)):
        context = run_context(run_id)
        order = group_order(context.manifest, user_id)
        session = sessions.open(user_id, run_id)
        done = fully_judged_indexes(context, order, user_id, run_id)
        ref = sessions.advance(session, order, done)
        overall = OverallProgress(groups_done=len(done), groups_total=len(order))
        if ref is None:
            return NextResponse(complete=True, overall=overall)
        topic_label = next(
            (t.label for t in context.manifest.topics if t.id == ref.topic_id), ""
        )
        query = next(
            (q for q in context.manifest.queries if q.id == ref.query_id), None
        )
        my_votes = judged_votes(user_id, run_id).get((ref.engine_id, ref.query_id), {})
        results = [
            payload.model_copy(update={"my_vote": my_votes.get(payload.rank)})
            for payload in context.payloads.get((ref.engine_id, ref.query_id), [])
        ]
        return NextResponse(
            complete=False,
            group_token=ref.token,
            topic_label=topic_label,
            query_text=query.text if query else "",
            engine_id=None if blind else ref.engine_id,
            results=results,
            progress=group_progress(context, ref, user_id, run_id),
            overall=overall,
        )

    @app.post("/api/v1/runs/{run_id}/votes", response_model=VoteResponse)
    def api_vote(run_id: str, payload: VoteRequest, user_id: str = Depends(authorize)):
        context = run_context(run_id)
        order = group_order(context.manifest, user_id)
        session = sessions.current(user_id, run_id)
        if session is None:
            raise ApiError(409, "no-open-group", "fetch the next result list first")
        by_token = {ref.token: ref for ref in order}
        target = by_token.get(payload.group_token)
        if target is None:
            raise ApiError(409, "outside-group", f"no group {payload.group_token!r}")
        current_ref = order[session.cursor] if session.cursor < len(order) else None
        if not allow_skip and (current_ref is None or target.index != current_ref.index):
            raise ApiError(
                409, "outside-group",
                "vote targets a group other than the current one",
            )
        key = (run_id, target.engine_id, target.query_id, payload.rank)
        if key not in context.known_results:
            raise ApiError(
                409, "outside-group",
                f"rank {payload.rank} is not part of the current result list",
            )
        contexts.record_judgment(
            Judgment(
                user_id=user_id,
                run_id=run_id,
                engine_id=target.engine_id,
                query_id=target.query_id,
                rank=payload.rank,
                vote=payload.vote,
            ),
            known_results=context.known_results,
        )
        return VoteResponse(
            ok=True, progress=group_progress(context, target, user_id, run_id)
        )

    @app.get("/api/v1/runs/{run_id}/reports", response_model=ReportsResponse)
    def api_reports(run_id: str, user_id: str = Depends(authorize)):
        try:
            store.load_manifest(run_id)
        except UnknownRunError as exc:
            raise ApiError(404, "unknown-run", str(exc)) from exc
        report = build_run_report(data_root, run_id, require_all=False)
        flags = []
        for name in ("performance", "query_relevance", "user_relevance"):
            if name not in report.tables:
                flags.append(f"{name} not computed yet")
        for name, table in report.tables.items():
            flags.extend(f"{name}: {flag}" for flag in table.flags)
        return ReportsResponse(
            performance=_table_payload(report.tables["performance"])
            if "performance" in report.tables else None,
            user_relevance=_table_payload(report.tables["user_relevance"])
            if "user_relevance" in report.tables else None,
            query_relevance=_table_payload(report.tables["query_relevance"])
            if "query_relevance" in report.tables else None,
            coupled=_table_payload(report.tables["coupled"])
            if "coupled" in report.tables else None,
            flags=flags,
        )

    @app.get("/api/v1/health")
    def api_health():
        return {"status": "ok"}

    return app
