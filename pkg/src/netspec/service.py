"""HTTP API for generation, browsing, contribution, community and operator workflows.

Every error body follows one schema: {"status", "code", "message", "details"?,
"request_id"}; the code set is closed (see ERROR_CODES) and 5xx is reserved for
provider/storage faults.
"""

from __future__ import annotations

import json
import logging
import threading
import time
import uuid
from collections import defaultdict, deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

from fastapi import BackgroundTasks, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from starlette.exceptions import HTTPException as StarletteHTTPException

from . import community as community_mod
from . import engine as engine_mod
from .engine import RagEngine, radar_axes
from .ontology import (
    MAX_DESCRIPTION_CHARS,
    MAX_NAME_CHARS,
    CommunicationProcess,
    Contributor,
    SpecRangeConfig,
    UseCase,
    UseCaseStatus,
    pydantic_loc_to_path,
    utcnow,
    validate_use_case,
)
from .providers import EmptyInput, GenerationProvider, NoScriptMatch
from .store import KnowledgeStore, ValidationFailed

logger = logging.getLogger(__name__)

API_PREFIX = "/api/v1"
OPERATOR_KEY_HEADER = "X-Operator-Key"
REQUEST_ID_HEADER = "X-Request-Id"
MAX_INGEST_CHARS = 2_000_000
DEFAULT_RATE_LIMIT_PER_MINUTE = 10
DEFAULT_SPECIFY_DEADLINE_S = 120.0
MAX_PAGE_SIZE = 100

#: Closed set of machine-readable error codes.
ERROR_CODES = frozenset(
    {
        "validation_failed",
        "bad_request",
        "unauthorized",
        "forbidden",
        "not_found",
        "not_published",
        "not_pending",
        "range_conflict",
        "payload_too_large",
        "generation_unparseable",
        "rate_limited",
        "provider_unavailable",
        "internal_error",
    }
)

_HTTP_STATUS_CODES = {
    400: "bad_request",
    401: "unauthorized",
    403: "forbidden",
    404: "not_found",
    405: "bad_request",
    413: "payload_too_large",
    429: "rate_limited",
}


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, details=None):
        assert code in ERROR_CODES, f"undocumented error code {code!r}"
        self.status = status
        self.code = code
        self.message = message
        self.details = details
        super().__init__(message)


@dataclass
class ServiceConfig:
    operator_key: str = "change-me"
    rate_limit_per_minute: int = DEFAULT_RATE_LIMIT_PER_MINUTE
    specify_deadline_s: float = DEFAULT_SPECIFY_DEADLINE_S
    cors_origins: list[str] = field(default_factory=lambda: ["*"])
    ranges_path: Path | None = None


@dataclass
class IngestJob:
    id: str
    status: str = "running"  # running | done | failed
    document_id: str | None = None
    draft_ids: list[str] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)
    error: str | None = None


class _RateLimiter:
    """Fixed 60-second sliding window per client address."""

    def __init__(self, limit_per_minute: int):
        self.limit = limit_per_minute
        self._events: dict[str, deque[float]] = defaultdict(deque)
        self._lock = threading.Lock()

    def check(self, client: str) -> None:
        now = time.monotonic()
        with self._lock:
            window = self._events[client]
            while window and now - window[0] > 60.0:
                window.popleft()
            if len(window) >= self.limit:
                raise ApiError(429, "rate_limited", "rate limit exceeded, retry later")
            window.append(now)


# ------------------------------------------------------------------ request bodies


class _Body(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SpecifyBody(_Body):
    name: str = Field(min_length=1, max_length=MAX_NAME_CHARS)
    description: str = Field(min_length=1, max_length=MAX_DESCRIPTION_CHARS)
    n: int = Field(default=5, ge=1, le=100)
    template_id: str = "specify"
    provider_id: str | None = None


class ProcessBody(_Body):
    id: str | None = None
    name: str
    description: str
    is_real_time: bool
    direction: str
    message_type: str
    specification: dict


class ContributeBody(_Body):
    name: str
    description: str
    processes: list[ProcessBody]
    contributor_handle: str = Field(min_length=1)


class VoteBody(_Body):
    voter_handle: str = Field(min_length=1)
    value: Literal["up", "down"]


class CommentBody(_Body):
    author_handle: str = Field(min_length=1)
    body: str


class IngestBody(_Body):
    document: str
    document_id: str | None = None


class DecisionBody(_Body):
    decision: Literal["approve", "reject"]
    moderator: str = Field(min_length=1)
    reason: str | None = None


# ------------------------------------------------------------------ serialization helpers


def _tally_dict(store: KnowledgeStore, uc_id: str) -> dict:
    tally = store.tally(uc_id)
    return {"up": tally.up, "down": tally.down}


def _use_case_summary(store: KnowledgeStore, uc: UseCase) -> dict:
    return {
        "id": uc.id,
        "name": uc.name,
        "description": uc.description,
        "status": uc.status.value,
        "provenance": uc.provenance.model_dump(mode="json"),
        "process_count": len(uc.processes),
        "created_at": uc.model_dump(mode="json")["created_at"],
        "updated_at": uc.model_dump(mode="json")["updated_at"],
        "tally": _tally_dict(store, uc.id),
        "comment_count": len(store.comments_for(uc.id)),
    }


def _use_case_detail(store: KnowledgeStore, uc: UseCase) -> dict:
    data = uc.model_dump(mode="json")
    data["tally"] = _tally_dict(store, uc.id)
    data["comments"] = [c.model_dump(mode="json") for c in store.comments_for(uc.id)]
    data["radar"] = [radar_axes(p.specification, store.ranges).as_dict() for p in uc.processes]
    return data


def _contribution_view(contribution) -> dict:
    return {
        "contribution_id": contribution.id,
        "use_case_id": contribution.submitted.id,
        "contributor_handle": contribution.contributor_handle,
        "screening": contribution.screening.model_dump(mode="json"),
        "decision": contribution.decision.model_dump(mode="json"),
        "submitted_at": contribution.model_dump(mode="json")["submitted_at"],
    }


def _build_contributed_use_case(body: ContributeBody) -> UseCase:
    processes = []
    for i, p in enumerate(body.processes):
        try:
            processes.append(
                CommunicationProcess.model_validate(
                    {
                        "id": p.id or engine_mod.deterministic_process_id(i, p.name, p.description),
                        "name": p.name,
                        "description": p.description,
                        "is_real_time": p.is_real_time,
                        "direction": p.direction,
                        "message_type": p.message_type,
                        "specification": p.specification,
                    }
                )
            )
        except ValidationError as exc:
            raise ApiError(
                400,
                "validation_failed",
                "contributed process does not match the ontology",
                details=[
                    {"path": f"processes[{i}].{pydantic_loc_to_path(err['loc'])}", "detail": err["msg"]}
                    for err in exc.errors()
                ],
            ) from exc
    now = utcnow()
    return UseCase(
        id=str(uuid.uuid4()),
        name=body.name,
        description=body.description,
        processes=tuple(processes),
        provenance=Contributor(contributor_handle=body.contributor_handle),
        status=UseCaseStatus.PENDING_REVIEW,
        created_at=now,
        updated_at=now,
    )


# ------------------------------------------------------------------ app factory


def create_app(
    store: KnowledgeStore,
    engine: RagEngine,
    community: community_mod.CommunityService,
    config: ServiceConfig | None = None,
    generators: dict[str, GenerationProvider] | None = None,
) -> FastAPI:
    cfg = config or ServiceConfig()
    app = FastAPI(title="netspec", version="0.1.0", docs_url=None, redoc_url=None)
    app.state.store = store
    app.state.engine = engine
    app.state.community = community
    app.state.config = cfg
    app.state.generators = generators or {}
    app.state.jobs = {}
    app.state.jobs_lock = threading.Lock()
    rate_limiter = _RateLimiter(cfg.rate_limit_per_minute)

    app.add_middleware(
        CORSMiddleware,
        allow_origins=cfg.cors_origins,
        allow_methods=["*"],
        allow_headers=["*"],
    )

    # ---------------------------------------------------------------- errors

    def _error_response(request: Request, status: int, code: str, message: str, details=None):
        body = {
            "status": status,
            "code": code,
            "message": message,
            "request_id": getattr(request.state, "request_id", None),
        }
        if details is not None:
            body["details"] = details
        return JSONResponse(body, status_code=status, headers=_request_id_headers(request))

    def _request_id_headers(request: Request) -> dict[str, str]:
        request_id = getattr(request.state, "request_id", None)
        return {REQUEST_ID_HEADER: request_id} if request_id else {}

    @app.middleware("http")
    async def _assign_request_id(request: Request, call_next):
        request.state.request_id = request.headers.get(REQUEST_ID_HEADER) or uuid.uuid4().hex
        response = await call_next(request)
        response.headers.setdefault(REQUEST_ID_HEADER, request.state.request_id)
        return response

    @app.exception_handler(ApiError)
    async def _api_error_handler(request: Request, exc: ApiError):
        return _error_response(request, exc.status, exc.code, exc.message, exc.details)

    @app.exception_handler(RequestValidationError)
    async def _validation_handler(request: Request, exc: RequestValidationError):
        errors = exc.errors()
        malformed = any(err.get("type") == "json_invalid" for err in errors)
        details = [
            {"path": pydantic_loc_to_path(tuple(err["loc"])), "detail": err["msg"]}
            for err in errors
        ]
        code = "bad_request" if malformed else "validation_failed"
        return _error_response(request, 400, code, "request does not validate", details)

    @app.exception_handler(StarletteHTTPException)
    async def _http_error_handler(request: Request, exc: StarletteHTTPException):
        code = _HTTP_STATUS_CODES.get(exc.status_code, "internal_error")
        return _error_response(request, exc.status_code, code, str(exc.detail))

    @app.exception_handler(Exception)
    async def _unexpected_handler(request: Request, exc: Exception):
        logger.exception("unhandled error: %s", exc)
        return _error_response(request, 500, "internal_error", "internal error")

    def _translate(exc: Exception) -> ApiError:
        if isinstance(exc, ApiError):
            return exc
        if isinstance(exc, ValidationFailed):
            return ApiError(
                400, "validation_failed", str(exc), details=exc.report.model_dump(mode="json")
            )
        if isinstance(exc, EmptyInput):
            return ApiError(400, "validation_failed", f"text is not embeddable: {exc}")
        if isinstance(exc, engine_mod.ProviderUnavailable) or isinstance(exc, NoScriptMatch):
            return ApiError(502, "provider_unavailable", str(exc))
        if isinstance(exc, engine_mod.ExhaustedRetries):
            details = None
            if isinstance(exc.last_error, engine_mod.SchemaViolation):
                details = exc.last_error.report.model_dump(mode="json")
            return ApiError(422, "generation_unparseable", str(exc), details=details)
        if isinstance(exc, (community_mod.UnknownEntity, community_mod.UnknownContribution)):
            return ApiError(404, "not_found", str(exc))
        if isinstance(exc, community_mod.NotPublished):
            return ApiError(409, "not_published", str(exc))
        if isinstance(exc, community_mod.NotPending):
            return ApiError(409, "not_pending", str(exc))
        raise exc

    # ---------------------------------------------------------------- auth

    def _is_operator(request: Request) -> bool:
        return request.headers.get(OPERATOR_KEY_HEADER) == cfg.operator_key

    def _require_operator(request: Request) -> None:
        if not _is_operator(request):
            raise ApiError(401, "unauthorized", f"missing or invalid {OPERATOR_KEY_HEADER} header")

    # ---------------------------------------------------------------- public endpoints

    @app.post(API_PREFIX + "/specify")
    def specify(body: SpecifyBody, request: Request):
        if not body.name.strip() or not body.description.strip():
            raise ApiError(400, "validation_failed", "name and description must be non-empty")
        rate_limiter.check(request.client.host if request.client else "unknown")
        generator = None
        if body.provider_id is not None:
            generator = app.state.generators.get(body.provider_id)
            if generator is None:
                raise ApiError(400, "validation_failed", f"unknown provider_id {body.provider_id!r}")
        try:
            outcome = engine.generate_specification(
                body.name,
                body.description,
                n=body.n,
                template_id=body.template_id,
                generator=generator,
                deadline_s=cfg.specify_deadline_s,
            )
        except Exception as exc:  # noqa: BLE001 - translated to ApiError below
            raise _translate(exc)
        similar = []
        for hit in outcome.similar_use_cases.hits:
            uc = store.get_use_case(hit.use_case_id)
            similar.append(
                {
                    "use_case_id": hit.use_case_id,
                    "similarity": hit.similarity,
                    "rank": hit.rank,
                    "name": uc.name if uc else None,
                    "description": uc.description if uc else None,
                }
            )
        return {
            "processes": [p.model_dump(mode="json") for p in outcome.processes],
            "radar": [r.as_dict() for r in engine.radar_for_outcome(outcome)],
            "similar_use_cases": similar,
            "validation": outcome.validation.model_dump(mode="json"),
            "provider_id": outcome.provider_id,
            "retry_count": outcome.retry_count,
            "audit": outcome.raw_model_text,
        }

    @app.get(API_PREFIX + "/use-cases")
    def list_use_cases(
        request: Request,
        status: str | None = None,
        page: int = 1,
        page_size: int = 20,
    ):
        if page < 1 or page_size < 1 or page_size > MAX_PAGE_SIZE:
            raise ApiError(400, "bad_request", f"page must be >= 1 and page_size in 1..{MAX_PAGE_SIZE}")
        if status is not None:
            try:
                wanted = UseCaseStatus(status)
            except ValueError:
                raise ApiError(400, "bad_request", f"unknown status {status!r}")
            if wanted != UseCaseStatus.PUBLISHED and not _is_operator(request):
                raise ApiError(403, "forbidden", "non-published listings require the operator key")
            items = store.list_use_cases(status=wanted)
        elif _is_operator(request):
            items = store.list_use_cases()
        else:
            items = store.list_use_cases(status=UseCaseStatus.PUBLISHED)
        items.sort(key=lambda uc: uc.id)
        items.sort(key=lambda uc: uc.updated_at, reverse=True)  # stable: ties stay id-ascending
        total = len(items)
        start = (page - 1) * page_size
        page_items = items[start : start + page_size]
        return {
            "items": [_use_case_summary(store, uc) for uc in page_items],
            "page": page,
            "page_size": page_size,
            "total": total,
        }

    @app.get(API_PREFIX + "/use-cases/{use_case_id}")
    def get_use_case(use_case_id: str, request: Request):
        uc = store.get_use_case(use_case_id)
        if uc is None or (uc.status != UseCaseStatus.PUBLISHED and not _is_operator(request)):
            raise ApiError(404, "not_found", f"no published use case {use_case_id!r}")
        return _use_case_detail(store, uc)

    @app.post(API_PREFIX + "/use-cases", status_code=202)
    def contribute(body: ContributeBody):
        uc = _build_contributed_use_case(body)
        try:
            contribution = community.submit_contribution(uc, body.contributor_handle)
        except Exception as exc:
            raise _translate(exc)
        return _contribution_view(contribution)

    @app.post(API_PREFIX + "/use-cases/{use_case_id}/votes")
    def cast_vote(use_case_id: str, body: VoteBody):
        try:
            tally = community.cast_vote(use_case_id, body.voter_handle, body.value)
        except Exception as exc:
            raise _translate(exc)
        return {"use_case_id": use_case_id, "tally": {"up": tally.up, "down": tally.down}}

    @app.post(API_PREFIX + "/use-cases/{use_case_id}/comments", status_code=201)
    def post_comment(use_case_id: str, body: CommentBody):
        try:
            comment = community.post_comment(use_case_id, body.author_handle, body.body)
        except Exception as exc:
            raise _translate(exc)
        return {"comment_id": comment.id, "use_case_id": use_case_id}

    # ---------------------------------------------------------------- operator endpoints

    @app.post(API_PREFIX + "/admin/ingest", status_code=202)
    def ingest(body: IngestBody, request: Request, background: BackgroundTasks):
        _require_operator(request)
        if len(body.document) > MAX_INGEST_CHARS:
            raise ApiError(413, "payload_too_large", f"document exceeds {MAX_INGEST_CHARS} characters")
        if not body.document.strip():
            raise ApiError(400, "validation_failed", "document is empty")
        job = IngestJob(id=uuid.uuid4().hex, document_id=body.document_id)
        with app.state.jobs_lock:
            app.state.jobs[job.id] = job

        def _run() -> None:
            try:
                result = community.ingest_document(
                    body.document, document_id=body.document_id, submitted_by="operator"
                )
                job.document_id = result.document_id
                job.draft_ids = [uc.id for uc in result.extracted]
                job.failures = list(result.failures)
                job.status = "done"
            except Exception as exc:  # noqa: BLE001 - job state carries the fault
                job.status = "failed"
                job.error = str(exc)

        background.add_task(_run)
        return {"job_id": job.id, "status": job.status}

    @app.get(API_PREFIX + "/admin/ingest/{job_id}")
    def ingest_status(job_id: str, request: Request):
        _require_operator(request)
        with app.state.jobs_lock:
            job = app.state.jobs.get(job_id)
        if job is None:
            raise ApiError(404, "not_found", f"no ingestion job {job_id!r}")
        return {
            "job_id": job.id,
            "status": job.status,
            "document_id": job.document_id,
            "draft_ids": job.draft_ids,
            "failures": job.failures,
            "error": job.error,
        }

    @app.get(API_PREFIX + "/admin/contributions")
    def list_contributions(request: Request, state: str | None = None):
        _require_operator(request)
        if state is not None and state not in ("pending", "approved", "rejected"):
            raise ApiError(400, "bad_request", f"unknown decision state {state!r}")
        return {"items": [_contribution_view(c) for c in store.list_contributions(state=state)]}

    @app.post(API_PREFIX + "/admin/contributions/{contribution_id}/decision")
    def decide(contribution_id: str, body: DecisionBody, request: Request):
        _require_operator(request)
        try:
            contribution = community.moderate(
                contribution_id, body.decision, body.moderator, reason=body.reason
            )
        except Exception as exc:
            raise _translate(exc)
        return _contribution_view(contribution)

    @app.get(API_PREFIX + "/admin/feedback")
    def feedback(request: Request):
        _require_operator(request)
        return {"rows": [row.model_dump(mode="json") for row in community.feedback_report()]}

    @app.get(API_PREFIX + "/admin/ranges")
    def get_ranges(request: Request):
        _require_operator(request)
        return store.ranges.model_dump(mode="json")

    @app.put(API_PREFIX + "/admin/ranges")
    def put_ranges(request: Request, body: dict):
        _require_operator(request)
        try:
            new_ranges = SpecRangeConfig.model_validate(body)
        except ValidationError as exc:
            raise ApiError(
                400,
                "validation_failed",
                "ranges do not validate",
                details=[
                    {"path": pydantic_loc_to_path(err["loc"]), "detail": err["msg"]}
                    for err in exc.errors()
                ],
            ) from exc
        offenders = [
            uc.id
            for uc in store.list_use_cases(status=UseCaseStatus.PUBLISHED)
            if not validate_use_case(uc, new_ranges).valid
        ]
        if offenders:
            raise ApiError(
                409,
                "range_conflict",
                "new ranges would invalidate published use cases",
                details={"offenders": sorted(offenders)},
            )
        store.ranges = new_ranges
        if cfg.ranges_path is not None:
            cfg.ranges_path.write_text(
                json.dumps(new_ranges.model_dump(mode="json"), indent=2), encoding="utf-8"
            )
        return store.ranges.model_dump(mode="json")

    return app
