"""Durable store of use cases, community records and an in-memory vector index.

The "regular" side is a JSON snapshot (atomic write); retrieval logging is an
append-only JSON-lines sidecar. The vector side is an exact full-scan cosine
index over Published use cases, rebuilt lazily as a numpy matrix.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Literal, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_serializer

from .hashing import content_hash, fnv1a_64
from .ontology import (
    DEFAULT_RANGES,
    SpecRangeConfig,
    UseCase,
    UseCaseStatus,
    UtcDatetime,
    ValidationReport,
    Violation,
    ViolationCode,
    rfc3339,
    utcnow,
    validate_use_case,
)
from .providers import EmbeddingProvider, EmptyInput

SCHEMA_VERSION = 1
SNAPSHOT_NAME = "store.json"
RETRIEVAL_LOG_NAME = "retrieval.log.jsonl"
DEFAULT_TOP_N = 5
# Similarities are quantized before ranking so that mathematically equal scores
# computed along different float paths (matrix product vs scalar loop) compare
# as exact ties and fall through to the id tie-break.
SIMILARITY_DECIMALS = 12


class StoreError(Exception):
    pass


class ValidationFailed(StoreError):
    def __init__(self, report: ValidationReport):
        self.report = report
        details = "; ".join(f"{v.path or '<root>'}: {v.detail}" for v in report.violations)
        super().__init__(f"validation failed: {details}")


class StorageUnavailable(StoreError):
    pass


class UnsupportedSchemaVersion(StoreError):
    def __init__(self, version):
        self.version = version
        super().__init__(f"unsupported snapshot schema_version {version!r}")


class CorruptSnapshot(StoreError):
    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        suffix = f" (byte offset {offset})" if offset is not None else ""
        super().__init__(f"corrupt snapshot: {message}{suffix}")


class IoFailure(StoreError):
    pass


class DimensionMismatch(StoreError):
    pass


class ZeroVector(StoreError):
    pass


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class VoteValue(str, Enum):
    UP = "up"
    DOWN = "down"


class Vote(_Frozen):
    entity_id: str
    voter_handle: str
    value: VoteValue
    ts: UtcDatetime

    @field_serializer("ts")
    def _ser_ts(self, value: datetime) -> str:
        return rfc3339(value)


class VoteTally(_Frozen):
    up: int = 0
    down: int = 0


class Comment(_Frozen):
    id: str
    entity_id: str
    author_handle: str
    body: str
    ts: UtcDatetime

    @field_serializer("ts")
    def _ser_ts(self, value: datetime) -> str:
        return rfc3339(value)


class Document(_Frozen):
    id: str
    text: str
    submitted_by: str
    created_at: UtcDatetime

    @field_serializer("created_at")
    def _ser_ts(self, value: datetime) -> str:
        return rfc3339(value)


class Screening(_Frozen):
    """Automatic checks run on every contribution before moderation."""

    max_similarity: float  # -1.0 sentinel when the index had nothing to compare against
    nearest_use_case_id: str | None
    duplicate_flag: bool
    validation: ValidationReport
    plausibility_note: str | None = None


class Decision(_Frozen):
    state: Literal["pending", "approved", "rejected"] = "pending"
    moderator: str | None = None
    reason: str | None = None
    decided_at: UtcDatetime | None = None

    @field_serializer("decided_at")
    def _ser_ts(self, value: datetime | None) -> str | None:
        return None if value is None else rfc3339(value)


class Contribution(_Frozen):
    id: str
    submitted: UseCase
    contributor_handle: str
    screening: Screening
    decision: Decision
    submitted_at: UtcDatetime

    @field_serializer("submitted_at")
    def _ser_ts(self, value: datetime) -> str:
        return rfc3339(value)


class RetrievalLogRow(_Frozen):
    ts: UtcDatetime
    query_hash: str
    use_case_id: str
    rank: int
    similarity: float

    @field_serializer("ts")
    def _ser_ts(self, value: datetime) -> str:
        return rfc3339(value)


class RetrievalQuery(_Frozen):
    text: str
    n: int = Field(default=DEFAULT_TOP_N, ge=1)
    min_similarity: float = Field(default=-1.0, ge=-1.0, le=1.0)


class RetrievalHit(_Frozen):
    use_case_id: str
    similarity: float
    rank: int


class RetrievalResult(_Frozen):
    hits: tuple[RetrievalHit, ...] = ()


class RetrievalStats(_Frozen):
    times_retrieved: int = 0
    mean_rank: float | None = None
    last_retrieved_at: UtcDatetime | None = None

    @field_serializer("last_retrieved_at")
    def _ser_ts(self, value: datetime | None) -> str | None:
        return None if value is None else rfc3339(value)


class StoreSnapshot(BaseModel):
    """In-memory aggregate of every record set (retrieval log included)."""

    model_config = ConfigDict(extra="forbid")

    schema_version: int = SCHEMA_VERSION
    use_cases: list[UseCase] = []
    comments: list[Comment] = []
    votes: list[Vote] = []
    documents: list[Document] = []
    contributions: list[Contribution] = []
    retrieval_log: list[RetrievalLogRow] = []


def cosine_similarity(a: Sequence[float], b: Sequence[float]) -> float:
    """(a.b)/(|a||b|), clamped to [-1, 1] against rounding."""
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape or va.ndim != 1:
        raise DimensionMismatch(f"dimensions differ: {va.shape} vs {vb.shape}")
    norm_a = float(np.linalg.norm(va))
    norm_b = float(np.linalg.norm(vb))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVector("cosine similarity is undefined for zero vectors")
    value = float(np.dot(va, vb)) / (norm_a * norm_b)
    return max(-1.0, min(1.0, value))


def embedded_text(uc: UseCase) -> str:
    """Text form that enters the vector index: name, blank line, description."""
    return f"{uc.name}\n\n{uc.description}"


def use_case_content_hash(uc: UseCase) -> str:
    """Fingerprint of the knowledge content (name, description, processes)."""
    payload = json.dumps(
        {
            "name": uc.name,
            "description": uc.description,
            "processes": [p.model_dump(mode="json") for p in uc.processes],
        },
        ensure_ascii=False,
        sort_keys=True,
    )
    return f"{fnv1a_64(payload.encode('utf-8')):016x}"


@dataclass
class _IndexEntry:
    vector: np.ndarray  # unit norm
    text_hash: str


class KnowledgeStore:
    """Single-writer store with concurrent readers.

    All mutations take the store lock; reads copy references under the lock and
    operate on immutable values. Retrieval logging is buffered in memory and
    flushed to the JSONL sidecar by write operations or an explicit flush.
    """

    def __init__(
        self,
        embedder: EmbeddingProvider,
        data_dir: str | Path | None = None,
        ranges: SpecRangeConfig = DEFAULT_RANGES,
    ):
        self._embedder = embedder
        self._lock = threading.RLock()
        self.ranges = ranges
        self._use_cases: dict[str, UseCase] = {}
        self._revisions: dict[str, int] = {}
        self._comments: list[Comment] = []
        self._votes: dict[tuple[str, str], Vote] = {}
        self._documents: dict[str, Document] = {}
        self._contributions: dict[str, Contribution] = {}
        self._retrieval_log: list[RetrievalLogRow] = []
        self._log_flushed_upto = 0
        self._embedding_cache: dict[str, list[float]] = {}
        self._index: dict[str, _IndexEntry] = {}
        self._matrix: np.ndarray | None = None
        self._matrix_ids: list[str] = []
        self.data_dir = Path(data_dir) if data_dir is not None else None
        if self.data_dir is not None:
            self.data_dir.mkdir(parents=True, exist_ok=True)

    @property
    def embedder(self) -> EmbeddingProvider:
        return self._embedder

    # ------------------------------------------------------------------ use cases

    def upsert_use_case(self, uc: UseCase, refresh_updated_at: bool = True) -> str:
        """Validate and persist a use case; Published ones enter the vector index.

        Returns a revision id. Raises ValidationFailed without touching the store.
        """
        report = validate_use_case(uc, self.ranges)
        if not report.valid:
            raise ValidationFailed(report)
        with self._lock:
            if refresh_updated_at:
                uc = uc.model_copy(update={"updated_at": utcnow()})
            if uc.status == UseCaseStatus.PUBLISHED:
                try:
                    self._prepare_index_entry(uc)
                except EmptyInput as exc:
                    raise ValidationFailed(
                        ValidationReport.from_violations(
                            [
                                Violation(
                                    path="description",
                                    code=ViolationCode.EMPTY,
                                    detail="name and description contain no embeddable text",
                                )
                            ]
                        )
                    ) from exc
            self._use_cases[uc.id] = uc
            revision = self._revisions.get(uc.id, 0) + 1
            self._revisions[uc.id] = revision
            if uc.status == UseCaseStatus.PUBLISHED:
                self._index_use_case(uc)
            else:
                self._index.pop(uc.id, None)
            self._matrix = None
            return f"{uc.id}@{revision}"

    def _prepare_index_entry(self, uc: UseCase) -> None:
        """Embed (or fetch from cache) before any state mutation so failures are clean."""
        text = embedded_text(uc)
        text_hash = content_hash(text)
        entry = self._index.get(uc.id)
        if entry is not None and entry.text_hash == text_hash:
            return
        self._embed_cached(text, text_hash)

    def _index_use_case(self, uc: UseCase) -> None:
        text = embedded_text(uc)
        text_hash = content_hash(text)
        entry = self._index.get(uc.id)
        if entry is not None and entry.text_hash == text_hash:
            return
        vector = self._embed_cached(text, text_hash)
        self._index[uc.id] = _IndexEntry(vector=vector, text_hash=text_hash)

    def _embed_cached(self, text: str, text_hash: str) -> np.ndarray:
        cached = self._embedding_cache.get(text_hash)
        if cached is None:
            cached = self._embedder.embed(text)
            self._embedding_cache[text_hash] = cached
        vector = np.asarray(cached, dtype=np.float64)
        norm = float(np.linalg.norm(vector))
        if norm == 0.0:
            raise ZeroVector("embedding has zero norm")
        return vector / norm

    def get_use_case(self, use_case_id: str) -> UseCase | None:
        with self._lock:
            return self._use_cases.get(use_case_id)

    def list_use_cases(self, status: UseCaseStatus | None = None) -> list[UseCase]:
        with self._lock:
            items = list(self._use_cases.values())
        if status is not None:
            items = [uc for uc in items if uc.status == status]
        return items

    def index_size(self) -> int:
        with self._lock:
            return len(self._index)

    def find_by_content_hash(self, digest: str) -> UseCase | None:
        with self._lock:
            for uc in self._use_cases.values():
                if use_case_content_hash(uc) == digest:
                    return uc
        return None

    # ------------------------------------------------------------------ retrieval

    def retrieve(self, query: RetrievalQuery) -> RetrievalResult:
        """Top-n Published use cases by cosine similarity; every hit is logged."""
        scored = self.similarity_scan(query.text, query.n, query.min_similarity)
        now = utcnow()
        query_hash = content_hash(query.text)
        hits = tuple(
            RetrievalHit(use_case_id=uc_id, similarity=sim, rank=rank)
            for rank, (uc_id, sim) in enumerate(scored, start=1)
        )
        if hits:
            with self._lock:
                for hit in hits:
                    self._retrieval_log.append(
                        RetrievalLogRow(
                            ts=now,
                            query_hash=query_hash,
                            use_case_id=hit.use_case_id,
                            rank=hit.rank,
                            similarity=hit.similarity,
                        )
                    )
                self._maybe_flush_log()
        return RetrievalResult(hits=hits)

    def similarity_scan(
        self, text: str, n: int, min_similarity: float = -1.0
    ) -> list[tuple[str, float]]:
        """Exact full scan: (use_case_id, similarity) for the top n, without logging."""
        query = np.asarray(self._embedder.embed(text), dtype=np.float64)
        norm = float(np.linalg.norm(query))
        if norm == 0.0:
            raise ZeroVector("query embedding has zero norm")
        query = query / norm
        with self._lock:
            matrix, ids = self._published_matrix()
        if matrix is None:
            return []
        if matrix.shape[1] != query.shape[0]:
            raise DimensionMismatch(
                f"query dimension {query.shape[0]} does not match index {matrix.shape[1]}"
            )
        sims = np.clip(matrix @ query, -1.0, 1.0)
        rounded = [round(sim, SIMILARITY_DECIMALS) for sim in sims.tolist()]
        ranked = sorted(zip(ids, rounded), key=lambda pair: (-pair[1], pair[0]))
        return [(uc_id, sim) for uc_id, sim in ranked if sim >= min_similarity][:n]

    def _published_matrix(self) -> tuple[np.ndarray | None, list[str]]:
        if not self._index:
            return None, []
        if self._matrix is None:
            self._matrix_ids = sorted(self._index)
            self._matrix = np.stack([self._index[i].vector for i in self._matrix_ids])
        return self._matrix, self._matrix_ids

    def retrieval_stats(self) -> dict[str, RetrievalStats]:
        """Exact aggregation of the retrieval log; never-retrieved use cases report zeros."""
        with self._lock:
            log = list(self._retrieval_log)
            ids = list(self._use_cases)
        counts: dict[str, int] = {}
        rank_sums: dict[str, int] = {}
        last: dict[str, datetime] = {}
        for row in log:
            counts[row.use_case_id] = counts.get(row.use_case_id, 0) + 1
            rank_sums[row.use_case_id] = rank_sums.get(row.use_case_id, 0) + row.rank
            prev = last.get(row.use_case_id)
            if prev is None or row.ts >= prev:
                last[row.use_case_id] = row.ts
        stats: dict[str, RetrievalStats] = {}
        for uc_id in set(ids) | set(counts):
            times = counts.get(uc_id, 0)
            stats[uc_id] = RetrievalStats(
                times_retrieved=times,
                mean_rank=(rank_sums[uc_id] / times) if times else None,
                last_retrieved_at=last.get(uc_id),
            )
        return stats

    def retrieval_log_rows(self) -> list[RetrievalLogRow]:
        with self._lock:
            return list(self._retrieval_log)

    # ------------------------------------------------------------------ community records

    def put_comment(self, comment: Comment) -> None:
        with self._lock:
            self._comments.append(comment)

    def comments_for(self, entity_id: str) -> list[Comment]:
        with self._lock:
            return [c for c in self._comments if c.entity_id == entity_id]

    def put_vote(self, vote: Vote) -> VoteTally:
        with self._lock:
            self._votes[(vote.entity_id, vote.voter_handle)] = vote
            return self._tally_locked(vote.entity_id)

    def tally(self, entity_id: str) -> VoteTally:
        with self._lock:
            return self._tally_locked(entity_id)

    def _tally_locked(self, entity_id: str) -> VoteTally:
        up = down = 0
        for (eid, _), vote in self._votes.items():
            if eid != entity_id:
                continue
            if vote.value == VoteValue.UP:
                up += 1
            else:
                down += 1
        return VoteTally(up=up, down=down)

    def votes(self) -> list[Vote]:
        with self._lock:
            return list(self._votes.values())

    def comments(self) -> list[Comment]:
        with self._lock:
            return list(self._comments)

    def put_document(self, document: Document) -> None:
        with self._lock:
            self._documents[document.id] = document

    def get_document(self, document_id: str) -> Document | None:
        with self._lock:
            return self._documents.get(document_id)

    def put_contribution(self, contribution: Contribution) -> None:
        with self._lock:
            self._contributions[contribution.id] = contribution

    def get_contribution(self, contribution_id: str) -> Contribution | None:
        with self._lock:
            return self._contributions.get(contribution_id)

    def list_contributions(self, state: str | None = None) -> list[Contribution]:
        with self._lock:
            items = list(self._contributions.values())
        if state is not None:
            items = [c for c in items if c.decision.state == state]
        return items

    # ------------------------------------------------------------------ snapshots

    def to_snapshot(self) -> StoreSnapshot:
        with self._lock:
            return StoreSnapshot(
                schema_version=SCHEMA_VERSION,
                use_cases=list(self._use_cases.values()),
                comments=list(self._comments),
                votes=list(self._votes.values()),
                documents=list(self._documents.values()),
                contributions=list(self._contributions.values()),
                retrieval_log=list(self._retrieval_log),
            )

    def save_snapshot(self, path: str | Path | None = None) -> Path:
        """Atomically write the snapshot file (write temp + rename) and flush the log."""
        target = Path(path) if path is not None else self._default_snapshot_path()
        if target is None:
            raise StorageUnavailable("no snapshot path: store has no data_dir")
        snapshot = self.to_snapshot()
        payload = {
            "schema_version": snapshot.schema_version,
            "use_cases": [uc.model_dump(mode="json") for uc in snapshot.use_cases],
            "comments": [c.model_dump(mode="json") for c in snapshot.comments],
            "votes": [v.model_dump(mode="json") for v in snapshot.votes],
            "documents": [d.model_dump(mode="json") for d in snapshot.documents],
            "contributions": [c.model_dump(mode="json") for c in snapshot.contributions],
            "embedding_cache": [
                {"hash": h, "vector": vec} for h, vec in sorted(self._embedding_cache.items())
            ],
        }
        text = json.dumps(payload, indent=2, ensure_ascii=False)
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            fd, temp_name = tempfile.mkstemp(dir=target.parent, prefix=target.name, suffix=".tmp")
            try:
                with os.fdopen(fd, "w", encoding="utf-8") as handle:
                    handle.write(text)
                os.replace(temp_name, target)
            except BaseException:
                if os.path.exists(temp_name):
                    os.unlink(temp_name)
                raise
        except OSError as exc:
            raise IoFailure(f"cannot write snapshot {target}: {exc}") from exc
        self.flush_retrieval_log()
        return target

    def load_snapshot(self, path: str | Path | None = None) -> StoreSnapshot:
        """Replace store contents from a snapshot file; all-or-nothing.

        The vector index is rebuilt from the embedding cache keyed by content
        hash; texts missing from the cache are re-embedded.
        """
        source = Path(path) if path is not None else self._default_snapshot_path()
        if source is None:
            raise StorageUnavailable("no snapshot path: store has no data_dir")
        try:
            raw = source.read_text(encoding="utf-8")
        except OSError as exc:
            raise IoFailure(f"cannot read snapshot {source}: {exc}") from exc
        try:
            payload = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise CorruptSnapshot(exc.msg, offset=exc.pos) from exc
        if not isinstance(payload, dict):
            raise CorruptSnapshot("top level is not an object", offset=0)
        version = payload.get("schema_version")
        if version != SCHEMA_VERSION:
            raise UnsupportedSchemaVersion(version)
        # Stage everything before touching live state so a corrupt file can
        # never leave a partial store behind.
        try:
            use_cases = [UseCase.model_validate(item) for item in payload.get("use_cases", [])]
            comments = [Comment.model_validate(item) for item in payload.get("comments", [])]
            votes = [Vote.model_validate(item) for item in payload.get("votes", [])]
            documents = [Document.model_validate(item) for item in payload.get("documents", [])]
            contributions = [
                Contribution.model_validate(item) for item in payload.get("contributions", [])
            ]
            cache = {
                item["hash"]: [float(x) for x in item["vector"]]
                for item in payload.get("embedding_cache", [])
            }
        except (ValidationError, TypeError, KeyError, ValueError) as exc:
            raise CorruptSnapshot(f"malformed record: {exc}", offset=0) from exc
        known_ids = {uc.id for uc in use_cases}
        for record_set, label in ((comments, "comment"), (votes, "vote")):
            for record in record_set:
                if record.entity_id not in known_ids:
                    raise CorruptSnapshot(
                        f"{label} references unknown use case {record.entity_id!r}", offset=0
                    )
        log_rows = self._read_retrieval_log_file()
        with self._lock:
            self._use_cases = {uc.id: uc for uc in use_cases}
            self._comments = comments
            self._votes = {(v.entity_id, v.voter_handle): v for v in votes}
            self._documents = {d.id: d for d in documents}
            self._contributions = {c.id: c for c in contributions}
            self._embedding_cache = cache
            self._retrieval_log = log_rows
            self._log_flushed_upto = len(log_rows)
            self._index = {}
            self._matrix = None
            for uc in use_cases:
                if uc.status == UseCaseStatus.PUBLISHED:
                    self._index_use_case(uc)
        return StoreSnapshot(
            schema_version=SCHEMA_VERSION,
            use_cases=use_cases,
            comments=comments,
            votes=votes,
            documents=documents,
            contributions=contributions,
            retrieval_log=log_rows,
        )

    def _default_snapshot_path(self) -> Path | None:
        if self.data_dir is None:
            return None
        return self.data_dir / SNAPSHOT_NAME

    # ------------------------------------------------------------------ retrieval log file

    def _log_path(self) -> Path | None:
        if self.data_dir is None:
            return None
        return self.data_dir / RETRIEVAL_LOG_NAME

    def _maybe_flush_log(self) -> None:
        if len(self._retrieval_log) - self._log_flushed_upto >= 100:
            self.flush_retrieval_log()

    def flush_retrieval_log(self) -> None:
        """Append unflushed log rows to the JSONL sidecar; no-op without a data_dir."""
        path = self._log_path()
        if path is None:
            return
        with self._lock:
            pending = self._retrieval_log[self._log_flushed_upto :]
            if not pending:
                return
            lines = [json.dumps(row.model_dump(mode="json"), ensure_ascii=False) for row in pending]
            try:
                with path.open("a", encoding="utf-8") as handle:
                    handle.write("\n".join(lines) + "\n")
            except OSError as exc:
                raise IoFailure(f"cannot append retrieval log {path}: {exc}") from exc
            self._log_flushed_upto = len(self._retrieval_log)

    def _read_retrieval_log_file(self) -> list[RetrievalLogRow]:
        path = self._log_path()
        if path is None or not path.exists():
            return []
        rows: list[RetrievalLogRow] = []
        try:
            for line in path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                rows.append(RetrievalLogRow.model_validate(json.loads(line)))
        except (OSError, json.JSONDecodeError, ValidationError) as exc:
            raise CorruptSnapshot(f"malformed retrieval log: {exc}", offset=0) from exc
        return rows

    def close(self) -> None:
        self.flush_retrieval_log()
