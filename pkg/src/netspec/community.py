"""Community workflows: contribution intake with automatic screening, moderation,
votes, comments and the operator feedback report."""

from __future__ import annotations

import logging
import uuid

from pydantic import BaseModel, ConfigDict

from .ontology import (
    UseCase,
    UseCaseStatus,
    ValidationReport,
    Violation,
    ViolationCode,
    utcnow,
    validate_use_case,
)
from .providers import GenerationRequest
from .engine import ChunkingConfig, ExtractionJob, RagEngine
from .store import (
    Comment,
    Contribution,
    Decision,
    Document,
    KnowledgeStore,
    Screening,
    ValidationFailed,
    Vote,
    VoteTally,
    VoteValue,
)

logger = logging.getLogger(__name__)

DUPLICATE_SIMILARITY_THRESHOLD = 0.95
SCREENING_TOP_N = 5
NO_COMPARISON_SENTINEL = -1.0  # empty index: "no comparison possible", not "low similarity"
MAX_COMMENT_CHARS = 4000


class CommunityError(Exception):
    pass


class UnknownContribution(CommunityError):
    pass


class NotPending(CommunityError):
    pass


class UnknownEntity(CommunityError):
    pass


class NotPublished(CommunityError):
    pass


class FeedbackRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    use_case_id: str
    name: str
    tally: VoteTally
    comment_count: int
    times_retrieved: int
    mean_rank: float | None


class CommunityService:
    """Phase 2/3 workflows over the store; all mutations funnel through its writer lock."""

    def __init__(
        self,
        store: KnowledgeStore,
        engine: RagEngine | None = None,
        duplicate_threshold: float = DUPLICATE_SIMILARITY_THRESHOLD,
        llm_plausibility_check: bool = False,
    ):
        self.store = store
        self.engine = engine
        self.duplicate_threshold = duplicate_threshold
        self.llm_plausibility_check = llm_plausibility_check

    # ------------------------------------------------------------------ contributions

    def submit_contribution(self, uc: UseCase, contributor_handle: str) -> Contribution:
        """Validate, screen against the published corpus and queue for moderation.

        Contributions are never auto-published; screening records the nearest
        published use case and flags near-duplicates.
        """
        report = validate_use_case(uc, self.store.ranges)
        if not report.valid:
            raise ValidationFailed(report)
        submitted = uc if uc.status == UseCaseStatus.PENDING_REVIEW else uc.model_copy(
            update={"status": UseCaseStatus.PENDING_REVIEW}
        )
        screening = self._screen(submitted, report)
        contribution = Contribution(
            id=str(uuid.uuid4()),
            submitted=submitted,
            contributor_handle=contributor_handle,
            screening=screening,
            decision=Decision(),
            submitted_at=utcnow(),
        )
        self.store.upsert_use_case(submitted)
        self.store.put_contribution(contribution)
        return contribution

    def _screen(self, uc: UseCase, validation: ValidationReport) -> Screening:
        # Screening scans do not feed the retrieval log: the log measures
        # innovator demand, not dedup checks.
        scored = self.store.similarity_scan(f"{uc.name}\n\n{uc.description}", SCREENING_TOP_N)
        if scored:
            nearest_id, max_similarity = scored[0]
        else:
            nearest_id, max_similarity = None, NO_COMPARISON_SENTINEL
        plausibility_note = None
        if self.llm_plausibility_check and self.engine is not None:
            plausibility_note = self._plausibility_note(uc)
        return Screening(
            max_similarity=max_similarity,
            nearest_use_case_id=nearest_id,
            duplicate_flag=max_similarity >= self.duplicate_threshold,
            validation=validation,
            plausibility_note=plausibility_note,
        )

    def _plausibility_note(self, uc: UseCase) -> str | None:
        prompt = (
            "Review this submitted networked use case for plausibility and reply with a "
            f"one-line verdict:\n\nName: {uc.name}\nDescription: {uc.description}\n"
        )
        try:
            response = self.engine.generator.generate(GenerationRequest(prompt=prompt))
            return response.text[:500]
        except Exception as exc:
            logger.warning("plausibility check skipped: %s", exc)
            return None

    def moderate(
        self,
        contribution_id: str,
        decision: str,
        moderator: str,
        reason: str | None = None,
    ) -> Contribution:
        """Approve (publish + index atomically) or reject a pending contribution. Irreversible."""
        contribution = self.store.get_contribution(contribution_id)
        if contribution is None:
            raise UnknownContribution(contribution_id)
        if contribution.decision.state != "pending":
            raise NotPending(f"contribution already {contribution.decision.state}")
        if decision not in ("approve", "reject"):
            raise ValueError(f"decision must be approve or reject, got {decision!r}")
        now = utcnow()
        if decision == "approve":
            published = contribution.submitted.model_copy(update={"status": UseCaseStatus.PUBLISHED})
            self.store.upsert_use_case(published)  # index entry appears under the store lock
            new_decision = Decision(state="approved", moderator=moderator, decided_at=now)
        else:
            rejected = contribution.submitted.model_copy(update={"status": UseCaseStatus.REJECTED})
            self.store.upsert_use_case(rejected)
            new_decision = Decision(state="rejected", moderator=moderator, reason=reason, decided_at=now)
        updated = contribution.model_copy(update={"decision": new_decision})
        self.store.put_contribution(updated)
        return updated

    # ------------------------------------------------------------------ votes and comments

    def cast_vote(self, entity_id: str, voter_handle: str, value: VoteValue | str) -> VoteTally:
        """Upsert this voter's vote on a published use case; returns the fresh tally."""
        uc = self._require_published(entity_id)
        vote = Vote(
            entity_id=uc.id,
            voter_handle=voter_handle,
            value=VoteValue(value),
            ts=utcnow(),
        )
        return self.store.put_vote(vote)

    def post_comment(self, entity_id: str, author_handle: str, body: str) -> Comment:
        uc = self._require_published(entity_id)
        violations = []
        if not body.strip():
            violations.append(Violation(path="body", code=ViolationCode.EMPTY, detail="comment body is empty"))
        elif len(body) > MAX_COMMENT_CHARS:
            violations.append(
                Violation(
                    path="body",
                    code=ViolationCode.OUT_OF_RANGE,
                    detail=f"comment body exceeds {MAX_COMMENT_CHARS} characters",
                )
            )
        if violations:
            raise ValidationFailed(ValidationReport.from_violations(violations))
        comment = Comment(
            id=str(uuid.uuid4()),
            entity_id=uc.id,
            author_handle=author_handle,
            body=body,
            ts=utcnow(),
        )
        self.store.put_comment(comment)
        return comment

    def _require_published(self, entity_id: str) -> UseCase:
        uc = self.store.get_use_case(entity_id)
        if uc is None:
            raise UnknownEntity(entity_id)
        if uc.status != UseCaseStatus.PUBLISHED:
            raise NotPublished(f"use case {entity_id} is {uc.status.value}, not published")
        return uc

    # ------------------------------------------------------------------ feedback

    def feedback_report(self) -> list[FeedbackRow]:
        """Join votes, comments and retrieval statistics per published use case.

        Sorted by times_retrieved descending, ties by id ascending.
        """
        stats = self.store.retrieval_stats()
        rows: list[FeedbackRow] = []
        for uc in self.store.list_use_cases(status=UseCaseStatus.PUBLISHED):
            uc_stats = stats.get(uc.id)
            rows.append(
                FeedbackRow(
                    use_case_id=uc.id,
                    name=uc.name,
                    tally=self.store.tally(uc.id),
                    comment_count=len(self.store.comments_for(uc.id)),
                    times_retrieved=uc_stats.times_retrieved if uc_stats else 0,
                    mean_rank=uc_stats.mean_rank if uc_stats else None,
                )
            )
        rows.sort(key=lambda row: (-row.times_retrieved, row.use_case_id))
        return rows

    # ------------------------------------------------------------------ ingestion

    def ingest_document(
        self,
        text: str,
        document_id: str | None = None,
        submitted_by: str = "operator",
        chunking: ChunkingConfig | None = None,
    ) -> ExtractionJob:
        """Store a document, extract Draft use cases and queue each for moderation."""
        if self.engine is None:
            raise CommunityError("ingestion requires an engine")
        if not text.strip():
            raise ValueError("document text must be non-empty")
        doc = Document(
            id=document_id or str(uuid.uuid4()),
            text=text,
            submitted_by=submitted_by,
            created_at=utcnow(),
        )
        self.store.put_document(doc)
        job = ExtractionJob(
            document_id=doc.id,
            source_text=text,
            chunking=chunking or ChunkingConfig(),
        )
        job = self.engine.extract_use_cases(job)
        stored: list[UseCase] = []
        for draft in job.extracted:
            report = validate_use_case(draft, self.store.ranges)
            if not report.valid:
                job.failures.append(
                    f"draft {draft.name!r}: "
                    + "; ".join(f"{v.path}: {v.detail}" for v in report.violations)
                )
                continue
            self.store.upsert_use_case(draft)
            screening = self._screen(draft, report)
            self.store.put_contribution(
                Contribution(
                    id=str(uuid.uuid4()),
                    submitted=draft,
                    contributor_handle=f"document:{doc.id}",
                    screening=screening,
                    decision=Decision(),
                    submitted_at=utcnow(),
                )
            )
            stored.append(draft)
        job.extracted = stored
        return job
