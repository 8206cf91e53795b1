"""End-to-end generation pipeline: retrieve, assemble prompt, generate, parse, validate.

Also hosts radar-axis normalization for visualization and the document
knowledge-extraction pipeline that seeds the store from raw text.
"""

from __future__ import annotations

import json
import logging
import math
import re
import time
import uuid
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

from pydantic import BaseModel, ConfigDict, ValidationError

from .ontology import (
    METRIC_UNITS,
    METRICS,
    Better,
    CommunicationProcess,
    NetworkSpecification,
    SeedDocument,
    SpecRangeConfig,
    UseCase,
    UseCaseStatus,
    ValidationReport,
    Violation,
    ViolationCode,
    pydantic_loc_to_path,
    serialize_use_case,
    utcnow,
    validate_process,
)
from .providers import (
    GenerationProvider,
    GenerationRequest,
    RemoteUnavailable,
)
from .store import KnowledgeStore, RetrievalQuery, RetrievalResult, cosine_similarity

logger = logging.getLogger(__name__)

DEFAULT_TOKEN_BUDGET_CHARS = 24000
DEFAULT_MAX_RETRIES = 2
DEFAULT_CHUNK_MAX_CHARS = 6000
DEFAULT_CHUNK_OVERLAP_CHARS = 500
NEAR_DUPLICATE_SIMILARITY = 0.95
RELIABILITY_NINES_CAP = 7.0

_PROCESS_ID_NS = uuid.uuid5(uuid.NAMESPACE_URL, "netspec/process")
_EXTRACT_ID_NS = uuid.uuid5(uuid.NAMESPACE_URL, "netspec/extracted-use-case")

NO_CONTEXT_FALLBACK = (
    "(No sufficiently similar use case exists in the knowledge base yet. Derive the "
    "processes and their specifications from the description alone, using conservative, "
    "physically plausible values.)"
)

#: Output-format instructions derived from the process ontology. The three
#: metadata attributes come first so the model settles them before inferring
#: numeric requirements.
OUTPUT_SCHEMA_BLOCK = (
    "Respond with only a JSON array, one object per communication process, using exactly "
    "these fields and no others:\n"
    '- "name": short label for the connection (string)\n'
    '- "description": what this connection carries and why (string)\n'
    '- "is_real_time": whether the connection must run in real time (boolean)\n'
    '- "direction": "transmit" or "receive"\n'
    '- "message_type": kind of payload, e.g. "sensor point cloud" or "control command" (string)\n'
    '- "specification": object with one or more of the numeric metrics '
    "user_experienced_data_rate_mbps, latency_ms, mobility_kmph, reliability_percentage, "
    "connectivity_density_per_m2, area_traffic_capacity_mbps_per_m2, position_accuracy_cm, "
    "peak_data_rate_gbps. Include only the metrics the process genuinely constrains, and "
    "at least one."
)


class EngineError(Exception):
    pass


class UnknownTemplate(EngineError):
    pass


class PromptBudgetExceeded(EngineError):
    """Even with every context dropped the rendered prompt exceeds the budget."""


class GenerationParseError(EngineError):
    """Base of the three mutually exclusive parse failures."""


class NoJsonFound(GenerationParseError):
    pass


class JsonSyntax(GenerationParseError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class SchemaViolation(GenerationParseError):
    def __init__(self, report: ValidationReport):
        self.report = report
        details = "; ".join(f"{v.path or '<root>'}: {v.detail}" for v in report.violations)
        super().__init__(f"schema violation: {details}")


class ProviderUnavailable(EngineError):
    pass


class ExhaustedRetries(EngineError):
    def __init__(self, attempts: int, last_error: GenerationParseError):
        self.attempts = attempts
        self.last_error = last_error
        super().__init__(f"generation unparseable after {attempts} attempts: {last_error}")


@dataclass(frozen=True)
class PromptBundle:
    template_id: str
    query_name: str
    query_description: str
    contexts: tuple[str, ...]
    rendered: str
    token_budget_chars: int


class GenerationOutcome(BaseModel):
    model_config = ConfigDict(frozen=True)

    processes: tuple[CommunicationProcess, ...]
    similar_use_cases: RetrievalResult
    validation: ValidationReport
    raw_model_text: str
    provider_id: str
    retry_count: int = 0


@dataclass(frozen=True)
class RadarAxes:
    """Normalized [0, 1] axis values per metric, plus raw values and units for tooltips."""

    order: tuple[str, ...]
    axes: dict[str, float]
    raw: dict[str, float | None]
    units: dict[str, str]

    def as_dict(self) -> dict:
        return {"order": list(self.order), "axes": self.axes, "raw": self.raw, "units": self.units}


@dataclass
class ChunkingConfig:
    max_chars: int = DEFAULT_CHUNK_MAX_CHARS
    overlap_chars: int = DEFAULT_CHUNK_OVERLAP_CHARS


@dataclass
class ExtractionJob:
    document_id: str
    source_text: str
    chunking: ChunkingConfig = field(default_factory=ChunkingConfig)
    extracted: list[UseCase] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)


class TemplateRepository:
    """Loads prompt templates by id: operator directory first, packaged defaults second."""

    def __init__(self, template_dir: str | Path | None = None):
        self.template_dir = Path(template_dir) if template_dir is not None else None

    def load(self, template_id: str) -> str:
        if not re.fullmatch(r"[A-Za-z0-9_\-]+", template_id):
            raise UnknownTemplate(f"invalid template id {template_id!r}")
        if self.template_dir is not None:
            candidate = self.template_dir / f"{template_id}.txt"
            if candidate.exists():
                return candidate.read_text(encoding="utf-8")
        packaged = resources.files("netspec") / "templates" / f"{template_id}.txt"
        if packaged.is_file():
            return packaged.read_text(encoding="utf-8")
        raise UnknownTemplate(f"no template named {template_id!r}")


_PLACEHOLDER_RE = re.compile(r"\{\{(query_name|query_description|contexts|schema|document_chunk)\}\}")


def render_template(template: str, values: dict[str, str]) -> str:
    """Single-pass placeholder substitution; values are never re-scanned for placeholders."""
    out: list[str] = []
    pos = 0
    for match in _PLACEHOLDER_RE.finditer(template):
        out.append(template[pos : match.start()])
        out.append(values.get(match.group(1), match.group(0)))
        pos = match.end()
    out.append(template[pos:])
    return "".join(out)


def assemble_prompt(
    name: str,
    description: str,
    hits: Sequence[UseCase],
    template_id: str = "specify",
    templates: TemplateRepository | None = None,
    token_budget_chars: int = DEFAULT_TOKEN_BUDGET_CHARS,
) -> PromptBundle:
    """Integrate query and retrieved use cases into one prompt.

    Contexts appear in retrieval rank order; when the budget is tight, whole
    contexts are dropped from the tail, never truncated mid-use-case.
    """
    if not description.strip():
        raise ValueError("description must be non-empty")
    repo = templates or TemplateRepository()
    template = repo.load(template_id)
    if template.count("{{query_description}}") != 1:
        raise UnknownTemplate(f"template {template_id!r} must use {{{{query_description}}}} exactly once")
    contexts = tuple(
        f"### Reference use case {rank} ###\n{serialize_use_case(uc)}"
        for rank, uc in enumerate(hits, start=1)
    )
    for keep in range(len(contexts), -1, -1):
        block = "\n\n".join(contexts[:keep]) if keep else NO_CONTEXT_FALLBACK
        rendered = render_template(
            template,
            {
                "query_name": name,
                "query_description": description,
                "contexts": block,
                "schema": OUTPUT_SCHEMA_BLOCK,
            },
        )
        if len(rendered) <= token_budget_chars:
            return PromptBundle(
                template_id=template_id,
                query_name=name,
                query_description=description,
                contexts=contexts[:keep],
                rendered=rendered,
                token_budget_chars=token_budget_chars,
            )
    raise PromptBudgetExceeded(
        f"prompt is {len(rendered)} chars with zero contexts; budget {token_budget_chars}"
    )


# ---------------------------------------------------------------------- parsing

_FENCE_JSON_RE = re.compile(r"```json[ \t]*\r?\n(.*?)```", re.DOTALL | re.IGNORECASE)
_FENCE_ANY_RE = re.compile(r"```[^\n`]*\r?\n(.*?)```", re.DOTALL)
_MAX_ARRAY_STARTS = 64


def _balanced_array_candidates(text: str) -> list[tuple[str, int]]:
    """Balanced top-level [...] spans (candidate, start offset), in order of appearance.

    A text that opens an array but never closes it yields the unterminated tail
    as a candidate so truncated JSON classifies as a syntax error, not as absent.
    """
    candidates: list[tuple[str, int]] = []
    first_bracket = text.find("[")
    starts = 0
    i = first_bracket
    while i != -1 and starts < _MAX_ARRAY_STARTS:
        starts += 1
        depth = 0
        in_string = False
        escaped = False
        for j in range(i, len(text)):
            ch = text[j]
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
            elif ch in "[{":
                depth += 1
            elif ch in "]}":
                depth -= 1
                if depth == 0:
                    candidates.append((text[i : j + 1], i))
                    break
        i = text.find("[", i + 1)
    if not candidates and first_bracket != -1:
        candidates.append((text[first_bracket:], first_bracket))
    return candidates


def _json_candidates(text: str) -> list[tuple[str, int]]:
    """Candidate JSON regions in extraction-priority order with their text offsets."""
    candidates: list[tuple[str, int]] = []
    for match in _FENCE_JSON_RE.finditer(text):
        candidates.append((match.group(1).strip(), match.start(1)))
    for match in _FENCE_ANY_RE.finditer(text):
        candidate = (match.group(1).strip(), match.start(1))
        if candidate not in candidates:
            candidates.append(candidate)
    candidates.extend(_balanced_array_candidates(text))
    return [c for c in candidates if c[0]]


def _code_for_parse_problem(err: dict) -> ViolationCode:
    err_type = err.get("type", "")
    if err_type == "missing":
        return ViolationCode.MISSING
    if err_type in ("float_parsing", "float_type", "int_parsing", "int_type", "finite_number"):
        return ViolationCode.NOT_FINITE
    # Unknown fields, enum mismatches and other type errors: outside the
    # admissible schema; the detail string carries the specifics.
    return ViolationCode.OUT_OF_RANGE


def _schema_report(errors: list[dict], index: int | None = None) -> ValidationReport:
    violations = []
    for err in errors:
        path = pydantic_loc_to_path(err["loc"])
        if index is not None:
            path = f"processes[{index}]" + (f".{path}" if path else "")
        violations.append(
            Violation(path=path, code=_code_for_parse_problem(err), detail=err["msg"])
        )
    return ValidationReport.from_violations(violations)


def _violation_report(path: str, code: ViolationCode, detail: str) -> ValidationReport:
    return ValidationReport.from_violations([Violation(path=path, code=code, detail=detail)])


def deterministic_process_id(index: int, name: str, description: str) -> str:
    return str(uuid.uuid5(_PROCESS_ID_NS, f"{index}|{name}|{description}"))


def _validate_process_items(items: list) -> list[CommunicationProcess]:
    processes: list[CommunicationProcess] = []
    for i, item in enumerate(items):
        if not isinstance(item, dict):
            raise SchemaViolation(
                _violation_report(
                    f"processes[{i}]",
                    ViolationCode.OUT_OF_RANGE,
                    "expected an object describing a communication process",
                )
            )
        if "id" not in item:
            item = dict(item)
            item["id"] = deterministic_process_id(
                i, str(item.get("name", "")), str(item.get("description", ""))
            )
        try:
            processes.append(CommunicationProcess.model_validate(item))
        except ValidationError as exc:
            raise SchemaViolation(_schema_report(exc.errors(), index=i)) from exc
    return processes


def parse_generation(raw_text: str) -> list[CommunicationProcess]:
    """Extract and validate the JSON array of communication processes from model output.

    Extraction order: fenced ```json blocks, any fenced block, first balanced
    top-level JSON array. Classifies every input into exactly one of success,
    NoJsonFound, JsonSyntax or SchemaViolation.
    """
    if not isinstance(raw_text, str):
        raw_text = str(raw_text)
    candidates = _json_candidates(raw_text)
    if not candidates:
        raise NoJsonFound("no fenced code block or JSON array in the output")
    first_syntax_error: JsonSyntax | None = None
    for candidate, offset in candidates:
        try:
            data = json.loads(candidate)
        except json.JSONDecodeError as exc:
            if first_syntax_error is None:
                first_syntax_error = JsonSyntax(exc.msg, offset=offset + exc.pos)
            continue
        except RecursionError:
            if first_syntax_error is None:
                first_syntax_error = JsonSyntax("nesting too deep", offset=offset)
            continue
        if not isinstance(data, list):
            raise SchemaViolation(
                _violation_report(
                    "", ViolationCode.OUT_OF_RANGE, "expected a JSON array of communication processes"
                )
            )
        if not data:
            raise SchemaViolation(
                _violation_report(
                    "processes", ViolationCode.MISSING, "the array contains no communication process"
                )
            )
        return _validate_process_items(data)
    assert first_syntax_error is not None
    raise first_syntax_error


def validate_generated_processes(
    processes: Sequence[CommunicationProcess], ranges: SpecRangeConfig
) -> ValidationReport:
    """Range/structural validation of generated processes, paths prefixed processes[i]."""
    violations: list[Violation] = []
    if not processes:
        violations.append(
            Violation(
                path="processes",
                code=ViolationCode.MISSING,
                detail="generation produced no communication process",
            )
        )
    seen: set[str] = set()
    for i, process in enumerate(processes):
        if process.id in seen:
            violations.append(
                Violation(
                    path=f"processes[{i}].id",
                    code=ViolationCode.DUPLICATE,
                    detail=f"process id {process.id!r} occurs more than once",
                )
            )
        seen.add(process.id)
        for v in validate_process(process, ranges):
            violations.append(
                v.model_copy(update={"path": f"processes[{i}].{v.path}" if v.path else f"processes[{i}]"})
            )
    return ValidationReport.from_violations(violations)


# ---------------------------------------------------------------------- radar axes

_LOG_FLOOR = 1e-12


def _log_axis(value: float, lo: float, hi: float) -> float:
    lo_eff = lo if lo > 0 else min(_LOG_FLOOR, hi * _LOG_FLOOR)
    if value <= lo_eff:
        return 0.0
    t = (math.log(value) - math.log(lo_eff)) / (math.log(hi) - math.log(lo_eff))
    return max(0.0, min(1.0, t))


def radar_axes(spec: NetworkSpecification, ranges: SpecRangeConfig) -> RadarAxes:
    """Map a specification onto eight [0, 1] radar axes.

    Log scaling across each metric's configured range (the capability axes span
    orders of magnitude); reliability counts nines: -log10(1 - r/100) / 7,
    clamped. Absent metrics sit at 0.
    """
    axes: dict[str, float] = {}
    raw: dict[str, float | None] = {}
    for metric in METRICS:
        value = getattr(spec, metric)
        raw[metric] = value
        if value is None:
            axes[metric] = 0.0
            continue
        r = ranges.range_for(metric)
        if metric == "reliability_percentage":
            loss_fraction = 1.0 - value / 100.0
            nines = math.inf if loss_fraction <= 0 else -math.log10(loss_fraction)
            axes[metric] = max(0.0, min(1.0, nines / RELIABILITY_NINES_CAP))
            continue
        t = _log_axis(value, r.min, r.max)
        axes[metric] = t if r.better == Better.HIGHER else 1.0 - t
    return RadarAxes(order=METRICS, axes=axes, raw=raw, units=dict(METRIC_UNITS))


# ---------------------------------------------------------------------- chunking

def chunk_text(text: str, max_chars: int, overlap_chars: int) -> list[str]:
    """Greedy paragraph packing; oversized paragraphs fall back to char windows."""
    paragraphs = [p for p in re.split(r"\n{2,}", text) if p.strip()]
    chunks: list[str] = []
    current: list[str] = []
    current_len = 0

    def flush() -> None:
        nonlocal current, current_len
        if current:
            chunks.append("\n\n".join(current))
            carry: list[str] = []
            size = 0
            for paragraph in reversed(current):
                if size + len(paragraph) > overlap_chars:
                    break
                carry.insert(0, paragraph)
                size += len(paragraph) + 2
            current = carry
            current_len = sum(len(p) + 2 for p in current)

    for paragraph in paragraphs:
        if len(paragraph) > max_chars:
            flush()
            current = []
            current_len = 0
            step = max(1, max_chars - overlap_chars)
            for start in range(0, len(paragraph), step):
                window = paragraph[start : start + max_chars]
                chunks.append(window)
                if start + max_chars >= len(paragraph):
                    break
            continue
        if current and current_len + len(paragraph) + 2 > max_chars:
            flush()
        current.append(paragraph)
        current_len += len(paragraph) + 2
    if current:
        chunks.append("\n\n".join(current))
    return chunks


def extracted_use_case_id(document_id: str, name: str) -> str:
    return str(uuid.uuid5(_EXTRACT_ID_NS, f"{document_id}|{name.strip().lower()}"))


class RagEngine:
    """Stateless orchestrator over a store, a generator and a template repository."""

    def __init__(
        self,
        store: KnowledgeStore,
        generator: GenerationProvider,
        templates: TemplateRepository | None = None,
        token_budget_chars: int = DEFAULT_TOKEN_BUDGET_CHARS,
        max_retries: int = DEFAULT_MAX_RETRIES,
    ):
        self.store = store
        self.generator = generator
        self.templates = templates or TemplateRepository()
        self.token_budget_chars = token_budget_chars
        self.max_retries = max_retries

    def generate_specification(
        self,
        name: str,
        description: str,
        n: int = 5,
        template_id: str = "specify",
        generator: GenerationProvider | None = None,
        deadline_s: float | None = None,
    ) -> GenerationOutcome:
        """Run retrieve -> prompt -> generate -> parse -> validate with bounded retries.

        Parse failures are retried up to max_retries times with the error text
        appended to the prompt as a correction instruction. The raw model text
        of the final attempt is always preserved for audit.
        """
        if not description.strip():
            raise ValueError("description must be non-empty")
        provider = generator or self.generator
        retrieval = self.store.retrieve(RetrievalQuery(text=f"{name}\n\n{description}", n=n))
        hit_use_cases = [
            uc
            for uc in (self.store.get_use_case(hit.use_case_id) for hit in retrieval.hits)
            if uc is not None
        ]
        bundle = assemble_prompt(
            name,
            description,
            hit_use_cases,
            template_id=template_id,
            templates=self.templates,
            token_budget_chars=self.token_budget_chars,
        )
        started = time.monotonic()
        last_error: GenerationParseError | None = None
        response = None
        for attempt in range(self.max_retries + 1):
            if deadline_s is not None and time.monotonic() - started > deadline_s:
                raise ProviderUnavailable(f"deadline of {deadline_s} s exceeded before attempt {attempt}")
            prompt = bundle.rendered
            if last_error is not None:
                prompt = (
                    f"{bundle.rendered}\n\n"
                    f"Correction: your previous reply could not be used ({last_error}). "
                    f"Reply again with only the JSON array in the requested format."
                )
            try:
                response = provider.generate(
                    GenerationRequest(prompt=prompt, temperature=0.0)
                )
            except RemoteUnavailable as exc:
                raise ProviderUnavailable(str(exc)) from exc
            try:
                processes = parse_generation(response.text)
            except GenerationParseError as exc:
                logger.info("generation attempt %d unparseable: %s", attempt, exc)
                last_error = exc
                continue
            validation = validate_generated_processes(processes, self.store.ranges)
            return GenerationOutcome(
                processes=tuple(processes),
                similar_use_cases=retrieval,
                validation=validation,
                raw_model_text=response.text,
                provider_id=response.provider_id,
                retry_count=attempt,
            )
        assert last_error is not None
        raise ExhaustedRetries(self.max_retries + 1, last_error)

    def radar_for_outcome(self, outcome: GenerationOutcome) -> list[RadarAxes]:
        return [radar_axes(p.specification, self.store.ranges) for p in outcome.processes]

    # ------------------------------------------------------------------ extraction

    def extract_use_cases(self, job: ExtractionJob) -> ExtractionJob:
        """Chunk a document, ask the generator for ontology-shaped use cases per chunk.

        Chunk failures are recorded and never abort the remaining chunks.
        Near-duplicates (name embedding similarity >= 0.95) collapse onto the
        first occurrence. Everything lands as a Draft with seed-document provenance.
        """
        if not job.source_text.strip():
            raise ValueError("document text must be non-empty")
        template = self.templates.load("extract")
        chunks = chunk_text(job.source_text, job.chunking.max_chars, job.chunking.overlap_chars)
        kept_name_vectors: list[tuple[str, list[float]]] = []
        for chunk_index, chunk in enumerate(chunks):
            prompt = render_template(
                template, {"document_chunk": chunk, "schema": OUTPUT_SCHEMA_BLOCK}
            )
            try:
                response = self.generator.generate(GenerationRequest(prompt=prompt))
                items = self._parse_use_case_array(response.text)
            except Exception as exc:
                job.failures.append(f"chunk {chunk_index}: {exc}")
                continue
            for item in items:
                try:
                    uc = self._build_draft(job.document_id, item)
                except SchemaViolation as exc:
                    job.failures.append(f"chunk {chunk_index}: {exc}")
                    continue
                try:
                    name_vector = self.store.embedder.embed(uc.name)
                except Exception:
                    name_vector = None
                if name_vector is not None and any(
                    cosine_similarity(name_vector, seen_vector) >= NEAR_DUPLICATE_SIMILARITY
                    for _, seen_vector in kept_name_vectors
                ):
                    continue
                if name_vector is not None:
                    kept_name_vectors.append((uc.name, name_vector))
                job.extracted.append(uc)
        return job

    def _parse_use_case_array(self, raw_text: str) -> list[dict]:
        candidates = _json_candidates(raw_text)
        if not candidates:
            raise NoJsonFound("no JSON array of use cases in the output")
        first_syntax_error: JsonSyntax | None = None
        for candidate, offset in candidates:
            try:
                data = json.loads(candidate)
            except json.JSONDecodeError as exc:
                if first_syntax_error is None:
                    first_syntax_error = JsonSyntax(exc.msg, offset=offset + exc.pos)
                continue
            if not isinstance(data, list):
                raise SchemaViolation(
                    _violation_report("", ViolationCode.OUT_OF_RANGE, "expected a JSON array of use cases")
                )
            return data
        assert first_syntax_error is not None
        raise first_syntax_error

    def _build_draft(self, document_id: str, item) -> UseCase:
        if not isinstance(item, dict):
            raise SchemaViolation(
                _violation_report("", ViolationCode.OUT_OF_RANGE, "expected a use-case object")
            )
        name = str(item.get("name", ""))
        processes = _validate_process_items(item.get("processes") or [])
        now = utcnow()
        try:
            return UseCase(
                id=extracted_use_case_id(document_id, name),
                name=name,
                description=str(item.get("description", "")),
                processes=tuple(processes),
                provenance=SeedDocument(document_id=document_id),
                status=UseCaseStatus.DRAFT,
                created_at=now,
                updated_at=now,
            )
        except ValidationError as exc:
            raise SchemaViolation(_schema_report(exc.errors())) from exc
