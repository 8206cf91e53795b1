"""Use-case data model: network specifications, communication processes and capability ranges.

Parsing (types, enum membership, unknown fields) is handled by the pydantic models;
range and structural validation is a separate, total layer that returns a
:class:`ValidationReport` instead of raising.
"""

from __future__ import annotations

import json
import logging
import math
from datetime import datetime, timezone
from enum import Enum
from typing import Annotated, Literal, Union

from pydantic import (
    AfterValidator,
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_serializer,
    model_validator,
)

logger = logging.getLogger(__name__)

# Metric names in canonical declaration order. Violation ordering, radar axis
# ordering and serialized field ordering all follow this tuple.
METRICS: tuple[str, ...] = (
    "user_experienced_data_rate_mbps",
    "latency_ms",
    "mobility_kmph",
    "reliability_percentage",
    "connectivity_density_per_m2",
    "area_traffic_capacity_mbps_per_m2",
    "position_accuracy_cm",
    "peak_data_rate_gbps",
)

METRIC_UNITS: dict[str, str] = {
    "user_experienced_data_rate_mbps": "Mbit/s",
    "latency_ms": "ms",
    "mobility_kmph": "km/h",
    "reliability_percentage": "%",
    "connectivity_density_per_m2": "devices/m^2",
    "area_traffic_capacity_mbps_per_m2": "Mbit/s/m^2",
    "position_accuracy_cm": "cm",
    "peak_data_rate_gbps": "Gbit/s",
}

MAX_NAME_CHARS = 200
MAX_DESCRIPTION_CHARS = 8000


def rfc3339(dt: datetime) -> str:
    """Format a datetime as an RFC 3339 UTC string (trailing Z)."""
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


def _ensure_utc(dt: datetime) -> datetime:
    if dt.tzinfo is None:
        return dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


#: Timestamps normalize to UTC-aware on validation so round-trip equality holds
#: even for values constructed naive in Python.
UtcDatetime = Annotated[datetime, AfterValidator(_ensure_utc)]


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class Direction(str, Enum):
    TRANSMIT = "transmit"
    RECEIVE = "receive"


class UseCaseStatus(str, Enum):
    DRAFT = "draft"
    PENDING_REVIEW = "pending_review"
    PUBLISHED = "published"
    REJECTED = "rejected"


class Better(str, Enum):
    """Which direction along a metric is an improvement."""

    HIGHER = "higher"
    LOWER = "lower"


class ViolationCode(str, Enum):
    MISSING = "missing"
    OUT_OF_RANGE = "out_of_range"
    NOT_FINITE = "not_finite"
    DUPLICATE = "duplicate"
    EMPTY = "empty"


class SeedDocument(_Frozen):
    kind: Literal["seed_document"] = "seed_document"
    document_id: str


class Contributor(_Frozen):
    kind: Literal["contributor"] = "contributor"
    contributor_handle: str


class Generated(_Frozen):
    kind: Literal["generated"] = "generated"


Provenance = Annotated[Union[SeedDocument, Contributor, Generated], Field(discriminator="kind")]


class NetworkSpecification(_Frozen):
    """Quantitative QoS requirements of one communication process.

    Every field is optional: a process only constrains the metrics it needs.
    Values are intentionally unconstrained here so that out-of-range or
    non-finite numbers survive parsing and surface in a ValidationReport.
    """

    user_experienced_data_rate_mbps: float | None = None
    latency_ms: float | None = None
    mobility_kmph: float | None = None
    reliability_percentage: float | None = None
    connectivity_density_per_m2: float | None = None
    area_traffic_capacity_mbps_per_m2: float | None = None
    position_accuracy_cm: float | None = None
    peak_data_rate_gbps: float | None = None

    @model_validator(mode="before")
    @classmethod
    def _accept_legacy_mobility_name(cls, data):
        # "mobility_kmps" appears in paper-faithful exports; the stored unit is km/h.
        if isinstance(data, dict) and "mobility_kmps" in data:
            if data.get("mobility_kmph") is not None:
                raise ValueError("mobility_kmps conflicts with mobility_kmph; provide only one")
            data = dict(data)
            value = data.pop("mobility_kmps")
            data["mobility_kmph"] = value
            logger.warning("deprecated field 'mobility_kmps' parsed as 'mobility_kmph' (km/h)")
        return data

    def present_metrics(self) -> list[str]:
        return [m for m in METRICS if getattr(self, m) is not None]


class CommunicationProcess(_Frozen):
    """One wireless connection serving a single purpose within a use case."""

    id: str
    name: str
    description: str
    is_real_time: bool
    direction: Direction
    message_type: str
    specification: NetworkSpecification


class UseCase(_Frozen):
    """A networked application owning one or more communication processes."""

    id: str
    name: str
    description: str
    processes: tuple[CommunicationProcess, ...]
    provenance: Provenance
    status: UseCaseStatus
    created_at: UtcDatetime
    updated_at: UtcDatetime

    @field_serializer("created_at", "updated_at")
    def _serialize_timestamp(self, value: datetime) -> str:
        return rfc3339(value)


class MetricRange(_Frozen):
    min: float
    max: float
    better: Better


class SpecRangeConfig(_Frozen):
    """Per-metric [min, max] validation bounds. Defaults mirror the IMT-2030 capability caps."""

    user_experienced_data_rate_mbps: MetricRange
    latency_ms: MetricRange
    mobility_kmph: MetricRange
    reliability_percentage: MetricRange
    connectivity_density_per_m2: MetricRange
    area_traffic_capacity_mbps_per_m2: MetricRange
    position_accuracy_cm: MetricRange
    peak_data_rate_gbps: MetricRange

    @model_validator(mode="after")
    def _check_bounds(self) -> "SpecRangeConfig":
        for metric in METRICS:
            r: MetricRange = getattr(self, metric)
            if not (math.isfinite(r.min) and math.isfinite(r.max)):
                raise ValueError(f"{metric}: bounds must be finite")
            if not r.min < r.max:
                raise ValueError(f"{metric}: min must be strictly below max")
            # mobility may legitimately start at zero (stationary devices); every
            # other metric is strictly positive.
            if metric == "mobility_kmph":
                if r.min < 0:
                    raise ValueError(f"{metric}: min must be non-negative")
            elif r.min <= 0:
                raise ValueError(f"{metric}: min must be positive")
        return self

    def range_for(self, metric: str) -> MetricRange:
        return getattr(self, metric)


#: IMT-2030 default profile. Caps come from the 6G capability targets; lower
#: bounds (and the latency/position upper bounds) are generous finite defaults
#: so that validation is total.
DEFAULT_RANGES = SpecRangeConfig(
    user_experienced_data_rate_mbps=MetricRange(min=1e-6, max=500.0, better=Better.HIGHER),
    latency_ms=MetricRange(min=0.1, max=1e4, better=Better.LOWER),
    mobility_kmph=MetricRange(min=1e-6, max=1000.0, better=Better.HIGHER),
    reliability_percentage=MetricRange(min=90.0, max=99.99999, better=Better.HIGHER),
    connectivity_density_per_m2=MetricRange(min=1e-6, max=100.0, better=Better.HIGHER),
    area_traffic_capacity_mbps_per_m2=MetricRange(min=1e-6, max=50.0, better=Better.HIGHER),
    position_accuracy_cm=MetricRange(min=1.0, max=1e5, better=Better.LOWER),
    peak_data_rate_gbps=MetricRange(min=1e-6, max=200.0, better=Better.HIGHER),
)


class Violation(_Frozen):
    path: str
    code: ViolationCode
    detail: str


class ValidationReport(_Frozen):
    valid: bool
    violations: tuple[Violation, ...] = ()

    @model_validator(mode="after")
    def _consistent(self) -> "ValidationReport":
        if self.valid != (len(self.violations) == 0):
            raise ValueError("valid flag must match emptiness of violations")
        return self

    @classmethod
    def from_violations(cls, violations: list[Violation]) -> "ValidationReport":
        return cls(valid=not violations, violations=tuple(violations))


VALID_REPORT = ValidationReport(valid=True)


def validate_spec(spec: NetworkSpecification, ranges: SpecRangeConfig) -> ValidationReport:
    """Check every present metric against its configured bounds.

    Total function: bad values yield a report, never an exception. Violation
    order follows the canonical metric order; an all-absent specification is a
    single ``empty`` violation at the specification object's root (path "").
    """
    violations: list[Violation] = []
    present = 0
    for metric in METRICS:
        value = getattr(spec, metric)
        if value is None:
            continue
        present += 1
        if not math.isfinite(value):
            violations.append(
                Violation(path=metric, code=ViolationCode.NOT_FINITE, detail=f"{metric} is {value!r}")
            )
            continue
        r = ranges.range_for(metric)
        if not (r.min <= value <= r.max):
            violations.append(
                Violation(
                    path=metric,
                    code=ViolationCode.OUT_OF_RANGE,
                    detail=f"{metric}={value!r} outside [{r.min!r}, {r.max!r}]",
                )
            )
    if present == 0:
        violations.append(
            Violation(path="", code=ViolationCode.EMPTY, detail="no network specification metric is set")
        )
    return ValidationReport.from_violations(violations)


def _prefix(prefix: str, path: str) -> str:
    if not path:
        return prefix
    return f"{prefix}.{path}"


def validate_process(process: CommunicationProcess, ranges: SpecRangeConfig) -> list[Violation]:
    """Structural checks for one process plus its specification's range report.

    Paths are relative to the process object.
    """
    violations: list[Violation] = []
    if not process.id.strip():
        violations.append(Violation(path="id", code=ViolationCode.EMPTY, detail="process id is empty"))
    for field in ("name", "description", "message_type"):
        if not getattr(process, field).strip():
            violations.append(
                Violation(path=field, code=ViolationCode.EMPTY, detail=f"process {field} is empty")
            )
    spec_report = validate_spec(process.specification, ranges)
    violations.extend(
        v.model_copy(update={"path": _prefix("specification", v.path)}) for v in spec_report.violations
    )
    return violations


def validate_use_case(uc: UseCase, ranges: SpecRangeConfig) -> ValidationReport:
    """Structural rules for the use case followed by per-process spec validation."""
    violations: list[Violation] = []
    if not uc.id.strip():
        violations.append(Violation(path="id", code=ViolationCode.EMPTY, detail="use case id is empty"))
    if not uc.name.strip():
        violations.append(Violation(path="name", code=ViolationCode.EMPTY, detail="name is empty"))
    elif len(uc.name) > MAX_NAME_CHARS:
        violations.append(
            Violation(
                path="name",
                code=ViolationCode.OUT_OF_RANGE,
                detail=f"name exceeds {MAX_NAME_CHARS} characters",
            )
        )
    if not uc.description.strip():
        violations.append(
            Violation(path="description", code=ViolationCode.EMPTY, detail="description is empty")
        )
    elif len(uc.description) > MAX_DESCRIPTION_CHARS:
        violations.append(
            Violation(
                path="description",
                code=ViolationCode.OUT_OF_RANGE,
                detail=f"description exceeds {MAX_DESCRIPTION_CHARS} characters",
            )
        )
    if not uc.processes:
        violations.append(
            Violation(
                path="processes",
                code=ViolationCode.MISSING,
                detail="a use case needs at least one communication process",
            )
        )
    seen_ids: set[str] = set()
    for i, process in enumerate(uc.processes):
        if process.id in seen_ids:
            violations.append(
                Violation(
                    path=f"processes[{i}].id",
                    code=ViolationCode.DUPLICATE,
                    detail=f"process id {process.id!r} occurs more than once",
                )
            )
        seen_ids.add(process.id)
        violations.extend(
            v.model_copy(update={"path": _prefix(f"processes[{i}]", v.path)})
            for v in validate_process(process, ranges)
        )
    return ValidationReport.from_violations(violations)


class OntologyParseError(ValueError):
    """Raised when a use-case document cannot be parsed; carries (path, message) pairs."""

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = problems
        super().__init__("; ".join(f"{path or '<root>'}: {msg}" for path, msg in problems))


def pydantic_loc_to_path(loc: tuple) -> str:
    """Render a pydantic error location as a dotted/indexed path like processes[0].direction."""
    parts: list[str] = []
    for item in loc:
        if isinstance(item, int):
            if parts:
                parts[-1] += f"[{item}]"
            else:
                parts.append(f"[{item}]")
        else:
            # Discriminated-union branch labels are not part of the document path.
            if item in ("seed_document", "contributor", "generated"):
                continue
            parts.append(str(item))
    return ".".join(parts)


def parse_error_problems(exc: ValidationError) -> list[tuple[str, str]]:
    return [(pydantic_loc_to_path(err["loc"]), err["msg"]) for err in exc.errors()]


def serialize_use_case(uc: UseCase) -> str:
    """Canonical JSON serialization (snake_case fields, lowercase enums, RFC 3339 timestamps)."""
    return json.dumps(uc.model_dump(mode="json"), indent=2, ensure_ascii=False)


def parse_use_case(text: str) -> UseCase:
    """Inverse of :func:`serialize_use_case`.

    Raises OntologyParseError with path-annotated diagnostics on malformed
    syntax, unknown fields or wrong types. Range validation is not applied here.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise OntologyParseError([("", f"malformed JSON at offset {exc.pos}: {exc.msg}")]) from exc
    try:
        return UseCase.model_validate(data)
    except ValidationError as exc:
        raise OntologyParseError(parse_error_problems(exc)) from exc
