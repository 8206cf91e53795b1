import json
import uuid
from datetime import datetime, timezone
from pathlib import Path

import pytest

from netspec.ontology import (
    CommunicationProcess,
    Direction,
    Generated,
    NetworkSpecification,
    UseCase,
    UseCaseStatus,
)
from netspec.providers import DeterministicLocalEmbedder, ScriptedGenerator
from netspec.store import KnowledgeStore

FIXTURES = Path(__file__).parent / "fixtures"
SEED_PATH = FIXTURES / "seed_use_cases.json"
RULES_PATH = FIXTURES / "generator_rules.json"
DOCUMENT_PATH = FIXTURES / "document_port.txt"

FIXED_TS = datetime(2026, 1, 1, 12, 0, 0, tzinfo=timezone.utc)


def make_process(
    name: str = "telemetry uplink",
    description: str = "periodic sensor telemetry",
    direction: Direction = Direction.TRANSMIT,
    is_real_time: bool = False,
    message_type: str = "telemetry sample",
    proc_id: str | None = None,
    **spec_fields,
) -> CommunicationProcess:
    if not spec_fields:
        spec_fields = {"latency_ms": 50.0}
    return CommunicationProcess(
        id=proc_id or str(uuid.uuid4()),
        name=name,
        description=description,
        is_real_time=is_real_time,
        direction=direction,
        message_type=message_type,
        specification=NetworkSpecification(**spec_fields),
    )


def make_use_case(
    name: str = "Test use case",
    description: str = "a networked application used in tests",
    processes: tuple[CommunicationProcess, ...] | None = None,
    status: UseCaseStatus = UseCaseStatus.PUBLISHED,
    uc_id: str | None = None,
) -> UseCase:
    return UseCase(
        id=uc_id or str(uuid.uuid4()),
        name=name,
        description=description,
        processes=processes if processes is not None else (make_process(),),
        provenance=Generated(),
        status=status,
        created_at=FIXED_TS,
        updated_at=FIXED_TS,
    )


@pytest.fixture
def embedder() -> DeterministicLocalEmbedder:
    return DeterministicLocalEmbedder()


@pytest.fixture
def seed_use_cases() -> list[UseCase]:
    entries = json.loads(SEED_PATH.read_text(encoding="utf-8"))
    return [UseCase.model_validate(entry) for entry in entries]


@pytest.fixture
def seeded_store(embedder, seed_use_cases) -> KnowledgeStore:
    store = KnowledgeStore(embedder)
    for uc in seed_use_cases:
        store.upsert_use_case(uc, refresh_updated_at=False)
    return store


@pytest.fixture
def scripted_generator() -> ScriptedGenerator:
    return ScriptedGenerator.from_script_file(RULES_PATH)
