"""Operator command line: seed, ingest, serve, query, export, import.

stdout carries data, stderr carries diagnostics; exit codes: 0 success,
1 validation/domain failure, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from pydantic import ValidationError

from .community import CommunityService
from .engine import (
    EngineError,
    ExhaustedRetries,
    ProviderUnavailable,
    RagEngine,
    TemplateRepository,
    deterministic_process_id,
)
from .ontology import (
    DEFAULT_RANGES,
    SpecRangeConfig,
    UseCase,
    UseCaseStatus,
    utcnow,
)
from .providers import (
    EmbeddingProviderConfig,
    EmptyInput,
    GenerationProviderConfig,
    NoScriptMatch,
    RemoteUnavailable,
    build_embedder,
    build_generator,
)
from .store import (
    CorruptSnapshot,
    IoFailure,
    KnowledgeStore,
    StoreError,
    UnsupportedSchemaVersion,
    ValidationFailed,
    use_case_content_hash,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_IO = 2

_ENV_OVERRIDES = {
    "NETSPEC_DATA_DIR": "data_dir",
    "NETSPEC_RANGES_FILE": "ranges_file",
    "NETSPEC_TEMPLATE_DIR": "template_dir",
    "NETSPEC_HOST": "host",
    "NETSPEC_PORT": "port",
    "NETSPEC_OPERATOR_KEY": "operator_key",
}


@dataclass
class CliConfig:
    data_dir: Path = Path("./netspec-data")
    embedding: EmbeddingProviderConfig = field(default_factory=EmbeddingProviderConfig)
    generation: GenerationProviderConfig = field(default_factory=GenerationProviderConfig)
    ranges_file: Path | None = None
    template_dir: Path | None = None
    host: str = "127.0.0.1"
    port: int = 8080
    operator_key: str = "change-me"

    @classmethod
    def load(cls, path: str | Path | None) -> "CliConfig":
        """Single JSON config file; environment variables win over file values."""
        raw: dict = {}
        if path is not None:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        for env_name, key in _ENV_OVERRIDES.items():
            if env_name in os.environ:
                raw[key] = os.environ[env_name]
        cfg = cls()
        if "data_dir" in raw:
            cfg.data_dir = Path(raw["data_dir"])
        if "embedding" in raw:
            cfg.embedding = EmbeddingProviderConfig.model_validate(raw["embedding"])
        if "generation" in raw:
            cfg.generation = GenerationProviderConfig.model_validate(raw["generation"])
        if raw.get("ranges_file"):
            cfg.ranges_file = Path(raw["ranges_file"])
        if raw.get("template_dir"):
            cfg.template_dir = Path(raw["template_dir"])
        if "host" in raw:
            cfg.host = str(raw["host"])
        if "port" in raw:
            cfg.port = int(raw["port"])
        if "operator_key" in raw:
            cfg.operator_key = str(raw["operator_key"])
        return cfg


class _Runtime:
    """Store/engine/community wired from a CliConfig, with snapshot load/save."""

    def __init__(self, cfg: CliConfig):
        self.cfg = cfg
        ranges = DEFAULT_RANGES
        if cfg.ranges_file is not None and cfg.ranges_file.exists():
            ranges = SpecRangeConfig.model_validate(
                json.loads(cfg.ranges_file.read_text(encoding="utf-8"))
            )
        self.embedder = build_embedder(cfg.embedding)
        self.store = KnowledgeStore(self.embedder, data_dir=cfg.data_dir, ranges=ranges)
        snapshot_path = cfg.data_dir / "store.json"
        if snapshot_path.exists():
            self.store.load_snapshot(snapshot_path)
        self.generator = build_generator(cfg.generation)
        self.engine = RagEngine(
            self.store, self.generator, templates=TemplateRepository(cfg.template_dir)
        )
        self.community = CommunityService(self.store, self.engine)

    def save(self) -> None:
        self.store.save_snapshot()


def _print_error(args, code: str, message: str) -> None:
    if getattr(args, "json", False):
        print(json.dumps({"error": {"code": code, "message": message}}), file=sys.stderr)
    else:
        print(f"error: {message}", file=sys.stderr)


def _fill_seed_entry(item: dict, seed_name: str) -> dict:
    """Complete a relaxed seed entry into a full canonical use-case document."""
    item = dict(item)
    processes = []
    for i, proc in enumerate(item.get("processes", [])):
        proc = dict(proc)
        proc.setdefault(
            "id", deterministic_process_id(i, str(proc.get("name", "")), str(proc.get("description", "")))
        )
        processes.append(proc)
    item["processes"] = processes
    item.setdefault("id", str(uuid.uuid5(uuid.NAMESPACE_URL, f"netspec/seed/{seed_name}/{item.get('name', '')}")))
    item.setdefault("provenance", {"kind": "seed_document", "document_id": seed_name})
    item.setdefault("status", "published")
    now = utcnow().isoformat().replace("+00:00", "Z")
    item.setdefault("created_at", now)
    item.setdefault("updated_at", now)
    return item


def cmd_init(args, cfg: CliConfig) -> int:
    seed_path = Path(args.seed)
    try:
        entries = json.loads(seed_path.read_text(encoding="utf-8"))
    except OSError as exc:
        _print_error(args, "io_failure", f"cannot read seed file: {exc}")
        return EXIT_IO
    except json.JSONDecodeError as exc:
        _print_error(args, "io_failure", f"seed file is not valid JSON: {exc}")
        return EXIT_IO
    if not isinstance(entries, list):
        _print_error(args, "validation_failed", "seed file must be a JSON array of use cases")
        return EXIT_FAILURE

    runtime = _Runtime(cfg)
    results = []
    failures = 0
    for index, item in enumerate(entries):
        label = item.get("name", f"entry {index}") if isinstance(item, dict) else f"entry {index}"
        try:
            doc = _fill_seed_entry(item, seed_path.stem) if isinstance(item, dict) else item
            uc = UseCase.model_validate(doc)
            uc = uc.model_copy(update={"status": UseCaseStatus.PUBLISHED})
            digest = use_case_content_hash(uc)
            if runtime.store.find_by_content_hash(digest) is not None:
                results.append({"name": label, "result": "skipped", "detail": "already present"})
                continue
            runtime.store.upsert_use_case(uc, refresh_updated_at=False)
            results.append({"name": label, "result": "published", "id": uc.id})
        except (ValidationError, ValidationFailed) as exc:
            failures += 1
            results.append({"name": label, "result": "invalid", "detail": str(exc)})
    try:
        runtime.save()
    except StoreError as exc:
        _print_error(args, "io_failure", str(exc))
        return EXIT_IO
    if args.json:
        print(json.dumps({"results": results}, indent=2))
    else:
        for row in results:
            detail = f" ({row['detail']})" if "detail" in row else ""
            print(f"{row['result']:>9}  {row['name']}{detail}")
    if failures and not args.skip_invalid:
        _print_error(args, "validation_failed", f"{failures} seed entr{'y' if failures == 1 else 'ies'} invalid")
        return EXIT_FAILURE
    return EXIT_OK


def cmd_ingest(args, cfg: CliConfig) -> int:
    doc_path = Path(args.document)
    try:
        text = doc_path.read_text(encoding="utf-8")
    except OSError as exc:
        _print_error(args, "io_failure", f"cannot read document: {exc}")
        return EXIT_IO
    if not text.strip():
        _print_error(args, "validation_failed", "document is empty")
        return EXIT_FAILURE
    runtime = _Runtime(cfg)
    try:
        job = runtime.community.ingest_document(text, document_id=doc_path.stem)
    except NoScriptMatch as exc:
        _print_error(args, "provider_unavailable", str(exc))
        return EXIT_FAILURE
    runtime.save()
    payload = {
        "document_id": job.document_id,
        "draft_ids": [uc.id for uc in job.extracted],
        "failures": job.failures,
    }
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        for draft_id in payload["draft_ids"]:
            print(draft_id)
        for failure in job.failures:
            print(f"failure: {failure}", file=sys.stderr)
    return EXIT_OK


def cmd_query(args, cfg: CliConfig) -> int:
    runtime = _Runtime(cfg)
    try:
        outcome = runtime.engine.generate_specification(
            args.name, args.description, n=args.n, template_id=args.template
        )
    except ExhaustedRetries as exc:
        _print_error(args, "generation_unparseable", str(exc))
        return EXIT_FAILURE
    except (ProviderUnavailable, NoScriptMatch, RemoteUnavailable) as exc:
        _print_error(args, "provider_unavailable", str(exc))
        return EXIT_FAILURE
    except (EmptyInput, ValueError) as exc:
        _print_error(args, "validation_failed", str(exc))
        return EXIT_FAILURE
    except EngineError as exc:
        _print_error(args, "engine_error", str(exc))
        return EXIT_FAILURE
    radars = runtime.engine.radar_for_outcome(outcome)
    print(json.dumps(outcome.model_dump(mode="json"), indent=2, ensure_ascii=False))
    from .viz import radar_table, save_radar_charts

    print(radar_table(outcome.processes, radars), file=sys.stderr)
    if args.figures:
        paths = save_radar_charts(outcome.processes, radars, args.figures)
        for path in paths:
            print(f"wrote {path}", file=sys.stderr)
    runtime.store.flush_retrieval_log()
    return EXIT_OK


def cmd_export(args, cfg: CliConfig) -> int:
    runtime = _Runtime(cfg)
    try:
        target = runtime.store.save_snapshot(Path(args.path))
    except StoreError as exc:
        _print_error(args, "io_failure", str(exc))
        return EXIT_IO
    print(str(target))
    return EXIT_OK


def cmd_import(args, cfg: CliConfig) -> int:
    runtime = _Runtime(cfg)
    try:
        snapshot = runtime.store.load_snapshot(Path(args.path))
        runtime.save()
    except (CorruptSnapshot, UnsupportedSchemaVersion) as exc:
        _print_error(args, "corrupt_snapshot", str(exc))
        return EXIT_FAILURE
    except IoFailure as exc:
        _print_error(args, "io_failure", str(exc))
        return EXIT_IO
    print(json.dumps({"use_cases": len(snapshot.use_cases), "comments": len(snapshot.comments)}))
    return EXIT_OK


def cmd_serve(args, cfg: CliConfig) -> int:
    import signal

    import uvicorn

    from .service import ServiceConfig, create_app

    runtime = _Runtime(cfg)
    app = create_app(
        runtime.store,
        runtime.engine,
        runtime.community,
        config=ServiceConfig(operator_key=cfg.operator_key, ranges_path=cfg.ranges_file),
        generators={"default": runtime.generator},
    )
    host = args.host or cfg.host
    port = args.port or cfg.port
    logger.info("serving on %s:%d", host, port)

    # uvicorn handles the first SIGTERM gracefully, then re-raises it to the
    # handler that was installed before it started. Default disposition would
    # kill the process before the snapshot is saved, so exit via SystemExit.
    def _graceful_term(signum, frame):
        raise SystemExit(EXIT_OK)

    previous_term = signal.signal(signal.SIGTERM, _graceful_term)
    try:
        uvicorn.run(app, host=host, port=port, log_level="info")
    finally:
        signal.signal(signal.SIGTERM, previous_term)
        runtime.store.flush_retrieval_log()
        runtime.save()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netspec", description=__doc__)
    parser.add_argument("--config", help="path to the JSON config file")
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    sub = parser.add_subparsers(dest="command", required=True)

    p_init = sub.add_parser("init", help="seed the knowledge base from a JSON file")
    p_init.add_argument("--seed", required=True, help="JSON array of use-case documents")
    p_init.add_argument("--skip-invalid", action="store_true", help="publish valid entries even if some fail")
    p_init.set_defaults(func=cmd_init)

    p_ingest = sub.add_parser("ingest", help="extract draft use cases from a text document")
    p_ingest.add_argument("document", help="path to a UTF-8 text document")
    p_ingest.set_defaults(func=cmd_ingest)

    p_serve = sub.add_parser("serve", help="run the HTTP service until signalled")
    p_serve.add_argument("--host", default=None)
    p_serve.add_argument("--port", type=int, default=None)
    p_serve.set_defaults(func=cmd_serve)

    p_query = sub.add_parser("query", help="generate a specification for a described use case")
    p_query.add_argument("--name", required=True)
    p_query.add_argument("--description", required=True)
    p_query.add_argument("--n", type=int, default=5, help="similar use cases to retrieve")
    p_query.add_argument("--template", default="specify")
    p_query.add_argument("--figures", default=None, help="directory for radar PNGs and radar.csv")
    p_query.set_defaults(func=cmd_query)

    p_export = sub.add_parser("export", help="write a snapshot of the store")
    p_export.add_argument("path")
    p_export.set_defaults(func=cmd_export)

    p_import = sub.add_parser("import", help="replace the store from a snapshot")
    p_import.add_argument("path")
    p_import.set_defaults(func=cmd_import)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("NETSPEC_LOG", "WARNING"), stream=sys.stderr)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = CliConfig.load(args.config)
    except (OSError, json.JSONDecodeError, ValidationError) as exc:
        _print_error(args, "bad_config", f"cannot load config: {exc}")
        return EXIT_IO
    try:
        return args.func(args, cfg)
    except OSError as exc:
        _print_error(args, "io_failure", str(exc))
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
