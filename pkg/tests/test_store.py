import json
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netspec.ontology import UseCaseStatus
from netspec.providers import DeterministicLocalEmbedder
from netspec.store import (
    CorruptSnapshot,
    DimensionMismatch,
    KnowledgeStore,
    RetrievalQuery,
    UnsupportedSchemaVersion,
    ValidationFailed,
    VoteValue,
    ZeroVector,
    cosine_similarity,
    embedded_text,
)

from conftest import make_use_case


# ---------------------------------------------------------------- cosine

def test_cosine_identity():
    v = [0.3, -1.2, 4.5, 0.0]
    assert cosine_similarity(v, v) == pytest.approx(1.0, abs=1e-9)


def test_cosine_orthogonal():
    a = [1.0] + [0.0] * 7
    b = [0.0, 1.0] + [0.0] * 6
    assert cosine_similarity(a, b) == 0.0


def test_cosine_analytic_sqrt_half():
    a = [1.0, 1.0] + [0.0] * 6
    b = [1.0, 0.0] + [0.0] * 6
    assert cosine_similarity(a, b) == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-9)


def test_cosine_symmetry_and_scale_invariance():
    rng = random.Random(11)
    for _ in range(200):
        a = [rng.uniform(-1, 1) for _ in range(16)]
        b = [rng.uniform(-1, 1) for _ in range(16)]
        k = rng.uniform(0.01, 100.0)
        assert cosine_similarity(a, b) == pytest.approx(cosine_similarity(b, a), abs=1e-12)
        assert cosine_similarity(a, [k * x for x in b]) == pytest.approx(
            cosine_similarity(a, b), abs=1e-9
        )


def test_cosine_errors():
    with pytest.raises(DimensionMismatch):
        cosine_similarity([1.0, 0.0], [1.0, 0.0, 0.0])
    with pytest.raises(ZeroVector):
        cosine_similarity([0.0, 0.0], [1.0, 0.0])


def test_cosine_clamps_rounding():
    v = [1 / math.sqrt(3)] * 3
    assert -1.0 <= cosine_similarity(v, v) <= 1.0


# ---------------------------------------------------------------- upsert / index

def test_insert_published_grows_index(embedder):
    store = KnowledgeStore(embedder)
    assert store.index_size() == 0
    store.upsert_use_case(make_use_case(name="First", description="about drones"))
    assert store.index_size() == 1


def test_non_published_not_indexed(embedder):
    store = KnowledgeStore(embedder)
    store.upsert_use_case(make_use_case(status=UseCaseStatus.DRAFT))
    store.upsert_use_case(make_use_case(status=UseCaseStatus.PENDING_REVIEW))
    assert store.index_size() == 0


def test_update_description_reembeds(embedder):
    store = KnowledgeStore(embedder)
    uc = make_use_case(name="Evolving", description="first wording")
    store.upsert_use_case(uc)
    before = store._index[uc.id].text_hash
    updated = uc.model_copy(update={"description": "second wording entirely"})
    store.upsert_use_case(updated)
    after = store._index[uc.id].text_hash
    assert before != after


def test_unpublish_removes_index_entry(embedder):
    store = KnowledgeStore(embedder)
    uc = make_use_case()
    store.upsert_use_case(uc)
    store.upsert_use_case(uc.model_copy(update={"status": UseCaseStatus.REJECTED}))
    assert store.index_size() == 0


def test_invalid_use_case_leaves_store_unchanged(embedder):
    store = KnowledgeStore(embedder)
    with pytest.raises(ValidationFailed) as exc_info:
        store.upsert_use_case(make_use_case(processes=()))
    assert not exc_info.value.report.valid
    assert store.list_use_cases() == []


def test_upsert_refreshes_updated_at(embedder):
    store = KnowledgeStore(embedder)
    uc = make_use_case()
    store.upsert_use_case(uc)
    stored = store.get_use_case(uc.id)
    assert stored.updated_at >= uc.updated_at


# ---------------------------------------------------------------- retrieval

def test_empty_index_returns_empty(embedder):
    store = KnowledgeStore(embedder)
    assert store.retrieve(RetrievalQuery(text="anything at all")).hits == ()


def test_self_match_rank_one(seeded_store, seed_use_cases):
    target = seed_use_cases[0]
    result = seeded_store.retrieve(RetrievalQuery(text=embedded_text(target), n=1))
    assert len(result.hits) == 1
    hit = result.hits[0]
    assert hit.use_case_id == target.id
    assert hit.rank == 1
    assert hit.similarity == pytest.approx(1.0, abs=1e-6)


def brute_force_oracle(embedder, published, query_text, n, min_similarity=-1.0):
    """Independent full scan + stable sort; pure Python arithmetic.

    Mirrors the documented ranking contract: similarity quantized to 12
    decimals, ordered by (-similarity, id).
    """
    q = embedder.embed(query_text)
    scored = []
    for uc_id, text in published:
        v = embedder.embed(text)
        dot = sum(x * y for x, y in zip(q, v))
        na = math.sqrt(sum(x * x for x in q))
        nb = math.sqrt(sum(x * x for x in v))
        sim = round(max(-1.0, min(1.0, dot / (na * nb))), 12)
        scored.append((uc_id, sim))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return [(uc_id, sim) for uc_id, sim in scored if sim >= min_similarity][:n]


def test_retrieval_matches_brute_force_oracle(embedder):
    rng = random.Random(42)
    words = [
        "drone", "vehicle", "surgery", "meter", "hologram", "factory", "crane",
        "robot", "camera", "sensor", "latency", "edge", "swarm", "video", "game",
    ]
    store = KnowledgeStore(embedder)
    published = []
    for i in range(200):
        name = " ".join(rng.choices(words, k=3))
        description = " ".join(rng.choices(words, k=12))
        uc = make_use_case(name=name, description=description, uc_id=f"uc-{i:04d}")
        store.upsert_use_case(uc, refresh_updated_at=False)
        published.append((uc.id, embedded_text(uc)))
    for query_words in (["drone", "camera"], ["surgery"], ["meter", "factory", "edge"]):
        query = " ".join(query_words)
        expected = brute_force_oracle(embedder, published, query, n=10)
        got = store.retrieve(RetrievalQuery(text=query, n=10))
        assert [h.use_case_id for h in got.hits] == [uc_id for uc_id, _ in expected]
        for hit, (_, sim) in zip(got.hits, expected):
            assert hit.similarity == pytest.approx(sim, abs=1e-9)
        assert [h.rank for h in got.hits] == list(range(1, len(got.hits) + 1))


def test_only_published_retrieved(embedder):
    store = KnowledgeStore(embedder)
    shared_kwargs = dict(name="Same name", description="identical description text")
    published = make_use_case(uc_id="a-published", **shared_kwargs)
    draft = make_use_case(uc_id="b-draft", status=UseCaseStatus.DRAFT, **shared_kwargs)
    store.upsert_use_case(published)
    store.upsert_use_case(draft)
    hits = store.retrieve(RetrievalQuery(text="Same name\n\nidentical description text", n=10)).hits
    assert [h.use_case_id for h in hits] == ["a-published"]


def test_ties_break_by_ascending_id(embedder):
    store = KnowledgeStore(embedder)
    for uc_id in ("uc-b", "uc-a", "uc-c"):
        store.upsert_use_case(
            make_use_case(uc_id=uc_id, name="Twin", description="identical twin text"),
            refresh_updated_at=False,
        )
    hits = store.retrieve(RetrievalQuery(text="Twin\n\nidentical twin text", n=3)).hits
    assert [h.use_case_id for h in hits] == ["uc-a", "uc-b", "uc-c"]


def test_min_similarity_filters(seeded_store):
    everything = seeded_store.retrieve(RetrievalQuery(text="drone swarm", n=10))
    floored = seeded_store.retrieve(RetrievalQuery(text="drone swarm", n=10, min_similarity=0.2))
    assert all(h.similarity >= 0.2 for h in floored.hits)
    assert len(floored.hits) <= len(everything.hits)


def test_deterministic_ranking(seeded_store):
    first = seeded_store.retrieve(RetrievalQuery(text="remote surgery video", n=5))
    second = seeded_store.retrieve(RetrievalQuery(text="remote surgery video", n=5))
    assert first == second


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.sampled_from(list(UseCaseStatus)), min_size=1, max_size=12),
    st.integers(1, 12),
)
def test_only_published_across_random_status_mixes(statuses, n):
    store = KnowledgeStore(DeterministicLocalEmbedder())
    published = set()
    for i, status in enumerate(statuses):
        uc = make_use_case(
            uc_id=f"uc-{i}",
            name=f"case {i}",
            description=f"shared vocabulary drone meter case {i}",
            status=status,
        )
        store.upsert_use_case(uc, refresh_updated_at=False)
        if status == UseCaseStatus.PUBLISHED:
            published.add(uc.id)
    hits = store.retrieve(RetrievalQuery(text="shared vocabulary drone", n=n)).hits
    assert {h.use_case_id for h in hits} <= published
    assert len(hits) <= n


# ---------------------------------------------------------------- retrieval log and stats

def test_fresh_store_stats_all_zero(seeded_store, seed_use_cases):
    stats = seeded_store.retrieval_stats()
    assert set(stats) == {uc.id for uc in seed_use_cases}
    assert all(s.times_retrieved == 0 and s.mean_rank is None for s in stats.values())


def test_single_query_stats(seeded_store, seed_use_cases):
    target = seed_use_cases[2]
    seeded_store.retrieve(RetrievalQuery(text=embedded_text(target), n=2))
    stats = seeded_store.retrieval_stats()
    assert stats[target.id].times_retrieved == 1
    assert stats[target.id].mean_rank == 1.0
    assert stats[target.id].last_retrieved_at is not None


def test_stats_match_fold_oracle(seeded_store):
    rng = random.Random(3)
    queries = ["drone inspection", "surgery haptic", "factory control", "xr gaming frames"]
    for _ in range(25):
        seeded_store.retrieve(RetrievalQuery(text=rng.choice(queries), n=rng.randint(1, 5)))
    # Independent fold over the raw log rows.
    rows = seeded_store.retrieval_log_rows()
    expected_counts: dict[str, int] = {}
    expected_rank_sum: dict[str, int] = {}
    for row in rows:
        expected_counts[row.use_case_id] = expected_counts.get(row.use_case_id, 0) + 1
        expected_rank_sum[row.use_case_id] = expected_rank_sum.get(row.use_case_id, 0) + row.rank
    stats = seeded_store.retrieval_stats()
    for uc_id, stat in stats.items():
        assert stat.times_retrieved == expected_counts.get(uc_id, 0)
        if stat.times_retrieved:
            assert stat.mean_rank == pytest.approx(
                expected_rank_sum[uc_id] / expected_counts[uc_id]
            )


def test_log_rows_schema(seeded_store, seed_use_cases):
    seeded_store.retrieve(RetrievalQuery(text=embedded_text(seed_use_cases[0]), n=1))
    row = seeded_store.retrieval_log_rows()[0]
    data = row.model_dump(mode="json")
    assert set(data) == {"ts", "query_hash", "use_case_id", "rank", "similarity"}


# ---------------------------------------------------------------- snapshots

def _populated_store(embedder, tmp_path, count=10):
    store = KnowledgeStore(embedder, data_dir=tmp_path)
    rng = random.Random(5)
    words = ["drone", "meter", "link", "edge", "video", "swarm", "robot", "pose"]
    for i in range(count):
        store.upsert_use_case(
            make_use_case(
                uc_id=f"uc-{i:03d}",
                name=" ".join(rng.choices(words, k=2)),
                description=" ".join(rng.choices(words, k=8)),
            ),
            refresh_updated_at=False,
        )
    return store


def test_snapshot_round_trip(embedder, tmp_path):
    store = _populated_store(embedder, tmp_path / "a", count=50)
    store.retrieve(RetrievalQuery(text="drone video", n=5))
    path = store.save_snapshot()
    fresh = KnowledgeStore(embedder, data_dir=tmp_path / "a")
    snapshot = fresh.load_snapshot(path)
    assert {uc.id for uc in snapshot.use_cases} == {uc.id for uc in store.list_use_cases()}
    before = store.retrieve(RetrievalQuery(text="edge robot", n=10))
    after = fresh.retrieve(RetrievalQuery(text="edge robot", n=10))
    assert before == after


def test_snapshot_file_schema(embedder, tmp_path):
    store = _populated_store(embedder, tmp_path, count=3)
    path = store.save_snapshot()
    payload = json.loads(path.read_text())
    assert payload["schema_version"] == 1
    for key in ("use_cases", "comments", "votes", "documents", "embedding_cache"):
        assert key in payload
    assert all(set(e) == {"hash", "vector"} for e in payload["embedding_cache"])


def test_truncated_snapshot_is_corrupt_and_store_untouched(embedder, tmp_path):
    store = _populated_store(embedder, tmp_path / "src", count=5)
    path = store.save_snapshot()
    truncated = tmp_path / "broken.json"
    truncated.write_bytes(path.read_bytes()[: path.stat().st_size // 2])
    target = KnowledgeStore(embedder, data_dir=tmp_path / "dst")
    target.upsert_use_case(make_use_case(uc_id="pre-existing"), refresh_updated_at=False)
    with pytest.raises(CorruptSnapshot):
        target.load_snapshot(truncated)
    assert [uc.id for uc in target.list_use_cases()] == ["pre-existing"]


def test_unsupported_schema_version(embedder, tmp_path):
    bad = tmp_path / "v999.json"
    bad.write_text(json.dumps({"schema_version": 999, "use_cases": []}))
    with pytest.raises(UnsupportedSchemaVersion):
        KnowledgeStore(embedder).load_snapshot(bad)


def test_dangling_vote_is_corrupt(embedder, tmp_path):
    store = _populated_store(embedder, tmp_path, count=1)
    path = store.save_snapshot()
    payload = json.loads(path.read_text())
    payload["votes"] = [
        {"entity_id": "ghost", "voter_handle": "v", "value": "up", "ts": "2026-01-01T00:00:00Z"}
    ]
    bad = tmp_path / "dangling.json"
    bad.write_text(json.dumps(payload))
    with pytest.raises(CorruptSnapshot):
        KnowledgeStore(embedder).load_snapshot(bad)


def test_save_is_atomic_no_temp_left(embedder, tmp_path):
    store = _populated_store(embedder, tmp_path, count=2)
    store.save_snapshot()
    leftovers = [p for p in tmp_path.iterdir() if p.suffix == ".tmp"]
    assert leftovers == []


def test_embedding_cache_reused_on_load(embedder, tmp_path):
    store = _populated_store(embedder, tmp_path, count=4)
    path = store.save_snapshot()

    class CountingEmbedder(DeterministicLocalEmbedder):
        calls = 0

        def embed(self, text):
            type(self).calls += 1
            return super().embed(text)

    counting = CountingEmbedder()
    fresh = KnowledgeStore(counting, data_dir=tmp_path)
    fresh.load_snapshot(path)
    assert counting.calls == 0  # cache hit for every indexed text


def test_retrieval_log_flushed_and_reloaded(embedder, tmp_path):
    store = _populated_store(embedder, tmp_path, count=3)
    store.retrieve(RetrievalQuery(text="drone video", n=2))
    store.save_snapshot()
    log_file = tmp_path / "retrieval.log.jsonl"
    assert log_file.exists()
    lines = [json.loads(line) for line in log_file.read_text().splitlines() if line]
    assert len(lines) == len(store.retrieval_log_rows())
    fresh = KnowledgeStore(embedder, data_dir=tmp_path)
    fresh.load_snapshot()
    assert len(fresh.retrieval_log_rows()) == len(lines)


# ---------------------------------------------------------------- votes and comments storage

def test_unembeddable_published_use_case_fails_validation(embedder):
    store = KnowledgeStore(embedder)
    with pytest.raises(ValidationFailed):
        store.upsert_use_case(make_use_case(name="!!!", description="??? ---"))
    assert store.list_use_cases() == []
    assert store.index_size() == 0


def test_naive_timestamps_normalize_to_utc(embedder):
    from datetime import datetime

    from netspec.ontology import UseCase, parse_use_case, serialize_use_case

    uc = make_use_case()
    naive = UseCase.model_validate(
        dict(
            uc.model_dump(mode="json"),
            created_at=datetime(2026, 3, 1, 12, 0, 0),  # naive -> treated as UTC
        )
    )
    assert naive.created_at.tzinfo is not None
    assert parse_use_case(serialize_use_case(naive)) == naive


def test_concurrent_readers_single_writer(embedder):
    import threading

    store = KnowledgeStore(embedder)
    for i in range(20):
        store.upsert_use_case(
            make_use_case(uc_id=f"uc-{i}", name=f"case {i}", description=f"drone meter case {i}"),
            refresh_updated_at=False,
        )
    errors: list[Exception] = []
    stop = threading.Event()

    def reader():
        while not stop.is_set():
            try:
                hits = store.retrieve(RetrievalQuery(text="drone meter case", n=5)).hits
                assert len(hits) <= 5
            except Exception as exc:  # pragma: no cover - surfaced via errors list
                errors.append(exc)
                return

    def writer():
        try:
            for i in range(20, 60):
                store.upsert_use_case(
                    make_use_case(
                        uc_id=f"uc-{i}", name=f"case {i}", description=f"drone meter case {i}"
                    ),
                    refresh_updated_at=False,
                )
        except Exception as exc:  # pragma: no cover
            errors.append(exc)

    readers = [threading.Thread(target=reader) for _ in range(4)]
    for thread in readers:
        thread.start()
    writer_thread = threading.Thread(target=writer)
    writer_thread.start()
    writer_thread.join()
    stop.set()
    for thread in readers:
        thread.join()
    assert errors == []
    assert store.index_size() == 60


def test_vote_upsert_replaces(embedder):
    store = KnowledgeStore(embedder)
    uc = make_use_case()
    store.upsert_use_case(uc)
    from netspec.ontology import utcnow
    from netspec.store import Vote

    store.put_vote(Vote(entity_id=uc.id, voter_handle="v1", value=VoteValue.UP, ts=utcnow()))
    tally = store.put_vote(Vote(entity_id=uc.id, voter_handle="v1", value=VoteValue.DOWN, ts=utcnow()))
    assert (tally.up, tally.down) == (0, 1)
