import json
import sys

import pytest

from netspec.cli import main

from conftest import DOCUMENT_PATH, RULES_PATH, SEED_PATH


@pytest.fixture
def cli_config(tmp_path):
    config = {
        "data_dir": str(tmp_path / "data"),
        "embedding": {"kind": "deterministic_local", "dimension": 256},
        "generation": {"kind": "scripted", "script_path": str(RULES_PATH)},
        "operator_key": "test-key",
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    return path


def run_cli(capsys, *argv) -> tuple[int, str, str]:
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_init_publishes_seed(cli_config, capsys):
    code, out, err = run_cli(capsys, "--config", str(cli_config), "init", "--seed", str(SEED_PATH))
    assert code == 0
    assert out.count("published") == 7


def test_init_rerun_is_idempotent(cli_config, capsys):
    run_cli(capsys, "--config", str(cli_config), "init", "--seed", str(SEED_PATH))
    code, out, _ = run_cli(capsys, "--config", str(cli_config), "init", "--seed", str(SEED_PATH))
    assert code == 0
    assert out.count("skipped") == 7
    assert "published" not in out


def test_init_reports_invalid_entry(cli_config, tmp_path, capsys):
    entries = json.loads(SEED_PATH.read_text(encoding="utf-8"))
    entries.append({"name": "Broken entry", "description": "no processes", "processes": []})
    seed = tmp_path / "seed_with_bad.json"
    seed.write_text(json.dumps(entries), encoding="utf-8")
    code, out, err = run_cli(capsys, "--config", str(cli_config), "init", "--seed", str(seed))
    assert code == 1
    assert "Broken entry" in out
    code, out, _ = run_cli(
        capsys, "--config", str(cli_config), "init", "--seed", str(seed), "--skip-invalid"
    )
    assert code == 0


def test_init_missing_seed_file_is_io_error(cli_config, capsys):
    code, _, err = run_cli(capsys, "--config", str(cli_config), "init", "--seed", "/no/such/file.json")
    assert code == 2
    assert err


def test_query_outputs_valid_outcome_json(cli_config, capsys):
    run_cli(capsys, "--config", str(cli_config), "init", "--seed", str(SEED_PATH))
    code, out, err = run_cli(
        capsys,
        "--config",
        str(cli_config),
        "query",
        "--name",
        "Port logistics automation",
        "--description",
        "Automated container handling with remote crane teleoperation.",
    )
    assert code == 0
    outcome = json.loads(out)
    assert len(outcome["processes"]) >= 1
    assert outcome["validation"]["valid"] is True
    assert outcome["similar_use_cases"]["hits"]
    assert "latency_ms" in err  # radar table goes to stderr


def test_query_bit_reproducible(cli_config, capsys):
    run_cli(capsys, "--config", str(cli_config), "init", "--seed", str(SEED_PATH))
    args = (
        "--config", str(cli_config), "query",
        "--name", "Port logistics automation",
        "--description", "Automated container handling with remote crane teleoperation.",
    )
    _, first, _ = run_cli(capsys, *args)
    _, second, _ = run_cli(capsys, *args)
    assert first == second


def test_query_writes_figures(cli_config, tmp_path, capsys):
    run_cli(capsys, "--config", str(cli_config), "init", "--seed", str(SEED_PATH))
    figures = tmp_path / "figures"
    code, out, err = run_cli(
        capsys,
        "--config",
        str(cli_config),
        "query",
        "--name",
        "Port logistics automation",
        "--description",
        "Automated container handling with remote crane teleoperation.",
        "--figures",
        str(figures),
    )
    assert code == 0
    pngs = sorted(figures.glob("*.png"))
    assert len(pngs) == 3
    csv_text = (figures / "radar.csv").read_text(encoding="utf-8")
    assert csv_text.splitlines()[0] == "process,metric,raw_value,unit,axis"
    assert "Crane teleoperation video" in csv_text


def test_query_provider_failure_exit_code(cli_config, tmp_path, capsys):
    run_cli(capsys, "--config", str(cli_config), "init", "--seed", str(SEED_PATH))
    code, out, err = run_cli(
        capsys,
        "--config",
        str(cli_config),
        "query",
        "--name",
        "Unmatched",
        "--description",
        "nothing in the script matches this text",
    )
    assert code == 1
    assert err and not out


def test_query_unembeddable_description_fails_cleanly(cli_config, capsys):
    code, out, err = run_cli(
        capsys,
        "--config",
        str(cli_config),
        "query",
        "--name",
        "!!!",
        "--description",
        "??? ---",
    )
    assert code == 1
    assert not out and err


def test_ingest_prints_draft_ids(cli_config, capsys):
    code, out, err = run_cli(capsys, "--config", str(cli_config), "ingest", str(DOCUMENT_PATH))
    assert code == 0
    draft_ids = [line for line in out.splitlines() if line]
    assert len(draft_ids) == 2


def test_ingest_empty_file(cli_config, tmp_path, capsys):
    empty = tmp_path / "empty.txt"
    empty.write_text("  \n", encoding="utf-8")
    code, _, err = run_cli(capsys, "--config", str(cli_config), "ingest", str(empty))
    assert code == 1


def test_export_import_byte_identical(cli_config, tmp_path, capsys):
    run_cli(capsys, "--config", str(cli_config), "init", "--seed", str(SEED_PATH))
    first_export = tmp_path / "export1.json"
    second_export = tmp_path / "export2.json"
    code, _, _ = run_cli(capsys, "--config", str(cli_config), "export", str(first_export))
    assert code == 0
    code, _, _ = run_cli(capsys, "--config", str(cli_config), "import", str(first_export))
    assert code == 0
    code, _, _ = run_cli(capsys, "--config", str(cli_config), "export", str(second_export))
    assert code == 0
    assert first_export.read_bytes() == second_export.read_bytes()


def test_import_corrupt_snapshot(cli_config, tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema_version": 1, "use_cases": [', encoding="utf-8")
    code, _, err = run_cli(capsys, "--config", str(cli_config), "import", str(bad))
    assert code == 1


def test_json_flag_machine_readable(cli_config, capsys):
    code, out, _ = run_cli(
        capsys, "--config", str(cli_config), "--json", "init", "--seed", str(SEED_PATH)
    )
    assert code == 0
    assert json.loads(out)["results"][0]["result"] == "published"


def test_env_override_wins(cli_config, tmp_path, monkeypatch, capsys):
    override = tmp_path / "override-data"
    monkeypatch.setenv("NETSPEC_DATA_DIR", str(override))
    code, _, _ = run_cli(capsys, "--config", str(cli_config), "init", "--seed", str(SEED_PATH))
    assert code == 0
    assert (override / "store.json").exists()


def test_serve_runs_and_shuts_down_cleanly(cli_config, tmp_path, capsys):
    import signal
    import socket
    import subprocess
    import time
    import urllib.request

    run_cli(capsys, "--config", str(cli_config), "init", "--seed", str(SEED_PATH))
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    proc = subprocess.Popen(
        [
            sys.executable, "-m", "netspec.cli",
            "--config", str(cli_config),
            "serve", "--host", "127.0.0.1", "--port", str(port),
        ],
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
    )
    try:
        deadline = time.time() + 20
        body = None
        while time.time() < deadline:
            try:
                with urllib.request.urlopen(
                    f"http://127.0.0.1:{port}/api/v1/use-cases", timeout=1
                ) as response:
                    body = json.loads(response.read())
                break
            except OSError:
                time.sleep(0.2)
        assert body is not None and body["total"] == 7
        proc.send_signal(signal.SIGINT)
        proc.wait(timeout=20)
        assert proc.returncode == 0
    finally:
        if proc.poll() is None:
            proc.kill()
