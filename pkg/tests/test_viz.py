from netspec.engine import radar_axes
from netspec.ontology import DEFAULT_RANGES
from netspec.viz import radar_table, render_radar_png, save_radar_charts, write_radar_csv

from conftest import make_process


def _fixtures():
    processes = [
        make_process(name="video feed", latency_ms=10.0, user_experienced_data_rate_mbps=200.0),
        make_process(name="control loop", latency_ms=1.0, reliability_percentage=99.999),
    ]
    radars = [radar_axes(p.specification, DEFAULT_RANGES) for p in processes]
    return processes, radars


def test_render_radar_png(tmp_path):
    processes, radars = _fixtures()
    path = render_radar_png(radars[0], processes[0].name, tmp_path / "one.png")
    assert path.exists() and path.stat().st_size > 0
    assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_save_radar_charts_writes_figures_and_csv(tmp_path):
    processes, radars = _fixtures()
    paths = save_radar_charts(processes, radars, tmp_path)
    pngs = [p for p in paths if p.suffix == ".png"]
    assert len(pngs) == 2
    csv_path = tmp_path / "radar.csv"
    assert csv_path.exists()
    lines = csv_path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "process,metric,raw_value,unit,axis"
    assert len(lines) == 1 + 2 * 8  # header + 8 metrics per process


def test_radar_csv_blank_for_absent_metrics(tmp_path):
    processes, radars = _fixtures()
    write_radar_csv(processes, radars, tmp_path / "axes.csv")
    rows = (tmp_path / "axes.csv").read_text(encoding="utf-8").splitlines()[1:]
    absent = [r for r in rows if r.split(",")[1] == "peak_data_rate_gbps"]
    assert all(row.split(",")[2] == "" for row in absent)


def test_radar_table_lists_every_metric():
    processes, radars = _fixtures()
    table = radar_table(processes, radars)
    assert "video feed" in table and "control loop" in table
    for metric in radars[0].order:
        assert metric in table
