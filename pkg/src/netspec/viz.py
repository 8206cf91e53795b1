"""Radar-chart rendering to image files, plus delimited and textual axis tables."""

from __future__ import annotations

import csv
import math
import re
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .engine import RadarAxes
from .ontology import CommunicationProcess

_AXIS_LABELS = {
    "user_experienced_data_rate_mbps": "UX data rate",
    "latency_ms": "latency",
    "mobility_kmph": "mobility",
    "reliability_percentage": "reliability",
    "connectivity_density_per_m2": "conn. density",
    "area_traffic_capacity_mbps_per_m2": "area capacity",
    "position_accuracy_cm": "positioning",
    "peak_data_rate_gbps": "peak data rate",
}


def _slug(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-") or "process"


def render_radar_png(radar: RadarAxes, title: str, path: Path) -> Path:
    """Draw one process's eight normalized axes as a closed radar polygon."""
    angles = [2 * math.pi * i / len(radar.order) for i in range(len(radar.order))]
    values = [radar.axes[m] for m in radar.order]
    angles_closed = angles + angles[:1]
    values_closed = values + values[:1]

    fig, ax = plt.subplots(figsize=(5, 5), subplot_kw={"projection": "polar"})
    ax.plot(angles_closed, values_closed, color="#2a6f97", linewidth=2)
    ax.fill(angles_closed, values_closed, color="#2a6f97", alpha=0.25)
    ax.set_xticks(angles)
    ax.set_xticklabels([_AXIS_LABELS[m] for m in radar.order], fontsize=8)
    ax.set_ylim(0.0, 1.0)
    ax.set_yticks([0.25, 0.5, 0.75, 1.0])
    ax.set_yticklabels(["0.25", "0.5", "0.75", "1"], fontsize=7)
    ax.set_title(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_radar_charts(
    processes: Sequence[CommunicationProcess],
    radars: Sequence[RadarAxes],
    out_dir: str | Path,
) -> list[Path]:
    """One PNG per process plus a radar.csv with every axis value, raw value and unit."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, (process, radar) in enumerate(zip(processes, radars)):
        path = out / f"radar_{i:02d}_{_slug(process.name)}.png"
        paths.append(render_radar_png(radar, process.name, path))
    csv_path = out / "radar.csv"
    write_radar_csv(processes, radars, csv_path)
    paths.append(csv_path)
    return paths


def write_radar_csv(
    processes: Sequence[CommunicationProcess],
    radars: Sequence[RadarAxes],
    path: str | Path,
) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["process", "metric", "raw_value", "unit", "axis"])
        for process, radar in zip(processes, radars):
            for metric in radar.order:
                raw = radar.raw[metric]
                writer.writerow(
                    [
                        process.name,
                        metric,
                        "" if raw is None else repr(raw),
                        radar.units[metric],
                        repr(radar.axes[metric]),
                    ]
                )
    return path


def radar_table(processes: Sequence[CommunicationProcess], radars: Sequence[RadarAxes]) -> str:
    """Fixed-width text table of axis values, one block per process."""
    lines: list[str] = []
    for process, radar in zip(processes, radars):
        lines.append(f"process: {process.name} [{process.direction.value}]")
        for metric in radar.order:
            raw = radar.raw[metric]
            raw_text = "-" if raw is None else f"{raw:g} {radar.units[metric]}"
            bar = "#" * round(radar.axes[metric] * 20)
            lines.append(f"  {metric:<36} {radar.axes[metric]:6.3f} |{bar:<20}| {raw_text}")
        lines.append("")
    return "\n".join(lines)
