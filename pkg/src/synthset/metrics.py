"""Evaluation math: confusion matrices, accuracies, learning-curve
aggregation, and throughput accounting.

Prediction files are line-delimited `sample_id,actual,predicted` text; run
files for the learning curve are `dataset_size,accuracy` rows, one per
repetition. The matrix renderer works in integer hundredths truncated toward
zero and leaves zero-count cells blank, which is why rendered rows of such
tables sum to slightly under 1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .sampler import Mode


@dataclass(frozen=True)
class PredictionRow:
    sample_id: str
    actual: str
    predicted: str


@dataclass(frozen=True)
class ConfusionMatrix:
    brands: tuple[str, ...]
    counts: tuple[tuple[int, ...], ...]  # rows = actual, cols = predicted

    @property
    def row_normalized(self) -> tuple[tuple[float, ...], ...]:
        rows = []
        for row in self.counts:
            total = sum(row)
            rows.append(tuple((c / total if total else 0.0) for c in row))
        return tuple(rows)

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts)


def load_predictions(path: str | Path) -> list[PredictionRow]:
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        for i, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].strip().startswith("#"):
                continue
            if len(row) != 3:
                raise ConfigError(f"predictions line {i}: expected 3 fields, got {len(row)}")
            rows.append(PredictionRow(row[0].strip(), row[1].strip(), row[2].strip()))
    return rows


def confusion(preds: list[PredictionRow], brands: tuple[str, ...]) -> ConfusionMatrix:
    if not preds:
        raise ConfigError("prediction set is empty")
    index = {b: i for i, b in enumerate(brands)}
    counts = [[0] * len(brands) for _ in brands]
    for i, p in enumerate(preds):
        if p.actual not in index:
            raise ConfigError(f"prediction row {i} ({p.sample_id}): unknown actual brand {p.actual!r}")
        if p.predicted not in index:
            raise ConfigError(
                f"prediction row {i} ({p.sample_id}): unknown predicted brand {p.predicted!r}"
            )
        counts[index[p.actual]][index[p.predicted]] += 1
    return ConfusionMatrix(tuple(brands), tuple(tuple(r) for r in counts))


def accuracy(preds: list[PredictionRow], brands: tuple[str, ...]) -> float:
    cm = confusion(preds, brands)
    correct = sum(cm.counts[i][i] for i in range(len(brands)))
    return correct / cm.total


def per_class_accuracy(preds: list[PredictionRow], brands: tuple[str, ...]) -> dict[str, float]:
    cm = confusion(preds, brands)
    norm = cm.row_normalized
    return {b: norm[i][i] for i, b in enumerate(brands)}


def macro_accuracy(preds: list[PredictionRow], brands: tuple[str, ...]) -> float:
    """Mean of per-class accuracies over classes that actually occur."""
    cm = confusion(preds, brands)
    diags = [
        cm.counts[i][i] / sum(cm.counts[i]) for i in range(len(brands)) if sum(cm.counts[i]) > 0
    ]
    return sum(diags) / len(diags)


def cell_hundredths(count: int, row_total: int) -> int:
    """Truncated integer hundredths of count/row_total (exact integer math)."""
    if row_total == 0:
        return 0
    return (100 * count) // row_total


def render_normalized(cm: ConfusionMatrix) -> list[list[str]]:
    """Two-decimal truncated rendering; zero-count cells render blank."""
    out = []
    for row in cm.counts:
        total = sum(row)
        cells = []
        for c in row:
            if c == 0:
                cells.append("")
            else:
                q = cell_hundredths(c, total)
                cells.append(f"{q // 100}.{q % 100:02d}")
        out.append(cells)
    return out


@dataclass(frozen=True)
class RunSeries:
    points: list[dict]  # {"dataset_size": int, "accuracies": [float, ...]}


def load_runs(path: str | Path) -> RunSeries:
    grouped: dict[int, list[float]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for i, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].strip().startswith("#") or row[0].strip() == "dataset_size":
                continue
            if len(row) != 2:
                raise ConfigError(f"runs line {i}: expected dataset_size,accuracy")
            try:
                grouped.setdefault(int(row[0]), []).append(float(row[1]))
            except ValueError as exc:
                raise ConfigError(f"runs line {i}: {exc}") from exc
    if not grouped:
        raise ConfigError(f"no run rows in {path}")
    return RunSeries([{"dataset_size": k, "accuracies": v} for k, v in sorted(grouped.items())])


def aggregate_runs(series: RunSeries) -> list[dict]:
    """Per-size mean, population std, and the one-std band, sorted by size.

    Sums go through math.fsum so the statistics are exactly invariant under
    permutation of the repetitions.
    """
    rows = []
    for point in sorted(series.points, key=lambda p: p["dataset_size"]):
        accs = point["accuracies"]
        if not accs:
            raise ConfigError(f"dataset size {point['dataset_size']} has no repetitions")
        mean = math.fsum(accs) / len(accs)
        std = math.sqrt(math.fsum((a - mean) ** 2 for a in accs) / len(accs))  # population
        rows.append(
            {
                "dataset_size": point["dataset_size"],
                "repetitions": len(accs),
                "mean": mean,
                "std": std,
                "band_low": mean - std,
                "band_high": mean + std,
            }
        )
    return rows


def curve_csv(rows: list[dict]) -> str:
    out = ["dataset_size,repetitions,mean,std,band_low,band_high"]
    for r in rows:
        out.append(
            f"{r['dataset_size']},{r['repetitions']},{r['mean']!r},{r['std']!r},"
            f"{r['band_low']!r},{r['band_high']!r}"
        )
    return "\n".join(out) + "\n"


def curve_svg(rows: list[dict], width: int = 640, height: int = 360) -> str:
    """Minimal standalone SVG: mean polyline over a one-std band, log-x."""
    pad = 48
    xs = [math.log10(r["dataset_size"]) for r in rows]
    los = [r["band_low"] for r in rows]
    his = [r["band_high"] for r in rows]
    x_min, x_max = min(xs), max(xs)
    y_min = min(los) - 0.02
    y_max = max(his) + 0.02

    def px(x: float) -> float:
        span = (x_max - x_min) or 1.0
        return pad + (x - x_min) / span * (width - 2 * pad)

    def py(y: float) -> float:
        span = (y_max - y_min) or 1.0
        return height - pad - (y - y_min) / span * (height - 2 * pad)

    band_pts = [f"{px(x):.1f},{py(hi):.1f}" for x, hi in zip(xs, his)]
    band_pts += [f"{px(x):.1f},{py(lo):.1f}" for x, lo in zip(reversed(xs), reversed(los))]
    mean_pts = " ".join(f"{px(x):.1f},{py(r['mean']):.1f}" for x, r in zip(xs, rows))
    ticks = []
    for r, x in zip(rows, xs):
        ticks.append(
            f'<text x="{px(x):.1f}" y="{height - pad + 16}" font-size="10" '
            f'text-anchor="middle">{r["dataset_size"]}</text>'
        )
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">'
        f'<rect width="{width}" height="{height}" fill="white"/>'
        f'<polygon points="{" ".join(band_pts)}" fill="#87aade" opacity="0.35"/>'
        f'<polyline points="{mean_pts}" fill="none" stroke="#2255aa" stroke-width="2"/>'
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>'
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>'
        + "".join(ticks)
        + "</svg>"
    )


def throughput_report(records) -> dict:
    """Image counts and mean seconds per image, overall and per mode."""
    per_mode: dict[str, list[float]] = {m.value: [] for m in Mode}
    for r in records:
        per_mode[r.mode.value].append(r.latency_seconds)
    all_latencies = [v for vals in per_mode.values() for v in vals]
    report = {
        "images": len(all_latencies),
        "wall_seconds": sum(all_latencies),
        "mean_seconds_per_image": (sum(all_latencies) / len(all_latencies)) if all_latencies else 0.0,
        "per_mode": {},
    }
    for mode, vals in per_mode.items():
        report["per_mode"][mode] = {
            "images": len(vals),
            "mean_seconds_per_image": (sum(vals) / len(vals)) if vals else 0.0,
        }
    return report
