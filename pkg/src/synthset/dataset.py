"""Dataset persistence: manifests, detector-format label files, real-data
splitting and distribution reporting.

On-disk layout of a generated dataset:

    <out>/manifest.jsonl     one JSON record per accepted sample, append-only
    <out>/config.json        full pipeline config snapshot + content digest
    <out>/run_stats.json     accounting for the most recent run/resume session
    <out>/images/<brand>/<id>.png
    <out>/labels/<id>.txt    "<brand_index> <cx> <cy> <w> <h>" (center format)

The manifest writer flushes one line per record so a killed run loses at most
the record being written; everything already flushed stays readable.
"""

from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .errors import ConfigError, ConsistencyError
from .images import valid_norm_rect
from .sampler import Mode

ID_WIDTH = 6


def format_id(n: int) -> str:
    return f"{n:0{ID_WIDTH}d}"


@dataclass(frozen=True)
class SampleRecord:
    id: str
    image_path: str  # relative to the dataset directory
    brand: str
    brand_index: int
    model: str
    year: int
    color: str
    mode: Mode
    prompt: str
    bbox: tuple[float, float, float, float]  # normalized, in the synthesis image
    gate_score: float
    backend_model: str
    latency_seconds: float
    seed: int


def record_to_json(record: SampleRecord) -> str:
    payload = asdict(record)
    payload["mode"] = record.mode.value
    payload["bbox"] = list(record.bbox)
    return json.dumps(payload, separators=(",", ":"))


def record_from_json(line: str) -> SampleRecord:
    payload = json.loads(line)
    payload["mode"] = Mode(payload["mode"])
    payload["bbox"] = tuple(payload["bbox"])
    return SampleRecord(**payload)


class ManifestWriter:
    """Single-writer append log for sample records.

    Record ids must arrive dense and in order; a mismatch signals a
    concurrent-writer bug and raises instead of corrupting the dataset.
    """

    def __init__(self, path: str | Path, existing_count: int = 0):
        self.path = Path(path)
        self.count = existing_count
        self._fh = open(self.path, "a", encoding="utf-8")

    def append_record(self, record: SampleRecord) -> None:
        expected = format_id(self.count)
        if record.id != expected:
            raise ConsistencyError(f"record id {record.id!r} out of sequence, expected {expected!r}")
        self._fh.write(record_to_json(record) + "\n")
        self._fh.flush()
        self.count += 1

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "ManifestWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_manifest(path: str | Path) -> list[SampleRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            if line.strip() == "":
                continue
            try:
                records.append(record_from_json(line))
            except (ValueError, KeyError, TypeError) as exc:
                raise ConsistencyError(f"manifest line {i + 1} is corrupt: {exc}") from exc
    return records


def label_line(record: SampleRecord) -> str:
    """Center-format normalized bbox line used by detection tooling."""
    x, y, w, h = record.bbox
    cx = x + w / 2
    cy = y + h / 2
    return f"{record.brand_index} {cx:.6f} {cy:.6f} {w:.6f} {h:.6f}"


def write_label_file(record: SampleRecord, labels_dir: str | Path) -> Path:
    path = Path(labels_dir) / f"{record.id}.txt"
    path.write_text(label_line(record) + "\n", encoding="utf-8")
    return path


def parse_label_line(text: str) -> tuple[int, tuple[float, float, float, float]]:
    """Inverse of label_line: (brand_index, corner-format bbox at 6 decimals)."""
    parts = text.split()
    if len(parts) != 5:
        raise ConsistencyError(f"label line must have 5 fields, got {len(parts)}")
    idx = int(parts[0])
    cx, cy, w, h = (float(p) for p in parts[1:])
    return idx, (cx - w / 2, cy - h / 2, w, h)


@dataclass(frozen=True)
class RealSample:
    image_path: str
    brand: str
    camera_id: str
    recorded_at: int  # UTC epoch seconds


@dataclass(frozen=True)
class SplitRule:
    """Assignment of (camera, time bucket) keys to validation or test.

    Bucketing the recording time keeps repeated observations of the same
    moving car inside one split.
    """

    assignment: dict[tuple[str, int], str]
    bucket_seconds: int = 3600

    def __post_init__(self):
        if self.bucket_seconds < 1:
            raise ConfigError("bucket_seconds must be positive")
        bad = {v for v in self.assignment.values()} - {"validation", "test"}
        if bad:
            raise ConfigError(f"split assignment values must be validation/test, got {sorted(bad)}")

    def bucket(self, recorded_at: int) -> int:
        return recorded_at // self.bucket_seconds


def load_split_rule(path: str | Path) -> SplitRule:
    """Rule file: {"bucket_seconds": int, "assignment": {"camera|bucket": split}}."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        assignment = {}
        for key, split in payload["assignment"].items():
            camera, bucket = key.rsplit("|", 1)
            assignment[(camera, int(bucket))] = split
        return SplitRule(assignment, int(payload.get("bucket_seconds", 3600)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed split rule {path}: {exc}") from exc


def load_real_samples(path: str | Path) -> list[RealSample]:
    """CSV rows image_path,brand,camera_id,recorded_at (epoch seconds)."""
    import csv

    samples = []
    with open(path, encoding="utf-8", newline="") as fh:
        for i, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].strip().startswith("#"):
                continue
            if len(row) != 4:
                raise ConfigError(f"samples line {i}: expected 4 fields, got {len(row)}")
            try:
                samples.append(RealSample(row[0].strip(), row[1].strip(), row[2].strip(), int(row[3])))
            except ValueError as exc:
                raise ConfigError(f"samples line {i}: {exc}") from exc
    return samples


def split_real(samples: list[RealSample], rule: SplitRule) -> dict[str, list[RealSample]]:
    """Partition real samples by their (camera, time bucket) assignment.

    Every sample's key must be assigned; missing keys are reported together
    so the rule can be fixed in one pass.
    """
    missing = sorted(
        {
            (s.camera_id, rule.bucket(s.recorded_at))
            for s in samples
            if (s.camera_id, rule.bucket(s.recorded_at)) not in rule.assignment
        }
    )
    if missing:
        keys = ", ".join(f"{c}|{b}" for c, b in missing)
        raise ConfigError(f"split rule is missing assignments for: {keys}")
    out: dict[str, list[RealSample]] = {"validation": [], "test": []}
    for s in samples:
        out[rule.assignment[(s.camera_id, rule.bucket(s.recorded_at))]].append(s)
    return out


def split_distribution(
    split: dict[str, list[RealSample]], brands: tuple[str, ...]
) -> list[dict]:
    """Per-brand validation/test counts, one row per brand."""
    rows = []
    for brand in brands:
        rows.append(
            {
                "brand": brand,
                "validation": sum(1 for s in split["validation"] if s.brand == brand),
                "test": sum(1 for s in split["test"] if s.brand == brand),
            }
        )
    return rows


def dataset_stats(records: list[SampleRecord], brands: tuple[str, ...]) -> dict:
    """Per-brand/mode/color histograms plus the balance flag."""
    by_brand = {b: 0 for b in brands}
    by_mode = {m.value: 0 for m in Mode}
    by_color: dict[str, int] = {}
    for r in records:
        by_brand[r.brand] = by_brand.get(r.brand, 0) + 1
        by_mode[r.mode.value] += 1
        by_color[r.color] = by_color.get(r.color, 0) + 1
    counts = [by_brand[b] for b in brands]
    return {
        "records": len(records),
        "by_brand": by_brand,
        "by_mode": by_mode,
        "by_color": dict(sorted(by_color.items())),
        "balanced": len(records) > 0 and len(set(counts)) == 1,
    }


def validate_dataset(dataset_dir: str | Path) -> list[str]:
    """Check every structural invariant of a (possibly partial) dataset.

    Returns a list of human-readable problems; empty means valid.
    """
    dataset_dir = Path(dataset_dir)
    problems: list[str] = []

    config_path = dataset_dir / "config.json"
    manifest_path = dataset_dir / "manifest.jsonl"
    if not config_path.exists():
        return [f"missing {config_path.name}"]
    if not manifest_path.exists():
        return [f"missing {manifest_path.name}"]

    from .pipelineconfig import load_snapshot  # circular-import dodge

    try:
        config = load_snapshot(config_path)
    except ConfigError as exc:
        return [f"config snapshot: {exc}"]
    brands = tuple(config.catalog.brands)

    try:
        records = read_manifest(manifest_path)
    except ConsistencyError as exc:
        return [str(exc)]

    quota = None
    if config.plan.balance == "quota":
        quota = config.plan.total // len(brands)

    per_brand: dict[str, int] = {}
    for i, r in enumerate(records):
        where = f"record {i}"
        if r.id != format_id(i):
            problems.append(f"{where}: id {r.id!r} breaks dense ordering")
        if r.brand not in brands:
            problems.append(f"{where}: brand {r.brand!r} not in configured list")
        elif r.brand_index != brands.index(r.brand):
            problems.append(f"{where}: brand_index {r.brand_index} does not match {r.brand!r}")
        if not valid_norm_rect(r.bbox):
            problems.append(f"{where}: invalid bbox {r.bbox}")
        if r.latency_seconds < 0:
            problems.append(f"{where}: negative latency")
        if not (dataset_dir / r.image_path).exists():
            problems.append(f"{where}: missing image file {r.image_path}")
        label_path = dataset_dir / "labels" / f"{r.id}.txt"
        if not label_path.exists():
            problems.append(f"{where}: missing label file")
        elif label_path.read_text(encoding="utf-8") != label_line(r) + "\n":
            problems.append(f"{where}: label file does not match the record")
        per_brand[r.brand] = per_brand.get(r.brand, 0) + 1

    if quota is not None:
        for brand, n in per_brand.items():
            if n > quota:
                problems.append(f"brand {brand} exceeds quota: {n} > {quota}")
        if len(records) == config.plan.total:
            unequal = {b: n for b, n in per_brand.items() if n != quota}
            if unequal or len(per_brand) != len(brands):
                problems.append(f"completed quota run is unbalanced: {per_brand}")
    if len(records) > config.plan.total:
        problems.append(f"manifest has {len(records)} records, plan total is {config.plan.total}")
    return problems


def render_table(rows: list[dict], columns: list[str]) -> str:
    """Plain-text column rendering for CLI reports."""
    widths = {c: max(len(c), *(len(str(r.get(c, ""))) for r in rows)) if rows else len(c) for c in columns}
    out = io.StringIO()
    out.write("  ".join(c.ljust(widths[c]) for c in columns).rstrip() + "\n")
    for r in rows:
        out.write("  ".join(str(r.get(c, "")).ljust(widths[c]) for c in columns).rstrip() + "\n")
    return out.getvalue()
