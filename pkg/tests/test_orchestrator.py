import json
import shutil
from collections import Counter

import pytest

from conftest import pipeline_payload
from stats_helpers import binomial_within_sigma
from synthset.dataset import read_manifest, validate_dataset
from synthset.errors import ConfigError, QuotaExhaustedError, ResumeError, TransportError
from synthset.orchestrator import resume, run
from synthset.pipelineconfig import from_payload
from synthset.sampler import Mode


def _run(payload):
    return run(from_payload(payload))


def test_no_fault_quota_run_accepts_everything(full_catalog_path, tmp_path):
    payload = pipeline_payload(
        full_catalog_path,
        tmp_path / "out",
        plan={"total": 80, "seed": 5, "balance": "quota", "mode_mix": {"t2i": 1.0, "i2i": 0.0}},
        synthesis={"size": 128, "t2i": {"kind": "mock", "fault_profile": [0.0, 0.0]}},
    )
    stats = _run(payload)
    assert stats.accepted == 80
    assert stats.rejected == {}
    assert stats.attempts == 80
    records = read_manifest(tmp_path / "out" / "manifest.jsonl")
    counts = Counter(r.brand for r in records)
    assert set(counts.values()) == {10}
    assert validate_dataset(tmp_path / "out") == []


def test_faulty_run_preserves_quota_and_matches_rejection_model(full_catalog_path, tmp_path):
    payload = pipeline_payload(
        full_catalog_path,
        tmp_path / "out",
        plan={"total": 800, "seed": 9, "balance": "quota", "mode_mix": {"t2i": 1.0, "i2i": 0.0}},
        synthesis={"size": 96, "t2i": {"kind": "mock", "fault_profile": [0.1, 0.2]}},
        workers=4,
    )
    stats = _run(payload)
    assert stats.accepted == 800
    records = read_manifest(tmp_path / "out" / "manifest.jsonl")
    assert set(Counter(r.brand for r in records).values()) == {100}

    # Attempts follow a sum of 800 geometrics at p=0.7.
    mean = 800 / 0.7
    sigma = (800 * 0.3) ** 0.5 / 0.7
    assert abs(stats.attempts - mean) <= 3.5 * sigma
    # Conservation and the 1:2 no-car:multiple-cars split.
    rejected_total = sum(stats.rejected.values())
    assert stats.accepted + rejected_total == stats.attempts
    assert binomial_within_sigma(stats.rejected.get("no_car", 0), rejected_total, 1 / 3)


def test_single_worker_double_run_is_byte_identical(full_catalog_path, tmp_path):
    manifests = []
    images = []
    for name in ("a", "b"):
        payload = pipeline_payload(
            full_catalog_path,
            tmp_path / name,
            plan={"total": 40, "seed": 77, "balance": "quota", "mode_mix": {"t2i": 1.0, "i2i": 0.0}},
            synthesis={"size": 96, "t2i": {"kind": "mock", "fault_profile": [0.1, 0.2]}},
        )
        _run(payload)
        manifests.append((tmp_path / name / "manifest.jsonl").read_bytes())
        images.append(
            [p.read_bytes() for p in sorted((tmp_path / name / "images").rglob("*.png"))]
        )
    assert manifests[0] == manifests[1]
    assert images[0] == images[1]


def test_worker_counts_share_record_content(full_catalog_path, tmp_path):
    per_worker = {}
    for workers in (1, 4, 16):
        payload = pipeline_payload(
            full_catalog_path,
            tmp_path / f"w{workers}",
            plan={"total": 64, "seed": 13, "balance": "quota", "mode_mix": {"t2i": 1.0, "i2i": 0.0}},
            synthesis={"size": 96, "t2i": {"kind": "mock", "fault_profile": [0.1, 0.2]}},
            workers=workers,
        )
        _run(payload)
        records = read_manifest(tmp_path / f"w{workers}" / "manifest.jsonl")
        assert [r.id for r in records] == [f"{i:06d}" for i in range(64)]
        assert validate_dataset(tmp_path / f"w{workers}") == []
        per_worker[workers] = Counter((r.brand, r.model, r.year, r.color) for r in records)
    # Slot content is a pure function of (seed, slot, attempt), so the record
    # multiset cannot depend on scheduling.
    assert per_worker[1] == per_worker[4] == per_worker[16]


def test_mixed_modes_use_base_pool(full_catalog_path, tmp_path, base_pool_dir):
    payload = pipeline_payload(
        full_catalog_path,
        tmp_path / "out",
        plan={"total": 16, "seed": 3, "balance": "quota", "mode_mix": {"t2i": 0.5, "i2i": 0.5}},
        synthesis={
            "size": 96,
            "t2i": {"kind": "mock", "fault_profile": [0.0, 0.0]},
            "i2i": {"kind": "mock", "fault_profile": [0.0, 0.0]},
        },
        base_pool={"path": str(base_pool_dir / "pool.json")},
        workers=2,
    )
    stats = _run(payload)
    assert stats.accepted == 16
    records = read_manifest(tmp_path / "out" / "manifest.jsonl")
    modes = Counter(r.mode for r in records)
    assert modes[Mode.TEXT_TO_IMAGE] == 8
    assert modes[Mode.IMAGE_TO_IMAGE] == 8
    assert stats.per_mode_latency_mean["i2i"] is not None


def test_i2i_without_pool_is_config_error(full_catalog_path, tmp_path):
    payload = pipeline_payload(
        full_catalog_path,
        tmp_path / "out",
        plan={"total": 16, "seed": 3, "balance": "quota", "mode_mix": {"t2i": 0.5, "i2i": 0.5}},
        synthesis={"size": 96},
    )
    with pytest.raises(ConfigError, match="base_pool"):
        _run(payload)


def test_resume_after_truncation_reproduces_serial_content(full_catalog_path, tmp_path):
    payload = pipeline_payload(
        full_catalog_path,
        tmp_path / "full",
        plan={"total": 48, "seed": 21, "balance": "quota", "mode_mix": {"t2i": 1.0, "i2i": 0.0}},
        synthesis={"size": 96, "t2i": {"kind": "mock", "fault_profile": [0.1, 0.2]}},
    )
    _run(payload)
    full_manifest = (tmp_path / "full" / "manifest.jsonl").read_bytes()

    # Simulate a crash: copy the directory, keep only the first 17 records.
    crashed = tmp_path / "crashed"
    shutil.copytree(tmp_path / "full", crashed)
    lines = (crashed / "manifest.jsonl").read_bytes().splitlines(keepends=True)
    (crashed / "manifest.jsonl").write_bytes(b"".join(lines[:17]))
    (crashed / "run_stats.json").unlink()

    assert validate_dataset(crashed) == []
    stats = resume(crashed)
    assert stats.accepted == 48 - 17
    resumed = (crashed / "manifest.jsonl").read_bytes()
    assert resumed == full_manifest
    assert validate_dataset(crashed) == []


def test_resume_of_completed_run_is_noop(full_catalog_path, tmp_path):
    payload = pipeline_payload(
        full_catalog_path,
        tmp_path / "out",
        plan={"total": 16, "seed": 2, "balance": "quota", "mode_mix": {"t2i": 1.0, "i2i": 0.0}},
        synthesis={"size": 96},
    )
    _run(payload)
    before = (tmp_path / "out" / "manifest.jsonl").read_bytes()
    stats = resume(tmp_path / "out")
    assert stats.accepted == 0
    assert (tmp_path / "out" / "manifest.jsonl").read_bytes() == before


def test_resume_refuses_tampered_snapshot(full_catalog_path, tmp_path):
    payload = pipeline_payload(
        full_catalog_path,
        tmp_path / "out",
        plan={"total": 16, "seed": 2, "balance": "quota", "mode_mix": {"t2i": 1.0, "i2i": 0.0}},
        synthesis={"size": 96},
    )
    _run(payload)
    snapshot_path = tmp_path / "out" / "config.json"
    doc = json.loads(snapshot_path.read_text())
    doc["config"]["plan"]["seed"] = 999
    snapshot_path.write_text(json.dumps(doc))
    with pytest.raises(ConfigError, match="digest mismatch"):
        resume(tmp_path / "out")


def test_resume_refuses_mismatched_config(full_catalog_path, tmp_path):
    payload = pipeline_payload(
        full_catalog_path,
        tmp_path / "out",
        plan={"total": 16, "seed": 2, "balance": "quota", "mode_mix": {"t2i": 1.0, "i2i": 0.0}},
        synthesis={"size": 96},
    )
    _run(payload)
    payload["plan"]["seed"] = 3
    with pytest.raises(ResumeError, match="refusing to resume"):
        run(from_payload(payload), resume=True)


def test_fresh_run_refuses_existing_manifest(full_catalog_path, tmp_path):
    payload = pipeline_payload(
        full_catalog_path,
        tmp_path / "out",
        plan={"total": 8, "seed": 2, "balance": "quota", "mode_mix": {"t2i": 1.0, "i2i": 0.0}},
        synthesis={"size": 96},
    )
    _run(payload)
    with pytest.raises(ConfigError, match="already exists"):
        _run(payload)


def test_slot_exhaustion_aborts_with_failure_report(full_catalog_path, tmp_path):
    # p_zero + p_two = 1: the gate can never accept, every slot must exhaust.
    payload = pipeline_payload(
        full_catalog_path,
        tmp_path / "out",
        plan={"total": 8, "seed": 2, "balance": "quota", "mode_mix": {"t2i": 1.0, "i2i": 0.0}},
        synthesis={"size": 96, "t2i": {"kind": "mock", "fault_profile": [0.5, 0.5]}},
        max_attempts_per_slot=3,
    )
    with pytest.raises(QuotaExhaustedError, match="exhausted 3 attempts") as excinfo:
        _run(payload)
    assert excinfo.value.failures  # names the (brand, model) distribution
    # The partial output stays structurally valid.
    assert validate_dataset(tmp_path / "out") == []


def test_unreachable_http_backend_fails_fast(full_catalog_path, tmp_path):
    payload = pipeline_payload(
        full_catalog_path,
        tmp_path / "out",
        plan={"total": 8, "seed": 2, "balance": "quota", "mode_mix": {"t2i": 1.0, "i2i": 0.0}},
        synthesis={
            "size": 96,
            "t2i": {
                "kind": "http",
                "url": "http://127.0.0.1:9",
                "timeout_secs": 0.2,
                "retry_base_seconds": 0.001,
                "retry_max_attempts": 2,
            },
        },
    )
    with pytest.raises(TransportError):
        _run(payload)
    # Health check runs before any output is produced.
    assert not (tmp_path / "out" / "manifest.jsonl").exists()


def test_keep_rejected_stores_audit_copies(full_catalog_path, tmp_path):
    payload = pipeline_payload(
        full_catalog_path,
        tmp_path / "out",
        plan={"total": 24, "seed": 4, "balance": "quota", "mode_mix": {"t2i": 1.0, "i2i": 0.0}},
        synthesis={"size": 96, "t2i": {"kind": "mock", "fault_profile": [0.2, 0.3]}},
        keep_rejected=True,
    )
    stats = _run(payload)
    stored = list((tmp_path / "out" / "rejected").rglob("*.png"))
    assert len(stored) == sum(stats.rejected.values())
    reasons = {p.parent.name for p in stored}
    assert reasons <= {"no_car", "multiple_cars", "low_confidence"}


def test_run_stats_written_and_conserved(full_catalog_path, tmp_path):
    payload = pipeline_payload(
        full_catalog_path,
        tmp_path / "out",
        plan={"total": 40, "seed": 6, "balance": "quota", "mode_mix": {"t2i": 1.0, "i2i": 0.0}},
        synthesis={"size": 96, "t2i": {"kind": "mock", "fault_profile": [0.1, 0.2]}},
    )
    stats = _run(payload)
    payload_on_disk = json.loads((tmp_path / "out" / "run_stats.json").read_text())
    assert payload_on_disk["accepted"] == stats.accepted == 40
    assert payload_on_disk["accepted"] + sum(payload_on_disk["rejected"].values()) == payload_on_disk["attempts"]
    assert payload_on_disk["attempts"] >= payload_on_disk["accepted"]
    assert payload_on_disk["wall_seconds"] > 0


def test_iid_balance_mode_runs_and_validates(full_catalog_path, tmp_path):
    payload = pipeline_payload(
        full_catalog_path,
        tmp_path / "out",
        plan={"total": 60, "seed": 8, "balance": "iid", "mode_mix": {"t2i": 1.0, "i2i": 0.0}},
        synthesis={"size": 96, "t2i": {"kind": "mock", "fault_profile": [0.1, 0.2]}},
        workers=2,
    )
    stats = _run(payload)
    assert stats.accepted == 60
    assert validate_dataset(tmp_path / "out") == []
    # Rejection redraws stay within the slot's brand even in iid mode.
    records = read_manifest(tmp_path / "out" / "manifest.jsonl")
    assert len(records) == 60
