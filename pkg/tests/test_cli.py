import json
import subprocess
import sys

from conftest import pipeline_payload
from synthset.cli import main


def _check_output(capsys):
    captured = capsys.readouterr()
    return captured.out


def test_generate_validate_stats_flow(full_catalog_path, tmp_path, capsys):
    config_path = tmp_path / "config.json"
    payload = pipeline_payload(
        full_catalog_path,
        tmp_path / "out",
        plan={"total": 16, "seed": 5, "balance": "quota", "mode_mix": {"t2i": 1.0, "i2i": 0.0}},
        synthesis={"size": 96, "t2i": {"kind": "mock", "fault_profile": [0.1, 0.2]}},
    )
    config_path.write_text(json.dumps(payload))
    assert main(["generate", "--config", str(config_path)]) == 0
    out = json.loads(_check_output(capsys))
    assert out["accepted"] == 16

    assert main(["validate", str(tmp_path / "out")]) == 0
    assert "ok" in _check_output(capsys)

    assert main(["stats", str(tmp_path / "out")]) == 0
    stats_out = _check_output(capsys)
    assert '"balanced": true' in stats_out
    assert '"mean_seconds_per_image"' in stats_out


def test_generate_flags_override_config(full_catalog_path, tmp_path, capsys):
    # No config file at all: everything from flags.
    rc = main(
        [
            "generate",
            "--catalog",
            str(full_catalog_path),
            "--total",
            "8",
            "--balance",
            "quota",
            "--seed",
            "3",
            "--mode-mix",
            "t2i=1.0,i2i=0.0",
            "--backend",
            "mock",
            "--size",
            "96",
            "--detector",
            "mock-oracle",
            "--out",
            str(tmp_path / "flagrun"),
            "--workers",
            "2",
            "--no-augment",
        ]
    )
    assert rc == 0
    snapshot = json.loads((tmp_path / "flagrun" / "config.json").read_text())
    assert snapshot["config"]["plan"]["total"] == 8
    assert snapshot["config"]["augment"]["rotation_max_degrees"] == 0.0
    assert snapshot["config"]["synthesis"]["size"] == 96


def test_generate_missing_catalog_is_config_exit(tmp_path, capsys):
    rc = main(["generate", "--total", "8", "--out", str(tmp_path / "x")])
    assert rc == 2


def test_generate_backend_error_exit(full_catalog_path, tmp_path):
    config_path = tmp_path / "config.json"
    payload = pipeline_payload(
        full_catalog_path,
        tmp_path / "out",
        plan={"total": 8, "seed": 5, "balance": "quota", "mode_mix": {"t2i": 1.0, "i2i": 0.0}},
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
    config_path.write_text(json.dumps(payload))
    assert main(["generate", "--config", str(config_path)]) == 3


def test_generate_quota_failure_exit(full_catalog_path, tmp_path):
    config_path = tmp_path / "config.json"
    payload = pipeline_payload(
        full_catalog_path,
        tmp_path / "out",
        plan={"total": 8, "seed": 5, "balance": "quota", "mode_mix": {"t2i": 1.0, "i2i": 0.0}},
        synthesis={"size": 96, "t2i": {"kind": "mock", "fault_profile": [0.5, 0.5]}},
        max_attempts_per_slot=2,
    )
    config_path.write_text(json.dumps(payload))
    assert main(["generate", "--config", str(config_path)]) == 4


def test_validate_reports_problems(full_catalog_path, tmp_path, capsys):
    config_path = tmp_path / "config.json"
    payload = pipeline_payload(
        full_catalog_path,
        tmp_path / "out",
        plan={"total": 8, "seed": 5, "balance": "quota", "mode_mix": {"t2i": 1.0, "i2i": 0.0}},
        synthesis={"size": 96},
    )
    config_path.write_text(json.dumps(payload))
    main(["generate", "--config", str(config_path)])
    capsys.readouterr()
    # Break a label file.
    label = next((tmp_path / "out" / "labels").glob("*.txt"))
    label.write_text("7 0.5 0.5 0.5 0.5\n")
    assert main(["validate", str(tmp_path / "out")]) == 1
    assert "label file" in _check_output(capsys)


def test_split_command_prints_table(tmp_path, capsys):
    samples = tmp_path / "samples.csv"
    samples.write_text(
        "a0.png,Volkswagen,cam-a,100\n"
        "a1.png,Volkswagen,cam-a,200\n"
        "b0.png,Ford,cam-b,100\n"
        "b1.png,Ford,cam-b,4000\n",
        encoding="utf-8",
    )
    rule = tmp_path / "rule.json"
    rule.write_text(
        json.dumps(
            {
                "bucket_seconds": 3600,
                "assignment": {"cam-a|0": "validation", "cam-b|0": "validation", "cam-b|1": "test"},
            }
        )
    )
    rc = main(["split", "--samples", str(samples), "--rule", str(rule), "--out", str(tmp_path / "split")])
    assert rc == 0
    out = _check_output(capsys)
    assert "Volkswagen" in out and "total" in out
    assert (tmp_path / "split" / "validation.txt").read_text().splitlines() == [
        "a0.png",
        "a1.png",
        "b0.png",
    ]
    assert (tmp_path / "split" / "test.txt").read_text().splitlines() == ["b1.png"]


def test_split_missing_assignment_is_config_exit(tmp_path, capsys):
    samples = tmp_path / "samples.csv"
    samples.write_text("a0.png,Volkswagen,cam-a,100\n", encoding="utf-8")
    rule = tmp_path / "rule.json"
    rule.write_text(json.dumps({"assignment": {}}))
    assert main(["split", "--samples", str(samples), "--rule", str(rule)]) == 2


def test_eval_command_rounded_output(tmp_path, capsys):
    preds = tmp_path / "preds.csv"
    lines = []
    k = 0
    tallies = [("Volkswagen", 90), ("Ford", 3), ("BMW", 1), ("Mercedes", 3), ("Renault", 2)]
    for predicted, count in tallies:
        for _ in range(count):
            lines.append(f"s{k},Volkswagen,{predicted}")
            k += 1
    lines.append(f"s{k},Ford,Ford")
    preds.write_text("\n".join(lines) + "\n", encoding="utf-8")
    assert main(["eval", "--preds", str(preds), "--rounded", "--macro"]) == 0
    out = _check_output(capsys)
    assert "0.90" in out and "accuracy: 0.9100" in out
    assert "macro accuracy" in out


def test_curve_command_writes_artifacts(tmp_path, capsys):
    runs = tmp_path / "runs.csv"
    runs.write_text("12000,0.58\n12000,0.64\n25000,0.66\n25000,0.68\n", encoding="utf-8")
    rc = main(
        [
            "curve",
            "--runs",
            str(runs),
            "--csv",
            str(tmp_path / "curve.csv"),
            "--svg",
            str(tmp_path / "curve.svg"),
        ]
    )
    assert rc == 0
    out = _check_output(capsys)
    assert "12000" in out and "0.6100" in out
    assert (tmp_path / "curve.csv").exists()
    assert (tmp_path / "curve.svg").read_text().startswith("<svg")


def test_console_entrypoint_runs_as_module(full_catalog_path, tmp_path):
    result = subprocess.run(
        [
            sys.executable,
            "-m",
            "synthset",
            "generate",
            "--catalog",
            str(full_catalog_path),
            "--total",
            "8",
            "--balance",
            "quota",
            "--mode-mix",
            "t2i=1.0,i2i=0.0",
            "--size",
            "96",
            "--out",
            str(tmp_path / "m"),
        ],
        capture_output=True,
        text=True,
        timeout=120,
    )
    assert result.returncode == 0, result.stderr
    assert (tmp_path / "m" / "manifest.jsonl").exists()
