import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for stub_server

from synthset.catalog import load_catalog
from synthset.images import save_png
from synthset.sampler import PromptText
from synthset.synthesis import FaultProfile, mock_render

FIXTURES = Path(__file__).parent / "fixtures"
SCHEMAS = Path(__file__).parent.parent / "schemas"


def load_schema(name: str) -> dict:
    return json.loads((SCHEMAS / f"{name}.schema.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def small_catalog_path() -> Path:
    return FIXTURES / "catalog_small.csv"


@pytest.fixture(scope="session")
def full_catalog_path() -> Path:
    return FIXTURES / "catalog_full.csv"


@pytest.fixture(scope="session")
def full_catalog(full_catalog_path):
    catalog, _ = load_catalog(full_catalog_path)
    return catalog


@pytest.fixture()
def base_pool_dir(tmp_path) -> Path:
    """A tiny img2img base pool: procedurally rendered 'photos' + manifest."""
    pool = tmp_path / "pool"
    pool.mkdir()
    entries = []
    for i in range(3):
        img = mock_render(
            PromptText(f"pool source {i}", f"pool source {i}"),
            9000 + i,
            FaultProfile(),
            640,
            480,
        )
        save_png(img, pool / f"base{i}.png")
        entries.append(
            {
                "path": f"base{i}.png",
                "source_id": f"camera-{i}",
                "brand": "Toyota",
                "bbox": [0.2, 0.25, 0.5, 0.5],
            }
        )
    (pool / "pool.json").write_text(json.dumps(entries), encoding="utf-8")
    return pool


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            if "test_acceptance" in report.nodeid and getattr(report, "when", "call") == "call":
                name = report.nodeid.split("::")[-1]
                lines.append((name, outcome == "passed"))
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name, passed in lines:
            terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}")


def pipeline_payload(catalog_path, out_dir, **overrides) -> dict:
    """Baseline mock-backend pipeline config; tests override what they probe."""
    payload = {
        "catalog": {"path": str(catalog_path)},
        "plan": {"total": 40, "seed": 11, "balance": "quota", "mode_mix": {"t2i": 1.0, "i2i": 0.0}},
        "synthesis": {"t2i": {"kind": "mock"}, "i2i": {"kind": "mock"}},
        "gate": {"detector": "mock-oracle"},
        "output_dir": str(out_dir),
        "workers": 1,
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(payload.get(key), dict):
            payload[key].update(value)
        else:
            payload[key] = value
    return payload
