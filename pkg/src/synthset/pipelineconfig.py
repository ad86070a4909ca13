"""Pipeline configuration: JSON config file <-> typed settings.

The generate CLI resolves (config file, flag overrides) into a PipelineConfig,
then freezes it as `config.json` next to the dataset with a content digest.
Resuming re-reads that snapshot and refuses to continue if the digest no
longer matches the payload (hand-edited or corrupted snapshots must not
silently change what the remaining slots produce).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .catalog import DEFAULT_BRANDS, DEFAULT_MIN_YEAR
from .errors import ConfigError
from .imaging import DEFAULT_ROTATION_MAX, DEFAULT_TARGET_SIZE
from .quality import DEFAULT_MIN_CONFIDENCE
from .sampler import DEFAULT_COLORS, DEFAULT_TEMPLATE
from .synthesis import DEFAULT_SIZE


@dataclass(frozen=True)
class CatalogSettings:
    path: str
    brands: tuple[str, ...] = DEFAULT_BRANDS
    min_year: int = DEFAULT_MIN_YEAR


@dataclass(frozen=True)
class PlanSettings:
    total: int
    seed: int = 0
    balance: str = "iid"  # iid | quota
    mode_mix: dict[str, float] = field(default_factory=lambda: {"t2i": 0.5, "i2i": 0.5})

    def __post_init__(self):
        if self.balance not in ("iid", "quota"):
            raise ConfigError(f"balance must be iid or quota, got {self.balance!r}")
        unknown = set(self.mode_mix) - {"t2i", "i2i"}
        if unknown:
            raise ConfigError(f"unknown mode(s) in mode_mix: {sorted(unknown)}")


@dataclass(frozen=True)
class PromptSettings:
    template: str = DEFAULT_TEMPLATE
    colors: tuple[str, ...] = DEFAULT_COLORS


@dataclass(frozen=True)
class BackendSettings:
    kind: str = "mock"  # mock | http
    url: str | None = None
    fault_profile: tuple[float, float] = (0.0, 0.0)  # p_zero_cars, p_two_cars
    timeout_secs: float = 30.0
    retry_base_seconds: float = 0.5
    retry_max_attempts: int = 5

    def __post_init__(self):
        if self.kind not in ("mock", "http"):
            raise ConfigError(f"backend kind must be mock or http, got {self.kind!r}")
        if self.kind == "http" and not self.url:
            raise ConfigError("http backend needs a url")


@dataclass(frozen=True)
class SynthesisSettings:
    size: int = DEFAULT_SIZE
    t2i: BackendSettings = field(default_factory=BackendSettings)
    i2i: BackendSettings = field(default_factory=BackendSettings)


@dataclass(frozen=True)
class BasePoolSettings:
    path: str | None = None
    padding_fraction: float = 0.1


@dataclass(frozen=True)
class GateSettings:
    detector: str = "mock-oracle"  # mock-oracle | mock-blob | http
    url: str | None = None
    min_confidence: float = DEFAULT_MIN_CONFIDENCE
    vehicle_labels: tuple[str, ...] = ("car",)

    def __post_init__(self):
        if self.detector not in ("mock-oracle", "mock-blob", "http"):
            raise ConfigError(f"unknown detector {self.detector!r}")
        if self.detector == "http" and not self.url:
            raise ConfigError("http detector needs a url")
        if not self.vehicle_labels:
            raise ConfigError("vehicle_labels must be non-empty")


@dataclass(frozen=True)
class AugmentSettings:
    target_size: int = DEFAULT_TARGET_SIZE
    rotation_max_degrees: float = DEFAULT_ROTATION_MAX
    rotation_seed: int | None = None  # defaults to the plan seed


@dataclass(frozen=True)
class PipelineConfig:
    catalog: CatalogSettings
    plan: PlanSettings
    output_dir: str
    prompt: PromptSettings = field(default_factory=PromptSettings)
    synthesis: SynthesisSettings = field(default_factory=SynthesisSettings)
    base_pool: BasePoolSettings = field(default_factory=BasePoolSettings)
    gate: GateSettings = field(default_factory=GateSettings)
    augment: AugmentSettings = field(default_factory=AugmentSettings)
    workers: int = 1
    max_attempts_per_slot: int = 10
    keep_rejected: bool = False

    def __post_init__(self):
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.max_attempts_per_slot < 1:
            raise ConfigError("max_attempts_per_slot must be >= 1")


def to_payload(config: PipelineConfig) -> dict:
    """Plain-JSON form, field-for-field; stable key order via dataclass order."""
    return asdict(config)


def _settings(cls, payload: dict, where: str):
    try:
        return cls(**payload)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def from_payload(payload: dict) -> PipelineConfig:
    if not isinstance(payload, dict):
        raise ConfigError("config must be a JSON object")
    data = dict(payload)
    try:
        catalog_d = dict(data.pop("catalog"))
        plan_d = dict(data.pop("plan"))
        output_dir = data.pop("output_dir")
    except KeyError as exc:
        raise ConfigError(f"config is missing required section {exc}") from exc

    catalog_d["brands"] = tuple(catalog_d.get("brands", DEFAULT_BRANDS))
    catalog = _settings(CatalogSettings, catalog_d, "catalog")
    plan = _settings(PlanSettings, plan_d, "plan")

    prompt_d = dict(data.pop("prompt", {}))
    if "colors" in prompt_d:
        prompt_d["colors"] = tuple(prompt_d["colors"])
    prompt = _settings(PromptSettings, prompt_d, "prompt")

    synth_d = dict(data.pop("synthesis", {}))
    for mode_key in ("t2i", "i2i"):
        if mode_key in synth_d:
            be = dict(synth_d[mode_key])
            if "fault_profile" in be:
                be["fault_profile"] = tuple(be["fault_profile"])
            synth_d[mode_key] = _settings(BackendSettings, be, f"synthesis.{mode_key}")
    synthesis = _settings(SynthesisSettings, synth_d, "synthesis")

    base_pool = _settings(BasePoolSettings, dict(data.pop("base_pool", {})), "base_pool")

    gate_d = dict(data.pop("gate", {}))
    if "vehicle_labels" in gate_d:
        gate_d["vehicle_labels"] = tuple(gate_d["vehicle_labels"])
    gate = _settings(GateSettings, gate_d, "gate")

    augment = _settings(AugmentSettings, dict(data.pop("augment", {})), "augment")

    known = {"workers", "max_attempts_per_slot", "keep_rejected"}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown config key(s): {sorted(extra)}")
    return PipelineConfig(
        catalog=catalog,
        plan=plan,
        output_dir=str(output_dir),
        prompt=prompt,
        synthesis=synthesis,
        base_pool=base_pool,
        gate=gate,
        augment=augment,
        **{k: data[k] for k in known if k in data},
    )


def load_config_file(path: str | Path) -> PipelineConfig:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return from_payload(payload)


def _canonical_bytes(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def config_digest(payload: dict) -> str:
    return hashlib.sha256(_canonical_bytes(payload)).hexdigest()


def write_snapshot(config: PipelineConfig, path: str | Path) -> None:
    payload = to_payload(config)
    doc = {"config": payload, "digest": config_digest(payload)}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n", encoding="utf-8")


def load_snapshot(path: str | Path) -> PipelineConfig:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read config snapshot {path}: {exc}") from exc
    if not isinstance(doc, dict) or "config" not in doc or "digest" not in doc:
        raise ConfigError(f"config snapshot {path} is missing config/digest")
    if config_digest(doc["config"]) != doc["digest"]:
        raise ConfigError(f"config snapshot {path} digest mismatch (tampered or hand-edited)")
    return from_payload(doc["config"])


def snapshots_equivalent(a: PipelineConfig, b: PipelineConfig) -> bool:
    """Equality over everything that affects record content (output_dir may
    legitimately differ when a dataset directory has been moved)."""
    pa, pb = to_payload(a), to_payload(b)
    pa.pop("output_dir")
    pb.pop("output_dir")
    return pa == pb
