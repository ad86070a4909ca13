"""End-to-end pipeline driver.

One deterministic label producer feeds N stateless workers (synthesize ->
detect -> assess -> transform); a single writer assigns dense ids in
completion order and appends to the manifest. Every slot's work is a pure
function of (plan seed, slot index, attempt), so rejected slots redraw a new
label for the same brand without touching shared state, parallel runs keep
quotas exact, and interrupted runs resume to the same content.

Record order is completion order: with workers=1 runs are byte-reproducible;
with more workers only the record set (and therefore every quota) is
guaranteed, not the byte order.
"""

from __future__ import annotations

import json
import logging
import sys
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field, replace
from pathlib import Path

from .catalog import load_catalog
from .dataset import ManifestWriter, SampleRecord, format_id, read_manifest, write_label_file
from .errors import ConfigError, InputError, QuotaExhaustedError, ResumeError
from .imaging import AugmentConfig, augment
from .images import ImageBuf, save_png
from .pipelineconfig import (
    BackendSettings,
    PipelineConfig,
    load_snapshot,
    snapshots_equivalent,
    write_snapshot,
)
from .quality import (
    BlobMockDetector,
    GateConfig,
    HttpDetectionBackend,
    OracleMockDetector,
    RejectReason,
    Verdict,
    assess,
    crop_to_bbox,
    detect,
)
from .rng import TAG_BASE_POOL, TAG_SYNTH, SplitMix64, mix
from .sampler import (
    BalanceMode,
    LabelSpec,
    Mode,
    SamplePlan,
    build_prompt,
    redraw_label,
    sample_labels,
)
from .synthesis import (
    FaultProfile,
    HttpSynthesisBackend,
    MockSynthesisBackend,
    WIRE_SEED_MASK,
    image_to_image_request,
    load_base_pool,
    synthesize,
    text_to_image_request,
)
from .transport import RetryPolicy

logger = logging.getLogger("synthset.orchestrator")

PROGRESS_EVERY = 100


@dataclass
class RunStats:
    accepted: int = 0
    rejected: dict[str, int] = field(default_factory=dict)
    attempts: int = 0
    wall_seconds: float = 0.0
    per_mode_latency_mean: dict[str, float | None] = field(default_factory=dict)

    def to_payload(self) -> dict:
        return {
            "accepted": self.accepted,
            "rejected": self.rejected,
            "attempts": self.attempts,
            "wall_seconds": self.wall_seconds,
            "per_mode_latency_mean": self.per_mode_latency_mean,
        }


@dataclass(frozen=True)
class _Slot:
    seq: int
    brand: str
    brand_index: int
    mode: Mode
    label: LabelSpec  # attempt-0 label


@dataclass
class _SlotOutcome:
    slot: _Slot
    accepted: bool
    attempts: int
    rejects: dict[RejectReason, int]
    latency: dict[Mode, tuple[float, int]]
    label: LabelSpec | None = None
    prompt: str | None = None
    bbox: tuple[float, float, float, float] | None = None
    score: float | None = None
    model_name: str | None = None
    latency_seconds: float | None = None
    seed: int | None = None
    image: ImageBuf | None = None
    attempted_labels: list[LabelSpec] = field(default_factory=list)


def _build_synthesis_backend(settings: BackendSettings):
    if settings.kind == "mock":
        return MockSynthesisBackend(FaultProfile(*settings.fault_profile))
    return HttpSynthesisBackend(
        settings.url,
        timeout=settings.timeout_secs,
        retry=RetryPolicy(settings.retry_base_seconds, 2.0, settings.retry_max_attempts),
    )


def _build_detector(config: PipelineConfig):
    gate = config.gate
    if gate.detector == "mock-oracle":
        return OracleMockDetector()
    if gate.detector == "mock-blob":
        return BlobMockDetector()
    return HttpDetectionBackend(gate.url, timeout=config.synthesis.t2i.timeout_secs)


class _PipelineContext:
    """Everything a worker needs, immutable after construction."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.catalog, self.drop_report = load_catalog(
            config.catalog.path,
            brands=tuple(config.catalog.brands),
            min_year=config.catalog.min_year,
        )
        self.plan = SamplePlan(
            total=config.plan.total,
            seed=config.plan.seed,
            balance=BalanceMode(config.plan.balance),
            mode_mix={Mode(k): v for k, v in config.plan.mode_mix.items()},
        )
        self.colors = tuple(config.prompt.colors)
        self.template = config.prompt.template
        self.labels = sample_labels(self.catalog, self.plan, self.colors)
        self.slots = [
            _Slot(l.seq, l.brand, self.catalog.brand_whitelist.index(l.brand), l.mode, l)
            for l in self.labels
        ]
        self.backends = {
            Mode.TEXT_TO_IMAGE: _build_synthesis_backend(config.synthesis.t2i),
            Mode.IMAGE_TO_IMAGE: _build_synthesis_backend(config.synthesis.i2i),
        }
        self.detector = _build_detector(config)
        self.gate_cfg = GateConfig(
            min_confidence=config.gate.min_confidence,
            vehicle_labels=frozenset(config.gate.vehicle_labels),
        )
        rotation_seed = config.augment.rotation_seed
        if rotation_seed is None:
            rotation_seed = config.plan.seed
        self.aug_cfg = AugmentConfig(
            target_size=config.augment.target_size,
            rotation_max_degrees=config.augment.rotation_max_degrees,
            rotation_seed=rotation_seed,
        )
        self.size = config.synthesis.size
        self.pool = None
        if any(s.mode is Mode.IMAGE_TO_IMAGE for s in self.slots):
            if not config.base_pool.path:
                raise ConfigError(
                    "plan includes img2img slots but no base_pool.path is configured"
                )
            self.pool = load_base_pool(
                config.base_pool.path,
                padding_fraction=config.base_pool.padding_fraction,
                brand_whitelist=tuple(config.catalog.brands),
            )
        self.out_dir = Path(config.output_dir)

    def health_check(self) -> None:
        # Fail fast on unreachable backends instead of starving mid-run.
        for mode in sorted({s.mode for s in self.slots}, key=lambda m: m.value):
            self.backends[mode].health_check()
        self.detector.health_check()


def _save_rejected(ctx: _PipelineContext, image: ImageBuf, reason: RejectReason, seq: int, attempt: int):
    target = ctx.out_dir / "rejected" / reason.value
    target.mkdir(parents=True, exist_ok=True)
    save_png(image, target / f"{seq:06d}_{attempt}.png")


def _process_slot(ctx: _PipelineContext, slot: _Slot) -> _SlotOutcome:
    rejects: dict[RejectReason, int] = {}
    latency: dict[Mode, tuple[float, int]] = {}
    attempted: list[LabelSpec] = []
    for attempt in range(ctx.config.max_attempts_per_slot):
        if attempt == 0:
            label = slot.label
        else:
            label = redraw_label(
                ctx.catalog, ctx.plan, slot.brand, slot.mode, slot.seq, attempt, ctx.colors
            )
        attempted.append(label)
        prompt = build_prompt(label, ctx.template)
        seed = mix(ctx.plan.seed, TAG_SYNTH, slot.seq, attempt) & WIRE_SEED_MASK
        if slot.mode is Mode.TEXT_TO_IMAGE:
            req = text_to_image_request(prompt, seed=seed, width=ctx.size, height=ctx.size)
        else:
            entry = ctx.pool.pick(SplitMix64(mix(ctx.plan.seed, TAG_BASE_POOL, slot.seq, attempt)))
            req = image_to_image_request(prompt, entry.image, seed=seed)
        image, info = synthesize(ctx.backends[slot.mode], req)
        lsum, lcount = latency.get(slot.mode, (0.0, 0))
        latency[slot.mode] = (lsum + info.latency_seconds, lcount + 1)

        decision = assess(detect(ctx.detector, image), ctx.gate_cfg)
        if decision.verdict is Verdict.ACCEPT:
            try:
                crop = crop_to_bbox(image, decision.bbox)
            except InputError:
                # Degenerate pixel rect: treat as a no-car rejection.
                logger.warning("slot %d attempt %d: degenerate bbox %s", slot.seq, attempt, decision.bbox)
                rejects[RejectReason.NO_CAR] = rejects.get(RejectReason.NO_CAR, 0) + 1
                continue
            final = augment(crop, ctx.aug_cfg, slot.seq)
            return _SlotOutcome(
                slot=slot,
                accepted=True,
                attempts=attempt + 1,
                rejects=rejects,
                latency=latency,
                label=label,
                prompt=prompt.text,
                bbox=decision.bbox,
                score=decision.score,
                model_name=info.model_name,
                latency_seconds=info.latency_seconds,
                seed=seed,
                image=final,
            )
        rejects[decision.reason] = rejects.get(decision.reason, 0) + 1
        if ctx.config.keep_rejected:
            _save_rejected(ctx, image, decision.reason, slot.seq, attempt)
    return _SlotOutcome(
        slot=slot,
        accepted=False,
        attempts=ctx.config.max_attempts_per_slot,
        rejects=rejects,
        latency=latency,
        attempted_labels=attempted,
    )


def _pending_slots(ctx: _PipelineContext, existing: list[SampleRecord]) -> list[_Slot]:
    """Slots still owed, given completed records, preserving plan order.

    Records are matched to the earliest planned slots of their (brand, mode)
    group; for sequential runs this reproduces exactly the uninterrupted
    suffix, and in general it keeps quotas exact.
    """
    done: dict[tuple[str, Mode], int] = {}
    for r in existing:
        key = (r.brand, r.mode)
        done[key] = done.get(key, 0) + 1
    pending = []
    for slot in ctx.slots:
        key = (slot.brand, slot.mode)
        if done.get(key, 0) > 0:
            done[key] -= 1
        else:
            pending.append(slot)
    leftovers = {k: v for k, v in done.items() if v > 0}
    if leftovers:
        raise ResumeError(
            f"manifest contains records the plan does not account for: {leftovers}"
        )
    return pending


def _write_outcome(ctx: _PipelineContext, writer: ManifestWriter, outcome: _SlotOutcome) -> None:
    rec_id = format_id(writer.count)
    image_rel = f"images/{outcome.label.brand}/{rec_id}.png"
    image_abs = ctx.out_dir / image_rel
    image_abs.parent.mkdir(parents=True, exist_ok=True)
    save_png(outcome.image, image_abs)
    record = SampleRecord(
        id=rec_id,
        image_path=image_rel,
        brand=outcome.label.brand,
        brand_index=outcome.slot.brand_index,
        model=outcome.label.model,
        year=outcome.label.year,
        color=outcome.label.color,
        mode=outcome.label.mode,
        prompt=outcome.prompt,
        bbox=outcome.bbox,
        gate_score=outcome.score,
        backend_model=outcome.model_name,
        latency_seconds=outcome.latency_seconds,
        seed=outcome.seed,
    )
    write_label_file(record, ctx.out_dir / "labels")
    writer.append_record(record)


def run(config: PipelineConfig, *, resume: bool = False) -> RunStats:
    """Execute (or continue) a pipeline run; returns the session accounting."""
    ctx = _PipelineContext(config)
    out_dir = ctx.out_dir
    manifest_path = out_dir / "manifest.jsonl"
    snapshot_path = out_dir / "config.json"

    existing: list[SampleRecord] = []
    if resume:
        if not snapshot_path.exists():
            raise ResumeError(f"{out_dir} has no config snapshot to resume from")
        snapshot = load_snapshot(snapshot_path)
        if not snapshots_equivalent(snapshot, config):
            raise ResumeError(
                "config does not match the snapshot in the output directory; refusing to resume"
            )
        if manifest_path.exists():
            existing = read_manifest(manifest_path)
        for i, r in enumerate(existing):
            if r.id != format_id(i):
                raise ResumeError(f"existing manifest ids are not dense at record {i}")
    else:
        if manifest_path.exists():
            raise ConfigError(
                f"{manifest_path} already exists; use resume to continue or choose a new directory"
            )
        out_dir.mkdir(parents=True, exist_ok=True)

    pending = _pending_slots(ctx, existing)
    ctx.health_check()

    (out_dir / "labels").mkdir(parents=True, exist_ok=True)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    if not snapshot_path.exists():
        write_snapshot(config, snapshot_path)

    stats = RunStats()
    latency_acc: dict[Mode, tuple[float, int]] = {}
    started = time.perf_counter()

    if not pending:
        logger.info("nothing to do: %d records already present", len(existing))

    with ManifestWriter(manifest_path, existing_count=len(existing)) as writer:
        window = max(1, config.workers) * 4
        slot_iter = iter(pending)
        failure: _SlotOutcome | None = None
        with ThreadPoolExecutor(max_workers=config.workers) as executor:
            in_flight: dict = {}  # future -> slot seq
            try:
                while True:
                    while len(in_flight) < window:
                        slot = next(slot_iter, None)
                        if slot is None:
                            break
                        in_flight[executor.submit(_process_slot, ctx, slot)] = slot.seq
                    if not in_flight:
                        break
                    done, _ = wait(set(in_flight), return_when=FIRST_COMPLETED)
                    # A batch may hold several completions; write them in slot
                    # order so equal schedules yield equal bytes (and a single
                    # worker is therefore fully reproducible).
                    finished = sorted(done, key=lambda f: in_flight[f])
                    for future in finished:
                        del in_flight[future]
                        outcome = future.result()
                        stats.attempts += outcome.attempts
                        for reason, n in outcome.rejects.items():
                            stats.rejected[reason.value] = stats.rejected.get(reason.value, 0) + n
                        for mode, (lsum, lcount) in outcome.latency.items():
                            asum, acount = latency_acc.get(mode, (0.0, 0))
                            latency_acc[mode] = (asum + lsum, acount + lcount)
                        if not outcome.accepted:
                            failure = outcome
                            raise QuotaExhaustedError("slot exhausted", {})
                        _write_outcome(ctx, writer, outcome)
                        stats.accepted += 1
                        if stats.accepted % PROGRESS_EVERY == 0:
                            print(
                                f"progress: accepted={stats.accepted} attempts={stats.attempts} "
                                f"rejected={sum(stats.rejected.values())}",
                                file=sys.stderr,
                            )
            except QuotaExhaustedError:
                for future in in_flight:
                    future.cancel()
                dist: dict[tuple[str, str], int] = {}
                for label in failure.attempted_labels:
                    key = (label.brand, label.model)
                    dist[key] = dist.get(key, 0) + 1
                detail = ", ".join(f"{b}/{m}: {n}" for (b, m), n in sorted(dist.items()))
                raise QuotaExhaustedError(
                    f"slot {failure.slot.seq} ({failure.slot.brand}) exhausted "
                    f"{ctx.config.max_attempts_per_slot} attempts; attempted labels: {detail}",
                    dist,
                ) from None

    stats.wall_seconds = time.perf_counter() - started
    stats.per_mode_latency_mean = {
        m.value: (latency_acc[m][0] / latency_acc[m][1] if m in latency_acc and latency_acc[m][1] else None)
        for m in Mode
    }
    (out_dir / "run_stats.json").write_text(
        json.dumps(stats.to_payload(), indent=2) + "\n", encoding="utf-8"
    )
    logger.info(
        "run complete: accepted=%d attempts=%d wall=%.1fs", stats.accepted, stats.attempts, stats.wall_seconds
    )
    return stats


def resume(output_dir: str | Path) -> RunStats:
    """Continue an interrupted run from its own config snapshot."""
    output_dir = Path(output_dir)
    snapshot_path = output_dir / "config.json"
    if not snapshot_path.exists():
        raise ResumeError(f"{output_dir} has no config snapshot")
    config = load_snapshot(snapshot_path)
    config = replace(config, output_dir=str(output_dir))
    return run(config, resume=True)
