"""Label sampling and prompt construction.

Labels are drawn from a multi-step hierarchical uniform distribution: brand,
then model within brand, then build year within model, each uniform, plus a
uniform color. Registration counts never weight anything. Two balance modes:

- iid: every level drawn independently per slot, so per-brand counts are
  only uniform in expectation;
- quota: the brand level is laid out round-robin so per-brand counts are
  exactly equal (the total must divide evenly), and synthesis modes are
  assigned in exact per-brand proportion; deeper levels stay random.

Every slot's label is a pure function of (plan.seed, slot index, attempt),
so a rejected slot can be redrawn for the same brand without consulting any
shared generator state, and interrupted runs re-derive identical labels.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

from .catalog import VehicleCatalog
from .errors import ConfigError, TemplateError
from .rng import TAG_BRAND_MODES, TAG_LABEL, SplitMix64, mix


class Mode(str, enum.Enum):
    TEXT_TO_IMAGE = "t2i"
    IMAGE_TO_IMAGE = "i2i"


class BalanceMode(str, enum.Enum):
    IID_HIERARCHICAL = "iid"
    EXACT_QUOTA = "quota"


DEFAULT_COLORS = ("black", "white", "gray", "silver", "blue", "red", "green", "brown")

# The perspective clause matches the camera setup the datasets target; the
# rest is a plain photographic framing. Always configurable, never baked into
# logic.
DEFAULT_TEMPLATE = (
    "a photograph of a {color} {brand} {model} {year}, on a road, "
    "shot from the front, from above, centered"
)

_SUBJECT_GROUP = "{color} {brand} {model} {year}"
_PLACEHOLDER_RE = re.compile(r"\{([^{}]*)\}")
_KNOWN_PLACEHOLDERS = ("color", "brand", "model", "year")


@dataclass(frozen=True)
class LabelSpec:
    brand: str
    model: str
    year: int
    color: str
    mode: Mode
    seq: int


@dataclass(frozen=True)
class PromptText:
    text: str
    subject_substring: str


@dataclass(frozen=True)
class SamplePlan:
    total: int
    seed: int
    balance: BalanceMode = BalanceMode.IID_HIERARCHICAL
    mode_mix: dict[Mode, float] | None = None

    def resolved_mix(self) -> dict[Mode, float]:
        mix_ = self.mode_mix if self.mode_mix is not None else {
            Mode.TEXT_TO_IMAGE: 0.5,
            Mode.IMAGE_TO_IMAGE: 0.5,
        }
        if any(f < 0 for f in mix_.values()):
            raise ConfigError("mode mix fractions must be non-negative")
        if abs(sum(mix_.values()) - 1.0) > 1e-9:
            raise ConfigError(f"mode mix fractions must sum to 1, got {sum(mix_.values())}")
        return {m: mix_.get(m, 0.0) for m in Mode}

    def validate(self, catalog: VehicleCatalog) -> None:
        if self.total < 1:
            raise ConfigError("plan total must be positive")
        brands = catalog.brand_whitelist
        if self.balance is BalanceMode.EXACT_QUOTA and self.total % len(brands) != 0:
            raise ConfigError(
                f"quota balancing needs total divisible by {len(brands)} brands, got {self.total}"
            )
        for brand in brands:
            if not catalog.models_for(brand):
                raise ConfigError(f"brand {brand!r} has no models in the catalog")
        self.resolved_mix()


def _quota_mode_counts(quota: int, mix_: dict[Mode, float]) -> dict[Mode, int]:
    """Largest-remainder apportionment of a brand's quota across modes."""
    floors = {m: int(mix_[m] * quota) for m in Mode}
    remainders = sorted(Mode, key=lambda m: (-(mix_[m] * quota - floors[m]), list(Mode).index(m)))
    leftover = quota - sum(floors.values())
    for m in remainders[:leftover]:
        floors[m] += 1
    return floors


def _brand_mode_layout(plan: SamplePlan, brand_index: int, quota: int) -> list[Mode]:
    counts = _quota_mode_counts(quota, plan.resolved_mix())
    modes: list[Mode] = []
    for m in Mode:
        modes.extend([m] * counts[m])
    SplitMix64(mix(plan.seed, TAG_BRAND_MODES, brand_index)).shuffle(modes)
    return modes


def _draw_within_brand(
    stream: SplitMix64, catalog: VehicleCatalog, brand: str, colors: tuple[str, ...]
) -> tuple[str, int, str]:
    models = catalog.models_for(brand)
    entry = models[stream.randbelow(len(models))]
    year = entry.build_years[stream.randbelow(len(entry.build_years))]
    color = colors[stream.randbelow(len(colors))]
    return entry.model, year, color


def _draw_mode(stream: SplitMix64, mix_: dict[Mode, float]) -> Mode:
    u = stream.uniform()
    acc = 0.0
    for m in Mode:
        acc += mix_[m]
        if u < acc:
            return m
    return list(Mode)[-1]


def sample_labels(
    catalog: VehicleCatalog,
    plan: SamplePlan,
    colors: tuple[str, ...] = DEFAULT_COLORS,
) -> list[LabelSpec]:
    """Draw the full label sequence for a plan (attempt-0 label of every slot)."""
    plan.validate(catalog)
    if not colors:
        raise ConfigError("color list must be non-empty")
    brands = catalog.brand_whitelist
    mix_ = plan.resolved_mix()

    labels: list[LabelSpec] = []
    if plan.balance is BalanceMode.EXACT_QUOTA:
        quota = plan.total // len(brands)
        layouts = [_brand_mode_layout(plan, bi, quota) for bi in range(len(brands))]
        for seq in range(plan.total):
            brand_index = seq % len(brands)
            brand = brands[brand_index]
            mode = layouts[brand_index][seq // len(brands)]
            stream = SplitMix64(mix(plan.seed, TAG_LABEL, seq, 0))
            model, year, color = _draw_within_brand(stream, catalog, brand, colors)
            labels.append(LabelSpec(brand, model, year, color, mode, seq))
    else:
        for seq in range(plan.total):
            stream = SplitMix64(mix(plan.seed, TAG_LABEL, seq, 0))
            brand = brands[stream.randbelow(len(brands))]
            model, year, color = _draw_within_brand(stream, catalog, brand, colors)
            mode = _draw_mode(stream, mix_)
            labels.append(LabelSpec(brand, model, year, color, mode, seq))
    return labels


def redraw_label(
    catalog: VehicleCatalog,
    plan: SamplePlan,
    brand: str,
    mode: Mode,
    seq: int,
    attempt: int,
    colors: tuple[str, ...] = DEFAULT_COLORS,
) -> LabelSpec:
    """Fresh model/year/color for a rejected slot, keeping brand and mode.

    Keeping the brand preserves quota under rejection; a fresh model avoids a
    pathological prompt eating the whole attempt budget.
    """
    stream = SplitMix64(mix(plan.seed, TAG_LABEL, seq, attempt))
    model, year, color = _draw_within_brand(stream, catalog, brand, colors)
    return LabelSpec(brand, model, year, color, mode, seq)


def build_prompt(label: LabelSpec, template: str = DEFAULT_TEMPLATE) -> PromptText:
    """Render a template into prompt text plus its subject substring.

    The template must contain the contiguous group "{color} {brand} {model}
    {year}" exactly once (that group becomes the subject substring); any other
    text is preserved byte-for-byte.
    """
    unknown = sorted(set(_PLACEHOLDER_RE.findall(template)) - set(_KNOWN_PLACEHOLDERS))
    if unknown:
        raise TemplateError(f"unknown placeholder(s) in template: {', '.join(unknown)}")
    group_count = template.count(_SUBJECT_GROUP)
    if group_count != 1:
        raise TemplateError(
            f"template must contain the group {_SUBJECT_GROUP!r} exactly once, found {group_count}"
        )
    values = {
        "color": label.color,
        "brand": label.brand,
        "model": label.model,
        "year": str(label.year),
    }
    text = _PLACEHOLDER_RE.sub(lambda m: values[m.group(1)], template)
    subject = f"{label.color} {label.brand} {label.model} {label.year}"
    occurrences = text.count(subject)
    if occurrences != 1:
        raise TemplateError(
            f"rendered subject {subject!r} occurs {occurrences} times; template text collides with it"
        )
    return PromptText(text=text, subject_substring=subject)
