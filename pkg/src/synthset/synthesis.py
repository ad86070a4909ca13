"""Synthesis backends: a wire-protocol HTTP client and a procedural mock.

The wire protocol (UTF-8 JSON bodies, base64 PNG images):

    POST /v1/txt2img {"prompt", "steps", "guidance", "width", "height", "seed"}
    POST /v1/img2img {"prompt", "image", "steps", "guidance", "strength", "seed"}
    -> 200 {"image": <b64 png>, "model": str} | 4xx {"error": str}

The mock renders a textured gray background plus 0, 1 or 2 saturated
rectangular "car" blobs as a pure function of (hash of prompt text, seed,
fault profile), and embeds its ground truth in the image metadata. It reports
a deterministic simulated latency (a documented cost model) instead of a
wall-clock measurement so that manifests built from mock runs are
byte-reproducible; the HTTP path reports measured wall-clock latency.
"""

from __future__ import annotations

import base64
import json
import logging
import re
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import ConfigError, InputError, ProtocolError
from .images import GT_METADATA_KEY, ImageBuf, decode_png, encode_png, load_png, pixel_rect
from .rng import SplitMix64, fnv1a64, mix
from .sampler import Mode, PromptText
from .transport import HttpJsonClient, RetryPolicy

logger = logging.getLogger("synthset.synthesis")

TXT2IMG_PATH = "/v1/txt2img"
IMG2IMG_PATH = "/v1/img2img"

T2I_DEFAULT_STEPS = 4
T2I_DEFAULT_GUIDANCE = 0.0
I2I_DEFAULT_STEPS = 10
I2I_DEFAULT_GUIDANCE = 0.4
I2I_DEFAULT_STRENGTH = 0.6

DEFAULT_SIZE = 720
BASE_IMAGE_SIZE = 720  # img2img inputs are always prepared to this size

# Wire seeds stay below 2**53 so JSON consumers with double-precision
# integers keep them exact.
WIRE_SEED_MASK = (1 << 53) - 1

# Simulated mock latency: seconds per (step * pixel). Yields a few ms per
# 720x720 request, deterministic by construction.
MOCK_LATENCY_PER_STEP_PIXEL = 2e-9

MOCK_MODEL_NAME = "procedural-mock:v1"

# Saturated stand-ins for the color words: every entry keeps max > 2*min even
# after blob shading, so the HSV-saturation blob detector sees all of them;
# hues loosely evoke the word.
MOCK_PALETTE: dict[str, tuple[int, int, int]] = {
    "black": (85, 25, 95),
    "white": (235, 205, 100),
    "gray": (135, 150, 55),
    "silver": (80, 150, 210),
    "blue": (50, 60, 210),
    "red": (200, 40, 40),
    "green": (40, 200, 40),
    "brown": (150, 90, 35),
}
_FALLBACK_FILL = (200, 40, 180)

_COLOR_WORD_RE = re.compile(r"\b(" + "|".join(MOCK_PALETTE) + r")\b")


def _color_word(text: str) -> str:
    """First palette word mentioned in the prompt text ('' when absent)."""
    match = _COLOR_WORD_RE.search(text)
    return match.group(1) if match else ""


@dataclass(frozen=True)
class SynthRequest:
    mode: Mode
    prompt: PromptText
    steps: int
    guidance: float
    width: int
    height: int
    seed: int
    strength: float | None = None
    base_image: ImageBuf | None = None

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if self.guidance < 0:
            raise ConfigError("guidance must be >= 0")
        if self.width < 1 or self.height < 1:
            raise ConfigError("width/height must be positive")
        if self.mode is Mode.IMAGE_TO_IMAGE:
            if self.strength is None or not (0.0 <= self.strength <= 1.0):
                raise ConfigError("img2img requires strength in [0, 1]")
            if self.base_image is None:
                raise ConfigError("img2img requires a base image")
            if (self.base_image.width, self.base_image.height) != (self.width, self.height):
                raise ConfigError(
                    f"base image is {self.base_image.width}x{self.base_image.height}, "
                    f"request says {self.width}x{self.height}"
                )
        else:
            if self.strength is not None:
                raise ConfigError("strength only applies to img2img")
            if self.base_image is not None:
                raise ConfigError("base image only applies to img2img")


def text_to_image_request(
    prompt: PromptText,
    *,
    seed: int,
    width: int = DEFAULT_SIZE,
    height: int = DEFAULT_SIZE,
    steps: int = T2I_DEFAULT_STEPS,
    guidance: float = T2I_DEFAULT_GUIDANCE,
) -> SynthRequest:
    return SynthRequest(Mode.TEXT_TO_IMAGE, prompt, steps, guidance, width, height, seed)


def image_to_image_request(
    prompt: PromptText,
    base_image: ImageBuf,
    *,
    seed: int,
    steps: int = I2I_DEFAULT_STEPS,
    guidance: float = I2I_DEFAULT_GUIDANCE,
    strength: float = I2I_DEFAULT_STRENGTH,
) -> SynthRequest:
    return SynthRequest(
        Mode.IMAGE_TO_IMAGE,
        prompt,
        steps,
        guidance,
        base_image.width,
        base_image.height,
        seed,
        strength=strength,
        base_image=base_image,
    )


@dataclass(frozen=True)
class BackendInfo:
    model_name: str
    latency_seconds: float | None = None


def to_wire(req: SynthRequest) -> tuple[str, dict]:
    """Serialize a request into (endpoint path, JSON body)."""
    if req.mode is Mode.TEXT_TO_IMAGE:
        return TXT2IMG_PATH, {
            "prompt": req.prompt.text,
            "steps": req.steps,
            "guidance": req.guidance,
            "width": req.width,
            "height": req.height,
            "seed": req.seed,
        }
    return IMG2IMG_PATH, {
        "prompt": req.prompt.text,
        "image": base64.b64encode(encode_png(req.base_image)).decode("ascii"),
        "steps": req.steps,
        "guidance": req.guidance,
        "strength": req.strength,
        "seed": req.seed,
    }


def request_from_wire(path: str, body: dict) -> SynthRequest:
    """Parse a wire body back into a request (prompt structure is not carried
    on the wire, so the subject substring comes back empty)."""
    try:
        prompt = PromptText(text=body["prompt"], subject_substring="")
        if path == TXT2IMG_PATH:
            return SynthRequest(
                Mode.TEXT_TO_IMAGE,
                prompt,
                int(body["steps"]),
                float(body["guidance"]),
                int(body["width"]),
                int(body["height"]),
                int(body["seed"]),
            )
        if path == IMG2IMG_PATH:
            base = decode_png(base64.b64decode(body["image"]))
            return SynthRequest(
                Mode.IMAGE_TO_IMAGE,
                prompt,
                int(body["steps"]),
                float(body["guidance"]),
                base.width,
                base.height,
                int(body["seed"]),
                strength=float(body["strength"]),
                base_image=base,
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed request body for {path}: {exc}") from exc
    raise ProtocolError(f"unknown synthesis endpoint {path!r}")


@dataclass(frozen=True)
class FaultProfile:
    """Probability of the mock rendering zero or two cars instead of one."""

    p_zero_cars: float = 0.0
    p_two_cars: float = 0.0

    def __post_init__(self):
        if self.p_zero_cars < 0 or self.p_two_cars < 0:
            raise ConfigError("fault probabilities must be >= 0")
        if self.p_zero_cars + self.p_two_cars > 1.0:
            raise ConfigError("p_zero_cars + p_two_cars must not exceed 1")


def _blob_geometry(
    stream: SplitMix64, w: int, h: int, count: int
) -> list[tuple[int, int, int, int]]:
    """Pixel rects for the car blobs; two blobs land in disjoint halves."""
    rects = []
    mx, my = w // 16, h // 16
    if count == 1:
        bw = max(1, (28 * w) // 100 + stream.randbelow(max(1, (27 * w) // 100 + 1)))
        bh = max(1, (22 * h) // 100 + stream.randbelow(max(1, (23 * h) // 100 + 1)))
        x = mx + stream.randbelow(max(1, w - bw - 2 * mx + 1))
        y = my + stream.randbelow(max(1, h - bh - 2 * my + 1))
        rects.append((x, y, bw, bh))
    elif count == 2:
        half = w // 2
        gap = max(1, w // 32)
        for side in range(2):
            bw = max(1, (18 * w) // 100 + stream.randbelow(max(1, (16 * w) // 100 + 1)))
            bh = max(1, (20 * h) // 100 + stream.randbelow(max(1, (22 * h) // 100 + 1)))
            if side == 0:
                lo, hi = mx, half - gap - bw
            else:
                lo, hi = half + gap, w - mx - bw
            x = lo + stream.randbelow(max(1, hi - lo + 1))
            y = my + stream.randbelow(max(1, h - bh - 2 * my + 1))
            rects.append((x, y, bw, bh))
    return rects


def _paint_blob(
    canvas: np.ndarray, rect: tuple[int, int, int, int], fill: tuple[int, int, int], noise_seed: int
) -> None:
    x, y, bw, bh = rect
    region = np.empty((bh, bw, 3), dtype=np.int16)
    region[:, :] = fill
    # Channel-uniform shading: preserves the max>2*min saturation margin.
    delta = ((_kernels.hash2d_grid(x, y, bw, bh, noise_seed) >> np.uint32(8)) % np.uint32(25)).astype(
        np.int16
    ) - 12
    region += delta[:, :, None]
    band = (3 * bh) // 4
    region[band:, :] -= 30
    canvas[y : y + bh, x : x + bw] = np.clip(region, 0, 255).astype(np.uint8)


def mock_render(
    prompt: PromptText,
    seed: int,
    fault_profile: FaultProfile,
    width: int = DEFAULT_SIZE,
    height: int = DEFAULT_SIZE,
) -> ImageBuf:
    """Deterministic procedural render with embedded ground truth.

    Pure function of (prompt text, seed, fault profile): the draw stream is
    seeded from the FNV-1a hash of the text, and the single-car blob is
    filled with the palette color of the first color word found in the text.
    Ground truth (normalized bboxes + color words) lands in the `synthset-gt`
    metadata entry.
    """
    if width < 32 or height < 32:
        raise InputError("mock render needs at least 32x32 pixels")
    stream = SplitMix64(mix(fnv1a64(prompt.text.encode("utf-8")), seed))

    u = stream.uniform()
    if u < fault_profile.p_zero_cars:
        count = 0
    elif u < fault_profile.p_zero_cars + fault_profile.p_two_cars:
        count = 2
    else:
        count = 1

    bg_seed = stream.next_u64()
    base_level = 96 + stream.randbelow(64)
    luma = _kernels.value_noise(width, height, bg_seed, base_level, 24)
    canvas = np.repeat(luma[:, :, None], 3, axis=2)

    color_word = _color_word(prompt.text)
    palette_words = tuple(MOCK_PALETTE)
    rects = _blob_geometry(stream, width, height, count)
    blobs = []
    for i, rect in enumerate(rects):
        if i == 0 and count == 1:
            word = color_word
        else:
            word = palette_words[stream.randbelow(len(palette_words))]
        fill = MOCK_PALETTE.get(word, _FALLBACK_FILL)
        _paint_blob(canvas, rect, fill, stream.next_u64())
        x, y, bw, bh = rect
        blobs.append({"bbox": [x / width, y / height, bw / width, bh / height], "color": word})

    gt = json.dumps({"blobs": blobs}, separators=(",", ":"))
    return ImageBuf(width, height, canvas, metadata={GT_METADATA_KEY: gt})


class MockSynthesisBackend:
    """In-process deterministic backend; safe for concurrent use (pure)."""

    def __init__(self, fault_profile: FaultProfile | None = None):
        self.fault_profile = fault_profile or FaultProfile()

    def health_check(self) -> None:
        return None

    def render(self, req: SynthRequest) -> tuple[ImageBuf, BackendInfo]:
        image = mock_render(req.prompt, req.seed, self.fault_profile, req.width, req.height)
        simulated = req.steps * req.width * req.height * MOCK_LATENCY_PER_STEP_PIXEL
        return image, BackendInfo(MOCK_MODEL_NAME, simulated)


class HttpSynthesisBackend:
    """Client for the synthesis wire protocol."""

    def __init__(self, base_url: str, *, timeout: float = 30.0, retry: RetryPolicy | None = None):
        self._http = HttpJsonClient(base_url, timeout=timeout, retry=retry)

    def health_check(self) -> None:
        probe = text_to_image_request(
            PromptText("health check", "health check"), seed=0, width=64, height=64, steps=1
        )
        self.render(probe)

    def render(self, req: SynthRequest) -> tuple[ImageBuf, BackendInfo]:
        path, body = to_wire(req)
        payload = self._http.post(path, body)
        try:
            image = decode_png(base64.b64decode(payload["image"]))
            model = str(payload.get("model", ""))
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed synthesis response: {exc}") from exc
        return image, BackendInfo(model, None)


def synthesize(backend, req: SynthRequest) -> tuple[ImageBuf, BackendInfo]:
    """Run one request, validate the result shape, and account latency.

    Backends that model their own latency (the mock) keep their value;
    otherwise the wall clock around the call is reported.
    """
    start = time.perf_counter()
    image, info = backend.render(req)
    elapsed = time.perf_counter() - start
    if info.latency_seconds is None:
        info = replace(info, latency_seconds=elapsed)
    if (image.width, image.height) != (req.width, req.height):
        raise ProtocolError(
            f"backend returned {image.width}x{image.height}, requested {req.width}x{req.height}"
        )
    logger.debug(
        "synthesize mode=%s seed=%d steps=%d latency=%.4fs model=%s",
        req.mode.value,
        req.seed,
        req.steps,
        info.latency_seconds,
        info.model_name,
    )
    return image, info


def prepare_base(
    image: ImageBuf,
    bbox: tuple[float, float, float, float],
    padding_fraction: float,
    out_size: int = BASE_IMAGE_SIZE,
) -> ImageBuf:
    """Crop to a padded bbox and rescale to the img2img input size.

    The bbox is expanded by padding_fraction of its own width/height on each
    side, clipped to the frame, then resized (aspect ratio not preserved).
    """
    x, y, w, h = bbox
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0) or w <= 0 or h <= 0:
        raise InputError(f"invalid base bbox {bbox}")
    if padding_fraction < 0:
        raise InputError("padding_fraction must be >= 0")
    px = x - w * padding_fraction
    py = y - h * padding_fraction
    pw = w * (1 + 2 * padding_fraction)
    ph = h * (1 + 2 * padding_fraction)
    x0 = max(0.0, px)
    y0 = max(0.0, py)
    x1 = min(1.0, px + pw)
    y1 = min(1.0, py + ph)
    if x1 <= x0 or y1 <= y0:
        raise InputError(f"bbox {bbox} degenerates after clipping")
    rx, ry, rw, rh = pixel_rect((x0, y0, x1 - x0, y1 - y0), image.width, image.height)
    crop = image.data[ry : ry + rh, rx : rx + rw]
    resized = _kernels.resize_bilinear(np.ascontiguousarray(crop), out_size, out_size)
    return ImageBuf(out_size, out_size, resized)


@dataclass(frozen=True)
class BasePoolEntry:
    image: ImageBuf  # already prepared to BASE_IMAGE_SIZE
    source_id: str


@dataclass(frozen=True)
class BasePool:
    """Real photographs of out-of-scope brands, prepared for img2img."""

    images: tuple[BasePoolEntry, ...]
    padding_fraction: float

    def pick(self, stream: SplitMix64) -> BasePoolEntry:
        return self.images[stream.randbelow(len(self.images))]


def load_base_pool(
    manifest_path,
    *,
    padding_fraction: float = 0.1,
    brand_whitelist: tuple[str, ...] = (),
    out_size: int = BASE_IMAGE_SIZE,
) -> BasePool:
    """Load a pool manifest (JSON list of {path, source_id, brand, bbox}).

    Entries whose brand is in the classification whitelist are a hard error:
    base images must depict only brands the classifier will never see.
    """
    manifest_path = Path(manifest_path)
    try:
        entries = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read base pool manifest {manifest_path}: {exc}") from exc
    if not isinstance(entries, list) or not entries:
        raise ConfigError(f"base pool manifest {manifest_path} must be a non-empty list")
    prepared = []
    for i, entry in enumerate(entries):
        try:
            rel, source_id = entry["path"], str(entry["source_id"])
            brand, bbox = str(entry["brand"]), tuple(float(v) for v in entry["bbox"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"base pool entry {i} is malformed: {exc}") from exc
        if brand in brand_whitelist:
            raise ConfigError(
                f"base pool entry {i} depicts whitelisted brand {brand!r}; "
                "pool images must show out-of-scope brands only"
            )
        image = load_png(manifest_path.parent / rel)
        prepared.append(BasePoolEntry(prepare_base(image, bbox, padding_fraction, out_size), source_id))
    return BasePool(tuple(prepared), padding_fraction)
