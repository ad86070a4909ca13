"""Detection-backed quality gate.

An image passes only if the detector finds exactly one sufficiently-confident
vehicle; the accepted sample is cropped to that bounding box. Detectors are
pluggable: an HTTP client for a real model, plus two mock flavors — `oracle`
(reads the procedural backend's embedded ground truth; exact) and `blob`
(recovers boxes from pixels via an HSV-saturation threshold; exercises the
real code path shape).
"""

from __future__ import annotations

import base64
import enum
import json
import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ConfigError, ProtocolError
from .images import GT_METADATA_KEY, ImageBuf, encode_png, pixel_rect, valid_norm_rect
from .transport import HttpJsonClient, RetryPolicy

logger = logging.getLogger("synthset.quality")

DETECT_PATH = "/v1/detect"

DEFAULT_MIN_CONFIDENCE = 0.25
DEFAULT_VEHICLE_LABELS = frozenset({"car"})

# Blob detector tuning: HSV saturation strictly above 0.5 (equivalently
# max > 2*min per pixel), components at least 0.5% of the frame.
BLOB_SATURATION_MIN_AREA = 0.005


@dataclass(frozen=True)
class Detection:
    label: str
    confidence: float
    bbox: tuple[float, float, float, float]  # normalized x, y, w, h (top-left)

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise ConfigError(f"confidence must be in [0, 1], got {self.confidence}")
        if not valid_norm_rect(self.bbox):
            raise ConfigError(f"invalid normalized bbox {self.bbox}")


class Verdict(str, enum.Enum):
    ACCEPT = "accept"
    REJECT = "reject"


class RejectReason(str, enum.Enum):
    NO_CAR = "no_car"
    MULTIPLE_CARS = "multiple_cars"
    LOW_CONFIDENCE = "low_confidence"


@dataclass(frozen=True)
class GateDecision:
    verdict: Verdict
    bbox: tuple[float, float, float, float] | None = None
    score: float | None = None
    reason: RejectReason | None = None

    def __post_init__(self):
        if self.verdict is Verdict.ACCEPT:
            if self.bbox is None or self.score is None or self.reason is not None:
                raise ConfigError("accept decisions carry bbox and score, nothing else")
        else:
            if self.reason is None or self.bbox is not None or self.score is not None:
                raise ConfigError("reject decisions carry only a reason")


@dataclass(frozen=True)
class GateConfig:
    min_confidence: float = DEFAULT_MIN_CONFIDENCE
    vehicle_labels: frozenset[str] = DEFAULT_VEHICLE_LABELS

    def __post_init__(self):
        if not (0.0 <= self.min_confidence <= 1.0):
            raise ConfigError("min_confidence must be in [0, 1]")
        if not self.vehicle_labels:
            raise ConfigError("vehicle_labels must be non-empty")


def assess(detections: list[Detection], cfg: GateConfig) -> GateDecision:
    """Total, deterministic three-way gate on the vehicle detections.

    Exactly one vehicle at or above the confidence floor -> accept with its
    bbox/score; two or more -> multiple-cars reject; none -> no-car reject,
    except that a vehicle seen only below the floor rejects as low-confidence.
    Non-vehicle labels are ignored entirely.
    """
    vehicles = [d for d in detections if d.label in cfg.vehicle_labels]
    confident = [d for d in vehicles if d.confidence >= cfg.min_confidence]
    if len(confident) == 1:
        hit = confident[0]
        return GateDecision(Verdict.ACCEPT, bbox=hit.bbox, score=hit.confidence)
    if len(confident) >= 2:
        return GateDecision(Verdict.REJECT, reason=RejectReason.MULTIPLE_CARS)
    if vehicles:
        return GateDecision(Verdict.REJECT, reason=RejectReason.LOW_CONFIDENCE)
    return GateDecision(Verdict.REJECT, reason=RejectReason.NO_CAR)


def crop_to_bbox(image: ImageBuf, bbox: tuple[float, float, float, float]) -> ImageBuf:
    """Cut out exactly the half-up-rounded pixel rect of a normalized bbox."""
    x, y, w, h = pixel_rect(bbox, image.width, image.height)
    crop = np.ascontiguousarray(image.data[y : y + h, x : x + w])
    return ImageBuf(w, h, crop)


def _sorted_detections(dets: list[Detection]) -> list[Detection]:
    return sorted(dets, key=lambda d: (-d.confidence, d.bbox[0], d.bbox[1]))


class OracleMockDetector:
    """Reads the ground truth the procedural backend embedded in the image."""

    def health_check(self) -> None:
        return None

    def detect(self, image: ImageBuf) -> list[Detection]:
        raw = image.metadata.get(GT_METADATA_KEY)
        if raw is None:
            return []
        gt = json.loads(raw)
        dets = [
            Detection(label="car", confidence=1.0, bbox=tuple(b["bbox"])) for b in gt["blobs"]
        ]
        return _sorted_detections(dets)


class BlobMockDetector:
    """Finds saturated connected components; ignores the embedded metadata."""

    def __init__(self, min_area_fraction: float = BLOB_SATURATION_MIN_AREA):
        self.min_area_fraction = min_area_fraction

    def health_check(self) -> None:
        return None

    def detect(self, image: ImageBuf) -> list[Detection]:
        px = image.data.astype(np.int16)
        mx = px.max(axis=2)
        mn = px.min(axis=2)
        mask = mx > 2 * mn  # HSV saturation strictly above 0.5
        labeled, n = ndimage.label(mask)
        if n == 0:
            return []
        min_area = self.min_area_fraction * image.width * image.height
        dets = []
        for idx, sl in enumerate(ndimage.find_objects(labeled), start=1):
            if sl is None:
                continue
            area = int((labeled[sl] == idx).sum())
            if area < min_area:
                continue
            y0, y1 = sl[0].start, sl[0].stop
            x0, x1 = sl[1].start, sl[1].stop
            bbox = (
                x0 / image.width,
                y0 / image.height,
                (x1 - x0) / image.width,
                (y1 - y0) / image.height,
            )
            confidence = min(1.0, area / ((x1 - x0) * (y1 - y0)))
            dets.append(Detection(label="car", confidence=confidence, bbox=bbox))
        return _sorted_detections(dets)


def detections_from_wire(payload: dict) -> list[Detection]:
    try:
        dets = [
            Detection(
                label=str(d["label"]),
                confidence=float(d["confidence"]),
                bbox=tuple(float(v) for v in d["bbox"]),
            )
            for d in payload["detections"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed detection response: {exc}") from exc
    return _sorted_detections(dets)


class HttpDetectionBackend:
    """Client for the detection wire protocol (POST /v1/detect)."""

    def __init__(self, base_url: str, *, timeout: float = 30.0, retry: RetryPolicy | None = None):
        self._http = HttpJsonClient(base_url, timeout=timeout, retry=retry)

    def health_check(self) -> None:
        self.detect(ImageBuf.filled(8, 8, (128, 128, 128)))

    def detect(self, image: ImageBuf) -> list[Detection]:
        body = {"image": base64.b64encode(encode_png(image)).decode("ascii")}
        payload = self._http.post(DETECT_PATH, body)
        return detections_from_wire(payload)


def detect(backend, image: ImageBuf) -> list[Detection]:
    """Run a detector and normalize the output ordering."""
    dets = backend.detect(image)
    for d in dets:
        if not isinstance(d, Detection):
            raise ProtocolError(f"detector returned a non-Detection: {d!r}")
    return _sorted_detections(dets)
