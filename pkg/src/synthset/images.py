"""In-memory RGB images, PNG (de)serialization, and bbox pixel geometry.

Images are 8-bit RGB, row-major. String metadata rides along with the buffer
and survives PNG round trips as tEXt chunks; the procedural backend uses the
`synthset-gt` key to embed its ground truth.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from PIL.PngImagePlugin import PngInfo

from .errors import InputError

GT_METADATA_KEY = "synthset-gt"


@dataclass
class ImageBuf:
    """An RGB pixel buffer plus optional string metadata.

    `data` is a C-contiguous uint8 array of shape (height, width, 3). Treat
    instances as immutable; transforms always return new buffers.
    """

    width: int
    height: int
    data: np.ndarray
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InputError(f"image dimensions must be positive, got {self.width}x{self.height}")
        if self.data.shape != (self.height, self.width, 3) or self.data.dtype != np.uint8:
            raise InputError(
                f"pixel array must be uint8 of shape ({self.height}, {self.width}, 3), "
                f"got {self.data.dtype} {self.data.shape}"
            )
        if not self.data.flags["C_CONTIGUOUS"]:
            self.data = np.ascontiguousarray(self.data)

    @property
    def pixels(self) -> bytes:
        """Row-major RGB bytes, length width*height*3."""
        return self.data.tobytes()

    @classmethod
    def from_pixels(cls, width: int, height: int, pixels: bytes) -> "ImageBuf":
        if len(pixels) != width * height * 3:
            raise InputError(
                f"expected {width * height * 3} bytes for {width}x{height} RGB, got {len(pixels)}"
            )
        arr = np.frombuffer(pixels, dtype=np.uint8).reshape(height, width, 3).copy()
        return cls(width, height, arr)

    @classmethod
    def filled(cls, width: int, height: int, rgb: tuple[int, int, int]) -> "ImageBuf":
        arr = np.empty((height, width, 3), dtype=np.uint8)
        arr[:, :] = rgb
        return cls(width, height, arr)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ImageBuf):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.metadata == other.metadata
            and np.array_equal(self.data, other.data)
        )


def encode_png(image: ImageBuf) -> bytes:
    pil = Image.fromarray(image.data, mode="RGB")
    info = PngInfo()
    for key, value in sorted(image.metadata.items()):
        info.add_text(key, value)
    buf = io.BytesIO()
    pil.save(buf, format="PNG", pnginfo=info)
    return buf.getvalue()


def decode_png(data: bytes) -> ImageBuf:
    pil = Image.open(io.BytesIO(data))
    pil.load()
    metadata = {k: v for k, v in getattr(pil, "text", {}).items()}
    rgb = pil.convert("RGB")
    arr = np.asarray(rgb, dtype=np.uint8)
    return ImageBuf(arr.shape[1], arr.shape[0], arr.copy(), metadata)


def save_png(image: ImageBuf, path: str | Path) -> None:
    Path(path).write_bytes(encode_png(image))


def load_png(path: str | Path) -> ImageBuf:
    return decode_png(Path(path).read_bytes())


def round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def valid_norm_rect(bbox: tuple[float, float, float, float], eps: float = 1e-9) -> bool:
    x, y, w, h = bbox
    return (
        -eps <= x <= 1 + eps
        and -eps <= y <= 1 + eps
        and w > 0
        and h > 0
        and x + w <= 1 + eps
        and y + h <= 1 + eps
    )


def pixel_rect(
    bbox: tuple[float, float, float, float], width: int, height: int
) -> tuple[int, int, int, int]:
    """Map a normalized (x, y, w, h) rect to integer pixels.

    Each coordinate is scaled and rounded half-up independently, then the
    rect is clipped to the image. Zero-area results raise InputError; callers
    in the pipeline record those as degenerate-bbox rejections.
    """
    x, y, w, h = bbox
    px = round_half_up(x * width)
    py = round_half_up(y * height)
    pw = round_half_up(w * width)
    ph = round_half_up(h * height)
    px = min(max(px, 0), width)
    py = min(max(py, 0), height)
    pw = min(pw, width - px)
    ph = min(ph, height - py)
    if pw < 1 or ph < 1:
        raise InputError(f"bbox {bbox} maps to a zero-area pixel rect on {width}x{height}")
    return px, py, pw, ph
