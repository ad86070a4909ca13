"""Deterministic pixel transforms for dataset preprocessing.

Accepted crops are rotated (random small angle, seeded per record index) and
then squashed to the training resolution. Rotation runs before the resize to
keep interpolation loss down. Everything is bilinear and byte-deterministic;
the heavy loops live in the kernels package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import _kernels
from .errors import ConfigError, InputError
from .images import ImageBuf
from .rng import TAG_ROTATION, SplitMix64, mix

DEFAULT_TARGET_SIZE = 64
DEFAULT_ROTATION_MAX = 15.0


@dataclass(frozen=True)
class AugmentConfig:
    target_size: int = DEFAULT_TARGET_SIZE
    rotation_max_degrees: float = DEFAULT_ROTATION_MAX
    rotation_seed: int = 0

    def __post_init__(self):
        if self.target_size < 8:
            raise ConfigError("target_size must be >= 8")
        if not (0.0 <= self.rotation_max_degrees < 90.0):
            raise ConfigError("rotation_max_degrees must be in [0, 90)")


def resize(image: ImageBuf, w: int, h: int) -> ImageBuf:
    """Bilinear resize; aspect ratio is not preserved."""
    if w < 1 or h < 1:
        raise InputError("resize target must be positive")
    out = _kernels.resize_bilinear(image.data, w, h)
    return ImageBuf(w, h, out)


def rotate(image: ImageBuf, degrees: float) -> ImageBuf:
    """Rotate about the center; same size, edge-replicated fill.

    Trig is evaluated here once so both kernel implementations interpolate
    from identical coefficients.
    """
    if not (abs(degrees) < 90.0):
        raise InputError(f"rotation must satisfy |degrees| < 90, got {degrees}")
    rad = math.radians(degrees)
    out = _kernels.rotate_bilinear(image.data, math.cos(rad), math.sin(rad))
    return ImageBuf(image.width, image.height, out)


def rotation_angle(rotation_seed: int, index: int, max_degrees: float) -> float:
    """Uniform angle in [-max_degrees, +max_degrees], pure in (seed, index)."""
    u = SplitMix64(mix(rotation_seed, TAG_ROTATION, index)).uniform()
    return (2.0 * u - 1.0) * max_degrees


def augment(image: ImageBuf, cfg: AugmentConfig, index: int) -> ImageBuf:
    """Seeded rotation followed by the square resize to training resolution."""
    degrees = rotation_angle(cfg.rotation_seed, index, cfg.rotation_max_degrees)
    if degrees != 0.0:
        image = rotate(image, degrees)
    return resize(image, cfg.target_size, cfg.target_size)
