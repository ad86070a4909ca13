#!/usr/bin/env python3
"""Benchmark the compiled kernels against the NumPy fallback.

Usage:
    python3 benchmarks/bench_kernels.py [--repeats 20]

Covers the three hot loops of the pipeline at their production sizes:
synthesis-frame noise (720x720), crop rotation (~350x350), and the final
resize to training resolution. Both implementations are also cross-checked
for byte equality on every measured input.
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from synthset._kernels import _fallback

try:
    from synthset._kernels import _core
except ImportError:
    _core = None


def _time(fn, repeats: int) -> float:
    best = math.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    if _core is None:
        print("compiled kernels are not built; run pip install -e . first")
        return 1

    rng = np.random.default_rng(7)
    frame = rng.integers(0, 256, (720, 720, 3), dtype=np.uint8)
    crop = rng.integers(0, 256, (350, 350, 3), dtype=np.uint8)
    theta = math.radians(12.5)
    cos_t, sin_t = math.cos(theta), math.sin(theta)

    cases = [
        ("value_noise 720x720", lambda impl: impl.value_noise(720, 720, 42, 120, 24)),
        ("rotate 350x350", lambda impl: impl.rotate_bilinear(crop, cos_t, sin_t)),
        ("resize 350->64", lambda impl: impl.resize_bilinear(crop, 64, 64)),
        ("resize 720->720 (prepare)", lambda impl: impl.resize_bilinear(frame, 720, 720)),
    ]

    print(f"{'kernel':<28} {'compiled':>10} {'fallback':>10} {'speedup':>8}")
    for name, call in cases:
        a = call(_core)
        b = call(_fallback)
        assert np.array_equal(a, b), f"implementations disagree on {name}"
        t_core = _time(lambda: call(_core), args.repeats)
        t_fb = _time(lambda: call(_fallback), args.repeats)
        print(f"{name:<28} {t_core * 1e3:>8.2f}ms {t_fb * 1e3:>8.2f}ms {t_fb / t_core:>7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
