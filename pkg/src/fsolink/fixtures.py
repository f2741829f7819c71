"""Deterministic synthetic test images.

Multi-octave smooth value noise with a global gradient, a few soft blobs and
one hard-edged rectangle per channel mix: smooth enough to compress like a
natural photo, structured enough that quality metrics have something to lose.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .core import ImageTensor, seeded_rng


def _octave(rng: np.random.Generator, h: int, w: int, cells: int) -> np.ndarray:
    coarse = rng.normal(size=(cells + 1, cells + 1))
    zy = h / cells
    zx = w / cells
    field = ndimage.zoom(coarse, (zy, zx), order=1, grid_mode=True, mode="nearest")
    return field[:h, :w]


def synthetic_image(height: int, width: int, seed: int) -> ImageTensor:
    if height % 8 or width % 8:
        raise ValueError("dims must be multiples of 8")
    rng = seeded_rng(seed, "fixture")
    base = np.zeros((height, width))
    amp = 1.0
    for cells in (4, 8, 16, 32):
        base += amp * _octave(rng, height, width, cells)
        amp *= 0.55
    yy, xx = np.mgrid[0:height, 0:width]
    base += 0.8 * (xx / width) - 0.5 * (yy / height)

    # a few soft blobs and one hard-edged box for detail content
    for _ in range(4):
        cy, cx = rng.uniform(0, height), rng.uniform(0, width)
        r = rng.uniform(0.08, 0.25) * min(height, width)
        base += rng.uniform(-1.2, 1.2) * np.exp(-(((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * r**2)))
    y0, x0 = int(height * 0.15), int(width * 0.55)
    base[y0 : y0 + height // 5, x0 : x0 + width // 5] += 0.9

    base -= base.mean()
    base /= max(base.std(), 1e-9)
    luma = 128.0 + 46.0 * base

    tint = np.stack(
        [
            14.0 * _octave(rng, height, width, 8),
            10.0 * _octave(rng, height, width, 8),
            16.0 * _octave(rng, height, width, 8),
        ],
        axis=-1,
    )
    rgb = luma[:, :, None] + tint
    return ImageTensor(np.clip(np.round(rgb), 0, 255).astype(np.uint8))
