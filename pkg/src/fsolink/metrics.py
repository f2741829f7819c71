"""Image-quality and link metrics: MS-SSIM (and its dB form), PSNR, BER, image rate.

MS-SSIM uses the metric's standard constants: 5 scales weighted
(0.0448, 0.2856, 0.3001, 0.2363, 0.1333), an 11x11 Gaussian window with
sigma 1.5, K1=0.01, K2=0.03, dyadic 2x2-mean downsampling, computed on
BT.601 luma.  Images too small for 5 scales use fewer scales with the
weights renormalized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import ImageTensor

MS_SSIM_WEIGHTS = np.array([0.0448, 0.2856, 0.3001, 0.2363, 0.1333])
_K1, _K2 = 0.01, 0.03
_L = 255.0
_WIN = 11
_SIGMA = 1.5


def _gaussian_kernel() -> np.ndarray:
    coords = np.arange(_WIN) - (_WIN - 1) / 2.0
    g = np.exp(-(coords**2) / (2.0 * _SIGMA**2))
    return g / g.sum()


_KERNEL = _gaussian_kernel()


def _blur_valid(x: np.ndarray) -> np.ndarray:
    half = _WIN // 2
    out = ndimage.correlate1d(x, _KERNEL, axis=0, mode="constant")
    out = ndimage.correlate1d(out, _KERNEL, axis=1, mode="constant")
    return out[half:-half, half:-half]


def _luma(img: ImageTensor) -> np.ndarray:
    rgb = img.data.astype(np.float64)
    return 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]


def _ssim_terms(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    c1 = (_K1 * _L) ** 2
    c2 = (_K2 * _L) ** 2
    mu_a = _blur_valid(a)
    mu_b = _blur_valid(b)
    var_a = _blur_valid(a * a) - mu_a**2
    var_b = _blur_valid(b * b) - mu_b**2
    cov = _blur_valid(a * b) - mu_a * mu_b
    lum = (2 * mu_a * mu_b + c1) / (mu_a**2 + mu_b**2 + c1)
    cs = (2 * cov + c2) / (var_a + var_b + c2)
    return float(np.mean(lum)), float(np.mean(cs))


def _downsample2(x: np.ndarray) -> np.ndarray:
    h, w = x.shape
    x = x[: h - h % 2, : w - w % 2]
    return 0.25 * (x[0::2, 0::2] + x[1::2, 0::2] + x[0::2, 1::2] + x[1::2, 1::2])


def ms_ssim_scales_for(height: int, width: int) -> int:
    """Largest scale count (max 5) whose coarsest image still fits the window."""
    scales = 1
    m = min(height, width)
    while scales < 5 and m // 2 >= _WIN:
        scales += 1
        m //= 2
    return scales


def ms_ssim(a: ImageTensor, b: ImageTensor) -> float:
    if (a.height, a.width) != (b.height, b.width):
        raise ValueError("image dimensions must match")
    scales = ms_ssim_scales_for(a.height, a.width)
    weights = MS_SSIM_WEIGHTS[:scales] / MS_SSIM_WEIGHTS[:scales].sum()
    xa, xb = _luma(a), _luma(b)
    score = 1.0
    for s in range(scales):
        lum, cs = _ssim_terms(xa, xb)
        if s < scales - 1:
            score *= max(cs, 0.0) ** weights[s]
            xa, xb = _downsample2(xa), _downsample2(xb)
        else:
            score *= max(lum * cs, 0.0) ** weights[s]
    return float(min(score, 1.0))


def ms_ssim_db(score: float) -> float:
    """-10 log10(1 - score), capped at 100 dB for a perfect score."""
    if not 0.0 <= score <= 1.0:
        raise ValueError("score must be in [0, 1]")
    return min(100.0, -10.0 * math.log10(max(1.0 - score, 1e-10)))


def psnr(a: ImageTensor, b: ImageTensor) -> float:
    if (a.height, a.width) != (b.height, b.width):
        raise ValueError("image dimensions must match")
    err = a.data.astype(np.float64) - b.data.astype(np.float64)
    mse = float(np.mean(err**2))
    if mse == 0.0:
        return 100.0
    return 10.0 * math.log10(255.0**2 / mse)


@dataclass(frozen=True)
class QualityScore:
    ms_ssim: float
    ms_ssim_db: float
    psnr_db: float


def quality(a: ImageTensor, b: ImageTensor) -> QualityScore:
    s = ms_ssim(a, b)
    return QualityScore(ms_ssim=s, ms_ssim_db=ms_ssim_db(s), psnr_db=psnr(a, b))


def ber(tx_bits, rx_bits) -> float:
    tx = np.asarray(tx_bits).ravel()
    rx = np.asarray(rx_bits).ravel()
    if tx.size != rx.size:
        raise ValueError("bit buffers must have equal length")
    if tx.size == 0:
        raise ValueError("empty bit buffers")
    return float(np.count_nonzero(tx != rx) / tx.size)


def image_rate(symbol_rate: float, symbols_per_image: float, overhead_factor: float = 1.0) -> float:
    """Images per second: R_s / N_SPI times an optional pilot/overhead factor."""
    if symbol_rate <= 0 or symbols_per_image <= 0 or overhead_factor <= 0:
        raise ValueError("inputs must be positive")
    if overhead_factor > 1.0:
        raise ValueError("overhead_factor must be <= 1")
    return symbol_rate / symbols_per_image * overhead_factor
