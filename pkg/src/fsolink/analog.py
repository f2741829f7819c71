"""Discrete-time analog transport: a linear DCT-subband mapper with SoftCast
style power allocation, PAPR measurement, pilot framing, four-tributary
serialization, and the nonnegative bias mapping used on the intensity channel.

The mapper sends scaled transform coefficients directly as channel symbols;
reconstruction quality then tracks the channel SNR continuously, which is the
behaviour the digital pipeline cannot produce.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.fft import dctn, idctn

from .core import ImageTensor, Layout, SymbolStream

PILOT_SPACING = 50


@dataclass(frozen=True)
class PaprReport:
    papr_linear: float

    @property
    def papr_db(self) -> float:
        return 10.0 * math.log10(self.papr_linear)


def papr(stream: SymbolStream) -> PaprReport:
    p = np.abs(stream.values) ** 2
    mean = float(np.mean(p))
    if mean <= 0:
        raise ValueError("degenerate stream: zero mean power")
    return PaprReport(papr_linear=float(np.max(p)) / mean)


@dataclass
class AnalogMapping:
    """Side information for the linear mapper (carried out of band, error free)."""

    height: int
    width: int
    block_size: int
    bandwidth_ratio: float
    kept_mask: np.ndarray          # (64,) bool
    subband_gains: np.ndarray      # (64,) float, 0 for discarded subbands
    subband_variances: np.ndarray  # (64,) float
    pad_count: int

    @property
    def kept_subbands(self) -> int:
        return int(np.count_nonzero(self.kept_mask))

    def to_json_dict(self) -> dict:
        return {
            "height": self.height,
            "width": self.width,
            "block_size": self.block_size,
            "bandwidth_ratio": self.bandwidth_ratio,
            "kept_mask": self.kept_mask.astype(int).tolist(),
            "subband_gains": self.subband_gains.tolist(),
            "subband_variances": self.subband_variances.tolist(),
            "pad_count": self.pad_count,
        }

    @staticmethod
    def from_json_dict(d: dict) -> "AnalogMapping":
        return AnalogMapping(
            height=int(d["height"]),
            width=int(d["width"]),
            block_size=int(d["block_size"]),
            bandwidth_ratio=float(d["bandwidth_ratio"]),
            kept_mask=np.asarray(d["kept_mask"], dtype=bool),
            subband_gains=np.asarray(d["subband_gains"], dtype=np.float64),
            subband_variances=np.asarray(d["subband_variances"], dtype=np.float64),
            pad_count=int(d["pad_count"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict()) + "\n")

    @staticmethod
    def load(path) -> "AnalogMapping":
        return AnalogMapping.from_json_dict(json.loads(Path(path).read_text()))


def achievable_ratios() -> list[Fraction]:
    return [Fraction(k, 128) for k in range(1, 65)]


def _kept_count(ratio: float) -> int:
    kept = 128.0 * ratio
    rounded = round(kept)
    if abs(kept - rounded) > 1e-9 or not 1 <= rounded <= 64:
        near = min(achievable_ratios(), key=lambda f: abs(float(f) - ratio))
        raise ValueError(
            f"bandwidth ratio {ratio} not on the k/128 grid; nearest valid is {near}"
        )
    return int(rounded)


def _subband_coeffs(img: ImageTensor) -> np.ndarray:
    """(64, n_sources_per_band) transform coefficients, channels concatenated."""
    data = img.data.astype(np.float64) - 128.0
    h, w = img.height, img.width
    per_chan = []
    for c in range(3):
        blocks = (
            data[:, :, c]
            .reshape(h // 8, 8, w // 8, 8)
            .swapaxes(1, 2)
            .reshape(-1, 64)
        )
        coefs = dctn(blocks.reshape(-1, 8, 8), axes=(1, 2), norm="ortho").reshape(-1, 64)
        per_chan.append(coefs)
    return np.concatenate(per_chan, axis=0).T.copy()


def _subbands_to_image(bands: np.ndarray, height: int, width: int) -> ImageTensor:
    n_blocks = bands.shape[1] // 3
    out = np.zeros((height, width, 3))
    for c in range(3):
        coefs = bands[:, c * n_blocks : (c + 1) * n_blocks].T.reshape(-1, 8, 8)
        blocks = idctn(coefs, axes=(1, 2), norm="ortho")
        plane = (
            blocks.reshape(height // 8, width // 8, 8, 8)
            .swapaxes(1, 2)
            .reshape(height, width)
        )
        out[:, :, c] = plane + 128.0
    return ImageTensor(np.clip(np.round(out), 0, 255).astype(np.uint8))


def analog_encode(img: ImageTensor, ratio: float = 0.125) -> tuple[SymbolStream, AnalogMapping]:
    """Map an image to unit-power complex symbols: keep the highest-variance
    DCT subbands, weight each by variance^(-1/4), pair reals into I/Q."""
    kept_n = _kept_count(ratio)
    bands = _subband_coeffs(img)
    variances = np.mean(bands**2, axis=1)

    order = np.lexsort((np.arange(64), -variances))
    kept_idx = np.sort(order[:kept_n])
    kept_mask = np.zeros(64, dtype=bool)
    kept_mask[kept_idx] = True

    gains = np.zeros(64)
    active = kept_mask & (variances > 0)
    if np.any(active):
        raw = variances[active] ** (-0.25)
        # complex symbols pair two reals, so each real dimension carries 1/2:
        # sum(g_i^2 var_i) / kept_n == 1/2 makes mean |symbol|^2 == 1
        norm = math.sqrt(kept_n / (2.0 * float(np.sum(raw**2 * variances[active]))))
        gains[active] = raw * norm

    scaled = bands[kept_idx] * gains[kept_idx, None]
    flat = scaled.ravel()
    pad = int((-flat.size) % 2)
    if pad:
        flat = np.concatenate([flat, np.zeros(pad)])
    sym = flat[0::2] + 1j * flat[1::2]
    mapping = AnalogMapping(
        height=img.height, width=img.width, block_size=8,
        bandwidth_ratio=float(ratio), kept_mask=kept_mask,
        subband_gains=gains, subband_variances=variances, pad_count=pad,
    )
    return SymbolStream(sym, Layout.COMPLEX), mapping


def analog_decode(received: SymbolStream, mapping: AnalogMapping, noise_var: float) -> ImageTensor:
    """Per-subband linear MMSE estimate, then inverse transform.

    noise_var is the per-complex-symbol noise power (so each real coefficient
    sees half of it); at zero noise the estimator reduces to exact inversion.
    """
    if noise_var < 0:
        raise ValueError("noise_var must be >= 0")
    kept_idx = np.nonzero(mapping.kept_mask)[0]
    vals = received.values
    flat = np.empty(2 * vals.size)
    flat[0::2] = vals.real
    flat[1::2] = vals.imag
    if mapping.pad_count:
        flat = flat[: flat.size - mapping.pad_count]
    n_band = flat.size // kept_idx.size
    expected = (mapping.height // 8) * (mapping.width // 8) * 3
    if n_band * kept_idx.size != flat.size or n_band != expected:
        raise ValueError("stream length inconsistent with mapping")
    rec = flat.reshape(kept_idx.size, n_band)

    bands = np.zeros((64, n_band))
    sigma2 = noise_var / 2.0  # per real dimension
    for row, band in enumerate(kept_idx):
        g = mapping.subband_gains[band]
        lam = mapping.subband_variances[band]
        if g <= 0 or lam <= 0:
            continue
        bands[band] = (g * lam) / (g * g * lam + sigma2) * rec[row]
    return _subbands_to_image(bands, mapping.height, mapping.width)


def serial_to_parallel(values: np.ndarray, tributaries: int = 4) -> tuple[list[np.ndarray], int]:
    """Round-robin deal into tributaries (XI, XQ, YI, YQ order); zero-pads to
    a multiple of the tributary count and reports the pad."""
    v = np.asarray(values)
    pad = int((-v.size) % tributaries)
    if pad:
        v = np.concatenate([v, np.zeros(pad, dtype=v.dtype)])
    return [v[i::tributaries].copy() for i in range(tributaries)], pad


def parallel_to_serial(streams: list[np.ndarray], pad: int) -> np.ndarray:
    lengths = {s.size for s in streams}
    if len(lengths) != 1:
        raise ValueError("tributaries must have equal length")
    n = streams[0].size * len(streams)
    out = np.empty(n, dtype=np.result_type(*[s.dtype for s in streams]))
    for i, s in enumerate(streams):
        out[i :: len(streams)] = s
    return out[: n - pad] if pad else out


def pilot_positions(n_data: int, spacing: int = PILOT_SPACING) -> np.ndarray:
    n_pilots = -(-n_data // (spacing - 1))
    return np.arange(n_pilots) * spacing


def insert_pilots(values: np.ndarray, pilot_symbol, spacing: int = PILOT_SPACING) -> np.ndarray:
    """Place a known pilot at every spacing-th position (2% overhead at 50)."""
    v = np.asarray(values)
    pos = pilot_positions(v.size, spacing)
    total = v.size + pos.size
    out = np.empty(total, dtype=np.result_type(v.dtype, type(pilot_symbol)))
    mask = np.zeros(total, dtype=bool)
    mask[pos] = True
    out[mask] = pilot_symbol
    out[~mask] = v
    return out


def strip_pilots(values: np.ndarray, spacing: int = PILOT_SPACING) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of insert_pilots; returns (data, pilot samples)."""
    v = np.asarray(values)
    mask = np.zeros(v.size, dtype=bool)
    mask[::spacing] = True
    return v[~mask], v[mask]


def imdd_bias_map(samples: np.ndarray, avg_power: float = 1.0) -> tuple[np.ndarray, float]:
    """Map a real zero-mean sequence onto nonnegative intensities P*(1 + s/max|s|).

    Returns the intensity sequence and the peak used, which the receiver needs
    to invert the mapping.
    """
    if np.iscomplexobj(samples):
        raise ValueError("intensity mapping needs a real stream")
    s = np.asarray(samples, dtype=np.float64)
    peak = float(np.max(np.abs(s)))
    if peak == 0.0:
        return np.full(s.size, avg_power), 0.0
    return avg_power * (1.0 + s / peak), peak


def imdd_bias_unmap(intensity: np.ndarray, peak: float, avg_power: float = 1.0) -> np.ndarray:
    return (np.asarray(intensity, dtype=np.float64) / avg_power - 1.0) * peak
