"""Rate-controlled transform source codec (fixed-length, entropy-free).

8x8 block DCT per plane in YCbCr (chroma subsampled 2x when dims allow), a
greedy rate-distortion bit allocator over the 64 zigzag bands, uniform
quantizers with per-band scales carried in the header, and a CRC over the
whole buffer so that any residual bit error makes decoding fail loudly
instead of returning a silently corrupted image.
"""

from __future__ import annotations

import binascii
import heapq
import struct
from dataclasses import dataclass

import numpy as np
from scipy.fft import dctn, idctn

from .bits import BitBuffer
from .core import ImageTensor

_MAGIC = 0x7C0D
_VERSION = 1
_MAX_DC_BITS = 12
_MAX_AC_BITS = 10
_MIN_DC_BITS = 6
_MIN_AC_BITS = 2


class RateInfeasibleError(ValueError):
    pass


class CorruptStreamError(ValueError):
    pass


def _zigzag_order() -> np.ndarray:
    idx = np.arange(64).reshape(8, 8)
    order = []
    for s in range(15):
        diag = [(i, s - i) for i in range(8) if 0 <= s - i < 8]
        if s % 2 == 0:
            diag.reverse()
        order.extend(idx[i, j] for i, j in diag)
    return np.array(order, dtype=np.int64)


_ZIGZAG = _zigzag_order()


def _rgb_to_ycbcr(rgb: np.ndarray) -> np.ndarray:
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0
    cr = 0.5 * r - 0.418688 * g - 0.081312 * b + 128.0
    return np.stack([y, cb, cr], axis=-1)


def _ycbcr_to_rgb(ycc: np.ndarray) -> np.ndarray:
    y, cb, cr = ycc[..., 0], ycc[..., 1] - 128.0, ycc[..., 2] - 128.0
    r = y + 1.402 * cr
    g = y - 0.344136 * cb - 0.714136 * cr
    b = y + 1.772 * cb
    return np.stack([r, g, b], axis=-1)


def _to_blocks(plane: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    b = plane.reshape(h // 8, 8, w // 8, 8).swapaxes(1, 2).reshape(-1, 8, 8)
    return b


def _from_blocks(blocks: np.ndarray, h: int, w: int) -> np.ndarray:
    return blocks.reshape(h // 8, w // 8, 8, 8).swapaxes(1, 2).reshape(h, w)


def _band_coeffs(plane: np.ndarray) -> np.ndarray:
    """DCT the plane and return coefficients as (64, n_blocks) in zigzag order."""
    blocks = _to_blocks(plane - 128.0)
    coef = dctn(blocks, axes=(1, 2), norm="ortho").reshape(-1, 64)
    return coef[:, _ZIGZAG].T.copy()


def _bands_to_plane(bands: np.ndarray, h: int, w: int) -> np.ndarray:
    coef = np.zeros((bands.shape[1], 64))
    coef[:, _ZIGZAG] = bands.T
    blocks = idctn(coef.reshape(-1, 8, 8), axes=(1, 2), norm="ortho")
    return _from_blocks(blocks, h, w) + 128.0


def _pack_values(chunks: list[tuple[np.ndarray, int]]) -> bytes:
    """Bit-pack groups of nonnegative integers, MSB first within each value."""
    pieces = []
    for vals, width in chunks:
        v = vals.astype(np.uint64)
        shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
        bits = ((v[:, None] >> shifts[None, :]) & 1).astype(np.uint8)
        pieces.append(bits.ravel())
    allbits = np.concatenate(pieces) if pieces else np.zeros(0, dtype=np.uint8)
    return np.packbits(allbits).tobytes()


class _BitCursor:
    def __init__(self, data: bytes):
        self.bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
        self.pos = 0

    def take(self, count: int, width: int) -> np.ndarray:
        need = count * width
        if self.pos + need > self.bits.size:
            raise CorruptStreamError("payload shorter than header promises")
        chunk = self.bits[self.pos : self.pos + need].reshape(count, width)
        self.pos += need
        shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
        return (chunk.astype(np.uint64) << shifts[None, :]).sum(axis=1)


@dataclass
class _Allocation:
    widths_y: np.ndarray   # (64,) bit widths, 0 = band absent
    widths_c: np.ndarray   # shared by Cb and Cr


def _allocate(target_bits: int, lam_y: np.ndarray, lam_c: np.ndarray,
              nb_y: int, nb_c: int, fixed_bits: int) -> _Allocation:
    """Greedy marginal-gain allocation: each extra bit on a band roughly
    quarters its quantization error, weighted by the band's measured energy."""
    widths_y = np.zeros(64, dtype=np.int64)
    widths_c = np.zeros(64, dtype=np.int64)
    budget = target_bits - fixed_bits
    if budget < _MIN_DC_BITS * nb_y:
        raise RateInfeasibleError("rate infeasible: budget below minimal allocation")
    spent = 0

    def step_cost(plane: str, band: int) -> tuple[int, int]:
        # returns (bits added, new width) for the next upgrade of this band
        w = widths_y[band] if plane == "y" else widths_c[band]
        nb = nb_y if plane == "y" else 2 * nb_c
        if w == 0:
            first = _MIN_DC_BITS if band == 0 else _MIN_AC_BITS
            scale = 0 if band == 0 else (32 if plane == "y" else 64)
            return first * nb + scale, first
        cap = _MAX_DC_BITS if band == 0 else _MAX_AC_BITS
        if w >= cap:
            return 0, w
        return nb, w + 1

    heap = []
    for plane, lam in (("y", lam_y), ("c", lam_c)):
        for band in range(64):
            if lam[band] <= 0:
                continue
            cost, neww = step_cost(plane, band)
            if cost == 0:
                continue
            gain = lam[band] * (nb_y if plane == "y" else 2 * nb_c)
            heapq.heappush(heap, (-gain / cost, band, plane, cost, neww))

    while heap:
        neg_density, band, plane, cost, neww = heapq.heappop(heap)
        widths = widths_y if plane == "y" else widths_c
        cur_cost, cur_new = step_cost(plane, band)
        if cur_cost != cost or cur_new != neww:
            continue  # stale entry
        if spent + cost > budget:
            continue
        widths[band] = neww
        spent += cost
        lam = lam_y if plane == "y" else lam_c
        cost2, neww2 = step_cost(plane, band)
        if cost2 > 0:
            gain = lam[band] * (nb_y if plane == "y" else 2 * nb_c) * 4.0 ** (-float(neww))
            heapq.heappush(heap, (-gain / cost2, band, plane, cost2, neww2))

    return _Allocation(widths_y=widths_y, widths_c=widths_c)


def _quantize_dc(vals: np.ndarray, width: int) -> np.ndarray:
    step = 2048.0 / (1 << width)
    idx = np.round((vals + 1024.0) / step)
    return np.clip(idx, 0, (1 << width) - 1).astype(np.int64)


def _dequantize_dc(idx: np.ndarray, width: int) -> np.ndarray:
    step = 2048.0 / (1 << width)
    return idx.astype(np.float64) * step - 1024.0


def _quantize_ac(vals: np.ndarray, scale: float, width: int) -> np.ndarray:
    m = (1 << (width - 1)) - 1
    if scale <= 0:
        return np.full(vals.shape, m, dtype=np.int64)
    idx = np.clip(np.round(vals / scale * m), -m, m).astype(np.int64)
    return idx + m

def _dequantize_ac(idx: np.ndarray, scale: float, width: int) -> np.ndarray:
    m = (1 << (width - 1)) - 1
    return (idx.astype(np.float64) - m) * (scale / m if m else 0.0)


def _plane_sets(img: ImageTensor):
    ycc = _rgb_to_ycbcr(img.data.astype(np.float64))
    h, w = img.height, img.width
    subsample = (h % 16 == 0) and (w % 16 == 0)
    y = ycc[:, :, 0]
    cb, cr = ycc[:, :, 1], ycc[:, :, 2]
    if subsample:
        cb = 0.25 * (cb[0::2, 0::2] + cb[1::2, 0::2] + cb[0::2, 1::2] + cb[1::2, 1::2])
        cr = 0.25 * (cr[0::2, 0::2] + cr[1::2, 0::2] + cr[0::2, 1::2] + cr[1::2, 1::2])
    return y, cb, cr, subsample


def source_encode(img: ImageTensor, target_bits: int) -> BitBuffer:
    """Encode to exactly target_bits (zero-padded after the coded payload)."""
    y, cb, cr, subsample = _plane_sets(img)
    by = _band_coeffs(y)
    bcb = _band_coeffs(cb)
    bcr = _band_coeffs(cr)
    nb_y, nb_c = by.shape[1], bcb.shape[1]

    lam_y = np.mean(by**2, axis=1)
    lam_c = 0.5 * (np.mean(bcb**2, axis=1) + np.mean(bcr**2, axis=1))

    # header: magic u16, ver u8, flags u8, h u16, w u16, widths 2x64 bytes, crc u32
    fixed_bits = (2 + 1 + 1 + 2 + 2 + 64 + 64 + 4) * 8
    alloc = _allocate(target_bits, lam_y, lam_c, nb_y, nb_c, fixed_bits)

    scales = []
    chunks: list[tuple[np.ndarray, int]] = []
    for bands, widths in ((by, alloc.widths_y), (bcb, alloc.widths_c), (bcr, alloc.widths_c)):
        for band in range(64):
            w = int(widths[band])
            if w == 0:
                continue
            if band == 0:
                chunks.append((_quantize_dc(bands[band], w), w))
            else:
                scale = float(np.max(np.abs(bands[band])))
                scales.append(scale)
                chunks.append((_quantize_ac(bands[band], scale, w), w))

    payload = _pack_values(chunks)
    header = struct.pack(
        "<HBBHH", _MAGIC, _VERSION, 1 if subsample else 0, img.height, img.width
    )
    header += alloc.widths_y.astype(np.uint8).tobytes()
    header += alloc.widths_c.astype(np.uint8).tobytes()
    header += np.array(scales, dtype="<f4").tobytes()
    body = header + payload
    crc = binascii.crc32(body) & 0xFFFFFFFF
    body += struct.pack("<I", crc)

    nbits = len(body) * 8
    if nbits > target_bits:
        raise RateInfeasibleError(
            f"rate infeasible: needs {nbits} bits, target {target_bits}"
        )
    bits = np.zeros(target_bits, dtype=np.uint8)
    bits[:nbits] = np.unpackbits(np.frombuffer(body, dtype=np.uint8))
    return BitBuffer.from_bits(bits)


def source_decode(buf: BitBuffer, dims: tuple[int, int]) -> ImageTensor:
    """Decode; raises CorruptStreamError when the integrity check fails."""
    raw = np.packbits(buf.bits()).tobytes()
    if len(raw) < 12 + 128 + 4:
        raise CorruptStreamError("stream too short")
    magic, version, flags, h, w = struct.unpack("<HBBHH", raw[:8])
    if magic != _MAGIC:
        raise CorruptStreamError("bad magic")
    if version != _VERSION:
        raise CorruptStreamError("unsupported version")
    if (h, w) != dims:
        raise CorruptStreamError("dimension mismatch")
    subsample = bool(flags & 1)
    widths_y = np.frombuffer(raw[8:72], dtype=np.uint8).astype(np.int64)
    widths_c = np.frombuffer(raw[72:136], dtype=np.uint8).astype(np.int64)

    n_scales = int(np.count_nonzero(widths_y[1:] > 0) + 2 * np.count_nonzero(widths_c[1:] > 0))
    scale_end = 136 + 4 * n_scales
    if len(raw) < scale_end + 4:
        raise CorruptStreamError("stream too short for scale table")
    scales = np.frombuffer(raw[136:scale_end], dtype="<f4").astype(np.float64)
    if not np.all(np.isfinite(scales)):
        raise CorruptStreamError("corrupt scale table")

    nb_y = (h // 8) * (w // 8)
    if subsample:
        nb_c = (h // 16) * (w // 16)
        ch, cw = h // 2, w // 2
    else:
        nb_c = nb_y
        ch, cw = h, w
    payload_bits = int(
        (widths_y.sum()) * nb_y + 2 * (widths_c.sum()) * nb_c
    )
    total = scale_end + (payload_bits + 7) // 8 + 4
    if len(raw) < total:
        raise CorruptStreamError("payload shorter than header promises")
    (crc_stored,) = struct.unpack("<I", raw[total - 4 : total])
    if (binascii.crc32(raw[: total - 4]) & 0xFFFFFFFF) != crc_stored:
        raise CorruptStreamError("integrity check failed")

    cursor = _BitCursor(raw[scale_end : total - 4])
    si = 0
    planes = []
    for widths, nb, ph, pw in (
        (widths_y, nb_y, h, w), (widths_c, nb_c, ch, cw), (widths_c, nb_c, ch, cw)
    ):
        bands = np.zeros((64, nb))
        for band in range(64):
            bw = int(widths[band])
            if bw == 0:
                continue
            idx = cursor.take(nb, bw)
            if band == 0:
                bands[band] = _dequantize_dc(idx, bw)
            else:
                bands[band] = _dequantize_ac(idx, scales[si], bw)
                si += 1
        planes.append(_bands_to_plane(bands, ph, pw))

    yp, cbp, crp = planes
    if subsample:
        cbp = cbp.repeat(2, axis=0).repeat(2, axis=1)
        crp = crp.repeat(2, axis=0).repeat(2, axis=1)
    rgb = _ycbcr_to_rgb(np.stack([yp, cbp, crp], axis=-1))
    return ImageTensor(np.clip(np.round(rgb), 0, 255).astype(np.uint8))
