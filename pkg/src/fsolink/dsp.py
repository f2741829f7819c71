"""Transmit/receive DSP: SRRC shaping, polyphase resampling, LMS equalizers,
2x2 MIMO butterfly, and pilot-aided carrier phase recovery.

Adaptation loops are inherently sequential, so the LMS kernels are jitted;
everything else is plain vectorized numpy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np
from numba import njit
from scipy.signal import firwin, resample_poly

from .core import Layout, SymbolStream


class EqualizerDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class FilterTaps:
    coefficients: np.ndarray
    span_symbols: int
    samples_per_symbol: int

    def __len__(self) -> int:
        return int(self.coefficients.size)


def srrc_taps(roll_off: float, span: int = 16, sps: int = 2) -> FilterTaps:
    """Unit-energy square-root raised cosine pulse.

    The singular points t=0 and |t|=1/(4*roll_off) use their analytic limits.
    """
    if not 0.0 < roll_off <= 1.0:
        raise ValueError("roll_off must be in (0, 1]")
    if span < 8:
        raise ValueError("span must be >= 8 symbols")
    if sps < 2:
        raise ValueError("sps must be >= 2")
    n = span * sps + 1
    t = (np.arange(n) - (n - 1) / 2.0) / sps  # in symbol periods
    b = roll_off
    h = np.zeros(n)
    at_zero = np.isclose(t, 0.0)
    h[at_zero] = 1.0 - b + 4.0 * b / math.pi
    at_sing = np.isclose(np.abs(t), 1.0 / (4.0 * b)) & ~at_zero
    h[at_sing] = (b / math.sqrt(2.0)) * (
        (1.0 + 2.0 / math.pi) * math.sin(math.pi / (4.0 * b))
        + (1.0 - 2.0 / math.pi) * math.cos(math.pi / (4.0 * b))
    )
    rest = ~(at_zero | at_sing)
    tr = t[rest]
    num = np.sin(math.pi * tr * (1 - b)) + 4 * b * tr * np.cos(math.pi * tr * (1 + b))
    den = math.pi * tr * (1 - (4 * b * tr) ** 2)
    h[rest] = num / den
    h /= np.sqrt(np.sum(h**2))
    return FilterTaps(coefficients=h, span_symbols=span, samples_per_symbol=sps)


def pulse_shape(stream: SymbolStream, taps: FilterTaps) -> np.ndarray:
    """Zero-stuff to the sample rate and convolve with the pulse (full length)."""
    sps = taps.samples_per_symbol
    up = np.zeros(len(stream) * sps, dtype=stream.values.dtype)
    up[::sps] = stream.values
    return np.convolve(up, taps.coefficients)


def matched_filter(waveform: np.ndarray, taps: FilterTaps) -> np.ndarray:
    return np.convolve(waveform, taps.coefficients)


def filter_delay(taps: FilterTaps) -> int:
    """Total group delay in samples of the shape+match cascade."""
    return len(taps) - 1


def symbol_samples(mf_out: np.ndarray, taps: FilterTaps, n_symbols: int) -> np.ndarray:
    """Pick the symbol-instant samples out of a matched-filter output."""
    d = filter_delay(taps)
    idx = d + taps.samples_per_symbol * np.arange(n_symbols)
    if idx[-1] >= mf_out.size:
        raise ValueError("waveform too short for requested symbol count")
    return mf_out[idx]


def resample(waveform: np.ndarray, from_rate: float, to_rate: float) -> np.ndarray:
    """Polyphase rational resampling; identity when the rates already match.

    The anti-alias filter is long enough (64 taps per phase) that in-band
    content round-trips below -60 dB error.
    """
    if from_rate <= 0 or to_rate <= 0:
        raise ValueError("rates must be positive")
    frac = Fraction(to_rate / from_rate).limit_denominator(1 << 16)
    if frac == 1:
        return np.asarray(waveform).copy()
    up, down = frac.numerator, frac.denominator
    m = max(up, down)
    half = 64 * m
    taps = firwin(2 * half + 1, 1.0 / m, window=("kaiser", 10.0))
    return resample_poly(waveform, up, down, window=taps)


class EqualizerMode(Enum):
    TRAINING = "training"
    DECISION_DIRECTED = "decision-directed"
    PILOT_DIRECTED = "pilot-directed"


@njit(cache=True)
def _lms_ffe(x, ref, n_out, taps, mu, mu_dd, sps, constellation, use_dd):
    n_taps = taps.size
    half = n_taps // 2
    y = np.zeros(n_out, dtype=np.complex128)
    for k in range(n_out):
        lo = k * sps - half
        acc = 0.0 + 0.0j
        for j in range(n_taps):
            idx = lo + j
            if 0 <= idx < x.size:
                acc += taps[j] * x[idx]
        y[k] = acc
        if k < ref.size:
            target = ref[k]
            step = mu
        elif use_dd:
            best = 0
            bd = 1e300
            for c in range(constellation.size):
                d = abs(acc - constellation[c]) ** 2
                if d < bd:
                    bd = d
                    best = c
            target = constellation[best]
            step = mu_dd
        else:
            continue
        err = target - acc
        for j in range(n_taps):
            idx = lo + j
            if 0 <= idx < x.size:
                taps[j] += step * err * np.conj(x[idx])
    return y


@dataclass
class FfeState:
    """Fractionally spaced feed-forward equalizer adapted by LMS."""

    n_taps: int = 61
    step_size: float = 2e-3
    sps: int = 2
    mode: EqualizerMode = EqualizerMode.TRAINING
    taps: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.n_taps % 2 == 0:
            raise ValueError("tap count must be odd")
        if not 0.0 <= self.step_size <= 0.1:
            raise ValueError("step_size must be in [0, 0.1]")
        if self.taps is None:
            t = np.zeros(self.n_taps, dtype=np.complex128)
            t[self.n_taps // 2] = 1.0
            self.taps = t


def ffe_equalize(
    received: np.ndarray,
    reference: np.ndarray,
    state: FfeState,
    constellation: np.ndarray | None = None,
) -> tuple[np.ndarray, FfeState]:
    """Equalize sps-spaced samples to one output per symbol.

    The first len(reference) outputs adapt against the known symbols; later
    outputs adapt decision-directed when a constellation is supplied, else the
    taps stay frozen.
    """
    x = np.asarray(received, dtype=np.complex128)
    ref = np.asarray(reference, dtype=np.complex128)
    n_out = x.size // state.sps
    use_dd = constellation is not None and state.mode is not EqualizerMode.TRAINING
    const = (
        np.asarray(constellation, dtype=np.complex128)
        if constellation is not None
        else np.zeros(1, dtype=np.complex128)
    )
    taps = state.taps.astype(np.complex128).copy()
    y = _lms_ffe(
        x, ref, n_out, taps, state.step_size, state.step_size / 4.0,
        state.sps, const, use_dd,
    )
    if not np.all(np.isfinite(taps)) or np.linalg.norm(taps) > 1e3:
        raise EqualizerDivergedError("equalizer diverged")
    new_state = FfeState(
        n_taps=state.n_taps, step_size=state.step_size, sps=state.sps,
        mode=state.mode, taps=taps,
    )
    return y, new_state


@njit(cache=True)
def _lms_mimo(x_in, y_in, ref_x, ref_y, wxx, wxy, wyx, wyy, mu, n_train):
    n_taps = wxx.size
    half = n_taps // 2
    n = x_in.size
    x_out = np.zeros(n, dtype=np.complex128)
    y_out = np.zeros(n, dtype=np.complex128)
    for k in range(n):
        lo = k - half
        ax = 0.0 + 0.0j
        ay = 0.0 + 0.0j
        for j in range(n_taps):
            idx = lo + j
            if 0 <= idx < n:
                ax += wxx[j] * x_in[idx] + wxy[j] * y_in[idx]
                ay += wyx[j] * x_in[idx] + wyy[j] * y_in[idx]
        x_out[k] = ax
        y_out[k] = ay
        if k < n_train:
            ex = ref_x[k] - ax
            ey = ref_y[k] - ay
            for j in range(n_taps):
                idx = lo + j
                if 0 <= idx < n:
                    cx = np.conj(x_in[idx])
                    cy = np.conj(y_in[idx])
                    wxx[j] += mu * ex * cx
                    wxy[j] += mu * ex * cy
                    wyx[j] += mu * ey * cx
                    wyy[j] += mu * ey * cy
    return x_out, y_out


@dataclass
class MimoState:
    """2x2 butterfly equalizer (four FIR branches) for polarization demixing."""

    n_taps: int = 15
    step_size: float = 2e-3
    taps: dict = field(default=None)

    def __post_init__(self):
        if self.n_taps % 2 == 0:
            raise ValueError("tap count must be odd")
        if not 0.0 < self.step_size <= 0.1:
            raise ValueError("step_size must be in (0, 0.1]")
        if self.taps is None:
            z = np.zeros(self.n_taps, dtype=np.complex128)
            xx = z.copy(); xx[self.n_taps // 2] = 1.0
            yy = z.copy(); yy[self.n_taps // 2] = 1.0
            self.taps = {"xx": xx, "xy": z.copy(), "yx": z.copy(), "yy": yy}


def mimo_equalize(
    x_pol: np.ndarray,
    y_pol: np.ndarray,
    state: MimoState,
    train_x: np.ndarray,
    train_y: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, MimoState]:
    """Data-aided butterfly adaptation over the training preamble, then frozen."""
    x = np.asarray(x_pol, dtype=np.complex128)
    y = np.asarray(y_pol, dtype=np.complex128)
    if x.size != y.size:
        raise ValueError("polarization streams must be aligned")
    tx = np.asarray(train_x, dtype=np.complex128)
    ty = np.asarray(train_y, dtype=np.complex128)
    w = {k: v.astype(np.complex128).copy() for k, v in state.taps.items()}
    xo, yo = _lms_mimo(
        x, y, tx, ty, w["xx"], w["xy"], w["yx"], w["yy"],
        state.step_size, min(tx.size, ty.size),
    )
    norm = sum(np.linalg.norm(v) for v in w.values())
    if not math.isfinite(norm) or norm > 1e3:
        raise EqualizerDivergedError("equalizer diverged")
    new_state = MimoState(n_taps=state.n_taps, step_size=state.step_size, taps=w)
    return xo, yo, new_state


def cpr_pilot(
    received: np.ndarray,
    pilot_positions: np.ndarray,
    pilot_values: np.ndarray,
    smoothing: int = 3,
) -> tuple[np.ndarray, np.ndarray]:
    """Pilot-aided carrier phase recovery.

    Phase at each pilot is arg(y * conj(p)); estimates are unwrapped, smoothed
    over a short triangular window across neighbouring pilots, linearly
    interpolated between pilots and the stream de-rotated.  Returns the
    corrected stream and the per-symbol phase estimate.
    """
    y = np.asarray(received, dtype=np.complex128)
    pos = np.asarray(pilot_positions, dtype=np.int64)
    pv = np.asarray(pilot_values, dtype=np.complex128)
    if pos.size == 0 or pos.size != pv.size:
        raise ValueError("pilot positions/values must be nonempty and aligned")
    if np.any(pos < 0) or np.any(pos >= y.size):
        raise ValueError("pilot positions incompatible with stream length")
    raw = np.angle(y[pos] * np.conj(pv))
    phases = np.unwrap(raw)
    if smoothing > 1 and phases.size > 2:
        if smoothing % 2 == 0:
            raise ValueError("smoothing window must be odd")
        half = smoothing // 2
        w = 1.0 + half - np.abs(np.arange(-half, half + 1))
        w /= w.sum()
        padded = np.concatenate([
            2 * phases[0] - phases[half:0:-1],
            phases,
            2 * phases[-1] - phases[-2 : -2 - half : -1],
        ])
        phases = np.convolve(padded, w, mode="valid")
    est = np.interp(np.arange(y.size), pos, phases)
    return y * np.exp(-1j * est), est
