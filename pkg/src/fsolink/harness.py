"""End-to-end IM/DD and coherent link simulations: waveform-level channel ops,
receiver chains, noise calibration, ROP sweeps and turbulence runs.

Conventions: transmit optical waveforms are normalized to unit mean power and
scaled by the linear ROP inside the channel op, so every scheme at a grid
point sees identical received power.  Noise lanes are keyed by frame index
only (never by scheme or grid point), which keeps comparisons fair and the
quality-versus-ROP curves free of resampling jitter.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .analog import (
    analog_decode,
    analog_encode,
    imdd_bias_map,
    insert_pilots,
    papr,
    parallel_to_serial,
    pilot_positions,
    serial_to_parallel,
    strip_pilots,
    PILOT_SPACING,
)
from .core import (
    FrameRow,
    ImageTensor,
    Layout,
    LinkConfig,
    RunReport,
    SymbolStream,
    seeded_rng,
)
from .digital import ModFormat, modulate, td_receive_image, td_transmit_image
from .dsp import (
    EqualizerMode,
    FfeState,
    MimoState,
    cpr_pilot,
    ffe_equalize,
    filter_delay,
    matched_filter,
    mimo_equalize,
    pulse_shape,
    resample,
    srrc_taps,
)
from .fixtures import synthetic_image
from .ldpc import LdpcCode, make_code
from .metrics import ms_ssim, ms_ssim_db
from .turbulence import ChannelRealization, realization_for_rop, rop_timeseries

PREAMBLE_LEN = 4096
SRRC_SPAN = 24
PILOT_SYMBOL = (1 + 1j) / math.sqrt(2.0)

DIGITAL_SCHEMES = {
    "ook": ModFormat.OOK,
    "pam4": ModFormat.PAM4,
    "qpsk": ModFormat.QPSK,
    "qam16": ModFormat.QAM16,
}


def scheme_budgets(height: int, width: int, ratio: float = 0.125,
                   code: LdpcCode | None = None) -> dict:
    """Per-scheme symbol/bit budgets giving every scheme the same number of
    real channel uses as the analog mapper at the given bandwidth ratio."""
    code = code or make_code()
    n_real = int(round(height * width * 3 * ratio * 2))
    out = {"analog": {"ratio": ratio, "complex_symbols": n_real // 2}}
    coded_capacity = {
        "ook": n_real,            # one real symbol per channel use
        "pam4": 2 * n_real,
        "qpsk": n_real,           # dual-pol slots: (n_real/4) * 2 pols * 2 bits
        "qam16": 2 * n_real,
    }
    for name, cap in coded_capacity.items():
        blocks = cap // code.n
        if blocks < 1:
            raise ValueError(f"image too small to carry one FEC block in {name}")
        out[name] = {
            "blocks": blocks,
            "coded_bits": blocks * code.n,
            "source_bits": int(0.97 * blocks * code.k),
        }
    return out


# --------------------------------------------------------------------------
# waveform-level channel operations
# --------------------------------------------------------------------------

def run_imdd(
    cfg: LinkConfig,
    tx_waveform: np.ndarray,
    realization: ChannelRealization,
    rng: np.random.Generator,
    noise_floor: float | None = None,
) -> np.ndarray:
    """Photodetected electrical samples: ROP-scaled intensity plus a constant
    electrical noise floor (thermal-limited receiver, SNR ~ ROP^2)."""
    w = np.asarray(tx_waveform, dtype=np.float64)
    if np.any(w < 0):
        raise ValueError("negative intensities in transmit waveform")
    model = cfg.noise_calibration.imdd
    floor = model.noise_floor if noise_floor is None else noise_floor
    if floor is None:
        raise ValueError("imdd noise floor not calibrated")
    rop_lin = 10.0 ** (realization.rop_dbm / 10.0)
    rx = model.responsivity * rop_lin * w
    if floor > 0:
        rx = rx + rng.normal(0.0, math.sqrt(floor), w.size)
    return rx


def run_coherent(
    cfg: LinkConfig,
    tributaries: list[np.ndarray],
    realization: ChannelRealization,
    noise_rng: np.random.Generator,
    phase_rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Dual-pol coherent link: SRRC shaping, Jones rotation, Wiener phase
    noise, and complex noise whose variance scales as 1/ROP (LO-limited)."""
    if len(tributaries) != 4:
        raise ValueError("expected four tributaries (XI, XQ, YI, YQ)")
    sizes = {np.asarray(t).size for t in tributaries}
    if len(sizes) != 1:
        raise ValueError("tributaries must have equal length")
    xi, xq, yi, yq = (np.asarray(t, dtype=np.float64) for t in tributaries)
    x = SymbolStream(xi + 1j * xq, Layout.COMPLEX)
    y = SymbolStream(yi + 1j * yq, Layout.COMPLEX)
    taps = srrc_taps(cfg.roll_off, SRRC_SPAN, cfg.samples_per_symbol)
    wx = pulse_shape(x, taps)
    wy = pulse_shape(y, taps)

    model = cfg.noise_calibration.coherent
    theta = math.radians(model.pol_rotation_deg)
    rx = math.cos(theta) * wx - math.sin(theta) * wy
    ry = math.sin(theta) * wx + math.cos(theta) * wy

    sample_rate = cfg.baud_rate * cfg.samples_per_symbol
    step_var = 2.0 * math.pi * model.linewidth_hz / sample_rate
    if step_var > 0:
        phase = np.cumsum(phase_rng.normal(0.0, math.sqrt(step_var), wx.size))
        rot = np.exp(1j * phase)
        rx = rx * rot
        ry = ry * rot

    rop_lin = 10.0 ** (realization.rop_dbm / 10.0)
    ref_lin = 10.0 ** (model.ref_rop_dbm / 10.0)
    sigma2 = 10.0 ** (-model.snr_at_ref_db / 10.0) * (ref_lin / rop_lin)
    s = math.sqrt(sigma2 / 2.0)
    rx = rx + noise_rng.normal(0.0, s, rx.size) + 1j * noise_rng.normal(0.0, s, rx.size)
    ry = ry + noise_rng.normal(0.0, s, ry.size) + 1j * noise_rng.normal(0.0, s, ry.size)
    return rx, ry


# --------------------------------------------------------------------------
# receiver chains
# --------------------------------------------------------------------------

def imdd_receive_symbols(
    cfg: LinkConfig,
    rx: np.ndarray,
    preamble: np.ndarray,
    n_payload: int,
    constellation: np.ndarray | None,
) -> tuple[np.ndarray, float]:
    """DC removal, matched filter, 61-tap FFE (trained on the preamble, then
    decision-directed when a constellation is given).  Returns real payload
    symbol estimates and the noise variance measured on the training tail."""
    taps = srrc_taps(cfg.roll_off, SRRC_SPAN, cfg.samples_per_symbol)
    sample_rate = cfg.baud_rate * cfg.samples_per_symbol
    ac = resample(rx, sample_rate, sample_rate)
    ac = ac - ac.mean()
    rms = math.sqrt(float(np.mean(ac**2)))
    ac /= max(rms, 1e-300)
    mf = matched_filter(ac, taps)
    x = mf[filter_delay(taps):]
    mode = EqualizerMode.TRAINING if constellation is None else EqualizerMode.DECISION_DIRECTED
    state = FfeState(sps=cfg.samples_per_symbol, mode=mode)
    y, _state = ffe_equalize(x, preamble, state, constellation)
    n_train = preamble.size
    tail = slice(max(0, n_train - 512), n_train)
    err = np.asarray(preamble)[tail] - y.real[tail]
    noise_var = float(np.mean(err**2))
    payload = y.real[n_train : n_train + n_payload]
    if payload.size != n_payload:
        raise ValueError("received waveform too short for payload")
    return payload, max(noise_var, 1e-300)


def coherent_receive_symbols(
    cfg: LinkConfig,
    rx_x: np.ndarray,
    rx_y: np.ndarray,
    pre_x: np.ndarray,
    pre_y: np.ndarray,
    n_payload: int,
    enable_cpr: bool = True,
    cpr_spacing: int = PILOT_SPACING,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Matched filter, 2x2 MIMO butterfly trained on the per-pol preambles,
    pilot-aided CPR over the payload, pilot stripping, and a pilot-residual
    noise estimate.  n_payload counts pilot-bearing payload symbols per pol."""
    taps = srrc_taps(cfg.roll_off, SRRC_SPAN, cfg.samples_per_symbol)
    sps = cfg.samples_per_symbol
    n_total = pre_x.size + n_payload

    def to_symbols(r):
        mf = matched_filter(r, taps)[filter_delay(taps):]
        sym = mf[::sps][:n_total]
        if sym.size != n_total:
            raise ValueError("received waveform too short")
        return sym

    sx, sy = to_symbols(rx_x), to_symbols(rx_y)
    state = MimoState()
    xo, yo, _state = mimo_equalize(sx, sy, state, pre_x, pre_y)
    px = xo[pre_x.size :]
    py = yo[pre_y.size :]

    # pilot layout is defined by insert_pilots: every cpr_spacing-th symbol
    pos = np.arange(0, n_payload, cpr_spacing)
    if enable_cpr:
        px, _ = cpr_pilot(px, pos, np.full(pos.size, PILOT_SYMBOL))
        py, _ = cpr_pilot(py, pos, np.full(pos.size, PILOT_SYMBOL))
    dx, pilots_x = strip_pilots(px, cpr_spacing)
    dy, pilots_y = strip_pilots(py, cpr_spacing)
    res = np.concatenate([pilots_x - PILOT_SYMBOL, pilots_y - PILOT_SYMBOL])
    noise_var = float(np.mean(np.abs(res) ** 2))
    return dx, dy, max(noise_var, 1e-300)


def _qpsk_preamble(rng: np.random.Generator, n: int) -> np.ndarray:
    pts = ModFormat.QPSK.constellation
    return pts[rng.integers(0, 4, n)]


def _bias_shaped_waveform(cfg: LinkConfig, symbols: np.ndarray) -> np.ndarray:
    taps = srrc_taps(cfg.roll_off, SRRC_SPAN, cfg.samples_per_symbol)
    v = pulse_shape(SymbolStream.real(symbols), taps)
    w, _peak = imdd_bias_map(v)
    return w / w.mean()


# --------------------------------------------------------------------------
# per-frame scheme runs
# --------------------------------------------------------------------------

def _quality_row(img: ImageTensor, decoded: ImageTensor | None) -> tuple[float, float]:
    if decoded is None:
        return 0.0, 0.0
    s = ms_ssim(img, decoded)
    return s, ms_ssim_db(s)


def _imdd_digital_frame(cfg, img, fmt, code, budget, realization, noise_rng, preamble_rng):
    syms, frame = td_transmit_image(img, fmt, code, budget["source_bits"])
    preamble = fmt.constellation[preamble_rng.integers(0, fmt.constellation.size, PREAMBLE_LEN)]
    tx = np.concatenate([preamble, syms.values])
    w = _bias_shaped_waveform(cfg, tx)
    rx = run_imdd(cfg, w, realization, noise_rng)
    payload, nv = imdd_receive_symbols(cfg, rx, preamble, len(syms), fmt.constellation)
    decoded, stats = td_receive_image(SymbolStream.real(payload), frame, code, nv)
    s, sdb = _quality_row(img, decoded)
    row = dict(
        ber_pre_fec=stats["ber_pre_fec"], ber_post_fec=stats["ber_post_fec"],
        ms_ssim=s, ms_ssim_db=sdb, papr_db=papr(syms).papr_db,
        decode_ok=stats["decode_ok"],
    )
    return row, decoded


def _imdd_analog_frame(cfg, img, ratio, realization, noise_rng, preamble_rng):
    stream, mapping = analog_encode(img, ratio)
    reals = np.empty(2 * len(stream))
    reals[0::2] = stream.values.real
    reals[1::2] = stream.values.imag
    preamble = 2.0 * preamble_rng.integers(0, 2, PREAMBLE_LEN) - 1.0
    tx = np.concatenate([preamble, reals])
    w = _bias_shaped_waveform(cfg, tx)
    rx = run_imdd(cfg, w, realization, noise_rng)
    payload, nv = imdd_receive_symbols(cfg, rx, preamble, reals.size, None)
    received = SymbolStream(payload[0::2] + 1j * payload[1::2], Layout.COMPLEX)
    decoded = analog_decode(received, mapping, noise_var=2.0 * nv)
    s, sdb = _quality_row(img, decoded)
    row = dict(
        ber_pre_fec=None, ber_post_fec=None, ms_ssim=s, ms_ssim_db=sdb,
        papr_db=papr(stream).papr_db, decode_ok=True,
    )
    return row, decoded


def _coherent_link_roundtrip(cfg, payload_x, payload_y, realization,
                             noise_rng, phase_rng, preamble_rng):
    """Frame both polarizations with pilots and a preamble, run the channel,
    and return the recovered payload streams plus the noise estimate."""
    tx_x = insert_pilots(payload_x, PILOT_SYMBOL)
    tx_y = insert_pilots(payload_y, PILOT_SYMBOL)
    pre_x = _qpsk_preamble(preamble_rng, PREAMBLE_LEN)
    pre_y = _qpsk_preamble(preamble_rng, PREAMBLE_LEN)
    fx = np.concatenate([pre_x, tx_x])
    fy = np.concatenate([pre_y, tx_y])
    tribs = [fx.real, fx.imag, fy.real, fy.imag]
    rx_x, rx_y = run_coherent(cfg, tribs, realization, noise_rng, phase_rng)
    dx, dy, nv = coherent_receive_symbols(
        cfg, rx_x, rx_y, pre_x, pre_y, tx_x.size
    )
    if dx.size != payload_x.size or dy.size != payload_y.size:
        raise ValueError("pilot stripping returned unexpected payload size")
    return dx, dy, nv


def _coh_digital_frame(cfg, img, fmt, code, budget, realization, noise_rng,
                       phase_rng, preamble_rng):
    syms, frame = td_transmit_image(img, fmt, code, budget["source_bits"])
    x_pay = syms.values[0::2]
    y_pay = syms.values[1::2]
    dx, dy, nv = _coherent_link_roundtrip(
        cfg, x_pay, y_pay, realization, noise_rng, phase_rng, preamble_rng
    )
    merged = np.empty(len(syms), dtype=np.complex128)
    merged[0::2] = dx
    merged[1::2] = dy
    decoded, stats = td_receive_image(SymbolStream(merged, Layout.COMPLEX), frame, code, nv)
    s, sdb = _quality_row(img, decoded)
    row = dict(
        ber_pre_fec=stats["ber_pre_fec"], ber_post_fec=stats["ber_post_fec"],
        ms_ssim=s, ms_ssim_db=sdb, papr_db=papr(syms).papr_db,
        decode_ok=stats["decode_ok"],
    )
    return row, decoded


def _coh_analog_frame(cfg, img, ratio, realization, noise_rng, phase_rng, preamble_rng):
    stream, mapping = analog_encode(img, ratio)
    reals = np.empty(2 * len(stream))
    reals[0::2] = stream.values.real
    reals[1::2] = stream.values.imag
    tribs, pad = serial_to_parallel(reals, 4)
    x_pay = tribs[0] + 1j * tribs[1]
    y_pay = tribs[2] + 1j * tribs[3]
    dx, dy, nv = _coherent_link_roundtrip(
        cfg, x_pay, y_pay, realization, noise_rng, phase_rng, preamble_rng
    )
    rec = parallel_to_serial([dx.real, dx.imag, dy.real, dy.imag], pad)
    received = SymbolStream(rec[0::2] + 1j * rec[1::2], Layout.COMPLEX)
    decoded = analog_decode(received, mapping, noise_var=nv)
    s, sdb = _quality_row(img, decoded)
    row = dict(
        ber_pre_fec=None, ber_post_fec=None, ms_ssim=s, ms_ssim_db=sdb,
        papr_db=papr(stream).papr_db, decode_ok=True,
    )
    return row, decoded


def run_scheme_frame(cfg, scheme, img, realization, system, frame_lane, code=None,
                     budgets=None, ratio=0.125):
    """One frame of one scheme through the chosen system; lanes derive from
    (cfg.seed, frame_lane) so schemes and grid points share noise draws."""
    code = code or make_code()
    budgets = budgets or scheme_budgets(img.height, img.width, ratio, code)
    noise_rng = seeded_rng(cfg.seed, f"noise/{system}/{frame_lane}")
    phase_rng = seeded_rng(cfg.seed, f"phase/{frame_lane}")
    preamble_rng = seeded_rng(cfg.seed, "preamble")
    if system == "imdd":
        if scheme == "analog":
            return _imdd_analog_frame(cfg, img, ratio, realization, noise_rng, preamble_rng)
        fmt = DIGITAL_SCHEMES[scheme]
        if fmt.is_complex:
            raise ValueError(f"{scheme} is not an intensity format")
        return _imdd_digital_frame(
            cfg, img, fmt, code, budgets[scheme], realization, noise_rng, preamble_rng
        )
    if system == "coherent":
        if scheme == "analog":
            return _coh_analog_frame(
                cfg, img, ratio, realization, noise_rng, phase_rng, preamble_rng
            )
        fmt = DIGITAL_SCHEMES[scheme]
        if not fmt.is_complex:
            raise ValueError(f"{scheme} is not a coherent format")
        return _coh_digital_frame(
            cfg, img, fmt, code, budgets[scheme], realization, noise_rng,
            phase_rng, preamble_rng,
        )
    raise ValueError(f"unknown system {system!r}")


# --------------------------------------------------------------------------
# calibration
# --------------------------------------------------------------------------

def calibrate_imdd_noise(
    cfg: LinkConfig,
    anchor_rop_dbm: float,
    anchor_ber: float,
    fmt: ModFormat = ModFormat.OOK,
    n_symbols: int = 30000,
) -> float:
    """Solve (by bisection, to 0.1 dB) for the electrical noise floor that puts
    the pre-FEC BER of the given format at anchor_ber for the anchor ROP."""
    if not 1e-4 < anchor_ber < 1e-1:
        raise ValueError("anchor unreachable: anchor_ber must be in (1e-4, 1e-1)")
    data_rng = seeded_rng(cfg.seed, "calib/data")
    bits = data_rng.integers(0, 2, n_symbols * fmt.bits_per_symbol).astype(np.uint8)
    from .bits import BitBuffer

    syms = modulate(BitBuffer.from_bits(bits), fmt)
    preamble = fmt.constellation[
        seeded_rng(cfg.seed, "calib/preamble").integers(0, fmt.constellation.size, PREAMBLE_LEN)
    ]
    tx = np.concatenate([preamble, syms.values])
    w = _bias_shaped_waveform(cfg, tx)
    realization = realization_for_rop(cfg, anchor_rop_dbm)
    rop_lin = 10.0 ** (anchor_rop_dbm / 10.0)
    z = seeded_rng(cfg.seed, "calib/noise").normal(0.0, 1.0, w.size)
    clean = cfg.noise_calibration.imdd.responsivity * rop_lin * w

    from .digital import hard_decisions

    def ber_at(floor: float) -> float:
        rx = clean + math.sqrt(floor) * z
        payload, _nv = imdd_receive_symbols(cfg, rx, preamble, len(syms), fmt.constellation)
        hard = hard_decisions(SymbolStream.real(payload), fmt)
        return float(np.count_nonzero(hard != bits) / bits.size)

    lo, hi = rop_lin**2 * 1e-10, rop_lin**2 * 1e2
    if not ber_at(lo) < anchor_ber < ber_at(hi):
        raise ValueError("anchor unreachable: BER target outside achievable range")
    while hi / lo > 10.0 ** 0.01:  # 0.1 dB
        mid = math.sqrt(lo * hi)
        if ber_at(mid) < anchor_ber:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)


def ensure_imdd_calibrated(cfg: LinkConfig) -> float:
    model = cfg.noise_calibration.imdd
    if model.noise_floor is None:
        model.noise_floor = calibrate_imdd_noise(
            cfg, model.anchor_rop_dbm, model.anchor_ber
        )
    return model.noise_floor


# --------------------------------------------------------------------------
# sweeps and turbulence runs
# --------------------------------------------------------------------------

@dataclass
class SweepSpec:
    rop_grid: list[float]
    frames_per_point: int = 5
    schemes: list[str] = field(default_factory=lambda: ["ook", "pam4", "analog"])
    system: str = "imdd"
    ratio: float = 0.125
    image_seeds: tuple[int, ...] = (11, 12, 13, 14)
    image_size: tuple[int, int] = (128, 128)
    images: list[ImageTensor] | None = None

    def __post_init__(self):
        grid = list(self.rop_grid)
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("rop_grid must be strictly increasing")

    def load_images(self) -> list[ImageTensor]:
        if self.images is not None:
            return list(self.images)
        h, w = self.image_size
        return [synthetic_image(h, w, s) for s in self.image_seeds]


def _digest(img: ImageTensor | None) -> str:
    if img is None:
        return ""
    return hashlib.sha256(img.data.tobytes()).hexdigest()


def rop_sweep(cfg: LinkConfig, spec: SweepSpec) -> tuple[list[RunReport], dict]:
    """Run every scheme over the ROP grid; returns reports plus per-row decode
    digests keyed by scheme (for leveling checks)."""
    images = spec.load_images()
    dims = {(i.height, i.width) for i in images}
    if len(dims) != 1:
        raise ValueError("sweep images must share dimensions")
    code = make_code()
    h, w = images[0].height, images[0].width
    budgets = scheme_budgets(h, w, spec.ratio, code)
    if spec.system == "imdd":
        ensure_imdd_calibrated(cfg)
    reports, details = [], {}
    for scheme in spec.schemes:
        rep = RunReport(scheme=scheme)
        rows = []
        idx = 0
        for rop in spec.rop_grid:
            realization = realization_for_rop(cfg, rop)
            for f in range(spec.frames_per_point):
                img = images[f % len(images)]
                row, decoded = run_scheme_frame(
                    cfg, scheme, img, realization, spec.system,
                    frame_lane=f"f{f}", code=code, budgets=budgets, ratio=spec.ratio,
                )
                rep.per_frame.append(
                    FrameRow(sample_index=idx, scheme=scheme, rop_dbm=rop, **row)
                )
                rows.append({"rop_dbm": rop, "frame": f, "digest": _digest(decoded)})
                idx += 1
        reports.append(rep)
        details[scheme] = rows
    return reports, details


def turbulence_run(
    cfg: LinkConfig,
    n_captures: int = 50,
    schemes: list[str] | None = None,
    images: list[ImageTensor] | None = None,
    system: str = "imdd",
    ratio: float = 0.125,
    fading_series: list[ChannelRealization] | None = None,
) -> tuple[list[RunReport], dict]:
    """Quasi-static captures: one fading draw per capture, every scheme run on
    the same realization and noise lane per capture."""
    schemes = schemes or (["ook", "pam4", "analog"] if system == "imdd" else ["qpsk", "qam16", "analog"])
    images = images or [synthetic_image(128, 128, s) for s in (11, 12, 13, 14)]
    code = make_code()
    budgets = scheme_budgets(images[0].height, images[0].width, ratio, code)
    if system == "imdd":
        ensure_imdd_calibrated(cfg)
    series = fading_series or rop_timeseries(cfg, n_captures, seeded_rng(cfg.seed, "fading"))
    reports, details = [], {}
    for scheme in schemes:
        rep = RunReport(scheme=scheme)
        rows = []
        for k, realization in enumerate(series):
            img = images[k % len(images)]
            row, decoded = run_scheme_frame(
                cfg, scheme, img, realization, system,
                frame_lane=f"c{k}", code=code, budgets=budgets, ratio=ratio,
            )
            rep.per_frame.append(
                FrameRow(sample_index=k, scheme=scheme, rop_dbm=realization.rop_dbm, **row)
            )
            rows.append({"capture": k, "digest": _digest(decoded)})
        reports.append(rep)
        details[scheme] = rows
    return reports, details


def default_imdd_config(seed: int = 2) -> LinkConfig:
    return LinkConfig(seed=seed)


def default_coherent_config(seed: int = 2) -> LinkConfig:
    return LinkConfig(baud_rate=25e9, tx_power_dbm=10.0, seed=seed)
