"""Acceptance suite: one test per acceptance criterion, each printing a
PASS line with the measured quantities when it completes.

Frozen regression constants (measured once on this implementation):
  - LDPC waterfall midpoint ~ 2.3 dB Eb/N0 (BPSK), window test points 2.0 and
    2.9 dB, clean-BER point 3.5 dB
  - IM/DD sweep grid -16.5..-2.0 dBm reproduces both digital cliffs and the
    analog crossover on the 128x128 fixtures
"""

import math
import time

import numpy as np
import pytest
from scipy import integrate

from fsolink.analog import analog_decode, analog_encode
from fsolink.bits import BitBuffer
from fsolink.core import (
    Layout,
    SymbolStream,
    seeded_rng,
    write_report_csv,
    write_report_json,
)
from fsolink.digital import ModFormat, hard_decisions, modulate
from fsolink.dsp import matched_filter, pulse_shape, srrc_taps, symbol_samples
from fsolink.harness import (
    SweepSpec,
    _coherent_link_roundtrip,
    default_coherent_config,
    default_imdd_config,
    rop_sweep,
    turbulence_run,
)
from fsolink.ldpc import ldpc_decode, ldpc_encode, make_code
from fsolink.metrics import image_rate
from fsolink.turbulence import (
    gg_params,
    gg_pdf,
    realization_for_rop,
    rytov_variance,
    sample_fading,
    scintillation_index,
)

LDPC_WATERFALL_EBN0_DB = 2.3      # measured 50% frame-success midpoint
LDPC_LOW_POINT_DB = 1.9
LDPC_HIGH_POINT_DB = 2.9
LDPC_CLEAN_POINT_DB = 3.5

SWEEP_GRID = [round(-16.5 + 0.5 * i, 1) for i in range(30)]


def _pass(n: int, msg: str) -> None:
    print(f"\nACCEPTANCE {n} PASS: {msg}")


@pytest.fixture(scope="module")
def imdd_sweep():
    cfg = default_imdd_config()
    spec = SweepSpec(rop_grid=SWEEP_GRID)
    reports, details = rop_sweep(cfg, spec)
    by = {r.scheme: r for r in reports}
    frames = spec.frames_per_point

    def per_point(scheme, field):
        rows = by[scheme].per_frame
        vals = []
        for i in range(len(SWEEP_GRID)):
            chunk = rows[i * frames : (i + 1) * frames]
            vals.append(float(np.mean([getattr(r, field) for r in chunk])))
        return np.array(vals)

    return {
        "reports": by,
        "details": details,
        "frames": frames,
        "success": {s: per_point(s, "decode_ok") for s in ("ook", "pam4", "analog")},
        "quality": {s: per_point(s, "ms_ssim_db") for s in ("ook", "pam4", "analog")},
    }


def _cliff_window(success: np.ndarray) -> tuple[float, float]:
    fail_pts = [g for g, s in zip(SWEEP_GRID, success) if s <= 0.1]
    ok_from = None
    for i, g in enumerate(SWEEP_GRID):
        if np.all(success[i:] >= 0.9):
            ok_from = g
            break
    assert fail_pts and ok_from is not None, "no cliff transition found in the grid"
    return max(fail_pts), ok_from


def test_criterion_1_channel_math():
    t0 = time.time()
    rv = rytov_variance(1e-15, 1550e-9, 5000.0)
    assert rv == pytest.approx(0.3806, abs=1e-4)
    p = gg_params(rv)
    assert p.alpha == pytest.approx(7.109, abs=0.01)
    assert p.beta == pytest.approx(5.578, abs=0.011)
    si = scintillation_index(p)
    assert si == pytest.approx(0.3451, abs=1e-3)
    dt = time.time() - t0
    assert dt < 1.0
    _pass(1, f"rytov {rv:.5f}, alpha {p.alpha:.3f}, beta {p.beta:.3f}, "
             f"scint {si:.4f} in {dt*1e3:.0f} ms")


def test_criterion_2_fading_sampler_statistics():
    t0 = time.time()
    p = gg_params(rytov_variance(1e-15, 1550e-9, 5000.0))
    rng = seeded_rng(1234, "fading")
    draws = sample_fading(p, rng, size=1_000_000)
    mean, var = float(np.mean(draws)), float(np.var(draws))
    assert mean == pytest.approx(1.0, abs=0.005)
    assert var == pytest.approx(0.345, abs=0.009)

    grid = np.linspace(1e-6, 40.0, 400_001)
    pdf = gg_pdf(grid, p)
    cdf = integrate.cumulative_trapezoid(pdf, grid, initial=0.0)
    cdf /= cdf[-1]
    xs = np.sort(draws)
    f = np.interp(xs, grid, cdf)
    n = xs.size
    ks = float(np.max(np.maximum(np.abs(f - np.arange(1, n + 1) / n),
                                 np.abs(f - np.arange(n) / n))))
    assert ks < 0.002
    dt = time.time() - t0
    assert dt < 30.0
    _pass(2, f"mean {mean:.4f}, var {var:.4f}, KS {ks:.5f} over 1e6 draws in {dt:.1f} s")


def test_criterion_3_pdf_normalization_and_oracle():
    from scipy import stats

    p = gg_params(0.380633)
    total, _ = integrate.quad(lambda i: gg_pdf(i, p), 0, np.inf, limit=200)
    assert total == pytest.approx(1.0, abs=1e-3)
    worst = 0.0
    for i in (0.2, 0.5, 1.0, 2.0, 4.0):
        def integrand(x):
            return math.exp(
                stats.gamma.logpdf(x, p.alpha, scale=1 / p.alpha)
                + stats.gamma.logpdf(i / x, p.beta, scale=1 / p.beta)
                - math.log(x)
            )
        oracle, _ = integrate.quad(integrand, 0, np.inf, limit=200)
        rel = abs(gg_pdf(i, p) / oracle - 1.0)
        worst = max(worst, rel)
        assert rel < 0.005
    _pass(3, f"pdf integral {total:.6f}, worst oracle deviation {worst*100:.3f}%")


def test_criterion_4_srrc_nyquist_and_loopback():
    taps16 = srrc_taps(0.1, 16, 2)
    rc = np.convolve(taps16.coefficients, taps16.coefficients)
    center = rc.size // 2
    at_symbols = rc[center % 2 :: 2]
    others = np.delete(
        at_symbols, np.nonzero(np.arange(at_symbols.size) * 2 + center % 2 == center)[0]
    )
    isi_db = 20 * math.log10(float(np.max(np.abs(others))) / rc[center])
    assert isi_db < -40.0

    rng = seeded_rng(2, "dsp")
    taps = srrc_taps(0.1, 24, 2)  # chain default span
    syms = ModFormat.QPSK.constellation[rng.integers(0, 4, 4000)]
    wave = pulse_shape(SymbolStream(syms, Layout.COMPLEX), taps)
    est = symbol_samples(matched_filter(wave, taps), taps, syms.size)
    evm = float(np.sqrt(np.mean(np.abs(est - syms) ** 2) / np.mean(np.abs(syms) ** 2)))
    assert evm < 0.01
    _pass(4, f"cascade ISI {isi_db:.1f} dB (span 16), loopback EVM {evm*100:.2f}%")


def test_criterion_5_ldpc_waterfall():
    t0 = time.time()
    code = make_code()
    assert code.rate == 0.75

    def frame_run(ebn0_db, n_blocks, seed):
        rng = seeded_rng(seed, "ldpc-acc")
        sigma2 = 1.0 / (2 * code.rate * 10 ** (ebn0_db / 10))
        u = rng.integers(0, 2, n_blocks * code.k).astype(np.uint8)
        cw = ldpc_encode(BitBuffer.from_bits(u), code).bits()
        y = (1.0 - 2.0 * cw) + rng.normal(0, math.sqrt(sigma2), cw.size)
        dec, _conv = ldpc_decode(2 * y / sigma2, code)
        epb = (dec.bits().reshape(n_blocks, code.k) != u.reshape(n_blocks, code.k)).sum(axis=1)
        return float(np.mean(epb == 0)), float(epb.sum() / u.size)

    fs_low, _ = frame_run(LDPC_LOW_POINT_DB, 150, 11)
    fs_high, _ = frame_run(LDPC_HIGH_POINT_DB, 150, 12)
    assert fs_low < 0.10
    assert fs_high > 0.90
    assert LDPC_HIGH_POINT_DB - LDPC_LOW_POINT_DB <= 2.0

    fs_clean, ber_clean = frame_run(LDPC_CLEAN_POINT_DB, 700, 13)  # 1.075e6 info bits
    assert ber_clean < 1e-5
    dt = time.time() - t0
    assert dt < 180.0
    _pass(5, f"rate 3/4 exact; success {fs_low:.2f}@{LDPC_LOW_POINT_DB} dB -> "
             f"{fs_high:.2f}@{LDPC_HIGH_POINT_DB} dB (window "
             f"{LDPC_HIGH_POINT_DB-LDPC_LOW_POINT_DB:.1f} dB); "
             f"BER {ber_clean:.1e} at {LDPC_CLEAN_POINT_DB} dB over 1.07e6 bits; {dt:.0f} s")


def test_criterion_6_cliff_and_leveling(imdd_sweep):
    msgs = []
    for fmt in ("pam4", "ook"):
        last_fail, first_ok = _cliff_window(imdd_sweep["success"][fmt])
        window = first_ok - last_fail
        assert 0 < window <= 2.0
        # leveling: per fixture image, every successful decode above the
        # threshold is byte-identical
        frames = imdd_sweep["frames"]
        rows = imdd_sweep["reports"][fmt].per_frame
        digs = imdd_sweep["details"][fmt]
        per_frame_digests = {}
        for row, d in zip(rows, digs):
            if d["rop_dbm"] >= first_ok:
                assert row.decode_ok
                per_frame_digests.setdefault(d["frame"], set()).add(d["digest"])
        assert per_frame_digests
        for f, dset in per_frame_digests.items():
            assert len(dset) == 1
        msgs.append(f"{fmt}: cliff {last_fail:+.1f}->{first_ok:+.1f} dBm "
                    f"(window {window:.1f} dB), leveled decodes byte-identical")
    _pass(6, "; ".join(msgs))


def test_criterion_7_graceful_degradation(imdd_sweep):
    q = imdd_sweep["quality"]["analog"]
    ok = imdd_sweep["success"]["analog"]
    assert np.all(ok == 1.0)
    steps = np.diff(q)
    assert np.min(steps) >= -0.1
    _pass(7, f"analog MS-SSIM dB {q[0]:.2f}->{q[-1]:.2f} across the sweep, "
             f"min step {np.min(steps):+.3f} dB, decode_ok everywhere")


def test_criterion_8_crossover_ordering(imdd_sweep):
    q = imdd_sweep["quality"]
    s = imdd_sweep["success"]
    both = [g for g, pam_ok, an_ok in zip(SWEEP_GRID, s["pam4"], s["analog"])
            if pam_ok <= 0.1 and an_ok == 1.0]
    assert both, "no interval with analog success and pam4 failure"

    _lf, ook_ok_from = _cliff_window(s["ook"])
    idx = [i for i, g in enumerate(SWEEP_GRID) if g >= ook_ok_from]
    ook_level = float(np.mean(q["ook"][idx]))
    above = [g for i, g in enumerate(SWEEP_GRID) if q["analog"][i] > ook_level]
    assert above, "analog never exceeds the leveled ook quality"
    _pass(8, f"analog succeeds while pam4 fails on [{both[0]:+.1f}, {both[-1]:+.1f}] dBm; "
             f"analog exceeds leveled ook ({ook_level:.2f} dB) from {above[0]:+.1f} dBm")


def test_criterion_9_rate_accounting():
    cases = [
        (10e9, 149796, 1.0, 6.676e4),
        (10e9, 147456, 1.0, 6.782e4),
        (150e9, 224801, 1.0, 6.672e5),
        (25e9, 36864, 0.98, 6.646e5),
    ]
    for rate, n, oh, expected in cases:
        got = image_rate(rate, n, oh)
        # agreement within one unit in the 4th significant digit
        assert got == pytest.approx(expected, rel=1.5e-4)
    _pass(9, "image rates 6.676e4, 6.782e4, 6.672e5, 6.646e5 reproduced to 4 digits")


def _qpsk_link_ber(snr_db, linewidth_hz, rot_deg, seed, n_bits=2_000_000):
    cfg = default_coherent_config(seed)
    cm = cfg.noise_calibration.coherent
    cm.linewidth_hz = linewidth_hz
    cm.pol_rotation_deg = rot_deg
    rop = cm.ref_rop_dbm + (snr_db - cm.snr_at_ref_db)
    realization = realization_for_rop(cfg, rop)
    rng = seeded_rng(seed, "acc10/bits")
    bits = rng.integers(0, 2, n_bits).astype(np.uint8)
    syms = modulate(BitBuffer.from_bits(bits), ModFormat.QPSK)
    dx, dy, _nv = _coherent_link_roundtrip(
        cfg, syms.values[0::2], syms.values[1::2], realization,
        seeded_rng(seed, "acc10/noise"), seeded_rng(seed, "acc10/phase"),
        seeded_rng(seed, "preamble"),
    )
    merged = np.empty(len(syms), dtype=np.complex128)
    merged[0::2] = dx
    merged[1::2] = dy
    hard = hard_decisions(SymbolStream(merged, Layout.COMPLEX), ModFormat.QPSK)
    return float(np.mean(hard != bits))


def test_criterion_10_coherent_dsp_chain():
    impaired = _qpsk_link_ber(12.0, 100e3, 45.0, seed=5)
    baseline_half_db = _qpsk_link_ber(11.5, 0.0, 0.0, seed=5)
    assert impaired <= baseline_half_db

    cfg = default_coherent_config()
    reports, _ = turbulence_run(cfg, 50, system="coherent")
    fails = {
        r.scheme: sum(0 if row.decode_ok else 1 for row in r.per_frame) for r in reports
    }
    assert fails["qam16"] > fails["qpsk"]
    assert all(row.decode_ok for r in reports if r.scheme == "analog" for row in r.per_frame)
    _pass(10, f"QPSK 12 dB impaired BER {impaired:.2e} <= 11.5 dB clean "
              f"{baseline_half_db:.2e}; turbulence fails qam16 {fails['qam16']}/50 > "
              f"qpsk {fails['qpsk']}/50, analog 0/50")


def test_criterion_11_determinism(tmp_path):
    def artifacts(run_dir):
        cfg = default_imdd_config()
        spec = SweepSpec(rop_grid=[-14.0, -8.0, -3.0], frames_per_point=2,
                         schemes=["ook", "analog"])
        reports, _ = rop_sweep(cfg, spec)
        trep, _ = turbulence_run(default_imdd_config(), 5, system="imdd")
        csv = run_dir / "sweep.csv"
        js = run_dir / "sweep.json"
        write_report_csv(reports + trep, csv)
        write_report_json(reports + trep, js)
        return csv.read_bytes(), js.read_bytes()

    d1 = tmp_path / "a"; d1.mkdir()
    d2 = tmp_path / "b"; d2.mkdir()
    a_csv, a_json = artifacts(d1)
    b_csv, b_json = artifacts(d2)
    assert a_csv == b_csv
    assert a_json == b_json
    _pass(11, f"repeat runs byte-identical ({len(a_csv)} CSV bytes, "
              f"{len(a_json)} JSON bytes)")
