import math

import numpy as np
import pytest

from fsolink.analog import strip_pilots
from fsolink.core import Layout, SymbolStream, seeded_rng
from fsolink.digital import ModFormat, hard_decisions, modulate
from fsolink.bits import BitBuffer
from fsolink.harness import (
    PREAMBLE_LEN,
    SweepSpec,
    _bias_shaped_waveform,
    _coherent_link_roundtrip,
    calibrate_imdd_noise,
    coherent_receive_symbols,
    default_coherent_config,
    default_imdd_config,
    imdd_receive_symbols,
    rop_sweep,
    run_coherent,
    run_imdd,
    run_scheme_frame,
    scheme_budgets,
    turbulence_run,
)
from fsolink.turbulence import ChannelRealization, realization_for_rop


class TestRunImdd:
    def test_zero_noise_is_exact_scaling(self, imdd_cfg):
        w = np.abs(seeded_rng(1, "t").normal(size=256)) + 0.1
        r = realization_for_rop(imdd_cfg, -10.0)
        rx = run_imdd(imdd_cfg, w, r, seeded_rng(1, "n"), noise_floor=0.0)
        assert np.array_equal(rx, 10 ** (-10 / 10) * w)

    def test_negative_intensity_rejected(self, imdd_cfg):
        r = realization_for_rop(imdd_cfg, -10.0)
        with pytest.raises(ValueError, match="negative"):
            run_imdd(imdd_cfg, np.array([1.0, -0.1]), r, seeded_rng(1, "n"))

    def test_square_law_snr(self, imdd_cfg):
        # -3 dB optical must cost 6 dB electrical: signal variance ~ ROP^2
        w = _bias_shaped_waveform(imdd_cfg, seeded_rng(2, "t").normal(size=4000))
        out = {}
        for rop in (-10.0, -13.0):
            r = realization_for_rop(imdd_cfg, rop)
            rx = run_imdd(imdd_cfg, w, r, seeded_rng(1, "n"), noise_floor=0.0)
            out[rop] = np.var(rx)
        assert 10 * math.log10(out[-10.0] / out[-13.0]) == pytest.approx(6.0, abs=1e-9)


class TestCalibration:
    def test_anchor_self_consistency(self, imdd_cfg):
        # re-simulate at the anchor with the calibrated floor: BER within 20%
        floor = imdd_cfg.noise_calibration.imdd.noise_floor
        rng = seeded_rng(99, "verify")
        fmt = ModFormat.OOK
        bits = rng.integers(0, 2, 30000).astype(np.uint8)
        syms = modulate(BitBuffer.from_bits(bits), fmt)
        preamble = fmt.constellation[rng.integers(0, 2, PREAMBLE_LEN)]
        tx = np.concatenate([preamble, syms.values])
        w = _bias_shaped_waveform(imdd_cfg, tx)
        r = realization_for_rop(imdd_cfg, -13.0)
        rx = run_imdd(imdd_cfg, w, r, seeded_rng(5, "verify-noise"), noise_floor=floor)
        payload, _ = imdd_receive_symbols(imdd_cfg, rx, preamble, len(syms), fmt.constellation)
        ber = np.mean(hard_decisions(SymbolStream.real(payload), fmt) != bits)
        assert 0.016 < ber < 0.024

    def test_square_law_anchor_shift(self, imdd_cfg):
        f_low = calibrate_imdd_noise(imdd_cfg, -13.0, 0.02)
        f_high = calibrate_imdd_noise(imdd_cfg, -3.0, 0.02)
        assert f_high / f_low == pytest.approx(100.0, rel=0.1)

    def test_infeasible_anchor_rejected(self, imdd_cfg):
        with pytest.raises(ValueError, match="anchor unreachable"):
            calibrate_imdd_noise(imdd_cfg, -13.0, 0.5)


class TestRunCoherent:
    def test_clean_loopback_evm(self):
        cfg = default_coherent_config()
        cm = cfg.noise_calibration.coherent
        cm.linewidth_hz = 0.0
        cm.pol_rotation_deg = 0.0
        cm.snr_at_ref_db = 50.0
        rng = seeded_rng(3, "coh")
        pts = ModFormat.QPSK.constellation
        x = pts[rng.integers(0, 4, 5000)]
        y = pts[rng.integers(0, 4, 5000)]
        r = realization_for_rop(cfg, cm.ref_rop_dbm)
        dx, dy, _nv = _coherent_link_roundtrip(
            cfg, x, y, r, seeded_rng(1, "n"), seeded_rng(1, "p"), seeded_rng(1, "pre")
        )
        evm = np.sqrt(np.mean(np.abs(dx - x) ** 2) / np.mean(np.abs(x) ** 2))
        assert evm < 0.01

    def test_rotation_recovered_at_high_snr(self):
        cfg = default_coherent_config()
        cm = cfg.noise_calibration.coherent
        cm.linewidth_hz = 0.0
        cm.pol_rotation_deg = 45.0
        cm.snr_at_ref_db = 30.0
        rng = seeded_rng(4, "coh")
        pts = ModFormat.QPSK.constellation
        x = pts[rng.integers(0, 4, 8000)]
        y = pts[rng.integers(0, 4, 8000)]
        r = realization_for_rop(cfg, cm.ref_rop_dbm)
        dx, dy, _nv = _coherent_link_roundtrip(
            cfg, x, y, r, seeded_rng(2, "n"), seeded_rng(2, "p"), seeded_rng(2, "pre")
        )
        for est, ref in ((dx, x), (dy, y)):
            evm = np.sqrt(np.mean(np.abs(est - ref) ** 2) / np.mean(np.abs(ref) ** 2))
            assert evm < 0.05

    def test_cpr_ab_improvement(self):
        # Wiener phase noise on, ~12 dB SNR: CPR off vs on changes QPSK from
        # broken to working by far more than 10x in BER
        cfg = default_coherent_config()
        cm = cfg.noise_calibration.coherent
        cm.pol_rotation_deg = 0.0
        rop = cm.ref_rop_dbm + (12.0 - cm.snr_at_ref_db)
        rng = seeded_rng(5, "coh")
        bits = rng.integers(0, 2, 100_000).astype(np.uint8)
        syms = modulate(BitBuffer.from_bits(bits), ModFormat.QPSK)
        x, y = syms.values[0::2], syms.values[1::2]
        r = realization_for_rop(cfg, rop)
        bers = {}
        for cpr_on in (False, True):
            from fsolink.analog import insert_pilots
            from fsolink.harness import PILOT_SYMBOL

            tx_x = insert_pilots(x, PILOT_SYMBOL)
            tx_y = insert_pilots(y, PILOT_SYMBOL)
            pre_x = ModFormat.QPSK.constellation[seeded_rng(3, "pre").integers(0, 4, PREAMBLE_LEN)]
            pre_y = ModFormat.QPSK.constellation[seeded_rng(4, "pre").integers(0, 4, PREAMBLE_LEN)]
            fx = np.concatenate([pre_x, tx_x])
            fy = np.concatenate([pre_y, tx_y])
            rx_x, rx_y = run_coherent(
                cfg, [fx.real, fx.imag, fy.real, fy.imag], r,
                seeded_rng(6, "n"), seeded_rng(6, "p"),
            )
            dx, dy, _ = coherent_receive_symbols(
                cfg, rx_x, rx_y, pre_x, pre_y, tx_x.size, enable_cpr=cpr_on
            )
            merged = np.empty(len(syms), dtype=np.complex128)
            merged[0::2] = dx
            merged[1::2] = dy
            hard = hard_decisions(SymbolStream(merged, Layout.COMPLEX), ModFormat.QPSK)
            bers[cpr_on] = max(np.mean(hard != bits), 1e-6)
        assert bers[False] / bers[True] >= 10.0

    def test_tributary_validation(self, imdd_cfg):
        cfg = default_coherent_config()
        r = realization_for_rop(cfg, -10.0)
        with pytest.raises(ValueError):
            run_coherent(cfg, [np.ones(4)] * 3, r, seeded_rng(1, "n"), seeded_rng(1, "p"))


class TestBudgets:
    def test_counts_for_128(self, code):
        b = scheme_budgets(128, 128, 0.125, code)
        assert b["analog"]["complex_symbols"] == 6144
        assert b["ook"]["coded_bits"] == 12288 and b["ook"]["blocks"] == 6
        assert b["pam4"]["coded_bits"] == 24576 and b["pam4"]["blocks"] == 12
        assert b["qpsk"]["coded_bits"] == 12288
        assert b["qam16"]["coded_bits"] == 24576

    def test_counts_for_paper_frame(self, code):
        b = scheme_budgets(512, 768, 0.125, code)
        assert b["analog"]["complex_symbols"] == 147456
        assert b["ook"]["coded_bits"] == 294912

    def test_too_small_rejected(self, code):
        with pytest.raises(ValueError):
            scheme_budgets(8, 8, 0.125, code)


class TestRuns:
    def test_turbulence_all_ones_fading(self, imdd_cfg, image_128):
        series = [
            ChannelRealization(1.0, 18.473, imdd_cfg.tx_power_dbm - 18.473)
            for _ in range(4)
        ]
        reports, _ = turbulence_run(
            imdd_cfg, 4, images=[image_128], system="imdd", fading_series=series
        )
        by = {r.scheme: r for r in reports}
        assert all(row.decode_ok for rep in reports for row in rep.per_frame)
        # constant ROP: remaining spread is per-capture noise draws (~0.4 dB),
        # an order of magnitude below the swing turbulence produces
        analog_q = [row.ms_ssim_db for row in by["analog"].per_frame]
        assert max(analog_q) - min(analog_q) < 1.0

    def test_turbulence_deterministic(self, imdd_cfg, image_128):
        a, _ = turbulence_run(imdd_cfg, 3, images=[image_128], system="imdd")
        b, _ = turbulence_run(imdd_cfg, 3, images=[image_128], system="imdd")
        assert [r.per_frame for r in a] == [r.per_frame for r in b]

    def test_noise_lane_is_scheme_independent(self):
        a = seeded_rng(2, "noise/imdd/f0").normal(size=32)
        b = seeded_rng(2, "noise/imdd/f0").normal(size=32)
        assert np.array_equal(a, b)

    def test_sweep_spec_grid_validation(self):
        with pytest.raises(ValueError):
            SweepSpec(rop_grid=[-10.0, -10.0])

    def test_turbulence_failure_ordering_imdd(self, imdd_cfg):
        # moderate turbulence at 15 dBm launch: the high-order format drops
        # deep-fade captures, the low-order one never does, analog never fails
        reports, _ = turbulence_run(imdd_cfg, 50, system="imdd")
        fails = {
            r.scheme: sum(0 if row.decode_ok else 1 for row in r.per_frame)
            for r in reports
        }
        assert fails["pam4"] > 0
        assert fails["ook"] == 0
        assert fails["analog"] == 0
