import math

import numpy as np
import pytest

from fsolink.bits import BitBuffer
from fsolink.core import Layout, SymbolStream, seeded_rng
from fsolink.digital import (
    ModFormat,
    demodulate_llr,
    hard_decisions,
    modulate,
    scrambler_bits,
    td_receive_image,
    td_transmit_image,
)

ALL_FORMATS = list(ModFormat)


class TestConstellations:
    def test_qpsk_reference_mapping(self):
        bits = BitBuffer.from_bits([0, 0, 0, 1, 1, 1, 1, 0])
        expected = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]) / math.sqrt(2)
        assert np.allclose(modulate(bits, ModFormat.QPSK).values, expected)

    def test_pam4_reference_levels(self):
        bits = BitBuffer.from_bits([0, 0, 0, 1, 1, 1, 1, 0])
        expected = np.array([-3.0, -1.0, 1.0, 3.0]) / math.sqrt(5)
        assert np.allclose(modulate(bits, ModFormat.PAM4).values, expected)

    @pytest.mark.parametrize("fmt", ALL_FORMATS)
    def test_unit_mean_power(self, fmt):
        assert np.mean(np.abs(fmt.constellation) ** 2) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("fmt", ALL_FORMATS)
    def test_gray_property(self, fmt):
        pts = fmt.constellation
        labels = np.array(fmt.labels)
        d = np.abs(pts[:, None] - pts[None, :])
        d_min = np.min(d[d > 1e-12])
        for i in range(pts.size):
            for j in range(pts.size):
                if i < j and d[i, j] < d_min * 1.001:
                    assert np.count_nonzero(labels[i] != labels[j]) == 1


class TestModDemod:
    @pytest.mark.parametrize("fmt", ALL_FORMATS)
    def test_hard_decision_round_trip(self, fmt):
        rng = seeded_rng(1, "mod")
        bits = rng.integers(0, 2, 6000 * fmt.bits_per_symbol // 2 * 2).astype(np.uint8)
        n = bits.size - bits.size % fmt.bits_per_symbol
        bits = bits[:n]
        syms = modulate(BitBuffer.from_bits(bits), fmt)
        assert np.array_equal(hard_decisions(syms, fmt), bits)

    @pytest.mark.parametrize("fmt", ALL_FORMATS)
    def test_noisy_round_trip_at_30db(self, fmt):
        rng = seeded_rng(2, "mod")
        n_bits = 100_000 // fmt.bits_per_symbol * fmt.bits_per_symbol
        bits = rng.integers(0, 2, n_bits).astype(np.uint8)
        syms = modulate(BitBuffer.from_bits(bits), fmt)
        nv = 10.0 ** (-30 / 10)
        if fmt.is_complex:
            noise = (rng.normal(0, math.sqrt(nv / 2), len(syms))
                     + 1j * rng.normal(0, math.sqrt(nv / 2), len(syms)))
            rx = SymbolStream(syms.values + noise, Layout.COMPLEX)
        else:
            rx = SymbolStream.real(syms.values + rng.normal(0, math.sqrt(nv), len(syms)))
        assert np.array_equal(hard_decisions(rx, fmt), bits)
        llrs = demodulate_llr(rx, fmt, nv)
        assert np.array_equal((llrs < 0).astype(np.uint8), bits)

    def test_llr_magnitude_scales_with_noise(self):
        syms = modulate(BitBuffer.from_bits([0, 0, 1, 1]), ModFormat.QPSK)
        l1 = demodulate_llr(syms, ModFormat.QPSK, 0.1)
        l2 = demodulate_llr(syms, ModFormat.QPSK, 0.2)
        assert np.allclose(l1, 2 * l2)

    def test_bit_count_must_divide(self):
        with pytest.raises(ValueError):
            modulate(BitBuffer.from_bits([0, 1, 0]), ModFormat.QAM16)

    def test_scrambler_prefix_stable(self):
        assert np.array_equal(scrambler_bits(100), scrambler_bits(200)[:100])


class TestTdPipeline:
    @pytest.mark.parametrize("fmt", ALL_FORMATS)
    def test_noiseless_loopback_bit_exact(self, fmt, image_128, code):
        syms, frame = td_transmit_image(image_128, fmt, code, 9000)
        out, stats = td_receive_image(syms, frame, code, noise_var=1e-6)
        assert stats["decode_ok"]
        assert stats["ber_pre_fec"] == 0.0
        assert stats["ber_post_fec"] == 0.0
        ref, _ = td_transmit_image(image_128, fmt, code, 9000)
        from fsolink.codec import source_decode
        from fsolink.bits import BitBuffer as BB
        expected = source_decode(
            BB.from_bits(frame.coded.bits().reshape(-1, code.n)[:, code.info_pos].ravel()[:9000]),
            (128, 128),
        )
        assert np.array_equal(out.data, expected.data)

    def test_transmit_deterministic(self, image_128, code):
        a, _ = td_transmit_image(image_128, ModFormat.PAM4, code, 9000)
        b, _ = td_transmit_image(image_128, ModFormat.PAM4, code, 9000)
        assert np.array_equal(a.values, b.values)

    def test_heavy_noise_fails_loudly_not_silently(self, image_128, code):
        rng = seeded_rng(3, "td")
        syms, frame = td_transmit_image(image_128, ModFormat.PAM4, code, 9000)
        nv = 1.0
        rx = SymbolStream.real(syms.values + rng.normal(0, math.sqrt(nv), len(syms)))
        out, stats = td_receive_image(rx, frame, code, noise_var=nv, max_iters=12)
        assert out is None
        assert not stats["decode_ok"]
        assert stats["ber_pre_fec"] > 0.1
