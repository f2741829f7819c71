import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fsolink.core import (
    BadMagicError,
    DegenerateStreamError,
    ImageTensor,
    Layout,
    LinkConfig,
    SymbolFileError,
    SymbolStream,
    TruncatedPayloadError,
    VersionMismatchError,
    normalize_power,
    read_ppm,
    read_symbol_file,
    seeded_rng,
    write_ppm,
    write_symbol_file,
)


class TestNormalizePower:
    def test_unit_power_streams_unchanged(self):
        for vals in ([1.0, -1.0, 1.0, -1.0], [2.0, 0.0, 0.0, 0.0]):
            out = normalize_power(SymbolStream.real(vals))
            assert np.allclose(out.values, vals, rtol=0, atol=0)

    def test_uniform_scaling(self):
        out = normalize_power(SymbolStream.real([3.0, 3.0, 3.0, 3.0]))
        assert np.allclose(out.values, [1, 1, 1, 1])

    def test_all_zero_rejected(self):
        with pytest.raises(DegenerateStreamError, match="degenerate"):
            normalize_power(SymbolStream.real([0.0, 0.0]))

    @given(
        st.lists(
            st.floats(min_value=-1e3, max_value=1e3).filter(lambda x: abs(x) > 1e-6),
            min_size=1,
            max_size=64,
        )
    )
    def test_idempotent_and_unit_power(self, vals):
        once = normalize_power(SymbolStream.real(vals))
        twice = normalize_power(once)
        assert abs(once.mean_power - 1.0) < 1e-9
        assert np.allclose(once.values, twice.values, rtol=1e-12, atol=0)

    def test_output_is_positive_scalar_multiple(self):
        rng = seeded_rng(0, "t")
        vals = rng.normal(size=100) + 1j * rng.normal(size=100)
        out = normalize_power(SymbolStream.complex(vals))
        scale = out.values / vals
        assert np.allclose(scale, scale[0])
        assert scale[0].real > 0 and abs(scale[0].imag) < 1e-15


class TestSymbolFile:
    def test_complex_round_trip(self, tmp_path):
        rng = seeded_rng(1, "file")
        n = 147456
        vals = (rng.normal(size=n) + 1j * rng.normal(size=n)).astype(np.complex64)
        stream = SymbolStream(vals.astype(np.complex128), Layout.COMPLEX)
        p = tmp_path / "s.dtat"
        write_symbol_file(stream, p)
        back = read_symbol_file(p)
        assert back.layout is Layout.COMPLEX
        assert np.array_equal(back.values, stream.values)

    def test_negative_zero_and_subnormals_bit_exact(self, tmp_path):
        vals = np.array([-0.0, 0.0, 1e-40, -1e-42, 3.5], dtype=np.float32)
        stream = SymbolStream(vals.astype(np.float64), Layout.REAL)
        p = tmp_path / "s.dtat"
        write_symbol_file(stream, p)
        back = read_symbol_file(p)
        assert np.array_equal(
            back.values.astype(np.float32).view(np.uint32),
            vals.view(np.uint32),
        )

    def test_empty_file_bad_magic(self, tmp_path):
        p = tmp_path / "e.dtat"
        p.write_bytes(b"")
        with pytest.raises(BadMagicError):
            read_symbol_file(p)

    def test_version_mismatch(self, tmp_path):
        p = tmp_path / "v.dtat"
        import struct

        p.write_bytes(b"DTAT" + struct.pack("<HHQ", 9, 0, 0))
        with pytest.raises(VersionMismatchError):
            read_symbol_file(p)

    def test_truncated_payload(self, tmp_path):
        import struct

        p = tmp_path / "t.dtat"
        p.write_bytes(b"DTAT" + struct.pack("<HHQ", 1, 0, 10) + b"\x00" * 8)
        with pytest.raises(TruncatedPayloadError):
            read_symbol_file(p)

    def test_trailing_bytes_rejected(self, tmp_path):
        import struct

        p = tmp_path / "x.dtat"
        p.write_bytes(b"DTAT" + struct.pack("<HHQ", 1, 0, 1) + b"\x00" * 8)
        with pytest.raises(SymbolFileError):
            read_symbol_file(p)


class TestSeededRng:
    def test_same_lane_reproduces(self):
        a = seeded_rng(42, "fading").normal(size=100)
        b = seeded_rng(42, "fading").normal(size=100)
        assert np.array_equal(a, b)

    def test_lanes_differ(self):
        a = seeded_rng(42, "fading").normal(size=100)
        b = seeded_rng(42, "noise").normal(size=100)
        assert not np.allclose(a, b)

    def test_seeds_differ(self):
        a = seeded_rng(42, "fading").normal(size=100)
        b = seeded_rng(43, "fading").normal(size=100)
        assert not np.allclose(a, b)


class TestImages:
    def test_ppm_round_trip(self, tmp_path, image_128):
        p = tmp_path / "x.ppm"
        write_ppm(image_128, p)
        back = read_ppm(p)
        assert np.array_equal(back.data, image_128.data)

    def test_ppm_comment_header(self, tmp_path):
        body = bytes(range(8 * 8 * 3 % 256)) * 0 + bytes(192)
        p = tmp_path / "c.ppm"
        p.write_bytes(b"P6\n# a comment\n8 8\n255\n" + bytes(192))
        img = read_ppm(p)
        assert img.height == 8 and img.width == 8

    def test_dims_must_be_multiple_of_8(self):
        with pytest.raises(ValueError):
            ImageTensor(np.zeros((9, 8, 3), dtype=np.uint8))

    def test_dtype_checked(self):
        with pytest.raises(ValueError):
            ImageTensor(np.zeros((8, 8, 3), dtype=np.float32))


class TestLinkConfig:
    def test_json_round_trip(self, tmp_path):
        cfg = LinkConfig(seed=9)
        cfg.noise_calibration.imdd.noise_floor = 1.25e-4
        p = tmp_path / "cfg.json"
        cfg.save(p)
        back = LinkConfig.load(p)
        assert back == cfg

    @pytest.mark.parametrize(
        "field,value",
        [
            ("wavelength", 0.0),
            ("distance", -1.0),
            ("roll_off", 0.0),
            ("roll_off", 1.5),
            ("samples_per_symbol", 1),
        ],
    )
    def test_validation(self, field, value):
        with pytest.raises(ValueError):
            LinkConfig(**{field: value})
