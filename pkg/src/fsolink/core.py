"""Shared domain types, deterministic RNG lanes, image I/O and the symbol-file format.

Symbol amplitudes are exchanged on disk as 32-bit IEEE-754 little-endian values
(complex interleaved I,Q).  In memory everything is float64/complex128 so the
DSP has numerical headroom; writing a file quantizes to 32 bits.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

SYMBOL_FILE_MAGIC = b"DTAT"
SYMBOL_FILE_VERSION = 1


class Layout(Enum):
    REAL = "real"
    COMPLEX = "complex"


class SymbolFileError(ValueError):
    """Base class for symbol-file parsing failures."""


class BadMagicError(SymbolFileError):
    pass


class VersionMismatchError(SymbolFileError):
    pass


class TruncatedPayloadError(SymbolFileError):
    pass


class DegenerateStreamError(ValueError):
    pass


@dataclass(frozen=True)
class SymbolStream:
    """A block of discrete-time channel symbols with continuous amplitude."""

    values: np.ndarray
    layout: Layout

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.ndim != 1 or vals.size == 0:
            raise ValueError("symbol stream must be a nonempty 1-D sequence")
        if self.layout is Layout.COMPLEX:
            vals = vals.astype(np.complex128)
        else:
            if np.iscomplexobj(vals):
                raise ValueError("real layout cannot hold complex values")
            vals = vals.astype(np.float64)
        object.__setattr__(self, "values", vals)

    @staticmethod
    def real(values) -> "SymbolStream":
        return SymbolStream(np.asarray(values, dtype=np.float64), Layout.REAL)

    @staticmethod
    def complex(values) -> "SymbolStream":
        return SymbolStream(np.asarray(values, dtype=np.complex128), Layout.COMPLEX)

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def mean_power(self) -> float:
        return float(np.mean(np.abs(self.values) ** 2))


def normalize_power(stream: SymbolStream) -> SymbolStream:
    """Scale a stream by a positive scalar so that mean |s|^2 == 1.

    Phases and relative amplitudes are untouched; an all-zero stream has no
    valid scaling and raises DegenerateStreamError.
    """
    p = stream.mean_power
    if p <= 0.0:
        raise DegenerateStreamError("degenerate stream: zero mean power")
    return SymbolStream(stream.values / np.sqrt(p), stream.layout)


def write_symbol_file(stream: SymbolStream, path) -> None:
    """Serialize a stream: magic 'DTAT', u16 version, u16 flags, u64 count, f32 payload."""
    is_complex = stream.layout is Layout.COMPLEX
    flags = 1 if is_complex else 0
    header = SYMBOL_FILE_MAGIC + struct.pack("<HHQ", SYMBOL_FILE_VERSION, flags, len(stream))
    if is_complex:
        payload = stream.values.astype("<c8").tobytes()
    else:
        payload = stream.values.astype("<f4").tobytes()
    Path(path).write_bytes(header + payload)


def read_symbol_file(path) -> SymbolStream:
    raw = Path(path).read_bytes()
    if len(raw) < 4 or raw[:4] != SYMBOL_FILE_MAGIC:
        raise BadMagicError(f"bad magic in {path!s}")
    if len(raw) < 16:
        raise TruncatedPayloadError("truncated header")
    version, flags, count = struct.unpack("<HHQ", raw[4:16])
    if version != SYMBOL_FILE_VERSION:
        raise VersionMismatchError(f"unsupported symbol file version {version}")
    is_complex = bool(flags & 1)
    width = 8 if is_complex else 4
    expected = count * width
    payload = raw[16:]
    if len(payload) < expected:
        raise TruncatedPayloadError(
            f"truncated payload: header promises {count} symbols, "
            f"{len(payload)} bytes present"
        )
    if len(payload) > expected:
        raise SymbolFileError("trailing bytes after payload")
    if is_complex:
        vals = np.frombuffer(payload, dtype="<c8").astype(np.complex128)
        return SymbolStream(vals, Layout.COMPLEX)
    vals = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    return SymbolStream(vals, Layout.REAL)


def seeded_rng(seed: int, lane: str) -> np.random.Generator:
    """Deterministic generator for (seed, lane).

    Lanes keep independent purposes (fading, noise, phase-noise, data, ...) on
    independent streams, so adding draws in one stage never perturbs another.
    """
    digest = hashlib.blake2b(lane.encode("utf-8"), digest_size=8).digest()
    lane_key = int.from_bytes(digest, "little")
    return np.random.default_rng(np.random.SeedSequence([int(seed), lane_key]))


@dataclass(frozen=True)
class ImageTensor:
    """H x W x 3 image, 8-bit per sample, dims multiples of 8."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError("image must have shape (h, w, 3)")
        if arr.dtype != np.uint8:
            raise ValueError("image samples must be uint8")
        h, w = arr.shape[:2]
        if h % 8 or w % 8:
            raise ValueError("image dims must be multiples of 8")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])


def write_ppm(img: ImageTensor, path) -> None:
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.data.tobytes())


def read_ppm(path) -> ImageTensor:
    raw = Path(path).read_bytes()

    def tokens():
        i = 0
        while i < len(raw):
            if raw[i : i + 1] == b"#":
                while i < len(raw) and raw[i] not in b"\r\n":
                    i += 1
                continue
            if raw[i] in b" \t\r\n":
                i += 1
                continue
            j = i
            while j < len(raw) and raw[j] not in b" \t\r\n#":
                j += 1
            yield raw[i:j], j
            i = j

    it = tokens()
    try:
        magic, _ = next(it)
        if magic != b"P6":
            raise ValueError("not a binary PPM (P6) file")
        w, _ = next(it)
        h, _ = next(it)
        maxval, pos = next(it)
    except StopIteration:
        raise ValueError("truncated PPM header") from None
    if int(maxval) != 255:
        raise ValueError("only 8-bit PPM supported")
    w, h = int(w), int(h)
    body = raw[pos + 1 : pos + 1 + h * w * 3]
    if len(body) != h * w * 3:
        raise ValueError("truncated PPM payload")
    return ImageTensor(np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3).copy())


@dataclass
class ImddNoiseModel:
    """Thermal-limited direct-detection receiver: electrical noise is ROP-independent.

    noise_floor is the electrical noise variance per sample (mW^2 of detected
    power units); when None, the harness calibrates it from the anchor point.
    """

    responsivity: float = 1.0
    noise_floor: float | None = None
    anchor_rop_dbm: float = -13.0
    anchor_ber: float = 0.02

    def __post_init__(self):
        if self.noise_floor is not None and self.noise_floor <= 0:
            raise ValueError("noise_floor must be > 0")


@dataclass
class CoherentNoiseModel:
    """Shot/LO-limited coherent receiver: symbol SNR scales linearly with ROP."""

    ref_rop_dbm: float = -12.0
    snr_at_ref_db: float = 6.8
    linewidth_hz: float = 100e3
    pol_rotation_deg: float = 45.0


@dataclass
class NoiseCalibration:
    imdd: ImddNoiseModel = field(default_factory=ImddNoiseModel)
    coherent: CoherentNoiseModel = field(default_factory=CoherentNoiseModel)


@dataclass
class LinkConfig:
    """Physical and system parameters of the simulated link (defaults: the
    5 km moderate-turbulence configuration)."""

    wavelength: float = 1550e-9       # m
    distance: float = 5000.0          # m
    cn2: float = 1e-15                # m^(-2/3)
    attenuation_db_per_km: float = 0.443
    beam_divergence: float = 0.25e-3  # rad
    tx_aperture: float = 0.05         # m
    rx_aperture: float = 0.20         # m
    tx_power_dbm: float = 15.0
    baud_rate: float = 10e9
    samples_per_symbol: int = 2
    roll_off: float = 0.1
    noise_calibration: NoiseCalibration = field(default_factory=NoiseCalibration)
    seed: int = 1

    def __post_init__(self):
        positive = {
            "wavelength": self.wavelength,
            "distance": self.distance,
            "attenuation_db_per_km": self.attenuation_db_per_km,
            "beam_divergence": self.beam_divergence,
            "tx_aperture": self.tx_aperture,
            "rx_aperture": self.rx_aperture,
            "baud_rate": self.baud_rate,
        }
        for name, value in positive.items():
            if value <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.cn2 < 0:
            raise ValueError("cn2 must be >= 0")
        if not 0.0 < self.roll_off <= 1.0:
            raise ValueError("roll_off must be in (0, 1]")
        if self.samples_per_symbol < 2:
            raise ValueError("samples_per_symbol must be >= 2")

    def to_json_dict(self) -> dict:
        d = {
            k: getattr(self, k)
            for k in (
                "wavelength", "distance", "cn2", "attenuation_db_per_km",
                "beam_divergence", "tx_aperture", "rx_aperture", "tx_power_dbm",
                "baud_rate", "samples_per_symbol", "roll_off", "seed",
            )
        }
        nc = self.noise_calibration
        d["noise_calibration"] = {
            "imdd": {
                "responsivity": nc.imdd.responsivity,
                "noise_floor": nc.imdd.noise_floor,
                "anchor_rop_dbm": nc.imdd.anchor_rop_dbm,
                "anchor_ber": nc.imdd.anchor_ber,
            },
            "coherent": {
                "ref_rop_dbm": nc.coherent.ref_rop_dbm,
                "snr_at_ref_db": nc.coherent.snr_at_ref_db,
                "linewidth_hz": nc.coherent.linewidth_hz,
                "pol_rotation_deg": nc.coherent.pol_rotation_deg,
            },
        }
        return d

    @staticmethod
    def from_json_dict(d: dict) -> "LinkConfig":
        d = dict(d)
        nc = d.pop("noise_calibration", {})
        cal = NoiseCalibration(
            imdd=ImddNoiseModel(**nc.get("imdd", {})),
            coherent=CoherentNoiseModel(**nc.get("coherent", {})),
        )
        return LinkConfig(noise_calibration=cal, **d)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2) + "\n")

    @staticmethod
    def load(path) -> "LinkConfig":
        return LinkConfig.from_json_dict(json.loads(Path(path).read_text()))


@dataclass
class FrameRow:
    """One transmitted frame's result; BER fields stay None for the analog scheme."""

    sample_index: int
    scheme: str
    rop_dbm: float
    ber_pre_fec: float | None
    ber_post_fec: float | None
    ms_ssim: float
    ms_ssim_db: float
    papr_db: float
    decode_ok: bool


CSV_COLUMNS = (
    "sample_index", "scheme", "rop_dbm", "ber_pre_fec", "ber_post_fec",
    "ms_ssim", "ms_ssim_db", "papr_db", "decode_ok",
)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


@dataclass
class RunReport:
    scheme: str
    per_frame: list[FrameRow] = field(default_factory=list)

    @property
    def aggregate(self) -> dict:
        dbs = [r.ms_ssim_db for r in self.per_frame]
        agg = {"mean_ms_ssim_db": float(np.mean(dbs)) if dbs else 0.0}
        return agg

    def csv_rows(self) -> list[str]:
        out = []
        for r in self.per_frame:
            out.append(",".join(_fmt(getattr(r, c)) for c in CSV_COLUMNS))
        return out

    def to_json_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "per_frame": [
                {c: getattr(r, c) for c in CSV_COLUMNS} for r in self.per_frame
            ],
            "aggregate": self.aggregate,
        }


def write_report_csv(reports: list[RunReport], path) -> None:
    lines = [",".join(CSV_COLUMNS)]
    for rep in reports:
        lines.extend(rep.csv_rows())
    Path(path).write_text("\n".join(lines) + "\n")


def write_report_json(reports: list[RunReport], path, extra: dict | None = None) -> None:
    doc = {"reports": [r.to_json_dict() for r in reports]}
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
