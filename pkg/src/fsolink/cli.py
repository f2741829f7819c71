"""Command-line interface.

Subcommands mirror the library surface: channel sampling and ROP series,
digital/analog image codecs, MS-SSIM scoring, single end-to-end runs, ROP
sweeps, turbulence runs, AWGN on symbol files, and fixture generation.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import analog, codec, harness, metrics, turbulence
from .bits import BitBuffer
from .core import (
    LinkConfig,
    SymbolStream,
    read_ppm,
    read_symbol_file,
    seeded_rng,
    write_ppm,
    write_report_csv,
    write_report_json,
    write_symbol_file,
)
from .digital import ModFormat
from .fixtures import synthetic_image
from .ldpc import make_code


def _load_config(path: str | None) -> LinkConfig:
    if path is None:
        return harness.default_imdd_config()
    return LinkConfig.load(path)


def _emit(lines: list[str], out: str | None) -> None:
    text = "\n".join(lines) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_channel_sample(args) -> int:
    p = turbulence.GammaGammaParams(alpha=args.alpha, beta=args.beta, rytov_var=0.0)
    rng = seeded_rng(args.seed, "fading")
    gains = turbulence.sample_fading(p, rng, size=args.n)
    lines = ["index,fading_gain,rop_dbm"]
    for i, g in enumerate(gains):
        lines.append(f"{i},{g:.10g},{10*math.log10(g):.10g}")
    _emit(lines, args.out)
    return 0


def _cmd_channel_rop_series(args) -> int:
    cfg = _load_config(args.config)
    rng = seeded_rng(args.seed if args.seed is not None else cfg.seed, "fading")
    series = turbulence.rop_timeseries(cfg, args.n, rng)
    lines = ["index,fading_gain,rop_dbm"]
    for i, r in enumerate(series):
        lines.append(f"{i},{r.fading_gain:.10g},{r.rop_dbm:.10g}")
    _emit(lines, args.out)
    return 0


def _cmd_channel_awgn(args) -> int:
    stream = read_symbol_file(args.infile)
    rng = seeded_rng(args.seed, "awgn")
    nv = 10.0 ** (-args.snr_db / 10.0) * stream.mean_power
    if stream.layout.value == "complex":
        noise = rng.normal(0, math.sqrt(nv / 2), len(stream)) + 1j * rng.normal(
            0, math.sqrt(nv / 2), len(stream)
        )
    else:
        noise = rng.normal(0, math.sqrt(nv), len(stream))
    write_symbol_file(SymbolStream(stream.values + noise, stream.layout), args.out)
    print(f"noise_var {nv:.10g}")
    return 0


def _cmd_encode_digital(args) -> int:
    img = read_ppm(args.image)
    fmt = ModFormat(args.format)
    budgets = harness.scheme_budgets(img.height, img.width)
    target = args.target_bits or budgets[fmt.value]["source_bits"]
    buf = codec.source_encode(img, target)
    Path(args.out).write_bytes(buf.packed)
    print(f"{len(buf)} bits ({fmt.value} budget)")
    return 0


def _cmd_decode_digital(args) -> int:
    h, w = (int(v) for v in args.dims.lower().split("x"))
    raw = Path(args.infile).read_bytes()
    buf = BitBuffer(packed=raw, length=len(raw) * 8)
    img = codec.source_decode(buf, (h, w))
    write_ppm(img, args.out)
    return 0


def _cmd_encode_analog(args) -> int:
    img = read_ppm(args.image)
    ratio = float(Fraction(args.ratio))
    stream, mapping = analog.analog_encode(img, ratio)
    write_symbol_file(stream, args.out_symbols)
    mapping.save(args.out_meta)
    print(f"{len(stream)} complex symbols, papr {analog.papr(stream).papr_db:.3f} dB")
    return 0


def _cmd_decode_analog(args) -> int:
    stream = read_symbol_file(args.in_symbols)
    mapping = analog.AnalogMapping.load(args.meta)
    img = analog.analog_decode(stream, mapping, args.noise_var)
    write_ppm(img, args.out)
    return 0


def _cmd_metrics_ms_ssim(args) -> int:
    a, b = read_ppm(args.a), read_ppm(args.b)
    score = metrics.ms_ssim(a, b)
    print(f"ms_ssim {score:.6f}")
    print(f"ms_ssim_db {metrics.ms_ssim_db(score):.4f}")
    return 0


def _cmd_run(args) -> int:
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    img = read_ppm(args.image) if args.image else synthetic_image(128, 128, 11)
    realization = turbulence.realization_for_rop(cfg, args.rop)
    if args.system == "imdd":
        harness.ensure_imdd_calibrated(cfg)
    row, decoded = harness.run_scheme_frame(
        cfg, args.scheme, img, realization, args.system, frame_lane="f0"
    )
    doc = {"scheme": args.scheme, "rop_dbm": args.rop, **row}
    print(json.dumps(doc, indent=1, sort_keys=True))
    if args.out_image and decoded is not None:
        write_ppm(decoded, args.out_image)
    return 0


def _cmd_sweep_rop(args) -> int:
    cfg = _load_config(args.config)
    spec_doc = json.loads(Path(args.spec).read_text())
    images = None
    if "images" in spec_doc:
        images = [read_ppm(p) for p in spec_doc.pop("images")]
    spec = harness.SweepSpec(images=images, **spec_doc)
    reports, _details = harness.rop_sweep(cfg, spec)
    if args.out_csv:
        write_report_csv(reports, args.out_csv)
    if args.out_json:
        write_report_json(reports, args.out_json, extra={"config": cfg.to_json_dict()})
    print(f"{sum(len(r.per_frame) for r in reports)} rows")
    return 0


def _cmd_turbulence(args) -> int:
    cfg = _load_config(args.config)
    images = [read_ppm(p) for p in args.images] if args.images else None
    schemes = args.schemes.split(",") if args.schemes else None
    reports, _details = harness.turbulence_run(
        cfg, n_captures=args.captures, schemes=schemes, images=images,
        system=args.system,
    )
    if args.out_csv:
        write_report_csv(reports, args.out_csv)
    if args.out_json:
        write_report_json(reports, args.out_json, extra={"config": cfg.to_json_dict()})
    for rep in reports:
        fails = sum(0 if r.decode_ok else 1 for r in rep.per_frame)
        print(f"{rep.scheme}: {fails}/{len(rep.per_frame)} failed captures, "
              f"mean ms_ssim_db {rep.aggregate['mean_ms_ssim_db']:.3f}")
    return 0


def _cmd_make_image(args) -> int:
    img = synthetic_image(args.height, args.width, args.seed)
    write_ppm(img, args.out)
    return 0


def _cmd_make_config(args) -> int:
    cfg = (
        harness.default_coherent_config() if args.system == "coherent"
        else harness.default_imdd_config()
    )
    if args.calibrate and args.system == "imdd":
        harness.ensure_imdd_calibrated(cfg)
    cfg.save(args.out)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fsolink", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    ch = sub.add_parser("channel", help="turbulence channel utilities")
    chs = ch.add_subparsers(dest="subcommand", required=True)
    s = chs.add_parser("sample", help="draw fading gains for given alpha/beta")
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--beta", type=float, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=_cmd_channel_sample)
    s = chs.add_parser("rop-series", help="quasi-static ROP time series")
    s.add_argument("--config")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(func=_cmd_channel_rop_series)
    s = chs.add_parser("awgn", help="add calibrated AWGN to a symbol file")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--snr-db", type=float, required=True)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_channel_awgn)

    s = sub.add_parser("encode-digital", help="source-encode an image to a bit file")
    s.add_argument("--image", required=True)
    s.add_argument("--format", choices=[f.value for f in ModFormat], default="ook")
    s.add_argument("--target-bits", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_encode_digital)

    s = sub.add_parser("decode-digital", help="decode a bit file back to an image")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--format", choices=[f.value for f in ModFormat], default="ook")
    s.add_argument("--dims", required=True, help="HxW, e.g. 512x768")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_decode_digital)

    s = sub.add_parser("encode-analog", help="map an image to analog symbols")
    s.add_argument("--image", required=True)
    s.add_argument("--ratio", default="1/8")
    s.add_argument("--out-symbols", required=True)
    s.add_argument("--out-meta", required=True)
    s.set_defaults(func=_cmd_encode_analog)

    s = sub.add_parser("decode-analog", help="reconstruct an image from analog symbols")
    s.add_argument("--in-symbols", required=True)
    s.add_argument("--meta", required=True)
    s.add_argument("--noise-var", type=float, default=0.0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_decode_analog)

    me = sub.add_parser("metrics", help="image quality metrics")
    mes = me.add_subparsers(dest="subcommand", required=True)
    s = mes.add_parser("ms-ssim")
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    s.set_defaults(func=_cmd_metrics_ms_ssim)

    s = sub.add_parser("run", help="single end-to-end frame at a fixed ROP")
    s.add_argument("system", choices=["imdd", "coherent"])
    s.add_argument("--config")
    s.add_argument("--scheme", required=True)
    s.add_argument("--image")
    s.add_argument("--rop", type=float, required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--out-image")
    s.set_defaults(func=_cmd_run)

    sw = sub.add_parser("sweep", help="scheme comparisons over a ROP grid")
    sws = sw.add_subparsers(dest="subcommand", required=True)
    s = sws.add_parser("rop")
    s.add_argument("--config")
    s.add_argument("--spec", required=True, help="JSON SweepSpec")
    s.add_argument("--out-csv")
    s.add_argument("--out-json")
    s.set_defaults(func=_cmd_sweep_rop)

    s = sub.add_parser("turbulence", help="quasi-static fading captures")
    s.add_argument("--config")
    s.add_argument("--captures", type=int, default=50)
    s.add_argument("--system", choices=["imdd", "coherent"], default="imdd")
    s.add_argument("--schemes")
    s.add_argument("--images", nargs="*")
    s.add_argument("--out-csv")
    s.add_argument("--out-json")
    s.set_defaults(func=_cmd_turbulence)

    s = sub.add_parser("make-image", help="write a synthetic PPM test image")
    s.add_argument("--height", type=int, default=128)
    s.add_argument("--width", type=int, default=128)
    s.add_argument("--seed", type=int, default=11)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_make_image)

    s = sub.add_parser("make-config", help="write a default JSON link config")
    s.add_argument("--system", choices=["imdd", "coherent"], default="imdd")
    s.add_argument("--calibrate", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_make_config)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
