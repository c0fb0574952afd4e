"""Command-line entry point.

Subcommands: ``gen`` (synthesize a feature container), ``analyze``
(redundancy/spectral/histogram reports), ``encode``/``decode`` (file-level
codec round trip), ``run`` (full pipeline), ``bench`` (timing only),
``report`` (merge bench JSONs into one CSV).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

from . import codecs as codecs_mod
from . import pipeline, redundancy
from .container import read_container, write_container
from .packing import pack, unpack
from .practicality import b_max, measure_codec
from .quantizer import calibrate, forward, inverse
from .synthgen import generate


def _cmd_gen(args) -> int:
    spec_doc = json.loads(Path(args.spec).read_text())
    set_name = spec_doc.get("set_name", "features")
    tensors = [generate(pipeline.spec_from_dict(d)) for d in spec_doc["tensors"]]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = write_container(tensors, out_dir / set_name)
    print(f"wrote {len(manifest.tensors)} tensors to {out_dir / set_name}.{{manifest.json,blob}}")
    return 0


def _fmt(x) -> str:
    return "undef" if x is None else f"{x:+.4f}"


def _cmd_analyze(args) -> int:
    tensors = read_container(args.infile)
    analyses = []
    for t in tensors:
        plane, _ = pack(t)
        a = redundancy.analyze_plane(t.id, plane, t, bins=args.bins)
        analyses.append(a)
        print(
            f"{t.id}: rho_h={_fmt(a.redundancy.rho_h)} rho_v={_fmt(a.redundancy.rho_v)} "
            f"g_dct={_fmt(a.spectral.g_dct)} c_dct={_fmt(a.spectral.c_dct)}"
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    redundancy.analyses_to_json(analyses, out / "redundancy.json")
    redundancy.analyses_to_csv(analyses, out / "redundancy.csv")
    return 0


def _cmd_encode(args) -> int:
    tensors = read_container(args.infile)
    out = Path(args.out)
    (out / "bitstreams").mkdir(parents=True, exist_ok=True)
    if args.transform:
        transforms = {t.role: pipeline.load_transform(args.transform) for t in tensors}
    elif args.calib:
        calib = read_container(args.calib)
        by_role: dict[str, list] = {}
        for t in calib:
            by_role.setdefault(t.role, []).append(t)
        transforms = {}
        (out / "transforms").mkdir(exist_ok=True)
        for role in sorted({t.role for t in tensors}):
            if role not in by_role:
                print(f"error: no calibration tensors for role {role!r}", file=sys.stderr)
                return 1
            transforms[role] = calibrate(by_role[role], role)
            pipeline.write_transform_file(
                transforms[role], role, len(by_role[role]), out / "transforms" / f"{role}.transform.json"
            )
    else:
        print("error: provide --transform or --calib", file=sys.stderr)
        return 1
    quality = codecs_mod.QualityLevel(args.lam, allow_off_grid=True)
    for t in tensors:
        plane, record = pack(t)
        q = forward(plane, transforms[t.role], args.bits)
        bs = codecs_mod.encode(q, args.codec, quality, record)
        name = f"{t.id}__{args.codec}__lam{pipeline.lam_tag(quality.lam)}.lmfc"
        codecs_mod.write_bitstream(bs, out / "bitstreams" / name)
        print(f"{t.id}: {bs.n_bits} payload bits ({bs.n_bits / t.element_count:.3f} bpfp)")
    return 0


def _cmd_decode(args) -> int:
    src = Path(args.infile)
    files = sorted(src.glob("*.lmfc")) if src.is_dir() else [src]
    if not files:
        print(f"error: no .lmfc files under {src}", file=sys.stderr)
        return 1
    tensors = []
    for f in files:
        bs = codecs_mod.read_bitstream(f)
        q, record = codecs_mod.decode(bs)
        # the wire record carries no id; recover it from the filename
        record = dataclasses.replace(record, tensor_id=f.name.split("__")[0])
        tensors.append(unpack(inverse(q), record))
    write_container(tensors, args.out)
    print(f"decoded {len(tensors)} tensors to {args.out}.{{manifest.json,blob}}")
    return 0


def _cmd_run(args) -> int:
    overrides = {}
    if args.out_dir:
        overrides["out_dir"] = args.out_dir
    config = pipeline.load_config(args.config, overrides)
    report = pipeline.run_pipeline(config)
    print(f"{report.runs} (tensor, codec, lambda) runs -> {report.out_dir}")
    for codec_id, corr in report.correlations.items():
        rho = "undef" if corr.rho is None else f"{corr.rho:+.3f}"
        print(f"  {codec_id}: D-P correlation rho={rho} over {corr.n_points} rows")
    for e in report.errors:
        print(f"  error [{e.stage}] tensor={e.tensor_id} codec={e.codec_id} lam={e.lam}: {e.message}",
              file=sys.stderr)
    return 1 if report.errors else 0


def _cmd_bench(args) -> int:
    config = pipeline.load_config(args.config)
    config.validate()
    out = Path(config.out_dir) / "reports" / "bench"
    out.mkdir(parents=True, exist_ok=True)
    test_tensors = config.test.load()
    calib = config.calibration.load()
    by_role: dict[str, list] = {}
    for t in calib:
        by_role.setdefault(t.role, []).append(t)
    written = 0
    for codec_id in config.codecs:
        for lam in config.lambdas:
            quality = codecs_mod.QualityLevel(lam, allow_off_grid=True)
            t_enc = t_dec = 0.0
            s_raw = s_enc = 0
            for t in test_tensors:
                plane, record = pack(t)
                q = forward(plane, calibrate(by_role[t.role], t.role), config.bit_depth)
                timing, size, _ = measure_codec(
                    codec_id, q, quality, record,
                    reps=config.reps, warmups=config.warmups,
                    p_raw=t.precision.bit_width,
                )
                t_enc += timing.t_enc
                t_dec += timing.t_dec
                s_raw += size.s_raw_bits
                s_enc += size.s_enc_bits
            from .practicality import SizeRecord, TimingRecord

            rep = b_max(
                TimingRecord(t_enc, t_dec, config.reps, config.warmups),
                SizeRecord(s_raw, s_enc),
            )
            rec = {
                "codec": codec_id,
                "lambda": lam,
                "t_enc_s": t_enc,
                "t_dec_s": t_dec,
                "s_raw_bits": s_raw,
                "s_enc_bits": s_enc,
                "bmax_bps": rep.bmax_bps,
                "bmax_mbps": rep.bmax_mbps,
                "mem_peak_bytes": 0,
                "mem_method": "unavailable",
            }
            name = f"{codec_id}__lam{pipeline.lam_tag(lam)}.json"
            (out / name).write_text(json.dumps(rec, indent=2, sort_keys=True) + "\n")
            written += 1
            print(f"{codec_id} lam={lam}: bmax={rep.bmax_mbps:.2f} Mbps")
    print(f"wrote {written} bench records to {out}")
    return 0


_BENCH_COLUMNS = (
    "codec", "lambda", "t_enc_s", "t_dec_s", "s_raw_bits", "s_enc_bits",
    "bmax_bps", "bmax_mbps", "mem_peak_bytes", "mem_method",
)


def _cmd_report(args) -> int:
    src = Path(args.infile)
    files = sorted(src.glob("*.json")) if src.is_dir() else [src]
    records = [json.loads(f.read_text()) for f in files]
    records.sort(key=lambda r: (r["codec"], r["lambda"]))
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_BENCH_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in records:
            writer.writerow({k: r.get(k, "") for k in _BENCH_COLUMNS})
    print(f"wrote {len(records)} rows to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="featcode", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic feature container")
    p.add_argument("--spec", required=True, help="JSON file with set_name and tensor specs")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("analyze", help="redundancy/spectral/histogram analysis of a container")
    p.add_argument("--in", dest="infile", required=True, help="container stem or manifest path")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--bins", type=int, default=256)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("encode", help="encode a container's tensors to bitstream files")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--codec", required=True)
    p.add_argument("--lam", type=float, default=0.01)
    p.add_argument("--bits", type=int, default=8)
    p.add_argument("--transform", help="reuse a serialized .transform.json")
    p.add_argument("--calib", help="calibration container stem")
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("decode", help="decode bitstream files back to a container")
    p.add_argument("--in", dest="infile", required=True, help=".lmfc file or directory")
    p.add_argument("--out", required=True, help="output container stem")
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("run", help="full pipeline over codecs and quality levels")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", help="override the config's out_dir")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("bench", help="codec timing / break-even bandwidth only")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("report", help="merge bench JSONs into one CSV")
    p.add_argument("--in", dest="infile", required=True, help="bench JSON file or directory")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
