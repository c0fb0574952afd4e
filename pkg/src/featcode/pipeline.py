"""End-to-end orchestration: calibrate once, then pack/quantize/encode/
decode/dequantize/unpack every (tensor, codec, lambda) combination and
emit the report bundle.

Outputs under the configured directory:

- ``bitstreams/`` one ``.lmfc`` file per (tensor, codec, lambda)
- ``transforms/`` one frozen ``.transform.json`` per role class
- ``reports/`` rate-performance CSVs, redundancy/histogram JSON + CSV for
  original and reconstructed tensors, bench JSONs, error log

Failures are collected with their (tensor, codec, lambda) coordinates;
everything that could be produced is kept.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import codecs as codecs_mod
from . import metrics, practicality, redundancy
from .container import FeatureTensor, Precision, read_container
from .packing import pack, unpack
from .quantizer import MonotoneTransform, calibrate, calibration_stats, forward, inverse
from .synthgen import GeneratorSpec, generate


class ConfigError(Exception):
    pass


@dataclass
class SourceConfig:
    """Either a container on disk or a list of generator specs."""

    container: Path | None = None
    specs: list[GeneratorSpec] | None = None

    def __post_init__(self) -> None:
        if (self.container is None) == (self.specs is None):
            raise ConfigError("source needs exactly one of container path or generator specs")

    def load(self) -> list[FeatureTensor]:
        if self.container is not None:
            return read_container(self.container)
        return [generate(s) for s in self.specs]

    def seeds(self) -> set[int]:
        return {s.seed for s in self.specs} if self.specs else set()


@dataclass
class RunConfig:
    out_dir: Path
    test: SourceConfig
    calibration: SourceConfig
    codecs: list[str]
    lambdas: list[float] = field(default_factory=lambda: list(codecs_mod.LAMBDA_GRID))
    bit_depth: int = 8
    reps: int = 3
    warmups: int = 1
    performance_csv: Path | None = None
    histogram_bins: int = 256
    set_name: str = "synthetic"

    def validate(self) -> None:
        if not self.codecs:
            raise ConfigError("empty codec list")
        for cid in self.codecs:
            codecs_mod.get_descriptor(cid)  # raises UnknownCodecError
        if not self.lambdas:
            raise ConfigError("empty lambda list")
        if any(l <= 0 for l in self.lambdas):
            raise ConfigError("lambda values must be positive")
        if len(set(self.lambdas)) != len(self.lambdas):
            raise ConfigError("duplicate lambda values")
        if self.test.container is not None and self.calibration.container is not None:
            if Path(self.test.container).resolve() == Path(self.calibration.container).resolve():
                raise ConfigError("calibration container must differ from test container")
        common = self.test.seeds() & self.calibration.seeds()
        if common:
            raise ConfigError(f"calibration and test seeds overlap: {sorted(common)}")


def spec_from_dict(d: dict) -> GeneratorSpec:
    return GeneratorSpec(
        archetype=d["archetype"],
        shape=tuple(d["shape"]),
        seed=int(d["seed"]),
        params=d.get("params", {}),
        tensor_id=d.get("id", ""),
        role=d.get("role", ""),
        precision=Precision.from_name(d.get("precision", "fp32")),
    )


def _source_from_dict(d: dict) -> SourceConfig:
    if "container" in d:
        return SourceConfig(container=Path(d["container"]))
    if "generate" in d:
        return SourceConfig(specs=[spec_from_dict(s) for s in d["generate"]])
    raise ConfigError(f"source must have 'container' or 'generate', got keys {sorted(d)}")


def load_config(path: str | Path, overrides: dict | None = None) -> RunConfig:
    raw = json.loads(Path(path).read_text())
    raw.update(overrides or {})
    try:
        cfg = RunConfig(
            out_dir=Path(raw["out_dir"]),
            test=_source_from_dict(raw["test"]),
            calibration=_source_from_dict(raw["calibration"]),
            codecs=list(raw["codecs"]),
            lambdas=[float(l) for l in raw.get("lambdas", codecs_mod.LAMBDA_GRID)],
            bit_depth=int(raw.get("bit_depth", 8)),
            reps=int(raw.get("reps", 3)),
            warmups=int(raw.get("warmups", 1)),
            performance_csv=Path(raw["performance_csv"]) if raw.get("performance_csv") else None,
            histogram_bins=int(raw.get("histogram_bins", 256)),
            set_name=raw.get("set_name", "synthetic"),
        )
    except KeyError as exc:
        raise ConfigError(f"missing config key: {exc}") from None
    cfg.validate()
    return cfg


@dataclass(frozen=True)
class RunError:
    tensor_id: str
    codec_id: str
    lam: float | None
    stage: str
    message: str


@dataclass
class RunReport:
    out_dir: Path
    errors: list[RunError]
    rp_tables: dict[str, list[metrics.RatePerformancePoint]]
    correlations: dict[str, metrics.CorrelationReport]
    transform_paths: dict[str, Path]
    runs: int = 0


def write_transform_file(transform: MonotoneTransform, role: str, sample_count: int, path: Path) -> None:
    payload = {
        "role_class": role,
        "sample_count": sample_count,
        "knots": int(transform.breakpoints.size),
        "breakpoints": [float(b) for b in transform.breakpoints],
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_transform(path: str | Path) -> MonotoneTransform:
    d = json.loads(Path(path).read_text())
    return MonotoneTransform(np.asarray(d["breakpoints"], dtype=np.float32))


def read_performance_csv(path: str | Path) -> dict[tuple[str, float], metrics.PerformanceRecord]:
    """CSV schema: tensor_set, lambda, metric_name, value, direction."""
    import csv as _csv

    out: dict[tuple[str, float], metrics.PerformanceRecord] = {}
    with open(path, newline="") as fh:
        for row in _csv.DictReader(fh):
            key = (row["tensor_set"], float(row["lambda"]))
            out[key] = metrics.PerformanceRecord(
                metric_name=row["metric_name"],
                value=float(row["value"]),
                direction=row["direction"],
            )
    return out


def lam_tag(lam: float) -> str:
    return repr(float(lam))


def run_pipeline(config: RunConfig) -> RunReport:
    config.validate()
    out = Path(config.out_dir)
    bs_dir = out / "bitstreams"
    rep_dir = out / "reports"
    tf_dir = out / "transforms"
    for d in (bs_dir, rep_dir, tf_dir):
        d.mkdir(parents=True, exist_ok=True)

    errors: list[RunError] = []
    test_tensors = config.test.load()
    calib_tensors = config.calibration.load()

    calib_by_role: dict[str, list[FeatureTensor]] = {}
    for t in calib_tensors:
        calib_by_role.setdefault(t.role, []).append(t)

    transforms: dict[str, MonotoneTransform] = {}
    transform_paths: dict[str, Path] = {}
    for role in sorted({t.role for t in test_tensors}):
        if role not in calib_by_role:
            errors.append(RunError("-", "-", None, "calibrate", f"no calibration tensors for role {role!r}"))
            continue
        try:
            stats = calibration_stats(calib_by_role[role], role)
            transforms[role] = calibrate(calib_by_role[role], role)
        except Exception as exc:
            errors.append(RunError("-", "-", None, "calibrate", f"role {role!r}: {exc}"))
            continue
        path = tf_dir / f"{role}.transform.json"
        write_transform_file(transforms[role], role, stats.sample_count, path)
        transform_paths[role] = path

    perf_records: dict[tuple[str, float], metrics.PerformanceRecord] = {}
    if config.performance_csv is not None:
        perf_records = read_performance_csv(config.performance_csv)

    original_analyses: list[redundancy.TensorAnalysis] = []
    recon_analyses: list[redundancy.TensorAnalysis] = []
    # per (codec, lam): accumulators over tensors
    agg: dict[tuple[str, float], dict] = {}
    bench_records: list[dict] = []
    runs = 0

    for tensor in test_tensors:
        if tensor.role not in transforms:
            errors.append(RunError(tensor.id, "-", None, "calibrate", f"no transform for role {tensor.role!r}"))
            continue
        transform = transforms[tensor.role]
        try:
            plane, record = pack(tensor)
            q = forward(plane, transform, config.bit_depth)
            original_analyses.append(
                redundancy.analyze_plane(tensor.id, plane, tensor, config.histogram_bins)
            )
        except Exception as exc:
            errors.append(RunError(tensor.id, "-", None, "preprocess", str(exc)))
            continue

        for codec_id in config.codecs:
            for lam in config.lambdas:
                coord = (tensor.id, codec_id, lam)
                try:
                    quality = codecs_mod.QualityLevel(lam, allow_off_grid=True)
                    bs = codecs_mod.encode(q, codec_id, quality, record)
                    name = f"{tensor.id}__{codec_id}__lam{lam_tag(lam)}.lmfc"
                    codecs_mod.write_bitstream(bs, bs_dir / name)

                    q2, _ = codecs_mod.decode(bs)
                    recon = unpack(inverse(q2), record)
                    dist = metrics.mse(tensor, recon)
                    timing, size, _ = practicality.measure_codec(
                        codec_id,
                        q,
                        quality,
                        record,
                        reps=config.reps,
                        warmups=config.warmups,
                        p_raw=tensor.precision.bit_width,
                    )
                    recon_analyses.append(
                        redundancy.analyze_plane(
                            f"{tensor.id}::{codec_id}::lam={lam_tag(lam)}",
                            inverse(q2),
                            recon,
                            config.histogram_bins,
                        )
                    )
                    a = agg.setdefault(
                        (codec_id, lam),
                        {
                            "n_bits": 0,
                            "n_eq_bits": 0.0,
                            "elements": 0,
                            "header_bits": 0,
                            "sq_err": 0.0,
                            "s_raw": 0,
                            "s_enc": 0,
                            "t_enc": 0.0,
                            "t_dec": 0.0,
                            "p_raws": set(),
                        },
                    )
                    a["n_bits"] += bs.n_bits
                    a["n_eq_bits"] += bs.n_bits * 32.0 / tensor.precision.bit_width
                    a["elements"] += tensor.element_count
                    a["header_bits"] += bs.header_bits
                    a["sq_err"] += dist.mse * tensor.element_count
                    a["s_raw"] += size.s_raw_bits
                    a["s_enc"] += size.s_enc_bits
                    a["t_enc"] += timing.t_enc
                    a["t_dec"] += timing.t_dec
                    a["p_raws"].add(tensor.precision.bit_width)
                    runs += 1
                except Exception as exc:
                    errors.append(RunError(*coord, "run", f"{type(exc).__name__}: {exc}"))

    rp_tables: dict[str, list[metrics.RatePerformancePoint]] = {}
    correlations: dict[str, metrics.CorrelationReport] = {}
    for codec_id in config.codecs:
        rows = []
        for lam in sorted(config.lambdas):
            a = agg.get((codec_id, lam))
            if a is None:
                continue
            p_raws = a["p_raws"]
            if len(p_raws) == 1:
                rate = metrics.RateRecord(a["n_bits"], a["elements"], next(iter(p_raws)), a["header_bits"])
            else:
                # mixed precisions: aggregate on the 32-bit-equivalent scale
                rate = metrics.RateRecord(round(a["n_eq_bits"]), a["elements"], 32, a["header_bits"])
            dist = metrics.DistortionRecord(mse=a["sq_err"] / a["elements"])
            timing = practicality.TimingRecord(
                t_enc=a["t_enc"], t_dec=a["t_dec"], repetitions=config.reps, warmups=config.warmups
            )
            size = practicality.SizeRecord(s_raw_bits=a["s_raw"], s_enc_bits=a["s_enc"])
            bmax = practicality.b_max(timing, size)
            perf = perf_records.get((config.set_name, lam))
            rows.append((lam, rate, dist, perf, bmax))
            bench_records.append(
                {
                    "codec": codec_id,
                    "lambda": lam,
                    "t_enc_s": timing.t_enc,
                    "t_dec_s": timing.t_dec,
                    "s_raw_bits": size.s_raw_bits,
                    "s_enc_bits": size.s_enc_bits,
                    "bmax_bps": bmax.bmax_bps,
                    "bmax_mbps": bmax.bmax_mbps,
                    "mem_peak_bytes": 0,
                    "mem_method": "unavailable",
                }
            )
        if rows:
            points, corr = metrics.build_rp_table(rows)
            rp_tables[codec_id] = points
            correlations[codec_id] = corr
            metrics.rp_table_to_csv(points, rep_dir / f"rp_table_{codec_id}.csv")

    redundancy.analyses_to_json(original_analyses, rep_dir / "redundancy_original.json")
    redundancy.analyses_to_csv(original_analyses, rep_dir / "redundancy_original.csv")
    redundancy.analyses_to_json(recon_analyses, rep_dir / "redundancy_reconstructed.json")
    redundancy.analyses_to_csv(recon_analyses, rep_dir / "redundancy_reconstructed.csv")
    (rep_dir / "correlation.json").write_text(
        json.dumps(
            {c: {"rho": r.rho, "n_points": r.n_points} for c, r in correlations.items()},
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    bench_dir = rep_dir / "bench"
    bench_dir.mkdir(exist_ok=True)
    for rec in bench_records:
        name = f"{rec['codec']}__lam{lam_tag(rec['lambda'])}.json"
        (bench_dir / name).write_text(json.dumps(rec, indent=2, sort_keys=True) + "\n")
    if errors:
        (rep_dir / "errors.json").write_text(
            json.dumps(
                [
                    {
                        "tensor": e.tensor_id,
                        "codec": e.codec_id,
                        "lambda": e.lam,
                        "stage": e.stage,
                        "message": e.message,
                    }
                    for e in errors
                ],
                indent=2,
                sort_keys=True,
            )
            + "\n"
        )

    return RunReport(
        out_dir=out,
        errors=errors,
        rp_tables=rp_tables,
        correlations=correlations,
        transform_paths=transform_paths,
        runs=runs,
    )
