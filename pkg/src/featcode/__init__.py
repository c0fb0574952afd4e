"""featcode: evaluation harness for coding intermediate features of large models."""

from .container import (
    FeatureManifest,
    FeatureTensor,
    Precision,
    read_container,
    validate_manifest,
    write_container,
)
from .packing import Packed2D, PackingRecord, pack, unpack
from .quantizer import (
    CalibrationStats,
    MonotoneTransform,
    QuantizedPlane,
    calibrate,
    forward,
    inverse,
    linear_transform,
)
from .codecs import (
    Bitstream,
    CodecDescriptor,
    LAMBDA_GRID,
    QualityLevel,
    decode,
    encode,
    read_bitstream,
    register_codec,
    write_bitstream,
)
from .metrics import (
    CorrelationReport,
    DistortionRecord,
    PerformanceRecord,
    RateRecord,
    bpfp,
    build_rp_table,
    ebpfp,
    mse,
    pearson,
)
from .redundancy import (
    HistogramReport,
    RedundancyReport,
    SpectralReport,
    centroid,
    dct2,
    gini,
    histogram_cdf,
    rho_axes,
)
from .practicality import BmaxReport, MemoryReport, SizeRecord, TimingRecord, b_max, measure_codec
from .synthgen import ARCHETYPES, GeneratorSpec, generate, table_shapes
from .synthgen import validate as validate_generated
from .pipeline import RunConfig, SourceConfig, load_config, run_pipeline

__version__ = "0.1.0"
