"""featcode-extract: real-model feature dumping into featcode containers."""

from .adapter import (
    ExtractionError,
    ModelUnavailableError,
    Sample,
    SplitSpec,
    UnsupportedRoleError,
    UnsupportedStageError,
    extract,
    extract_sample,
    load_model,
)
from .containerio import TensorRecord, write_container

__version__ = "0.1.0"
