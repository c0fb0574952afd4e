"""Extract intermediate features from causal transformer stacks.

Runs the prefill pass of a locally available model and dumps the split
features (hidden state at the split layer plus the key/value caches of
every layer below it) into featcode containers, one container per input
sample. Precision is recorded as the model's native compute dtype.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .containerio import TensorRecord, write_container

STAGES = ("prefill", "encoder-output", "pre-vae-decoder")

# roles an attention-based causal LM can serve
_ATTENTION_ROLES = ("hidden_state", "key_cache", "value_cache")


class ExtractionError(Exception):
    pass


class ModelUnavailableError(ExtractionError):
    pass


class UnsupportedRoleError(ExtractionError):
    pass


class UnsupportedStageError(ExtractionError):
    pass


@dataclass(frozen=True)
class SplitSpec:
    model_id: str
    layer_index: int = 5
    stage: str = "prefill"
    roles: tuple[str, ...] = ("hidden_state", "key_cache", "value_cache")

    def __post_init__(self) -> None:
        if self.stage not in STAGES:
            raise ExtractionError(f"unknown stage {self.stage!r}, expected one of {STAGES}")
        if self.layer_index < 1:
            raise ExtractionError("layer_index must be >= 1")
        if not self.roles:
            raise ExtractionError("no roles requested")


@dataclass
class Sample:
    id: str
    input_ids: list[int]


def _dtype_name(dtype: torch.dtype) -> str:
    return {torch.float32: "fp32", torch.float16: "fp16", torch.bfloat16: "bf16"}.get(dtype, "fp32")


def _to_f32_array(t: torch.Tensor) -> np.ndarray:
    return t.detach().to(torch.float32).cpu().contiguous().numpy().reshape(-1)


def load_model(model_id: str):
    from transformers import AutoModelForCausalLM

    try:
        model = AutoModelForCausalLM.from_pretrained(model_id, local_files_only=True)
    except Exception as exc:
        raise ModelUnavailableError(f"cannot load model {model_id!r} locally: {exc}") from exc
    model.eval()
    return model


def _cache_layer_tensors(past_key_values, layer: int) -> tuple[torch.Tensor, torch.Tensor]:
    # transformers >= 4.54 exposes Cache.layers[i].keys/.values; older
    # releases return a tuple of (key, value) pairs
    layers = getattr(past_key_values, "layers", None)
    if layers is not None:
        return layers[layer].keys, layers[layer].values
    return past_key_values[layer][0], past_key_values[layer][1]


def extract_sample(model, split: SplitSpec, sample: Sample) -> list[TensorRecord]:
    if split.stage != "prefill":
        raise UnsupportedStageError(
            f"stage {split.stage!r} is not supported by this adapter (prefill only)"
        )
    config = model.config
    if getattr(config, "num_hidden_layers", 0) < split.layer_index:
        raise ExtractionError(
            f"model has {getattr(config, 'num_hidden_layers', 0)} layers, "
            f"cannot split at layer {split.layer_index}"
        )
    for role in split.roles:
        if role not in _ATTENTION_ROLES:
            raise UnsupportedRoleError(
                f"role {role!r} is not produced by an attention-based causal LM"
            )

    precision = _dtype_name(next(model.parameters()).dtype)
    ids = torch.tensor([sample.input_ids], dtype=torch.long)
    n = ids.shape[1]
    with torch.no_grad():
        out = model(ids, output_hidden_states=True, use_cache=True)

    source = f"{split.model_id}/layer{split.layer_index}/{split.stage}"
    records: list[TensorRecord] = []
    if "hidden_state" in split.roles:
        hidden = out.hidden_states[split.layer_index][0]  # [N, d]
        records.append(
            TensorRecord(
                id=f"{sample.id}.hidden_state",
                precision=precision,
                shape=tuple(hidden.shape),
                values=_to_f32_array(hidden),
                role="hidden_state",
                source=source,
            )
        )
    want_keys = "key_cache" in split.roles
    want_values = "value_cache" in split.roles
    if want_keys or want_values:
        keys, values = [], []
        for layer in range(split.layer_index):
            k, v = _cache_layer_tensors(out.past_key_values, layer)
            keys.append(k[0])  # [heads, N, head_dim]
            values.append(v[0])
        if want_keys:
            stacked = torch.stack(keys)  # [layers, heads, N, head_dim]
            records.append(
                TensorRecord(
                    id=f"{sample.id}.key_cache",
                    precision=precision,
                    shape=tuple(stacked.shape),
                    values=_to_f32_array(stacked),
                    role="key_cache",
                    source=source,
                )
            )
        if want_values:
            stacked = torch.stack(values)
            records.append(
                TensorRecord(
                    id=f"{sample.id}.value_cache",
                    precision=precision,
                    shape=tuple(stacked.shape),
                    values=_to_f32_array(stacked),
                    role="value_cache",
                    source=source,
                )
            )
    assert n == ids.shape[1]
    return records


def extract(split: SplitSpec, samples: list[Sample], out_dir: str | Path) -> list[Path]:
    """Run the split extraction; one container per sample. Returns manifest paths."""
    model = load_model(split.model_id)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for sample in samples:
        records = extract_sample(model, split, sample)
        paths.append(write_container(records, out / sample.id))
    return paths
