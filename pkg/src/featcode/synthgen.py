"""Synthetic feature tensors reproducing observed distribution archetypes.

Each archetype is a deterministic recipe (seeded PCG64) for one of the
distribution fingerprints seen in real intermediate features: narrow
single-peak caches, wide multi-peak mixtures, comb-like discretized key
caches, heavy-tailed token embeddings, negatively skewed shallow
activations, spatially correlated latents, and near-independent sentence
embeddings. Sequence-shaped archetypes get their per-token smoothness
from an autoregressive blend along the token axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from .container import FeatureTensor, Precision
from .packing import pack

ARCHETYPES = (
    "shallow_vit",
    "deep_vit",
    "kv_key",
    "kv_value",
    "kimi_key_comb",
    "ssm_cache",
    "conv_cache",
    "token_embed",
    "sentence_embed",
    "latent_spatial",
)

DEFAULT_ROLE = {
    "shallow_vit": "hidden_state",
    "deep_vit": "hidden_state",
    "kv_key": "key_cache",
    "kv_value": "value_cache",
    "kimi_key_comb": "key_cache",
    "ssm_cache": "ssm_cache",
    "conv_cache": "conv_cache",
    "token_embed": "token_embed",
    "sentence_embed": "sentence_embed",
    "latent_spatial": "latent",
}

DEFAULT_PARAMS: dict[str, dict[str, float]] = {
    "shallow_vit": {"gamma_shape": 2.0, "scale": 0.3, "offset": 0.4, "rho_seq": 0.2},
    "deep_vit": {"components": 4, "spread": 4.0, "sigma": 0.5, "rho_seq": 0.75},
    "kv_key": {"components": 6, "spread": 6.0, "sigma": 0.8, "rho_seq": 0.3},
    "kv_value": {"scale": 0.2, "rho_seq": 0.3},
    "kimi_key_comb": {"cluster_count": 11, "span": 8.0, "jitter": 0.08, "rho_seq": 0.6},
    "ssm_cache": {"scale": 0.05, "clamp": 0.25},
    "conv_cache": {"sigma": 1.0, "rho_window": -0.37},
    "token_embed": {"df": 3.0, "scale": 1.0, "rho_seq": 0.5},
    "sentence_embed": {"scale": 1.0},
    "latent_spatial": {"rho": 0.92, "sigma": 1.0},
}


class GeneratorError(Exception):
    pass


class InvalidParamsError(GeneratorError):
    pass


@dataclass(frozen=True)
class GeneratorSpec:
    archetype: str
    shape: tuple[int, ...]
    seed: int
    params: dict = field(default_factory=dict)
    tensor_id: str = ""
    role: str = ""
    precision: Precision = Precision.FP32

    def __post_init__(self) -> None:
        if self.archetype not in ARCHETYPES:
            raise InvalidParamsError(f"unknown archetype {self.archetype!r}")
        object.__setattr__(self, "shape", tuple(int(d) for d in self.shape))
        if not self.shape or any(d <= 0 for d in self.shape):
            raise InvalidParamsError(f"bad shape {self.shape}")
        merged = dict(DEFAULT_PARAMS[self.archetype])
        unknown = set(self.params) - set(merged)
        if unknown:
            raise InvalidParamsError(f"{self.archetype}: unknown params {sorted(unknown)}")
        merged.update(self.params)
        object.__setattr__(self, "params", merged)
        for key in ("rho", "rho_seq", "rho_window"):
            if key in merged and not -1.0 < merged[key] < 1.0:
                raise InvalidParamsError(f"{self.archetype}: {key} must be in (-1, 1)")
        if not self.tensor_id:
            object.__setattr__(self, "tensor_id", f"{self.archetype}-{self.seed}")
        if not self.role:
            object.__setattr__(self, "role", DEFAULT_ROLE[self.archetype])


def _ar_blend(x: np.ndarray, rho: float, axis: int) -> np.ndarray:
    """In-place-style AR(1) mix along an axis; preserves unit marginals."""
    if abs(rho) < 1e-12 or x.shape[axis] < 2:
        return x
    src = np.moveaxis(x, axis, 0)
    out = src.copy()
    s = math.sqrt(1.0 - rho * rho)
    for i in range(1, out.shape[0]):
        out[i] = rho * out[i - 1] + s * src[i]
    return np.moveaxis(out, 0, axis)


def _seq_axis(shape: tuple[int, ...]) -> int | None:
    # token axis = second-to-last (rows of the packed plane vary fastest there)
    return -2 if len(shape) >= 2 else None


def _channel_offsets(rng: np.random.Generator, shape: tuple[int, ...], centers: np.ndarray) -> np.ndarray:
    """Per-channel (last axis) center assignment, constant along other axes."""
    assign = rng.integers(0, centers.size, size=shape[-1])
    return centers[assign]


def _corrected_rho(rho: float, n: int) -> float:
    # first-order compensation for the small-sample bias of the per-slice
    # lag-1 Pearson estimator, so measured correlations land on the target
    if n < 8 or rho == 0.0:
        return rho
    return max(min(rho + (1.0 + 3.0 * rho) / n, 0.999), -0.999)


def _gen_latent_spatial(rng, shape, p):
    if len(shape) < 2:
        raise InvalidParamsError("latent_spatial needs rank >= 2")
    x = rng.standard_normal(shape)
    x = _ar_blend(x, _corrected_rho(p["rho"], shape[-2]), axis=-2)
    x = _ar_blend(x, _corrected_rho(p["rho"], shape[-1]), axis=-1)
    return p["sigma"] * x


def _gen_kv_value(rng, shape, p):
    x = rng.standard_normal(shape)
    ax = _seq_axis(shape)
    if ax is not None:
        x = _ar_blend(x, p["rho_seq"], ax)
    return p["scale"] * x


def _gen_ssm_cache(rng, shape, p):
    x = rng.laplace(0.0, p["scale"], size=shape)
    return np.clip(x, -p["clamp"], p["clamp"])


def _gen_mixture(rng, shape, p):
    k = int(p["components"])
    if k < 2:
        raise InvalidParamsError("mixture needs >= 2 components")
    centers = np.linspace(-p["spread"], p["spread"], k)
    noise = rng.standard_normal(shape)
    ax = _seq_axis(shape)
    if ax is not None:
        noise = _ar_blend(noise, p["rho_seq"], ax)
    return _channel_offsets(rng, shape, centers) + p["sigma"] * noise


def _gen_comb(rng, shape, p):
    k = int(p["cluster_count"])
    if k < 2:
        raise InvalidParamsError("comb needs >= 2 clusters")
    centers = np.linspace(-p["span"], p["span"], k)
    noise = rng.standard_normal(shape)
    ax = _seq_axis(shape)
    if ax is not None:
        noise = _ar_blend(noise, p["rho_seq"], ax)
    return _channel_offsets(rng, shape, centers) + p["jitter"] * noise


def _gen_token_embed(rng, shape, p):
    x = rng.standard_t(p["df"], size=shape)
    ax = _seq_axis(shape)
    if ax is not None:
        x = _ar_blend(x, p["rho_seq"], ax)
    return p["scale"] * x


def _gen_sentence_embed(rng, shape, p):
    return p["scale"] * rng.standard_normal(shape)


def _gen_shallow_vit(rng, shape, p):
    raw = rng.gamma(p["gamma_shape"], 1.0, size=shape)
    x = (p["offset"] - raw) * p["scale"]
    ax = _seq_axis(shape)
    if ax is not None:
        # blend the zero-mean part so skew direction survives
        mu = x.mean()
        x = mu + _ar_blend(x - mu, p["rho_seq"], ax)
    return x


def _gen_conv_cache(rng, shape, p):
    x = rng.standard_normal(shape)
    x = _ar_blend(x, p["rho_window"], axis=-1)  # temporal window is the last axis
    return p["sigma"] * x


_RECIPES = {
    "shallow_vit": _gen_shallow_vit,
    "deep_vit": _gen_mixture,
    "kv_key": _gen_mixture,
    "kv_value": _gen_kv_value,
    "kimi_key_comb": _gen_comb,
    "ssm_cache": _gen_ssm_cache,
    "conv_cache": _gen_conv_cache,
    "token_embed": _gen_token_embed,
    "sentence_embed": _gen_sentence_embed,
    "latent_spatial": _gen_latent_spatial,
}


def generate(spec: GeneratorSpec) -> FeatureTensor:
    """Deterministically sample one tensor: same spec, same bits."""
    rng = np.random.default_rng(spec.seed)
    values = _RECIPES[spec.archetype](rng, spec.shape, spec.params)
    from .container import quantize_to_precision

    values = quantize_to_precision(values.astype(np.float32), spec.precision)
    return FeatureTensor(
        id=spec.tensor_id,
        precision=spec.precision,
        shape=spec.shape,
        values=values,
        role=spec.role,
        source=f"synthgen/{spec.archetype}/seed={spec.seed}",
    )


def excess_kurtosis(values: np.ndarray) -> float:
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    d = v - v.mean()
    m2 = (d * d).mean()
    if m2 == 0:
        return 0.0
    return float((d**4).mean() / (m2 * m2) - 3.0)


def skewness(values: np.ndarray) -> float:
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    d = v - v.mean()
    m2 = (d * d).mean()
    if m2 == 0:
        return 0.0
    return float((d**3).mean() / m2**1.5)


def count_modes(values: np.ndarray, bins: int = 128, prominence_frac: float = 0.05) -> int:
    """Histogram peak count (smoothed, boundary peaks included)."""
    counts, _ = np.histogram(np.asarray(values).reshape(-1), bins=bins)
    smooth = np.convolve(counts.astype(np.float64), np.ones(3) / 3.0, mode="same")
    padded = np.concatenate(([0.0], smooth, [0.0]))
    peaks, _ = find_peaks(padded, prominence=prominence_frac * padded.max())
    return int(peaks.size)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    measured: float | None
    detail: str = ""


@dataclass(frozen=True)
class GeneratorValidation:
    checks: tuple[Check, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def validate(tensor: FeatureTensor, spec: GeneratorSpec) -> GeneratorValidation:
    """Check archetype-specific statistical targets against a tensor."""
    from .redundancy import rho_axes

    p = spec.params
    checks: list[Check] = [
        Check("shape", tensor.shape == spec.shape, None, f"{tensor.shape} vs {spec.shape}")
    ]
    v = tensor.values
    arc = spec.archetype
    if arc == "latent_spatial":
        plane, _ = pack(tensor)
        rep = rho_axes(plane)
        for name, got in (("rho_h", rep.rho_h), ("rho_v", rep.rho_v)):
            ok = got is not None and abs(got - p["rho"]) <= 0.05
            checks.append(Check(name, ok, got, f"target {p['rho']} +- 0.05"))
    elif arc == "kimi_key_comb":
        modes = count_modes(v)
        checks.append(Check("modes", modes >= int(p["cluster_count"]), modes,
                            f"expected >= {int(p['cluster_count'])} histogram peaks"))
    elif arc in ("deep_vit", "kv_key"):
        modes = count_modes(v)
        checks.append(Check("modes", modes >= 2, modes, "expected multi-peaked histogram"))
    elif arc == "kv_value":
        modes = count_modes(v)
        checks.append(Check("modes", modes == 1, modes, "expected single-peaked histogram"))
    elif arc == "ssm_cache":
        peak = float(np.abs(v).max())
        checks.append(Check("clamp", peak <= p["clamp"] + 1e-6, peak, f"|v| <= {p['clamp']}"))
    elif arc == "token_embed":
        kurt = excess_kurtosis(v)
        checks.append(Check("heavy_tail", kurt > 3.0, kurt, "excess kurtosis > 3"))
    elif arc == "sentence_embed":
        plane, _ = pack(tensor)
        rep = rho_axes(plane)
        got = rep.rho_h
        checks.append(Check("rho_h", got is not None and abs(got) < 0.05, got, "|rho_h| < 0.05"))
    elif arc == "shallow_vit":
        sk = skewness(v)
        checks.append(Check("skew", sk < 0.0, sk, "negative skew"))
        checks.append(Check("negative_mass", float(v.mean()) < 0.0, float(v.mean()), "mean < 0"))
    elif arc == "conv_cache":
        plane, _ = pack(tensor)
        rep = rho_axes(plane)
        got = rep.rho_h
        checks.append(Check("rho_h_sign", got is not None and got < -0.05, got,
                            "negative window correlation"))
    return GeneratorValidation(checks=tuple(checks))


def table_shapes(n: int) -> dict[str, tuple[int, ...]]:
    """Benchmark shape patterns with the sequence length set to n.

    Fixed (non-sequence) dimensions keep their full published sizes.
    """
    if n < 1:
        raise GeneratorError("n must be positive")
    return {
        "vit_hidden": (n, 4096),
        "vit_multilevel": (4, 2, n, 4096),
        "llm_hidden": (n, 3584),
        "kv_cache": (5, 4, n, 128),
        "mamba_hidden": (n, 4096),
        "ssm_cache": (5, 8192, 16),
        "conv_cache": (5, 8192, 4),
        "sentence_embed_768": (768,),
        "sentence_embed_1280": (1280,),
        "token_embed_768": (77, 768),
        "token_embed_1280": (77, 1280),
        "token_embed_4096": (77, 4096),
        "cond_latent": (32, 128, 128),
        "denoised_latent": (16, 128, 128),
    }


# which archetype naturally fills each shape pattern
PATTERN_ARCHETYPE = {
    "vit_hidden": "shallow_vit",
    "vit_multilevel": "deep_vit",
    "llm_hidden": "deep_vit",
    "kv_cache": "kv_key",
    "mamba_hidden": "shallow_vit",
    "ssm_cache": "ssm_cache",
    "conv_cache": "conv_cache",
    "sentence_embed_768": "sentence_embed",
    "sentence_embed_1280": "sentence_embed",
    "token_embed_768": "token_embed",
    "token_embed_1280": "token_embed",
    "token_embed_4096": "token_embed",
    "cond_latent": "latent_spatial",
    "denoised_latent": "latent_spatial",
}
