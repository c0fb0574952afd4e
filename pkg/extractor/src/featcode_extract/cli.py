"""featcode-extract: dump model split features into featcode containers."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .adapter import Sample, SplitSpec, extract


def load_split_spec(path: str | Path, model_override: str | None = None) -> SplitSpec:
    d = json.loads(Path(path).read_text())
    return SplitSpec(
        model_id=model_override or d["model"],
        layer_index=int(d.get("layer_index", 5)),
        stage=d.get("stage", "prefill"),
        roles=tuple(d.get("roles", ("hidden_state", "key_cache", "value_cache"))),
    )


def load_samples(path: str | Path) -> list[Sample]:
    d = json.loads(Path(path).read_text())
    samples = []
    for i, s in enumerate(d["samples"]):
        samples.append(Sample(id=s.get("id", f"sample{i}"), input_ids=[int(x) for x in s["input_ids"]]))
    return samples


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="featcode-extract", description=__doc__)
    parser.add_argument("--model", required=True, help="model id or local path")
    parser.add_argument("--split", required=True, help="split spec JSON")
    parser.add_argument("--inputs", required=True, help="JSON file with token-id samples")
    parser.add_argument("--out", required=True, help="output directory")
    args = parser.parse_args(argv)

    split = load_split_spec(args.split, model_override=args.model)
    samples = load_samples(args.inputs)
    paths = extract(split, samples, args.out)
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
