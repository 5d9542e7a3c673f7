"""Generator adapter seam and the seeded-noise stub.

Real text-to-image backends plug in behind the same invocation contract:
(prompt_text, count, seed, out_dir) -> exactly count decodable images.
"""
from __future__ import annotations

from pathlib import Path
from typing import Protocol

import numpy as np
from PIL import Image

from .prompts import PromptSpec
from .variants import PipelineError


from .crops import _dir_name, _write_condition_index


class AdapterFailure(PipelineError):
    pass


class GeneratorAdapter(Protocol):
    adapter_id: str

    def generate(self, prompt_text: str, count: int, seed: int, out_dir: Path) -> list[Path]: ...


class NoiseStubAdapter:
    """Emits seeded RGB noise images; exists so the full harness runs
    without diffusion weights."""

    def __init__(self, image_size: int = 64):
        self.adapter_id = f"noise-stub-{image_size}"
        self.image_size = image_size

    def generate(self, prompt_text: str, count: int, seed: int, out_dir: Path) -> list[Path]:
        out_dir.mkdir(parents=True, exist_ok=True)
        # prompt participates in the stream so conditions differ
        prompt_seed = int.from_bytes(prompt_text.encode("utf-8")[:8].ljust(8, b"\0"), "big")
        paths = []
        for i in range(count):
            rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, prompt_seed, i))))
            arr = rng.integers(0, 256, size=(self.image_size, self.image_size, 3), dtype=np.uint8)
            path = out_dir / f"gen_{i:05d}.png"
            Image.fromarray(arr).save(path)
            paths.append(path)
        return paths


ADAPTERS = {"noise-stub": lambda: NoiseStubAdapter()}


def build_adapter(adapter_id: str) -> GeneratorAdapter:
    if adapter_id not in ADAPTERS:
        raise ValueError(f"unknown adapter {adapter_id!r}; choices: {sorted(ADAPTERS)}")
    return ADAPTERS[adapter_id]()


def distribute_counts(total_n: int, condition_keys: list[str]) -> dict[str, int]:
    """Spread total_n as evenly as possible; remainder goes to the
    lexicographically first keys."""
    ordered = sorted(condition_keys)
    base, rem = divmod(total_n, len(ordered))
    return {key: base + (1 if i < rem else 0) for i, key in enumerate(ordered)}


def run_generation(
    adapter: GeneratorAdapter,
    prompts: list[PromptSpec],
    total_n: int,
    seed: int,
    out_dir: str | Path,
) -> dict[str, list[str]]:
    """Generate total_n images split across prompts, grouped by condition.

    A failing adapter call raises AdapterFailure but leaves completed
    condition directories on disk, so the run is resumable.
    """
    if not prompts:
        raise PipelineError("no prompts to generate for")
    out_dir = Path(out_dir)
    counts = distribute_counts(total_n, [p.condition_key for p in prompts])
    by_key = {p.condition_key: p for p in prompts}
    result: dict[str, list[str]] = {}
    for key in sorted(counts):
        cond_dir = out_dir / _dir_name(key)
        try:
            paths = adapter.generate(by_key[key].prompt_text, counts[key], seed, cond_dir)
        except Exception as e:
            raise AdapterFailure(f"adapter failed on condition {key!r}: {e}") from e
        if len(paths) != counts[key]:
            raise AdapterFailure(
                f"adapter returned {len(paths)} images for {key!r}, expected {counts[key]}"
            )
        result[key] = [str(p) for p in paths]
    _write_condition_index(out_dir, result)
    return result
