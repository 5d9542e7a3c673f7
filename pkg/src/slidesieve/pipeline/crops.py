"""Random reference crops grouped by condition."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image


def _dir_name(condition: str) -> str:
    return condition.replace("|", "_").replace("/", "_")


def _write_condition_index(out_dir: Path, by_condition: dict[str, list[str]]) -> None:
    # directory names are lossy; the index maps them back to condition keys
    index = {_dir_name(k): k for k in by_condition}
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "conditions.json", "w", encoding="utf-8") as f:
        json.dump(index, f, indent=2, sort_keys=True)


@dataclass
class CropResult:
    by_condition: dict[str, list[str]]  # condition_key -> crop file paths
    skipped: list[dict]  # images smaller than the crop size


def sample_reference_crops(
    items: list[dict],
    crop_size: int,
    n_per_image: int,
    seed: int,
    out_dir: str | Path,
) -> CropResult:
    """Take n random crops of exact crop_size from each reference image.

    Each item is {"image_path", "condition"}. Images smaller than the crop
    in either dimension are skipped and reported. Deterministic under seed
    regardless of item order.
    """
    out_dir = Path(out_dir)
    by_condition: dict[str, list[str]] = {}
    skipped: list[dict] = []
    for idx, item in enumerate(sorted(items, key=lambda it: it["image_path"])):
        path = item["image_path"]
        condition = item["condition"]
        with Image.open(path) as img:
            img = img.convert("RGB")
            w, h = img.size
            if w < crop_size or h < crop_size:
                skipped.append({"image_path": path, "size": [w, h], "reason": "smaller than crop"})
                continue
            rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, idx))))
            cond_dir = out_dir / _dir_name(condition)
            cond_dir.mkdir(parents=True, exist_ok=True)
            for k in range(n_per_image):
                x0 = int(rng.integers(0, w - crop_size + 1))
                y0 = int(rng.integers(0, h - crop_size + 1))
                crop = img.crop((x0, y0, x0 + crop_size, y0 + crop_size))
                crop_path = cond_dir / f"{Path(path).stem}_crop{k:03d}.png"
                crop.save(crop_path)
                by_condition.setdefault(condition, []).append(str(crop_path))
    _write_condition_index(out_dir, by_condition)
    return CropResult(by_condition=by_condition, skipped=skipped)
