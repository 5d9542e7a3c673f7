"""Dataset variants: impurity filtering, semantic filtering, and their combination."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..labels import CATEGORY_NAMES
from ..classifier.train import PredictionRecord
from ..manifest import ManifestEntry, emit_manifest
from ..semantic import PairScore

VARIANT_NAMES = ("unfiltered", "impurity_filtered", "semantic_filtered", "both_filtered")


class PipelineError(Exception):
    pass


class MissingPrediction(PipelineError):
    pass


@dataclass
class DatasetVariant:
    name: str
    manifest_path: str
    parent: str | None
    filter_params: dict
    content_hash: str
    n_images: int
    n_pairs: int
    drop_histogram: dict[str, int] = field(default_factory=dict)

    def to_json_obj(self) -> dict:
        return {
            "name": self.name,
            "manifest_path": self.manifest_path,
            "parent": self.parent,
            "filter_params": self.filter_params,
            "content_hash": self.content_hash,
            "n_images": self.n_images,
            "n_pairs": self.n_pairs,
            "drop_histogram": self.drop_histogram,
        }


def file_sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_variant(
    name: str,
    entries: list[ManifestEntry],
    out_dir: Path,
    parent: str | None,
    params: dict,
    drops: list[dict],
    histogram: dict[str, int] | None = None,
) -> DatasetVariant:
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / f"{name}.jsonl"
    emit_manifest(sorted(entries, key=lambda e: e.image_id), manifest_path)
    with open(out_dir / f"{name}.drops.jsonl", "w", encoding="utf-8") as f:
        for d in sorted(drops, key=lambda d: (d["image_id"], d.get("caption_index", -1))):
            f.write(json.dumps(d, sort_keys=True) + "\n")
    return DatasetVariant(
        name=name,
        manifest_path=str(manifest_path),
        parent=parent,
        filter_params=params,
        content_hash=file_sha256(manifest_path),
        n_images=len(entries),
        n_pairs=sum(len(e.captions) for e in entries),
        drop_histogram=histogram or {},
    )


def filter_dataset(
    entries: list[ManifestEntry],
    predictions: list[PredictionRecord],
    out_dir: str | Path,
    mode: str | dict[str, float] = "any_flag",
    name: str = "impurity_filtered",
    parent: str = "unfiltered",
) -> DatasetVariant:
    """Drop images the classifier flags as impure.

    Default mode drops on any flag; a per-category mode passes a dict of
    {category_name: probability threshold} and drops on any of those.
    Every manifest image must have a prediction.
    """
    preds = {p.image_id: p for p in predictions}
    kept: list[ManifestEntry] = []
    drops: list[dict] = []
    histogram = {name_: 0 for name_ in CATEGORY_NAMES}
    for entry in entries:
        pred = preds.get(entry.image_id)
        if pred is None or pred.error is not None:
            raise MissingPrediction(f"no usable prediction for {entry.image_id!r}")
        if mode == "any_flag":
            reasons = [n for n, f in zip(CATEGORY_NAMES, pred.flags) if f]
        else:
            reasons = [
                n for n, thr in mode.items() if pred.probs[CATEGORY_NAMES.index(n)] >= thr
            ]
        if reasons:
            for r in reasons:
                histogram[r] += 1
            drops.append({"image_id": entry.image_id, "reason": "impurity", "categories": reasons})
        else:
            kept.append(entry)
    params = {"mode": mode if isinstance(mode, str) else dict(mode)}
    return write_variant(name, kept, Path(out_dir), parent, params, drops, histogram)


def apply_pair_filter(
    entries: list[ManifestEntry],
    kept_pairs: list[PairScore],
    dropped_pairs: list[PairScore],
    median_value: float,
    out_dir: str | Path,
    name: str,
    parent: str,
) -> DatasetVariant:
    """Project a kept pair set back onto a manifest.

    Entries keep only captions whose pair survived; entries with no
    surviving caption are removed.
    """
    kept_keys = {(p.image_id, p.caption_index) for p in kept_pairs}
    out_entries: list[ManifestEntry] = []
    drops: list[dict] = []
    for entry in entries:
        captions = [c for i, c in enumerate(entry.captions) if (entry.image_id, i) in kept_keys]
        for i, _ in enumerate(entry.captions):
            if (entry.image_id, i) not in kept_keys:
                drops.append(
                    {"image_id": entry.image_id, "caption_index": i, "reason": "below_median_score"}
                )
        if captions:
            out_entries.append(
                ManifestEntry(
                    image_id=entry.image_id,
                    image_path=entry.image_path,
                    captions=captions,
                    source=entry.source,
                    sha256=entry.sha256,
                    width_px=entry.width_px,
                    height_px=entry.height_px,
                )
            )
    params = {"median": median_value, "rule": "score strictly greater than median"}
    return write_variant(name, out_entries, Path(out_dir), parent, params, drops)
