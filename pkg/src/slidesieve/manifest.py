"""Image-text manifest loading, sampling, splitting, and integrity checks.

Ingestion format is CSV (release-file compatible columns), everything the
pipeline emits internally is JSONL: one object per entry, multi-caption
safe without CSV quoting pathologies.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np
from PIL import Image

from .labels import ImpurityLabelSet

SOURCES = {"youtube", "twitter", "pubmed", "exemplar", "synthetic", "other"}


class ManifestError(Exception):
    pass


class DuplicatePathConflict(ManifestError):
    def __init__(self, image_id: str, paths: tuple[str, str]):
        super().__init__(f"image_id {image_id!r} maps to different paths: {paths[0]!r} vs {paths[1]!r}")
        self.image_id = image_id
        self.paths = paths


class MalformedRowError(ManifestError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


@dataclass
class MalformedRow:
    line_no: int
    reason: str


@dataclass
class ManifestEntry:
    """One image with all captions linked to it."""

    image_id: str
    image_path: str
    captions: list[str]
    source: str = "other"
    sha256: str | None = None
    width_px: int | None = None
    height_px: int | None = None

    def __post_init__(self):
        if not self.captions:
            raise ValueError(f"entry {self.image_id!r} has no captions")
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")

    def to_json_obj(self) -> dict:
        obj = {"image_id": self.image_id, "image_path": self.image_path, "captions": self.captions, "source": self.source}
        if self.sha256 is not None:
            obj["sha256"] = self.sha256
        if self.width_px is not None:
            obj["width_px"] = self.width_px
        if self.height_px is not None:
            obj["height_px"] = self.height_px
        return obj

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ManifestEntry":
        return cls(
            image_id=obj["image_id"],
            image_path=obj["image_path"],
            captions=list(obj["captions"]),
            source=obj.get("source", "other"),
            sha256=obj.get("sha256"),
            width_px=obj.get("width_px"),
            height_px=obj.get("height_px"),
        )


@dataclass
class SplitAssignment:
    image_id: str
    split: str  # train | val | test
    seed: int


@dataclass
class LoadReport:
    entries: list[ManifestEntry]
    malformed: list[MalformedRow] = field(default_factory=list)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _add_row(by_id: dict[str, ManifestEntry], row: dict, line_no: int) -> None:
    image_id = (row.get("image_id") or "").strip()
    image_path = (row.get("image_path") or "").strip()
    caption = row.get("caption")
    if not image_id or not image_path or caption is None or caption == "":
        raise MalformedRowError(line_no, "missing image_id, image_path, or caption")
    source = (row.get("source") or "other").strip() or "other"
    if source not in SOURCES:
        raise MalformedRowError(line_no, f"unknown source {source!r}")
    existing = by_id.get(image_id)
    if existing is None:
        width = row.get("width") or row.get("width_px")
        height = row.get("height") or row.get("height_px")
        by_id[image_id] = ManifestEntry(
            image_id=image_id,
            image_path=image_path,
            captions=[caption],
            source=source,
            sha256=(row.get("sha256") or None),
            width_px=int(width) if width else None,
            height_px=int(height) if height else None,
        )
    else:
        if existing.image_path != image_path:
            raise DuplicatePathConflict(image_id, (existing.image_path, image_path))
        # dedup exact caption strings only
        if caption not in existing.captions:
            existing.captions.append(caption)


def load_manifest(path: str | Path, format: str = "csv", strict: bool = True) -> LoadReport:
    """Load a manifest file, merging rows that share an image_id.

    CSV rows carry one caption each; JSONL rows may carry a caption string
    or a captions list. In strict mode the first malformed row aborts;
    lenient mode skips it and records a MalformedRow.
    """
    path = Path(path)
    if format not in ("csv", "jsonl"):
        raise ValueError(f"unknown manifest format {format!r}")
    by_id: dict[str, ManifestEntry] = {}
    malformed: list[MalformedRow] = []

    def handle(fn, line_no):
        try:
            fn()
        except DuplicatePathConflict:
            raise
        except MalformedRowError as e:
            if strict:
                raise
            malformed.append(MalformedRow(e.line_no, e.reason))
        except (ValueError, KeyError, TypeError) as e:
            if strict:
                raise MalformedRowError(line_no, str(e))
            malformed.append(MalformedRow(line_no, str(e)))

    with open(path, newline="", encoding="utf-8") as f:
        if format == "csv":
            reader = csv.DictReader(f)
            if reader.fieldnames is None or not {"image_id", "image_path", "caption"} <= set(reader.fieldnames):
                raise ManifestError(f"{path}: missing required columns image_id,image_path,caption")
            for line_no, row in enumerate(reader, start=2):
                handle(lambda row=row, n=line_no: _add_row(by_id, row, n), line_no)
        else:
            for line_no, line in enumerate(f, start=1):
                if not line.strip():
                    continue

                def load_line(line=line, n=line_no):
                    obj = json.loads(line)
                    captions = obj.get("captions")
                    if captions is None:
                        captions = [obj["caption"]]
                    for cap in captions:
                        row = dict(obj)
                        row["caption"] = cap
                        _add_row(by_id, row, n)

                handle(load_line, line_no)

    return LoadReport(entries=list(by_id.values()), malformed=malformed)


def emit_manifest(entries: Iterable[ManifestEntry], path: str | Path) -> None:
    """Write entries as JSONL, one object per entry."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for entry in entries:
            f.write(json.dumps(entry.to_json_obj(), sort_keys=True) + "\n")


def _rng(seed: int) -> np.random.Generator:
    # counter-based PRNG: identical streams regardless of platform
    return np.random.Generator(np.random.Philox(key=seed))


def _shuffled_ids(ids: list[str], seed: int) -> list[str]:
    # sort first so the result does not depend on input row order
    ordered = sorted(ids)
    perm = _rng(seed).permutation(len(ordered))
    return [ordered[i] for i in perm]


def sample_fraction(
    entries: list[ManifestEntry], fraction: float, seed: int
) -> tuple[list[ManifestEntry], list[ManifestEntry]]:
    """Deterministically draw round(fraction*N) entries; returns (sampled, remainder)."""
    if not (0.0 < fraction <= 1.0):
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    by_id = {e.image_id: e for e in entries}
    shuffled = _shuffled_ids(list(by_id), seed)
    k = _round_half_up(fraction * len(shuffled))
    sampled_ids = set(shuffled[:k])
    sampled = [e for e in entries if e.image_id in sampled_ids]
    remainder = [e for e in entries if e.image_id not in sampled_ids]
    return sampled, remainder


def split(
    image_ids: list[str], ratios: tuple[float, float, float], seed: int
) -> list[SplitAssignment]:
    """Assign train/val/test splits.

    Test and val sizes are rounded half-up from ratio*N; train takes the
    remainder. Deterministic and order-independent under a fixed seed.
    """
    r_train, r_val, r_test = ratios
    if min(ratios) <= 0:
        raise ValueError("ratios must be positive")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    n = len(image_ids)
    n_test = _round_half_up(r_test * n)
    n_val = _round_half_up(r_val * n)
    if n_test + n_val > n:
        raise ValueError("ratios leave no room for a train split at this N")
    shuffled = _shuffled_ids(list(image_ids), seed)
    out = []
    for i, image_id in enumerate(shuffled):
        if i < n_test:
            part = "test"
        elif i < n_test + n_val:
            part = "val"
        else:
            part = "train"
        out.append(SplitAssignment(image_id=image_id, split=part, seed=seed))
    out.sort(key=lambda a: a.image_id)
    return out


def emit_splits(assignments: Iterable[SplitAssignment], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for a in assignments:
            f.write(json.dumps({"image_id": a.image_id, "split": a.split, "seed": a.seed}) + "\n")


def load_splits(path: str | Path) -> list[SplitAssignment]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                obj = json.loads(line)
                out.append(SplitAssignment(obj["image_id"], obj["split"], obj["seed"]))
    return out


def inject_clean_exemplars(
    annotated: dict[str, ImpurityLabelSet],
    entries: list[ManifestEntry],
    exemplar_dir: str | Path,
) -> tuple[dict[str, ImpurityLabelSet], list[ManifestEntry], list[str]]:
    """Append exemplar images as all-negative labeled entries.

    Each decodable image under exemplar_dir becomes an entry with
    source="exemplar" and an image_id derived from the path hash, so the
    same pixels under two filenames stay distinct. Returns the grown
    (labels, entries) plus the paths that failed to decode.
    """
    exemplar_dir = Path(exemplar_dir)
    labels = dict(annotated)
    out_entries = list(entries)
    bad: list[str] = []
    for path in sorted(p for p in exemplar_dir.iterdir() if p.is_file()):
        try:
            with Image.open(path) as img:
                img.verify()
            with Image.open(path) as img:
                width, height = img.size
        except Exception:
            bad.append(str(path))
            continue
        image_id = "exemplar-" + hashlib.sha256(str(path).encode()).hexdigest()[:16]
        out_entries.append(
            ManifestEntry(
                image_id=image_id,
                image_path=str(path),
                captions=["histopathology tissue crop"],
                source="exemplar",
                width_px=width,
                height_px=height,
            )
        )
        labels[image_id] = ImpurityLabelSet.none()
    return labels, out_entries, bad


@dataclass
class IntegrityReport:
    statuses: dict[str, str]  # image_id -> ok | missing | undecodable | hash_mismatch

    @property
    def counts(self) -> dict[str, int]:
        out = {"ok": 0, "missing": 0, "undecodable": 0, "hash_mismatch": 0}
        for status in self.statuses.values():
            out[status] += 1
        return out


def _check_entry(entry: ManifestEntry) -> str:
    path = Path(entry.image_path)
    if not path.is_file():
        return "missing"
    try:
        with Image.open(path) as img:
            img.verify()
    except Exception:
        return "undecodable"
    if entry.sha256 is not None:
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        if digest != entry.sha256.lower():
            return "hash_mismatch"
    return "ok"


def verify_images(entries: list[ManifestEntry], max_workers: int = 8) -> IntegrityReport:
    """Check presence, decodability, and (when present) sha256 of every entry."""
    ordered = sorted(entries, key=lambda e: e.image_id)
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        statuses = list(pool.map(_check_entry, ordered))
    return IntegrityReport(statuses={e.image_id: s for e, s in zip(ordered, statuses)})


def emit_labels(labels: dict[str, ImpurityLabelSet], path: str | Path) -> None:
    """Write a labels JSONL: {image_id, flags:[8 bools]} sorted by image_id."""
    with open(path, "w", encoding="utf-8") as f:
        for image_id in sorted(labels):
            f.write(json.dumps({"image_id": image_id, "flags": labels[image_id].to_list()}) + "\n")


def load_labels(path: str | Path) -> dict[str, ImpurityLabelSet]:
    out: dict[str, ImpurityLabelSet] = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                obj = json.loads(line)
                out[obj["image_id"]] = ImpurityLabelSet(tuple(obj["flags"]))
    return out
