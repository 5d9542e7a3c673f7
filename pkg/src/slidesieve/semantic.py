"""Image-text alignment scoring and median-threshold filtering.

The scorer is pluggable: anything exposing embed_image / embed_text that
returns unit-normalizable vectors works. A deterministic stub scorer is
bundled so the pipeline and tests run without external model weights.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from .manifest import ManifestEntry


class SemanticFilterError(Exception):
    pass


class TooFewPairs(SemanticFilterError):
    pass


@dataclass(frozen=True)
class PairScore:
    image_id: str
    caption_index: int
    score: float
    scorer_id: str = "unknown"

    def to_json_obj(self) -> dict:
        return {
            "image_id": self.image_id,
            "caption_index": self.caption_index,
            "score": self.score,
            "scorer_id": self.scorer_id,
        }


class Scorer(Protocol):
    scorer_id: str
    embedding_dim: int

    def embed_image(self, image_bytes: bytes) -> np.ndarray: ...

    def embed_text(self, text: str) -> np.ndarray: ...


def cosine_score(image_emb: np.ndarray, text_emb: np.ndarray) -> float:
    a = image_emb / np.linalg.norm(image_emb)
    b = text_emb / np.linalg.norm(text_emb)
    return float(np.dot(a, b))


class StubScorer:
    """Hash-derived pseudo-embeddings; deterministic across runs and platforms."""

    def __init__(self, embedding_dim: int = 64):
        self.scorer_id = f"stub-hash-{embedding_dim}"
        self.embedding_dim = embedding_dim

    def _embed(self, payload: bytes) -> np.ndarray:
        digest = hashlib.sha256(payload).digest()
        seed = int.from_bytes(digest[:8], "big")
        rng = np.random.Generator(np.random.Philox(key=seed))
        vec = rng.standard_normal(self.embedding_dim)
        return vec / np.linalg.norm(vec)

    def embed_image(self, image_bytes: bytes) -> np.ndarray:
        return self._embed(b"image:" + image_bytes)

    def embed_text(self, text: str) -> np.ndarray:
        return self._embed(b"text:" + text.encode("utf-8"))


def score_pairs(scorer: Scorer, entries: list[ManifestEntry]) -> tuple[list[PairScore], list[dict]]:
    """Score every (image, caption) pair; one PairScore per pair, input order kept.

    Per-pair failures are recorded and the batch continues.
    """
    scores: list[PairScore] = []
    failures: list[dict] = []
    for entry in entries:
        try:
            image_bytes = Path(entry.image_path).read_bytes()
            image_emb = scorer.embed_image(image_bytes)
        except Exception as e:
            for ci in range(len(entry.captions)):
                failures.append({"image_id": entry.image_id, "caption_index": ci, "error": str(e)})
            continue
        for ci, caption in enumerate(entry.captions):
            try:
                score = cosine_score(image_emb, scorer.embed_text(caption))
            except Exception as e:
                failures.append({"image_id": entry.image_id, "caption_index": ci, "error": str(e)})
                continue
            scores.append(PairScore(entry.image_id, ci, score, scorer.scorer_id))
    return scores, failures


def median_filter(scored: list[PairScore]) -> tuple[list[PairScore], list[PairScore], float]:
    """Keep pairs whose score strictly exceeds the median.

    Median is the midpoint of the two central order statistics for even N.
    Ties at the median are dropped, so heavy ties can drop more than half.
    Order within kept/dropped follows the input.
    """
    if len(scored) < 2:
        raise TooFewPairs(f"need at least 2 scored pairs, got {len(scored)}")
    median = float(np.median([s.score for s in scored]))
    kept = [s for s in scored if s.score > median]
    dropped = [s for s in scored if s.score <= median]
    return kept, dropped, median


def emit_scores(scores: list[PairScore], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for s in scores:
            f.write(json.dumps(s.to_json_obj()) + "\n")


def load_scores(path: str | Path) -> list[PairScore]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                obj = json.loads(line)
                out.append(PairScore(obj["image_id"], obj["caption_index"], obj["score"], obj.get("scorer_id", "unknown")))
    return out
