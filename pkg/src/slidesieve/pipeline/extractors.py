"""Image feature extractors feeding the Fréchet-distance harness.

The extractor is pluggable; reports record which one produced the
numbers. pixel-stats-v1 is fully deterministic and needs no weights; the
inception-v3 binding mirrors the usual pool-feature setup but requires
torchvision pretrained weights to be present locally.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Protocol

import numpy as np
from PIL import Image


class FeatureExtractor(Protocol):
    extractor_id: str
    dim: int

    def extract(self, image: Image.Image) -> np.ndarray: ...


class PixelStatsExtractor:
    """Downsampled luminance grid plus channel moments; deterministic."""

    def __init__(self, grid: int = 6):
        self.extractor_id = f"pixel-stats-v1-g{grid}"
        self.grid = grid
        self.dim = grid * grid + 6

    def extract(self, image: Image.Image) -> np.ndarray:
        rgb = np.asarray(image.convert("RGB"), dtype=float) / 255.0
        gray = image.convert("L").resize((self.grid, self.grid), Image.BILINEAR)
        cells = np.asarray(gray, dtype=float).ravel() / 255.0
        means = rgb.mean(axis=(0, 1))
        stds = rgb.std(axis=(0, 1))
        return np.concatenate([cells, means, stds])


class InceptionV3Extractor:
    """Standard 2048-d Inception pool features (ImageNet weights)."""

    def __init__(self):
        self.extractor_id = "inception-v3-pool"
        self.dim = 2048
        self._model = None

    def _load(self):
        import torch
        from torchvision.models import Inception_V3_Weights, inception_v3

        model = inception_v3(weights=Inception_V3_Weights.IMAGENET1K_V1)
        model.fc = torch.nn.Identity()
        model.eval()
        self._model = model

    def extract(self, image: Image.Image) -> np.ndarray:
        import torch
        from torchvision import transforms

        if self._model is None:
            self._load()
        tf = transforms.Compose(
            [
                transforms.Resize((299, 299), antialias=True),
                transforms.ToTensor(),
                transforms.Normalize([0.485, 0.456, 0.406], [0.229, 0.224, 0.225]),
            ]
        )
        with torch.no_grad():
            feat = self._model(tf(image.convert("RGB")).unsqueeze(0))
        return feat.squeeze(0).numpy()


EXTRACTORS = {
    "pixel-stats-v1": lambda: PixelStatsExtractor(),
    "inception-v3": lambda: InceptionV3Extractor(),
}


def build_extractor(extractor_id: str) -> FeatureExtractor:
    if extractor_id not in EXTRACTORS:
        raise ValueError(f"unknown extractor {extractor_id!r}; choices: {sorted(EXTRACTORS)}")
    return EXTRACTORS[extractor_id]()


def extract_features(extractor: FeatureExtractor, paths: list[str]) -> np.ndarray:
    feats = []
    for path in sorted(paths):
        with Image.open(path) as img:
            feats.append(extractor.extract(img))
    return np.stack(feats)


def features_by_condition(
    extractor: FeatureExtractor, grouped_paths: dict[str, list[str]]
) -> dict[str, np.ndarray]:
    return {key: extract_features(extractor, paths) for key, paths in grouped_paths.items()}


def collect_grouped_images(root: str | Path) -> dict[str, list[str]]:
    """Read back a directory of per-condition subdirectories of images."""
    root = Path(root)
    index_path = root / "conditions.json"
    index = json.loads(index_path.read_text()) if index_path.is_file() else {}
    out: dict[str, list[str]] = {}
    for cond_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        files = sorted(str(p) for p in cond_dir.iterdir() if p.is_file())
        if files:
            out[index.get(cond_dir.name, cond_dir.name)] = files
    return out
