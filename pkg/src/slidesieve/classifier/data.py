"""Dataset and augmentation profiles for classifier training."""
from __future__ import annotations

import torch
from PIL import Image
from torch.utils.data import Dataset
from torchvision import transforms

from ..labels import ImpurityLabelSet
from ..manifest import ManifestEntry

# named so a config snapshot pins exactly what was applied
AUGMENTATION_PROFILES = {
    "standard-v1": lambda size: transforms.Compose(
        [
            transforms.RandomResizedCrop(size, scale=(0.7, 1.0), antialias=True),
            transforms.RandomHorizontalFlip(),
            transforms.RandomVerticalFlip(),
            transforms.RandomRotation(15),
            transforms.ColorJitter(brightness=0.1, contrast=0.1, saturation=0.1),
            transforms.ToTensor(),
        ]
    ),
    "flips-v1": lambda size: transforms.Compose(
        [
            transforms.Resize((size, size), antialias=True),
            transforms.RandomHorizontalFlip(),
            transforms.RandomVerticalFlip(),
            transforms.ToTensor(),
        ]
    ),
    "none": lambda size: transforms.Compose(
        [transforms.Resize((size, size), antialias=True), transforms.ToTensor()]
    ),
}


def eval_transform(size: int):
    return AUGMENTATION_PROFILES["none"](size)


class LabeledImageDataset(Dataset):
    def __init__(
        self,
        entries: list[ManifestEntry],
        labels: dict[str, ImpurityLabelSet],
        input_size: int,
        augmentation: str = "none",
    ):
        missing = [e.image_id for e in entries if e.image_id not in labels]
        if missing:
            raise KeyError(f"{len(missing)} entries lack labels, e.g. {missing[:3]}")
        self.entries = entries
        self.labels = labels
        if augmentation not in AUGMENTATION_PROFILES:
            raise ValueError(f"unknown augmentation profile {augmentation!r}")
        self.transform = AUGMENTATION_PROFILES[augmentation](input_size)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, idx: int):
        entry = self.entries[idx]
        with Image.open(entry.image_path) as img:
            x = self.transform(img.convert("RGB"))
        y = torch.tensor(self.labels[entry.image_id].to_list(), dtype=torch.float32)
        return x, y
