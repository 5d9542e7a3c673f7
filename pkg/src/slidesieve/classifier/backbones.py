"""Feature-extractor backbones behind a common interface.

The default is a ResNet50 with the "-D" tweaks (deep 3x3 stem, avg-pool
downsampling). Tests use tiny_cnn, which trains in seconds on CPU.
"""
from __future__ import annotations

import torch
from torch import nn
from torchvision.models import resnet50
from torchvision.models.resnet import Bottleneck


def _tiny_cnn() -> tuple[nn.Module, int]:
    def block(cin, cout):
        return nn.Sequential(
            nn.Conv2d(cin, cout, 3, padding=1),
            nn.BatchNorm2d(cout),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),
        )

    net = nn.Sequential(
        block(3, 16),
        block(16, 32),
        block(32, 64),
        block(64, 96),
        nn.AdaptiveAvgPool2d(1),
        nn.Flatten(),
    )
    return net, 96


def _resnet50d() -> tuple[nn.Module, int]:
    net = resnet50(weights=None)
    # deep stem: 7x7 conv -> three 3x3 convs
    net.conv1 = nn.Sequential(
        nn.Conv2d(3, 32, 3, stride=2, padding=1, bias=False),
        nn.BatchNorm2d(32),
        nn.ReLU(inplace=True),
        nn.Conv2d(32, 32, 3, stride=1, padding=1, bias=False),
        nn.BatchNorm2d(32),
        nn.ReLU(inplace=True),
        nn.Conv2d(32, 64, 3, stride=1, padding=1, bias=False),
    )
    # avg-pool downsampling in the shortcut instead of strided 1x1 conv
    for layer in (net.layer1, net.layer2, net.layer3, net.layer4):
        for module in layer:
            if isinstance(module, Bottleneck) and module.downsample is not None:
                conv = module.downsample[0]
                stride = conv.stride[0]
                if stride > 1:
                    module.downsample = nn.Sequential(
                        nn.AvgPool2d(stride, stride, ceil_mode=True),
                        nn.Conv2d(conv.in_channels, conv.out_channels, 1, stride=1, bias=False),
                        module.downsample[1],
                    )
    dim = net.fc.in_features
    net.fc = nn.Identity()
    return net, dim


_BACKBONES = {"tiny_cnn": _tiny_cnn, "resnet50d": _resnet50d}


def build_backbone(name: str) -> tuple[nn.Module, int]:
    if name not in _BACKBONES:
        raise ValueError(f"unknown backbone {name!r}; choices: {sorted(_BACKBONES)}")
    return _BACKBONES[name]()


class MultiLabelNet(nn.Module):
    """Backbone plus a linear head emitting one logit per impurity category."""

    def __init__(self, backbone: str, n_labels: int):
        super().__init__()
        self.backbone_name = backbone
        self.features, dim = build_backbone(backbone)
        self.head = nn.Linear(dim, n_labels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.features(x))
