"""Dual-head discriminator: realness probability plus per-slot attribute
predictions from a shared convolutional trunk."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from .schema import AttributeSchema, decode_onehot


@dataclass
class DiscriminatorConfig:
    image_size: int = 64
    channels: int = 3
    depth: int = 4
    base_filters: int = 32
    feature_dim: int = 256
    leaky_slope: float = 0.2

    def __post_init__(self):
        if self.image_size < 2 ** self.depth:
            raise ValueError(
                f"image_size {self.image_size} too small for depth {self.depth}"
            )

    def to_dict(self) -> dict:
        return {
            "image_size": self.image_size,
            "channels": self.channels,
            "depth": self.depth,
            "base_filters": self.base_filters,
            "feature_dim": self.feature_dim,
            "leaky_slope": self.leaky_slope,
        }


class DualHeadDiscriminator(nn.Module):
    def __init__(self, config: DiscriminatorConfig, schema: AttributeSchema):
        super().__init__()
        self.config = config
        self.schema = schema

        blocks: list[nn.Module] = []
        cin = config.channels
        for i in range(config.depth):
            cout = min(config.base_filters * 2 ** i, config.base_filters * 8)
            spatial = config.image_size // 2 ** (i + 1)
            layers: list[nn.Module] = [nn.Conv2d(cin, cout, 4, stride=2, padding=1)]
            if i > 0 and spatial > 1:
                layers.append(nn.InstanceNorm2d(cout, affine=True))
            layers.append(nn.LeakyReLU(config.leaky_slope))
            blocks.append(nn.Sequential(*layers))
            cin = cout
        self.trunk = nn.Sequential(*blocks)

        spatial = config.image_size // 2 ** config.depth
        self.fc = nn.Linear(cin * spatial * spatial, config.feature_dim)
        self.act = nn.LeakyReLU(config.leaky_slope)
        self.realness_head = nn.Linear(config.feature_dim, 1)
        self.attribute_head = nn.Linear(config.feature_dim, schema.num_slots)

    def features(self, x: torch.Tensor) -> torch.Tensor:
        """Penultimate activations, also used as the metric feature space."""
        if x.dim() != 4 or x.shape[2] != self.config.image_size \
                or x.shape[3] != self.config.image_size:
            raise ValueError(
                f"expected input of shape (B, {self.config.channels}, "
                f"{self.config.image_size}, {self.config.image_size}), got {tuple(x.shape)}"
            )
        return self.act(self.fc(self.trunk(x).flatten(1)))

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Realness probability (B,) and per-slot sigmoid predictions (B, K)."""
        feat = self.features(x)
        realness = torch.sigmoid(self.realness_head(feat)).squeeze(1)
        attr_probs = torch.sigmoid(self.attribute_head(feat))
        return realness, attr_probs

    @torch.no_grad()
    def classify(self, x: torch.Tensor) -> list[dict[str, str]]:
        """Argmax readout of every type block, one assignment map per image."""
        was_training = self.training
        self.eval()
        try:
            _, attr_probs = self(x)
        finally:
            if was_training:
                self.train()
        return [
            decode_onehot(np.asarray(row, dtype=np.float64), self.schema)
            for row in attr_probs.float().cpu().numpy()
        ]
