"""Attribute-aware UNet generator.

The photo is encoded by stride-2 conv blocks into a flat hidden vector,
which is mixed with the concatenated attribute embedding through a learned
affine map followed by ReLU, then decoded back to an image by transposed
convolutions with skip connections around the fusion.  An optional
attention mode additionally mixes per-attribute vectors into the deepest
feature map, one context vector per spatial region.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import torch
import torch.nn as nn

from .embeddings import EmbeddingTable
from .schema import AttributeSchema, encode_onehot


@dataclass
class GeneratorConfig:
    image_size: int = 64
    channels: int = 3
    depth: int = 5
    base_filters: int = 32
    d_h: int = 256
    embed_dim: int = 16
    fusion_mode: str = "bottleneck"  # or "attention"
    leaky_slope: float = 0.2

    def __post_init__(self):
        if self.image_size < 2 or self.image_size & (self.image_size - 1):
            raise ValueError(f"image_size must be a power of 2, got {self.image_size}")
        if self.image_size < 2 ** self.depth:
            raise ValueError(
                f"image_size {self.image_size} too small for depth {self.depth}"
            )
        if self.d_h <= 0:
            raise ValueError(f"d_h must be positive, got {self.d_h}")
        if self.fusion_mode not in ("bottleneck", "attention"):
            raise ValueError(f"unknown fusion_mode {self.fusion_mode!r}")

    def level_channels(self) -> list[int]:
        # width doubles per level, capped at 8x base like the usual recipe
        return [min(self.base_filters * 2 ** i, self.base_filters * 8)
                for i in range(self.depth)]

    def to_dict(self) -> dict:
        return {
            "image_size": self.image_size,
            "channels": self.channels,
            "depth": self.depth,
            "base_filters": self.base_filters,
            "d_h": self.d_h,
            "embed_dim": self.embed_dim,
            "fusion_mode": self.fusion_mode,
            "leaky_slope": self.leaky_slope,
        }


class AttributeVectorizer(nn.Module):
    """Trainable per-pair embedding rows; maps one-hot targets to the
    concatenated conditioning vector (zero block for unspecified types)."""

    def __init__(self, schema: AttributeSchema, embed_dim: int):
        super().__init__()
        self.embed_dim = embed_dim
        self.num_types = len(schema.types)
        self.block_slices = [schema.block_slice(n) for n in schema.type_names]
        self.weight = nn.Parameter(torch.zeros(schema.num_slots, embed_dim))
        nn.init.uniform_(self.weight, -0.5 / embed_dim, 0.5 / embed_dim)

    @property
    def output_dim(self) -> int:
        return self.num_types * self.embed_dim

    def load_table(self, table: EmbeddingTable, schema: AttributeSchema) -> None:
        if table.dim != self.embed_dim:
            raise ValueError(
                f"embedding table dim {table.dim} != configured {self.embed_dim}"
            )
        matrix = table.as_matrix(schema)
        with torch.no_grad():
            self.weight.copy_(torch.from_numpy(matrix).to(self.weight.dtype))

    def forward(self, onehot: torch.Tensor) -> torch.Tensor:
        # onehot: (B, K) with one-hot (or zero) blocks; picking rows by
        # block-wise matmul keeps gradients flowing into the embedding rows
        blocks = [onehot[:, sl] @ self.weight[sl] for sl in self.block_slices]
        return torch.cat(blocks, dim=1)

    def attribute_rows(self, onehot: torch.Tensor) -> list[torch.Tensor]:
        """Per-sample list of embedding rows for the specified attributes."""
        rows = []
        for sample in onehot:
            idx = torch.nonzero(sample > 0.5, as_tuple=False).flatten()
            rows.append(self.weight[idx])
        return rows


def _down_block(cin: int, cout: int, slope: float, norm: bool) -> nn.Sequential:
    layers: list[nn.Module] = [nn.Conv2d(cin, cout, 4, stride=2, padding=1)]
    if norm:
        layers.append(nn.InstanceNorm2d(cout, affine=True))
    layers.append(nn.LeakyReLU(slope))
    return nn.Sequential(*layers)


def _up_block(cin: int, cout: int, norm: bool) -> nn.Sequential:
    layers: list[nn.Module] = [nn.ConvTranspose2d(cin, cout, 4, stride=2, padding=1)]
    if norm:
        layers.append(nn.InstanceNorm2d(cout, affine=True))
    layers.append(nn.ReLU())
    return nn.Sequential(*layers)


class PortraitGenerator(nn.Module):
    def __init__(self, config: GeneratorConfig, schema: AttributeSchema):
        super().__init__()
        self.config = config
        self.schema = schema
        self.vectorizer = AttributeVectorizer(schema, config.embed_dim)

        ch = config.level_channels()
        self.encoder = nn.ModuleList()
        cin = config.channels
        for i, cout in enumerate(ch):
            # first block carries raw pixel statistics, no normalization;
            # single-pixel maps cannot be instance-normalized either
            spatial = config.image_size // 2 ** (i + 1)
            self.encoder.append(
                _down_block(cin, cout, config.leaky_slope, norm=(i > 0 and spatial > 1))
            )
            cin = cout

        bottleneck_hw = config.image_size // 2 ** config.depth
        flat = ch[-1] * bottleneck_hw * bottleneck_hw
        self.to_hidden = nn.Linear(flat, config.d_h)
        self.hidden_proj = nn.Linear(config.d_h, config.d_h, bias=False)
        self.attr_proj = nn.Linear(self.vectorizer.output_dim, config.d_h, bias=False)
        self.fuse_bias = nn.Parameter(torch.zeros(config.d_h))
        self.from_hidden = nn.Linear(config.d_h, flat)
        self._bottleneck_shape = (ch[-1], bottleneck_hw, bottleneck_hw)

        if config.fusion_mode == "attention":
            self.region_query = nn.Linear(config.embed_dim, ch[-1], bias=False)
            self.attention_mix = nn.Conv2d(ch[-1] * 2, ch[-1], 1)
        else:
            self.region_query = None
            self.attention_mix = None

        self.decoder = nn.ModuleList()
        for i in reversed(range(config.depth)):
            cin_dec = ch[i] * 2  # skip concatenation doubles the input
            if i == 0:
                self.decoder.append(
                    nn.Sequential(nn.ConvTranspose2d(cin_dec, config.channels, 4, 2, 1),
                                  nn.Tanh())
                )
            else:
                spatial = config.image_size // 2 ** i
                self.decoder.append(_up_block(cin_dec, ch[i - 1], norm=spatial > 1))

    # -- pieces -------------------------------------------------------------

    def encode(self, x: torch.Tensor) -> tuple[torch.Tensor, list[torch.Tensor]]:
        """Flat hidden vector plus one skip map per encoder level."""
        if x.dim() != 4 or x.shape[1] != self.config.channels \
                or x.shape[2] != self.config.image_size or x.shape[3] != self.config.image_size:
            raise ValueError(
                f"expected input of shape (B, {self.config.channels}, "
                f"{self.config.image_size}, {self.config.image_size}), got {tuple(x.shape)}"
            )
        skips = []
        feat = x
        for block in self.encoder:
            feat = block(feat)
            skips.append(feat)
        h = self.to_hidden(feat.flatten(1))
        return h, skips

    def fuse(self, h: torch.Tensor, v: torch.Tensor) -> torch.Tensor:
        """ReLU of the learned affine mix of hidden vector and attributes."""
        return torch.relu(self.hidden_proj(h) + self.attr_proj(v) + self.fuse_bias)

    def attention_fuse(
        self, features: torch.Tensor, attr_vectors: torch.Tensor
    ) -> torch.Tensor:
        """Stack features with per-region attribute context vectors.

        ``features``: (B, C, H, W); ``attr_vectors``: (N_w, embed_dim) rows,
        applied to the whole batch.  Each region scores each projected
        attribute, the softmax over attributes weighs the projections into a
        context vector, and the result is concatenated channelwise.
        """
        if attr_vectors.dim() != 2 or attr_vectors.shape[0] < 1:
            raise ValueError("attention requires at least one attribute vector")
        if self.region_query is None:
            raise RuntimeError("generator was not built in attention mode")
        b, c, hgt, wid = features.shape
        queries = self.region_query(attr_vectors)            # (N_w, C)
        regions = features.flatten(2).transpose(1, 2)        # (B, HW, C)
        scores = regions @ queries.t()                       # (B, HW, N_w)
        beta = torch.softmax(scores, dim=2)
        context = beta @ queries                             # (B, HW, C)
        context = context.transpose(1, 2).reshape(b, c, hgt, wid)
        return torch.cat([features, context], dim=1)

    def decode(self, h_fused: torch.Tensor, skips: list[torch.Tensor]) -> torch.Tensor:
        """Image in [-1, 1] with the same spatial shape as the input photo."""
        feat = self.from_hidden(h_fused).view(-1, *self._bottleneck_shape)
        for i, block in enumerate(self.decoder):
            skip = skips[self.config.depth - 1 - i]
            feat = block(torch.cat([feat, skip], dim=1))
        return feat

    # -- full paths -----------------------------------------------------------

    def forward(self, x: torch.Tensor, onehot: torch.Tensor) -> torch.Tensor:
        h, skips = self.encode(x)
        if self.config.fusion_mode == "attention":
            rows = self.vectorizer.attribute_rows(onehot)
            mixed = []
            for i, r in enumerate(rows):
                feat = skips[-1][i:i + 1]
                if r.shape[0] >= 1:
                    feat = self.attention_mix(self.attention_fuse(feat, r))
                mixed.append(feat)
            h = self.to_hidden(torch.cat(mixed, dim=0).flatten(1))
        v = self.vectorizer(onehot)
        fused = self.fuse(h, v)
        return self.decode(fused, skips)

    @torch.no_grad()
    def generate(
        self,
        photo: np.ndarray,
        attrs: Mapping[str, str],
        schema: AttributeSchema | None = None,
    ) -> np.ndarray:
        """Deterministic single-image inference: (H, W, 3) in [0, 1] both ways."""
        schema = schema or self.schema
        schema.validate_assignments(attrs)
        was_training = self.training
        self.eval()
        try:
            x = torch.from_numpy(
                np.ascontiguousarray(photo.transpose(2, 0, 1), dtype=np.float32)
            ).unsqueeze(0) * 2.0 - 1.0
            x = x.to(next(self.parameters()).dtype)
            onehot = torch.from_numpy(encode_onehot(attrs, schema)).unsqueeze(0)
            onehot = onehot.to(x.dtype)
            out = self(x, onehot)[0]
        finally:
            if was_training:
                self.train()
        img = (out.float().numpy().transpose(1, 2, 0) + 1.0) / 2.0
        return np.clip(img, 0.0, 1.0)
