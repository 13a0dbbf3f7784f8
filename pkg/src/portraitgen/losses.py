"""Training objectives.

All probability inputs are clamped to [EPS, 1-EPS] inside the logs; the
raw formulas are undefined at the endpoints.  Every function accepts torch
tensors and stays differentiable, so the same code path serves training
and the finite-difference checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

EPS = 1e-7


@dataclass
class LossWeights:
    """Relative weights of the classification and L1 terms.

    ``cls_weight_g`` scales the attribute classification term in the
    generator objective, ``l1_weight`` the L1 term, and ``cls_weight_d``
    the classification term in the discriminator objective.
    """

    cls_weight_g: float = 1.0
    l1_weight: float = 10.0
    cls_weight_d: float = 1.0

    def __post_init__(self):
        for name in ("cls_weight_g", "l1_weight", "cls_weight_d"):
            value = getattr(self, name)
            if not (value >= 0.0) or value != value:
                raise ValueError(f"{name} must be a finite nonnegative real, got {value}")

    def to_dict(self) -> dict:
        return {
            "cls_weight_g": self.cls_weight_g,
            "l1_weight": self.l1_weight,
            "cls_weight_d": self.cls_weight_d,
        }


@dataclass
class LossReport:
    """Per-step scalar summary of every objective term."""

    adv_g: float
    adv_d: float
    l1: float
    cls_g: float
    cls_d: float
    total_g: float
    total_d: float

    def to_dict(self) -> dict:
        return {
            "adv_g": self.adv_g,
            "adv_d": self.adv_d,
            "l1": self.l1,
            "cls_g": self.cls_g,
            "cls_d": self.cls_d,
            "total_g": self.total_g,
            "total_d": self.total_d,
        }

    def is_finite(self) -> bool:
        return all(
            value == value and abs(value) != float("inf")
            for value in self.to_dict().values()
        )


def _clamped_log(p: torch.Tensor) -> torch.Tensor:
    return torch.log(p.clamp(EPS, 1.0 - EPS))


def generator_adversarial_loss(d_fake: torch.Tensor) -> torch.Tensor:
    """Mean of -log D over generated samples; minimized by fooling D."""
    if d_fake.numel() == 0:
        raise ValueError("empty batch of discriminator outputs")
    return -_clamped_log(d_fake).mean()


def discriminator_adversarial_loss(
    d_fake: torch.Tensor, d_real: torch.Tensor
) -> torch.Tensor:
    """Mean log D(fake) minus mean log D(real).

    Minimizing drives D(fake) toward 0 and D(real) toward 1.
    """
    if d_fake.numel() == 0 or d_real.numel() == 0:
        raise ValueError("empty batch of discriminator outputs")
    return _clamped_log(d_fake).mean() - _clamped_log(d_real).mean()


def l1_loss(target: torch.Tensor, generated: torch.Tensor) -> torch.Tensor:
    """Mean absolute pixel difference."""
    if target.shape != generated.shape:
        raise ValueError(f"shape mismatch: {tuple(target.shape)} vs {tuple(generated.shape)}")
    return (target - generated).abs().mean()


def attribute_bce_sum(pred: torch.Tensor, onehot: torch.Tensor) -> torch.Tensor:
    """Sum of per-slot binary cross-entropies over all K slots.

    For batched inputs the sum runs over the slot axis, returning one value
    per sample.
    """
    if pred.shape != onehot.shape:
        raise ValueError(f"length mismatch: {tuple(pred.shape)} vs {tuple(onehot.shape)}")
    p = pred.clamp(EPS, 1.0 - EPS)
    per_slot = -onehot * torch.log(p) - (1.0 - onehot) * torch.log(1.0 - p)
    return per_slot.sum(dim=-1)


def attribute_classification_loss(
    pred_batch: torch.Tensor, onehot_batch: torch.Tensor
) -> torch.Tensor:
    """Batch mean of the slot-wise BCE sum."""
    if pred_batch.numel() == 0:
        raise ValueError("empty batch of attribute predictions")
    return attribute_bce_sum(pred_batch, onehot_batch).mean()


def generator_objective(
    adv: torch.Tensor, cls: torch.Tensor, l1: torch.Tensor, weights: LossWeights
) -> torch.Tensor:
    return adv + weights.cls_weight_g * cls + weights.l1_weight * l1


def discriminator_objective(
    adv: torch.Tensor, cls: torch.Tensor, weights: LossWeights
) -> torch.Tensor:
    return adv + weights.cls_weight_d * cls
