"""Masked squared-error losses over label sets.

All losses are unreduced sums over cells and channels, evaluated in float64.
The ignore mask of the ground-truth (or corrected) target is applied to
every term, including the teacher term of the distillation losses.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LabelSet
from .errors import DomainError

__all__ = ["LossBreakdown", "masked_l2", "masked_l2_grad", "loss_lc", "loss_kd", "loss_kd_lc"]


@dataclass(frozen=True)
class LossBreakdown:
    map_term: float
    paf_term: float
    unmasked_cells: int = 0

    @property
    def total(self) -> float:
        return self.map_term + self.paf_term

    @property
    def mean_per_cell(self) -> float:
        """Total divided by the number of unmasked grid cells (0 when all are masked)."""
        return self.total / self.unmasked_cells if self.unmasked_cells else 0.0

    def mix(self, other: "LossBreakdown", lam: float) -> "LossBreakdown":
        """``(1 - lam) * self + lam * other`` termwise."""
        return LossBreakdown(
            (1.0 - lam) * self.map_term + lam * other.map_term,
            (1.0 - lam) * self.paf_term + lam * other.paf_term,
            self.unmasked_cells,
        )


def masked_l2(pred: LabelSet, target: LabelSet, mask=None) -> LossBreakdown:
    pred.check_compatible(target)
    w = np.asarray(target.mask if mask is None else getattr(mask, "values", mask), dtype=np.float64)
    if w.shape != pred.grid.shape:
        raise DomainError(f"mask shape {w.shape} does not match grid {pred.grid.shape}")
    dm = pred.maps.astype(np.float64) - target.maps.astype(np.float64)
    dp = pred.pafs.astype(np.float64) - target.pafs.astype(np.float64)
    map_term = float(np.sum((dm * dm).sum(axis=0) * w))
    paf_term = float(np.sum((dp * dp).sum(axis=(0, 1)) * w))
    return LossBreakdown(map_term, paf_term, int(np.count_nonzero(w)))


def masked_l2_grad(pred: LabelSet, target: LabelSet, mask=None) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of :func:`masked_l2` w.r.t. the prediction: ``2 W (pred - target)``.

    Returned as float64 ``(maps, pafs)`` arrays shaped like the prediction.
    """
    pred.check_compatible(target)
    w = np.asarray(target.mask if mask is None else getattr(mask, "values", mask), dtype=np.float64)
    if w.shape != pred.grid.shape:
        raise DomainError(f"mask shape {w.shape} does not match grid {pred.grid.shape}")
    gm = 2.0 * w * (pred.maps.astype(np.float64) - target.maps.astype(np.float64))
    gp = 2.0 * w * (pred.pafs.astype(np.float64) - target.pafs.astype(np.float64))
    return gm, gp


def loss_lc(pred: LabelSet, corrected: LabelSet) -> LossBreakdown:
    return masked_l2(pred, corrected, corrected.mask)


def _check_lambda(lam):
    if not (0.0 <= lam <= 1.0):
        raise DomainError(f"lambda must lie in [0, 1], got {lam}")


def loss_kd(pred: LabelSet, gt: LabelSet, teacher: LabelSet, lam: float) -> LossBreakdown:
    _check_lambda(lam)
    return masked_l2(pred, gt, gt.mask).mix(masked_l2(pred, teacher, gt.mask), lam)


def loss_kd_lc(pred: LabelSet, corrected: LabelSet, teacher: LabelSet, lam: float) -> LossBreakdown:
    _check_lambda(lam)
    return loss_lc(pred, corrected).mix(masked_l2(pred, teacher, corrected.mask), lam)
