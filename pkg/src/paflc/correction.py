"""Per-cell fusion of ground-truth labels with teacher predictions."""
from __future__ import annotations

import enum

import numpy as np

from .core import LabelSet
from .errors import DomainError, ShapeMismatchError

__all__ = [
    "Scope",
    "correct_confidence_maps",
    "correct_pafs",
    "correct_labels",
    "clamp_teacher",
    "correction_stats",
]


class Scope(str, enum.Enum):
    MAPS_ONLY = "maps_only"
    PAFS_ONLY = "pafs_only"
    BOTH = "both"

    @classmethod
    def parse(cls, value) -> "Scope":
        if isinstance(value, Scope):
            return value
        aliases = {"maps": cls.MAPS_ONLY, "pafs": cls.PAFS_ONLY}
        try:
            return aliases.get(value) or cls(value)
        except ValueError:
            raise DomainError(f"unknown scope {value!r}; use maps, pafs or both") from None


def _same_shape(gt, teacher, what):
    if gt.shape != teacher.shape:
        raise ShapeMismatchError(f"{what}: ground truth {gt.shape} vs teacher {teacher.shape}")


def correct_confidence_maps(gt: np.ndarray, teacher: np.ndarray) -> np.ndarray:
    """Cellwise ``max(gt, teacher)``."""
    gt, teacher = np.asarray(gt), np.asarray(teacher)
    _same_shape(gt, teacher, "confidence maps")
    return np.maximum(gt, teacher)


def _sq_norm(v):
    v = v.astype(np.float64, copy=False)
    return v[:, 0] * v[:, 0] + v[:, 1] * v[:, 1]


def correct_pafs(gt: np.ndarray, teacher: np.ndarray) -> np.ndarray:
    """Keep the ground-truth vector only where its norm strictly exceeds the teacher's.

    Arrays are ``(C, 2, H, W)``; ties go to the teacher.
    """
    gt, teacher = np.asarray(gt), np.asarray(teacher)
    _same_shape(gt, teacher, "PAFs")
    if gt.ndim != 4 or gt.shape[1] != 2:
        raise ShapeMismatchError(f"PAFs must be (C, 2, H, W), got {gt.shape}")
    keep_gt = _sq_norm(gt) > _sq_norm(teacher)
    return np.where(keep_gt[:, None], gt, teacher)


def correct_labels(gt: LabelSet, teacher: LabelSet, scope="both") -> LabelSet:
    """Corrected labels; channels outside ``scope`` and the mask come from ``gt`` unchanged."""
    gt.check_compatible(teacher)
    scope = Scope.parse(scope)
    maps = gt.maps.copy()
    pafs = gt.pafs.copy()
    if scope in (Scope.MAPS_ONLY, Scope.BOTH):
        maps = correct_confidence_maps(gt.maps, teacher.maps).astype(gt.maps.dtype, copy=False)
    if scope in (Scope.PAFS_ONLY, Scope.BOTH):
        pafs = correct_pafs(gt.pafs, teacher.pafs).astype(gt.pafs.dtype, copy=False)
    return LabelSet(gt.grid, maps, pafs, gt.mask.copy())


def clamp_teacher(teacher: LabelSet) -> LabelSet:
    """Clip maps to [0, 1] and rescale PAF vectors longer than 1 onto the unit circle."""
    maps = np.clip(teacher.maps, 0.0, 1.0)
    pafs = teacher.pafs.astype(np.float64)
    norm = np.sqrt(_sq_norm(pafs))
    scale = np.where(norm > 1.0, 1.0 / np.where(norm > 0, norm, 1.0), 1.0)
    pafs = (pafs * scale[:, None]).astype(teacher.pafs.dtype)
    maps = maps.astype(teacher.maps.dtype, copy=False)
    return LabelSet(teacher.grid, maps, pafs, np.ones(teacher.grid.shape, np.uint8))


def correction_stats(before: LabelSet, after: LabelSet) -> dict:
    """Counts of changed map cells and PAF cells, and the mean PAF norm change over all cells."""
    before.check_compatible(after)
    map_changed = int(np.count_nonzero(before.maps != after.maps))
    paf_changed = int(np.count_nonzero((before.pafs != after.pafs).any(axis=1)))
    delta = np.sqrt(_sq_norm(after.pafs)) - np.sqrt(_sq_norm(before.pafs))
    return {
        "map_cells_changed": map_changed,
        "paf_cells_changed": paf_changed,
        "cells_changed": map_changed + paf_changed,
        "mean_norm_delta": float(delta.mean()) if delta.size else 0.0,
    }
