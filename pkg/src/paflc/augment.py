"""Geometric augmentation of annotations and ignore regions (flip, rotate, scale, crop).

The four steps compose into one affine map::

    p -> R(theta) * scale * (flip(p) - c) + crop_size / 2

where ``flip(x, y) = (W - x, y)`` when flipping, ``c = crop_origin +
crop_size / 2`` is the crop center in the flipped image, and ``R`` rotates
by ``theta`` degrees (positive angles turn +x toward +y).  Keypoints that
land outside ``[0, crop_size)`` become absent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import PersonAnnotation, SkeletonSpec, Visibility
from .errors import DomainError
from .regions import transform_region

__all__ = [
    "AugmentConfig",
    "AugmentParams",
    "sample_params",
    "affine_matrix",
    "rotation_about",
    "apply_augment",
]


@dataclass(frozen=True)
class AugmentParams:
    flip: bool = False
    rotation: float = 0.0
    scale: float = 1.0
    crop_origin: tuple[float, float] = (0.0, 0.0)
    crop_size: int = 368

    def __post_init__(self):
        if not self.crop_size > 0:
            raise DomainError("crop_size must be positive")
        if not self.scale > 0:
            raise DomainError("scale must be positive")


@dataclass(frozen=True)
class AugmentConfig:
    """Sampling ranges.

    ``anchor`` picks what the crop must contain: ``"person"`` (centroid of a
    random annotated person, image center if there is none), ``"center"``
    (the image center) or ``"origin"`` (no sampling, crop at (0, 0)).
    """

    flip_prob: float = 0.5
    rotation_range: tuple[float, float] = (-40.0, 40.0)
    scale_range: tuple[float, float] = (0.5, 1.1)
    crop_size: int = 368
    anchor: str = "person"

    def __post_init__(self):
        if not 0.0 <= self.flip_prob <= 1.0:
            raise DomainError("flip_prob must lie in [0, 1]")
        lo, hi = self.rotation_range
        if lo > hi:
            raise DomainError("rotation range is empty")
        lo, hi = self.scale_range
        if not 0 < lo <= hi:
            raise DomainError("scale range must be positive and non-empty")
        if self.anchor not in ("person", "center", "origin"):
            raise DomainError(f"unknown anchor {self.anchor!r}")


def rotation_about(center, degrees: float) -> np.ndarray:
    """3x3 affine rotating by ``degrees`` about ``center``."""
    t = math.radians(degrees)
    c, s = math.cos(t), math.sin(t)
    cx, cy = center
    return np.array([
        [c, -s, cx - c * cx + s * cy],
        [s, c, cy - s * cx - c * cy],
        [0.0, 0.0, 1.0],
    ])


def affine_matrix(params: AugmentParams, image_dims) -> np.ndarray:
    width, _ = image_dims
    m = np.eye(3)
    if params.flip:
        m = np.array([[-1.0, 0.0, width], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    half = params.crop_size / 2.0
    cx, cy = params.crop_origin[0] + half, params.crop_origin[1] + half
    t = math.radians(params.rotation)
    c, s = math.cos(t) * params.scale, math.sin(t) * params.scale
    rs = np.array([
        [c, -s, half - c * cx + s * cy],
        [s, c, half - s * cx - c * cy],
        [0.0, 0.0, 1.0],
    ])
    return rs @ m


def _centroid(person: PersonAnnotation):
    pts = person.xy[person.labeled]
    return pts.mean(axis=0) if len(pts) else None


def sample_params(rng: np.random.Generator, config: AugmentConfig = AugmentConfig(),
                  persons=(), image_dims=None) -> AugmentParams:
    """Draw flip, angle and scale uniformly, then a crop containing the anchor.

    The anchor's position inside the output crop is drawn uniformly, which is
    the same as drawing the crop origin uniformly over all crops that contain
    it.
    """
    flip = bool(rng.random() < config.flip_prob)
    rotation = float(rng.uniform(*config.rotation_range))
    scale = float(rng.uniform(*config.scale_range))
    size = config.crop_size
    if config.anchor == "origin":
        return AugmentParams(flip, rotation, scale, (0.0, 0.0), size)

    width, height = image_dims if image_dims is not None else (size, size)
    anchor = np.array([width / 2.0, height / 2.0])
    if config.anchor == "person":
        centroids = [c for c in (_centroid(p) for p in persons) if c is not None]
        if centroids:
            anchor = centroids[int(rng.integers(len(centroids)))]
    if flip:
        anchor = np.array([width - anchor[0], anchor[1]])
    u = rng.uniform(0.0, size, size=2)
    t = math.radians(rotation)
    c, s = math.cos(t) * scale, math.sin(t) * scale
    # invert p_out = RS (a - center) + size/2 for the center
    rel = u - size / 2.0
    det = c * c + s * s
    back = np.array([c * rel[0] + s * rel[1], -s * rel[0] + c * rel[1]]) / det
    center = anchor - back
    origin = (float(center[0] - size / 2.0), float(center[1] - size / 2.0))
    return AugmentParams(flip, rotation, scale, origin, size)


def apply_augment(persons, ignore_regions, image_dims, params: AugmentParams, skeleton: SkeletonSpec):
    """Transform persons and regions; returns ``(persons, regions, (crop_size, crop_size))``."""
    m = affine_matrix(params, image_dims)
    perm = skeleton.flip_permutation() if params.flip else None
    size = params.crop_size
    out_persons = []
    for p in persons:
        xy = p.xy @ m[:2, :2].T + m[:2, 2]
        state = p.state.copy()
        if perm is not None:
            xy, state = xy[perm], state[perm]
        inside = (xy[:, 0] >= 0) & (xy[:, 0] < size) & (xy[:, 1] >= 0) & (xy[:, 1] < size)
        gone = (state > 0) & ~inside
        state[gone] = Visibility.ABSENT
        xy[state == Visibility.ABSENT] = 0.0
        area = None if p.area is None else p.area * params.scale**2
        out_persons.append(PersonAnnotation(xy, state, area))
    regions = [transform_region(r, m) for r in ignore_regions]
    return out_persons, regions, (size, size)
