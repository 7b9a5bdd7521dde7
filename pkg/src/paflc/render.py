"""PNG visualizations of label tensors and decoded poses.

Confidence maps use a fixed black-red-yellow-white ramp, PAFs are drawn in
HSV with hue = direction (0 deg = +x = red) and value = vector norm, poses
are drawn as skeleton overlays.  Output pixels depend only on the input.
"""
from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .core import LabelSet, SkeletonSpec
from .io_formats import atomic_write

__all__ = [
    "HEAT_LUT",
    "colorize_map",
    "colorize_paf",
    "draw_poses",
    "render_labels",
    "render_poses",
    "save_png",
]


def _ramp(stops, n=256) -> np.ndarray:
    pos = np.array([s[0] for s in stops])
    rgb = np.array([s[1] for s in stops], dtype=np.float64)
    t = np.linspace(0.0, 1.0, n)
    return np.stack([np.interp(t, pos, rgb[:, k]) for k in range(3)], axis=1).round().astype(np.uint8)


HEAT_LUT = _ramp([
    (0.0, (0, 0, 0)),
    (0.35, (190, 0, 0)),
    (0.7, (255, 200, 0)),
    (1.0, (255, 255, 255)),
])

LIMB_COLOR = (0, 255, 255)
JOINT_COLOR = (255, 60, 0)


def colorize_map(values) -> np.ndarray:
    """``(H, W)`` map in [0, 1] -> ``(H, W, 3)`` uint8; values are clipped first."""
    v = np.clip(np.nan_to_num(np.asarray(values, dtype=np.float64)), 0.0, 1.0)
    return HEAT_LUT[np.rint(v * 255).astype(np.intp)]


def colorize_paf(vec) -> np.ndarray:
    """``(2, H, W)`` field -> ``(H, W, 3)`` uint8 via HSV (norm clipped at 1)."""
    vec = np.asarray(vec, dtype=np.float64)
    angle = np.mod(np.arctan2(vec[1], vec[0]), 2 * np.pi)
    hue = np.rint(angle / (2 * np.pi) * 256).astype(np.int64) % 256
    value = np.rint(np.clip(np.hypot(vec[0], vec[1]), 0.0, 1.0) * 255)
    hsv = np.stack([hue, np.full_like(hue, 255), value.astype(np.int64)], axis=-1).astype(np.uint8)
    return np.asarray(Image.fromarray(hsv, mode="HSV").convert("RGB"))


def _upscale(rgb: np.ndarray, factor: int) -> Image.Image:
    img = Image.fromarray(rgb, mode="RGB")
    if factor > 1:
        img = img.resize((img.width * factor, img.height * factor), Image.NEAREST)
    return img


def save_png(img: Image.Image, path):
    """Atomic PNG write with no timestamp or other varying metadata."""
    buf = io.BytesIO()
    img.save(buf, format="PNG", optimize=False)
    atomic_write(path, buf.getvalue())


def render_labels(labels: LabelSet, out_dir, stem: str = "labels", scale: int = 4) -> list[Path]:
    """Write ``<stem>_maps.png`` (max over parts), ``<stem>_pafs.png`` (sum over limbs)
    and ``<stem>_mask.png``; returns the paths."""
    out_dir = Path(out_dir)
    maps = labels.maps.max(axis=0) if labels.num_parts else np.zeros(labels.grid.shape)
    pafs = labels.pafs.sum(axis=0) if labels.num_limbs else np.zeros((2,) + labels.grid.shape)
    mask = np.repeat((labels.mask * 255).astype(np.uint8)[..., None], 3, axis=2)
    paths = []
    for name, rgb in (("maps", colorize_map(maps)), ("pafs", colorize_paf(pafs)), ("mask", mask)):
        p = out_dir / f"{stem}_{name}.png"
        save_png(_upscale(rgb, scale), p)
        paths.append(p)
    return paths


def draw_poses(poses, skeleton: SkeletonSpec, image_dims, background=None, radius: int = 3) -> Image.Image:
    """Skeleton overlay of decoded poses on ``background`` (or black)."""
    w, h = image_dims
    if background is None:
        img = Image.new("RGB", (int(w), int(h)))
    else:
        img = background.convert("RGB").copy()
    draw = ImageDraw.Draw(img)
    for pose in poses:
        parts = pose.parts
        for a, b in skeleton.limbs:
            if parts[a] is not None and parts[b] is not None:
                draw.line([tuple(parts[a][:2]), tuple(parts[b][:2])], fill=LIMB_COLOR, width=2)
        for p in parts:
            if p is not None:
                x, y = p[0], p[1]
                draw.ellipse([x - radius, y - radius, x + radius, y + radius], fill=JOINT_COLOR)
    return img


def render_poses(poses, skeleton: SkeletonSpec, image_dims, path, background=None) -> Path:
    save_png(draw_poses(poses, skeleton, image_dims, background), path)
    return Path(path)
