"""Synthetic multi-person scenes, annotation-failure injection and an oracle teacher.

The scenes are articulated stick figures.  Only geometric consistency
matters: the failure injector removes annotations from a fully known scene,
so the labels of the untouched scene are the ground truth any correction
should recover.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .core import (
    LabelSet, PersonAnnotation, Scene, SkeletonSpec, Visibility, coco17_skeleton, default_skeleton,
)
from .errors import DomainError
from .labelgen import LabelGenConfig, generate_labels
from .regions import Polygon

__all__ = [
    "CorruptionConfig",
    "CorruptionResult",
    "Translate",
    "Hide",
    "DropRegion",
    "stick_figure",
    "gen_scene",
    "inject_failures",
    "replay_ledger",
    "oracle_teacher",
]

# Body proportions in units of body height, neck at the origin, y down.
# The head is deliberately oversized so face limbs span more than one cell
# at the default stride.
SHOULDER_HALF = 0.13
HIP_HALF = 0.09
HIP_DROP = 0.32
UPPER_ARM, FOREARM = 0.19, 0.17
THIGH, SHIN = 0.25, 0.24
NOSE_UP = 0.16
EYE_OFFSET = (0.07, -0.06)   # from the nose
EAR_OFFSET = (0.14, -0.03)   # from the nose

# Joint-angle limits in degrees.  Limb angles are measured from straight
# down and turn outward (away from the body midline) for positive values.
ARM_RAISE = (-20.0, 110.0)
ELBOW_BEND = (-10.0, 120.0)
HIP_SPREAD = (-10.0, 35.0)
KNEE_BEND = (-5.0, 50.0)
HEAD_TILT = (-20.0, 20.0)
BODY_LEAN = (-15.0, 15.0)


def _down(angle_deg, side):
    """Unit vector pointing down, rotated outward by ``angle_deg`` on ``side`` (+1 / -1)."""
    t = math.radians(angle_deg)
    return np.array([side * math.sin(t), math.cos(t)])


def stick_figure(rng: np.random.Generator, height: float) -> dict[str, np.ndarray]:
    """Keypoints of one randomly posed figure, keyed by COCO part name plus ``"neck"``.

    The figure's neck sits at the origin; its own left side is at +x.
    """
    pts = {"neck": np.zeros(2)}
    for side, name in ((+1, "left"), (-1, "right")):
        sh = np.array([side * SHOULDER_HALF, 0.0])
        arm = rng.uniform(*ARM_RAISE)
        elbow = sh + UPPER_ARM * _down(arm, side)
        wrist = elbow + FOREARM * _down(arm + rng.uniform(*ELBOW_BEND), side)
        hip = np.array([side * HIP_HALF, HIP_DROP])
        spread = rng.uniform(*HIP_SPREAD)
        knee = hip + THIGH * _down(spread, side)
        ankle = knee + SHIN * _down(spread - rng.uniform(*KNEE_BEND), side)
        pts.update({
            f"{name}_shoulder": sh, f"{name}_elbow": elbow, f"{name}_wrist": wrist,
            f"{name}_hip": hip, f"{name}_knee": knee, f"{name}_ankle": ankle,
        })
    tilt = math.radians(rng.uniform(*HEAD_TILT))
    rot = np.array([[math.cos(tilt), -math.sin(tilt)], [math.sin(tilt), math.cos(tilt)]])
    nose = np.array([0.0, -NOSE_UP])
    pts["nose"] = nose
    for side, name in ((+1, "left"), (-1, "right")):
        pts[f"{name}_eye"] = nose + rot @ np.array([side * EYE_OFFSET[0], EYE_OFFSET[1]])
        pts[f"{name}_ear"] = nose + rot @ np.array([side * EAR_OFFSET[0], EAR_OFFSET[1]])

    lean = math.radians(rng.uniform(*BODY_LEAN))
    body = np.array([[math.cos(lean), -math.sin(lean)], [math.sin(lean), math.cos(lean)]])
    return {k: height * (body @ v) for k, v in pts.items()}


def _figure_for(skeleton, rng, height):
    pts = stick_figure(rng, height)
    missing = [n for n in skeleton.part_names if n not in pts]
    if missing:
        raise DomainError(f"stick figures have no parts named {missing}")
    return np.stack([pts[n] for n in skeleton.part_names])


def _bbox(xy):
    return np.concatenate([xy.min(axis=0), xy.max(axis=0)])


def _boxes_clear(a, b, gap):
    return a[2] + gap <= b[0] or b[2] + gap <= a[0] or a[3] + gap <= b[1] or b[3] + gap <= a[1]


def _blob(rng, center, radius, n=8):
    angles = np.sort(rng.uniform(0, 2 * math.pi, n))
    radii = radius * rng.uniform(0.6, 1.0, n)
    return Polygon(np.stack([center[0] + radii * np.cos(angles), center[1] + radii * np.sin(angles)], 1))


def gen_scene(
    rng: np.random.Generator,
    n_persons: int,
    image_dims: tuple[int, int],
    skeleton: SkeletonSpec,
    *,
    height_range: tuple[float, float] = (180.0, 260.0),
    min_gap: float | None = 24.0,
    crowd_regions: int = 0,
    margin: float = 4.0,
    image_id=0,
    max_tries: int = 20000,
    restart_every: int = 200,
) -> Scene:
    """Place ``n_persons`` random stick figures fully inside the image.

    With ``min_gap`` set, keypoint bounding boxes of different people stay
    at least that many pixels apart; ``None`` lets people overlap.  Up to
    ``crowd_regions`` blob-shaped ignore regions are placed away from people.
    Every keypoint is labeled visible; ``area`` is the keypoint bbox area.
    Placement is rejection sampling that starts over every ``restart_every``
    failed draws.
    """
    if n_persons < 0:
        raise DomainError("n_persons must be non-negative")
    width, height = image_dims
    lo, hi = height_range
    probe = _figure_for(skeleton, np.random.default_rng(0), lo)
    span = probe.max(axis=0) - probe.min(axis=0)
    if n_persons and (span[0] + 2 * margin > width or span[1] + 2 * margin > height):
        raise DomainError(f"image {width}x{height} is too small for a person of height {lo}")

    persons, boxes = [], []
    tries = 0
    while len(persons) < n_persons:
        tries += 1
        if tries > max_tries:
            raise DomainError(f"could not place {n_persons} separated persons in {width}x{height}")
        if tries % restart_every == 0:
            persons, boxes = [], []
        xy = _figure_for(skeleton, rng, rng.uniform(lo, hi))
        box = _bbox(xy)
        free_x = width - 2 * margin - (box[2] - box[0])
        free_y = height - 2 * margin - (box[3] - box[1])
        if free_x < 0 or free_y < 0:
            continue
        shift = np.array([margin - box[0] + rng.uniform(0, free_x), margin - box[1] + rng.uniform(0, free_y)])
        xy = xy + shift
        box = _bbox(xy)
        if min_gap is not None and not all(_boxes_clear(box, b, min_gap) for b in boxes):
            continue
        boxes.append(box)
        persons.append(PersonAnnotation.visible(xy, area=float((box[2] - box[0]) * (box[3] - box[1]))))

    regions = []
    n_crowds = int(rng.integers(0, crowd_regions + 1)) if crowd_regions > 0 else 0
    keep_out = 40.0
    for _ in range(n_crowds):
        for _attempt in range(50):
            radius = rng.uniform(20.0, 50.0)
            c = rng.uniform((radius, radius), (width - radius, height - radius)) if width > 2 * radius and height > 2 * radius else None
            if c is None:
                break
            blob_box = np.array([c[0] - radius, c[1] - radius, c[0] + radius, c[1] + radius])
            if all(_boxes_clear(blob_box, b, keep_out) for b in boxes):
                regions.append(_blob(rng, c, radius))
                break
    return Scene(image_id, width, height, persons, regions)


@dataclass(frozen=True)
class CorruptionConfig:
    protrusion: bool = False
    occlusion_rate: float = 0.0
    miss_rate: float = 0.0
    drop_mask_rate: float = 0.0
    seed: int = 0
    # pixels between a back keypoint and a front limb segment that count as hidden
    occlusion_radius: float = 12.0

    def __post_init__(self):
        for name in ("occlusion_rate", "miss_rate", "drop_mask_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {v}")


@dataclass(frozen=True, eq=False)
class Translate:
    """Shift of one person; ``original`` keeps the exact pre-shift annotation
    because adding and subtracting a float offset does not round-trip."""

    person: int
    dx: float
    dy: float
    original: PersonAnnotation | None = None

    def to_json(self):
        out = {"kind": "translate", "person": self.person, "dx": self.dx, "dy": self.dy}
        if self.original is not None:
            out["original"] = self.original.to_triplets()
        return out


@dataclass(frozen=True)
class Hide:
    person: int
    part: int
    x: float
    y: float
    state: int
    reason: str

    def to_json(self):
        return {"kind": "hide", "person": self.person, "part": self.part, "x": self.x,
                "y": self.y, "state": self.state, "reason": self.reason}


@dataclass(frozen=True)
class DropRegion:
    index: int
    region: object

    def to_json(self):
        out = {"kind": "drop_region", "index": self.index}
        if isinstance(self.region, Polygon):
            out["polygon"] = self.region.vertices.ravel().tolist()
        return out


@dataclass
class CorruptionResult:
    """``reference`` holds the scene after any protrusion shifts with every
    keypoint still labeled; ``corrupted`` is what an annotator delivered."""

    corrupted: Scene
    reference: Scene
    ledger: list = field(default_factory=list)

    @property
    def keypoint_entries(self) -> list:
        return [e for e in self.ledger if isinstance(e, Hide)]


def _point_segment_dist(p, a, b):
    d = b - a
    n2 = float(d @ d)
    t = 0.0 if n2 == 0 else min(1.0, max(0.0, float((p - a) @ d) / n2))
    return float(np.hypot(*(a + t * d - p)))


def inject_failures(scene: Scene, cfg: CorruptionConfig, skeleton: SkeletonSpec | None = None) -> CorruptionResult:
    """Apply the four annotation failure modes in order and record every change.

    1. protrusion: shift some people so part of them leaves the frame and
       drop the keypoints that end up outside;
    2. occlusion: for overlapping pairs (later people are in front), drop
       keypoints of the back person lying near a front person's limbs;
    3. misses: drop random visible keypoints;
    4. mask drops: delete ignore regions.
    """
    rng = np.random.default_rng(cfg.seed)
    width, height = scene.width, scene.height
    persons = list(scene.persons)
    ledger: list = []

    if cfg.protrusion and persons:
        chosen = [k for k in range(len(persons)) if rng.random() < 0.5]
        if not chosen:
            chosen = [int(rng.integers(len(persons)))]
        for k in chosen:
            p = persons[k]
            pts = p.xy[p.labeled]
            if len(pts) == 0:
                continue
            box = _bbox(pts)
            bw, bh = box[2] - box[0], box[3] - box[1]
            frac = rng.uniform(0.25, 0.6)
            edge = int(rng.integers(4))
            dx = dy = 0.0
            if edge == 0:
                dx = -frac * bw - box[0]
            elif edge == 1:
                dx = width + frac * bw - box[2]
            elif edge == 2:
                dy = -frac * bh - box[1]
            else:
                dy = height + frac * bh - box[3]
            persons[k] = p.translated(dx, dy)
            ledger.append(Translate(k, float(dx), float(dy), p))

    reference = scene.replace(persons=persons)
    xy = [p.xy.copy() for p in persons]
    state = [p.state.copy() for p in persons]

    def hide(k, j, reason):
        ledger.append(Hide(k, j, float(xy[k][j, 0]), float(xy[k][j, 1]), int(state[k][j]), reason))
        state[k][j] = Visibility.ABSENT
        xy[k][j] = 0.0

    if cfg.protrusion:
        for k in range(len(persons)):
            for j in np.flatnonzero(state[k] > 0):
                x, y = xy[k][j]
                if not (0 <= x < width and 0 <= y < height):
                    hide(k, int(j), "protrusion")

    if cfg.occlusion_rate > 0 and len(persons) > 1:
        limbs = skeleton.limbs if skeleton is not None else _figure_limbs(persons[0].num_parts)
        ref_xy = [p.xy for p in reference.persons]
        ref_boxes = [_bbox(p.xy[p.labeled]) if p.labeled.any() else None for p in reference.persons]
        for back in range(len(persons)):
            for front in range(back + 1, len(persons)):
                if ref_boxes[back] is None or ref_boxes[front] is None:
                    continue
                if _boxes_clear(ref_boxes[back], ref_boxes[front], 0.0):
                    continue
                segs = [(ref_xy[front][a], ref_xy[front][b]) for a, b in limbs
                        if reference.persons[front].labeled[a] and reference.persons[front].labeled[b]]
                for j in range(persons[back].num_parts):
                    if state[back][j] == Visibility.ABSENT:
                        continue
                    p = ref_xy[back][j]
                    if any(_point_segment_dist(p, a, b) <= cfg.occlusion_radius for a, b in segs):
                        if rng.random() < cfg.occlusion_rate:
                            hide(back, j, "occlusion")

    if cfg.miss_rate > 0:
        for k in range(len(persons)):
            for j in range(persons[k].num_parts):
                if state[k][j] == Visibility.VISIBLE and rng.random() < cfg.miss_rate:
                    hide(k, j, "miss")

    regions = []
    for i, region in enumerate(scene.ignore_regions):
        if cfg.drop_mask_rate > 0 and rng.random() < cfg.drop_mask_rate:
            ledger.append(DropRegion(i, region))
        else:
            regions.append(region)

    corrupted = scene.replace(
        persons=[PersonAnnotation(xy[k], state[k], persons[k].area) for k in range(len(persons))],
        ignore_regions=regions,
    )
    return CorruptionResult(corrupted, reference, ledger)


def _figure_limbs(num_parts):
    for sk in (default_skeleton(), coco17_skeleton()):
        if sk.num_parts == num_parts:
            return sk.limbs
    raise DomainError("pass a skeleton to model occlusion for a custom part list")


def replay_ledger(corrupted: Scene, ledger, undo_translations: bool = True) -> Scene:
    """Undo the recorded corruption; without translation undo this yields the reference scene."""
    xy = [p.xy.copy() for p in corrupted.persons]
    state = [p.state.copy() for p in corrupted.persons]
    for e in reversed(ledger):
        if isinstance(e, Hide):
            xy[e.person][e.part] = (e.x, e.y)
            state[e.person][e.part] = e.state
    persons = [PersonAnnotation(xy[k], state[k], p.area) for k, p in enumerate(corrupted.persons)]
    if undo_translations:
        for e in reversed(ledger):
            if isinstance(e, Translate):
                if e.original is not None:
                    persons[e.person] = e.original
                else:
                    persons[e.person] = persons[e.person].translated(-e.dx, -e.dy)
    regions = list(corrupted.ignore_regions)
    for e in sorted((e for e in ledger if isinstance(e, DropRegion)), key=lambda e: e.index):
        regions.insert(e.index, e.region)
    return corrupted.replace(persons=persons, ignore_regions=regions)


def oracle_teacher(
    scene: Scene,
    skeleton: SkeletonSpec,
    cfg: LabelGenConfig,
    alpha: float = 1.0,
    smooth_sigma: float = 0.0,
) -> LabelSet:
    """Ideal teacher output: labels of the uncorrupted scene with an all-ones mask.

    ``smooth_sigma`` (grid cells) blurs the PAF channels and ``alpha`` in
    (0, 1] scales every channel, to mimic soft network output.
    """
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    labels = generate_labels(scene.persons, (), skeleton, cfg)
    maps, pafs = labels.maps, labels.pafs
    if smooth_sigma > 0:
        blurred = gaussian_filter(pafs.astype(np.float64), sigma=(0, 0, smooth_sigma, smooth_sigma))
        norm = np.sqrt(blurred[:, 0] ** 2 + blurred[:, 1] ** 2)
        blurred /= np.maximum(norm, 1.0)[:, None]
        pafs = blurred.astype(np.float32)
    if alpha != 1.0:
        maps = (maps * np.float32(alpha)).astype(np.float32)
        pafs = (pafs * np.float32(alpha)).astype(np.float32)
    return LabelSet(labels.grid, maps, pafs, np.ones(labels.grid.shape, np.uint8))

