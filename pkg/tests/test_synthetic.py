import numpy as np
import pytest

from paflc import Scene
from paflc.correction import correct_labels
from paflc.errors import DomainError
from paflc.labelgen import LabelGenConfig, generate_labels, paf_coverage
from paflc.synthetic import (
    CorruptionConfig, DropRegion, Hide, Translate, gen_scene, inject_failures, oracle_teacher,
    replay_ledger, stick_figure,
)

ALL_MODES = dict(protrusion=True, occlusion_rate=0.6, miss_rate=0.15, drop_mask_rate=0.5)


def scene_for(seed, skeleton, n=3, **kw):
    return gen_scene(np.random.default_rng(seed), n, (480, 480), skeleton, image_id=seed, **kw)


def test_zero_persons(skeleton):
    s = gen_scene(np.random.default_rng(0), 0, (100, 100), skeleton)
    assert s.persons == () and s.dims == (100, 100)


def test_deterministic(skeleton):
    assert scene_for(5, skeleton, crowd_regions=2) == scene_for(5, skeleton, crowd_regions=2)
    assert scene_for(5, skeleton) != scene_for(6, skeleton)


def test_image_too_small(skeleton):
    with pytest.raises(DomainError):
        gen_scene(np.random.default_rng(0), 1, (60, 60), skeleton)
    with pytest.raises(DomainError):
        gen_scene(np.random.default_rng(0), -1, (600, 600), skeleton)


def test_figures_are_inside_and_labeled(skeleton):
    for seed in range(20):
        s = scene_for(seed, skeleton, n=2)
        for p in s.persons:
            assert (p.state == 2).all()
            assert (p.xy >= 0).all() and (p.xy[:, 0] < 480).all() and (p.xy[:, 1] < 480).all()


def test_stick_figure_proportions():
    fig = stick_figure(np.random.default_rng(0), 200.0)
    shoulder = np.hypot(*(fig["left_shoulder"] - fig["right_shoulder"]))
    assert shoulder == pytest.approx(0.26 * 200, rel=1e-9)


def test_corruption_config_validation():
    with pytest.raises(DomainError):
        CorruptionConfig(miss_rate=1.5)


def test_no_corruption_is_identity(skeleton):
    s = scene_for(1, skeleton, crowd_regions=2)
    res = inject_failures(s, CorruptionConfig(), skeleton)
    assert res.corrupted == s and res.reference == s and res.ledger == []


def test_miss_rate_one_removes_everything(skeleton):
    s = scene_for(2, skeleton)
    res = inject_failures(s, CorruptionConfig(miss_rate=1.0), skeleton)
    assert all((p.state == 0).all() for p in res.corrupted.persons)
    assert len(res.keypoint_entries) == 3 * 18


def test_mask_drop_keeps_persons(skeleton):
    s = scene_for(3, skeleton, crowd_regions=3)
    res = inject_failures(s, CorruptionConfig(drop_mask_rate=1.0), skeleton)
    assert res.corrupted.ignore_regions == ()
    assert res.corrupted.persons == s.persons
    assert sum(isinstance(e, DropRegion) for e in res.ledger) == len(s.ignore_regions)


def test_protrusion_removes_a_limb_channel(skeleton):
    hits = 0
    for seed in range(10):
        s = scene_for(seed, skeleton, n=1)
        res = inject_failures(s, CorruptionConfig(protrusion=True, seed=seed), skeleton)
        assert any(isinstance(e, Translate) for e in res.ledger)
        cfg = LabelGenConfig.for_image(480, 480)
        ref = generate_labels(res.reference.persons, [], skeleton, cfg)
        cor = generate_labels(res.corrupted.persons, [], skeleton, cfg)
        lost = [c for c in range(skeleton.num_limbs) if ref.pafs[c].any() and not cor.pafs[c].any()]
        hits += bool(lost)
    assert hits == 10


def test_occlusion_only_hits_overlapping_pairs(skeleton):
    s = scene_for(4, skeleton, n=3)  # separated by default
    res = inject_failures(s, CorruptionConfig(occlusion_rate=1.0), skeleton)
    assert res.ledger == []
    crowded = scene_for(4, skeleton, n=4, min_gap=None)
    res = inject_failures(crowded, CorruptionConfig(occlusion_rate=1.0), skeleton)
    assert all(e.reason == "occlusion" for e in res.ledger)


def test_ledger_replay(skeleton):
    for seed in range(30):
        s = scene_for(seed, skeleton, n=3, min_gap=None, crowd_regions=2)
        res = inject_failures(s, CorruptionConfig(seed=seed, **ALL_MODES), skeleton)
        assert replay_ledger(res.corrupted, res.ledger) == s
        assert replay_ledger(res.corrupted, res.ledger, undo_translations=False) == res.reference
        assert all(e.to_json()["kind"] in ("translate", "hide", "drop_region") for e in res.ledger)


def test_corruption_only_removes_information(skeleton):
    cfg = LabelGenConfig.for_image(480, 480)
    for seed in range(20):
        s = scene_for(seed, skeleton, n=3, min_gap=None)
        res = inject_failures(s, CorruptionConfig(seed=seed, **ALL_MODES), skeleton)
        ref = generate_labels(res.reference.persons, [], skeleton, cfg)
        cor = generate_labels(res.corrupted.persons, [], skeleton, cfg)
        assert (cor.maps <= ref.maps).all()
        single = paf_coverage(res.reference.persons, skeleton, cfg) <= 1
        support_ref = np.hypot(ref.pafs[:, 0], ref.pafs[:, 1]) > 0
        support_cor = np.hypot(cor.pafs[:, 0], cor.pafs[:, 1]) > 0
        assert not (support_cor & ~support_ref & single).any()


def test_oracle_teacher(skeleton):
    s = scene_for(8, skeleton, crowd_regions=2)
    cfg = LabelGenConfig.for_image(480, 480)
    plain = oracle_teacher(s, skeleton, cfg)
    labels = generate_labels(s.persons, s.ignore_regions, skeleton, cfg)
    assert plain.maps.tobytes() == labels.maps.tobytes() and plain.pafs.tobytes() == labels.pafs.tobytes()
    assert plain.mask.all()
    soft = oracle_teacher(s, skeleton, cfg, alpha=0.6)
    fixed = correct_labels(labels, soft)
    unit = np.isclose(np.hypot(labels.pafs[:, 0], labels.pafs[:, 1]), 1.0)
    assert np.array_equal(fixed.pafs.transpose(0, 2, 3, 1)[unit], labels.pafs.transpose(0, 2, 3, 1)[unit])
    blurred = oracle_teacher(s, skeleton, cfg, smooth_sigma=1.0)
    assert np.hypot(blurred.pafs[:, 0], blurred.pafs[:, 1]).max() <= 1.0 + 1e-6
    with pytest.raises(DomainError):
        oracle_teacher(s, skeleton, cfg, alpha=0.0)


def test_writes_as_annotations(skeleton, tmp_path):
    from paflc.io_formats import read_annotations, write_annotations

    scenes = [scene_for(k, skeleton, crowd_regions=2) for k in range(4)]
    write_annotations(tmp_path / "s.json", scenes, skeleton)
    back = read_annotations(tmp_path / "s.json", skeleton)
    assert list(back.values()) == scenes
