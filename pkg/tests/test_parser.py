import itertools
import math

import numpy as np
import pytest

from paflc import GridSpec
from paflc.errors import DomainError
from paflc.labelgen import LabelGenConfig, generate_labels
from paflc.parser import (
    ParserConfig, PartCandidate, PoseResult, find_peaks, greedy_match, limb_score, parse_poses,
)
from paflc.synthetic import gen_scene

from _helpers import brute_greedy


class TestFindPeaks:
    def test_threshold_and_order(self):
        v = np.zeros((6, 6))
        v[1, 1], v[4, 4], v[1, 4] = 0.5, 0.9, 0.05
        peaks = find_peaks(v, 0.1, refine=False)
        assert [(p.x, p.y, p.score) for p in peaks] == [(4.0, 4.0, 0.9), (1.0, 1.0, 0.5)]

    def test_threshold_domain(self):
        with pytest.raises(DomainError):
            find_peaks(np.zeros((3, 3)), 1.5)

    def test_refinement_recovers_offset_gaussian(self):
        ys, xs = np.mgrid[0:11, 0:11].astype(float)
        cx, cy = 5.3, 4.8
        v = np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2 * 1.2**2))
        (p,) = find_peaks(v, 0.5)
        assert abs(p.x - cx) < 0.05 and abs(p.y - cy) < 0.05

    def test_plateau_yields_one_peak(self):
        v = np.zeros((5, 5))
        v[2, 1:4] = 0.7
        assert len(find_peaks(v, 0.1)) == 1


class TestLimbScore:
    def test_aligned_and_opposed(self):
        paf = np.zeros((2, 5, 10))
        paf[0] = 1.0
        a, b = PartCandidate(0, 1, 2, 1), PartCandidate(1, 8, 2, 1)
        assert limb_score(paf, a, b) == pytest.approx(1.0)
        assert limb_score(paf, b, a) == pytest.approx(-1.0)

    def test_diagonal_projection(self):
        paf = np.zeros((2, 9, 9))
        paf[1] = 1.0
        a, b = PartCandidate(0, 0, 0, 1), PartCandidate(1, 6, 6, 1)
        assert limb_score(paf, a, b) == pytest.approx(math.sqrt(0.5))

    def test_coincident_candidates_score_zero(self):
        paf = np.ones((2, 4, 4))
        a = PartCandidate(0, 1, 1, 1)
        assert limb_score(paf, a, a) == 0.0


class TestGreedyMatch:
    def test_simple(self):
        s = [[0.9, 0.8], [0.85, 0.1]]
        assert greedy_match([0, 1], [0, 1], s, 0.05) == [(0, 0, 0.9), (1, 1, 0.1)]

    def test_nan_and_threshold(self):
        s = [[float("nan"), 0.2], [0.01, 0.3]]
        assert greedy_match([0, 1], [0, 1], s, 0.05) == [(1, 1, 0.3)]

    def test_matches_brute_force_on_random_matrices(self, rng):
        levels = np.array([np.nan, 0.0, 0.25, 0.5, 0.75, 1.0])
        for na, nb in itertools.product(range(6), range(6)):
            for _ in range(40):
                s = levels[rng.integers(0, len(levels), (na, nb))]
                assert greedy_match(list(range(na)), list(range(nb)), s, 0.25) == brute_greedy(s, 0.25)


def test_pose_json_round_trip():
    p = PoseResult(((1.0, 2.0, 0.5), None), 1.25)
    assert PoseResult.from_json(p.to_json()) == p


def test_rejects_mismatched_skeleton(skeleton):
    grid = GridSpec(4, 4)
    with pytest.raises(DomainError):
        parse_poses((np.zeros((3, 4, 4)), np.zeros((19, 2, 4, 4))), skeleton, grid=grid)


def test_empty_labels_give_no_poses(skeleton):
    labels = generate_labels([], [], skeleton, LabelGenConfig.for_image(64, 64))
    assert parse_poses(labels, skeleton) == []


def test_min_parts_filters(skeleton):
    rng = np.random.default_rng(0)
    scene = gen_scene(rng, 1, (400, 400), skeleton)
    labels = generate_labels(scene.persons, [], skeleton, LabelGenConfig.for_image(400, 400))
    assert len(parse_poses(labels, skeleton, ParserConfig(min_parts=18))) == 1
    with pytest.raises(DomainError):
        ParserConfig(min_parts=0)


def test_three_person_scenes_round_trip(skeleton):
    recovered = total = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        scene = gen_scene(rng, 3, (640, 640), skeleton)
        cfg = LabelGenConfig.for_image(640, 640)
        poses = parse_poses(generate_labels(scene.persons, [], skeleton, cfg), skeleton)
        total += 3
        for person in scene.persons:
            for pose in poses:
                if pose.num_parts != 18:
                    continue
                got = np.array([p[:2] for p in pose.parts])
                if np.hypot(*(got - person.xy).T).max() <= cfg.grid.stride:
                    recovered += 1
                    break
    assert recovered == total == 300
