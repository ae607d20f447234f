import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from posetrack.evaluation import (
    DegenerateTorsoError,
    EvalConfig,
    EvalReport,
    annotator_agreement,
    emit_report,
    evaluate_dataset,
    pck,
    per_keypoint_csv,
    report_from_scores,
    torso_size,
)
from posetrack.geometry import Pose, SimilarityTransform, transform_pose
from posetrack.synthdata.io import Record
from posetrack.topology import COCO17, FULL33

from support import puppet_poses

COCO = list(COCO17.members)


def brute_force(pairs, tol=0.2, members=COCO):
    """Independent PCK: loop over keypoints, exclude invisible ground truth."""
    correct = total = 0
    for pred, gt in pairs:
        ms = (gt.points[11] + gt.points[12]) / 2
        mh = (gt.points[23] + gt.points[24]) / 2
        torso = math.hypot(*(ms - mh))
        for k in members:
            if gt.visibility[k] <= 0.5:
                continue
            total += 1
            dx, dy = pred.points[k] - gt.points[k]
            correct += math.hypot(dx, dy) < tol * torso
    return 100.0 * correct / total


def noisy(pose, rng, sigma):
    return Pose(pose.points + rng.normal(size=(33, 2)) * sigma, pose.visibility)


def _pose_with_torso():
    pts = np.zeros((33, 2))
    pts[11], pts[12], pts[23], pts[24] = (0, 0), (2, 0), (0, 4), (2, 4)
    pts[[0, 2, 5, 7, 8]] = (1, -2)
    return Pose(pts)


class TestTorso:
    def test_example(self):
        assert torso_size(_pose_with_torso()) == 4

    def test_homogeneous_and_isometric(self):
        p = _pose_with_torso()
        assert torso_size(transform_pose(p, SimilarityTransform(scale=2))) == pytest.approx(8)
        assert torso_size(transform_pose(p, SimilarityTransform(1.1, 1, 3, -7))) == pytest.approx(4)

    def test_degenerate(self):
        with pytest.raises(DegenerateTorsoError):
            torso_size(Pose(np.zeros((33, 2))))


class TestPck:
    def test_identity(self):
        p = puppet_poses(1)[0]
        assert pck(p, p).pck == 100.0

    def test_one_displaced(self):
        gt = _pose_with_torso()
        pred = gt.copy()
        pred.points[15] += (0.21 * 4, 0)
        assert pck(pred, gt).pck == pytest.approx(100 * 16 / 17)

    def test_boundary_is_incorrect(self):
        gt = _pose_with_torso()
        pred = gt.copy()
        pred.points[15] += (0.0, 0.2 * 4)
        assert not pck(pred, gt).correct[COCO.index(15)]

    def test_invisible_rules(self):
        gt = _pose_with_torso()
        gt.visibility[15] = 0
        pred = gt.copy()
        pred.points[15] += 100
        assert pck(pred, gt).pck == 100.0
        inc = pck(gt, gt, EvalConfig(invisible="incorrect"))
        assert inc.pck == pytest.approx(100 * 16 / 17)

    def test_all_invisible_is_nan(self):
        gt = _pose_with_torso()
        gt.visibility[:] = 0
        assert math.isnan(pck(gt, gt).pck)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            EvalConfig(tolerance=0)
        with pytest.raises(ValueError):
            EvalConfig(invisible="ignore")

    def test_full33_subset(self):
        p = puppet_poses(1)[0]
        assert pck(p, p, EvalConfig(subset=FULL33)).counted.size == 33


@settings(max_examples=200, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    s=st.floats(0.01, 100),
    angle=st.floats(-math.pi, math.pi),
    shift=st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)),
)
def test_pck_invariances(seed, s, angle, shift):
    rng = np.random.default_rng(seed)
    gt = Pose(rng.normal(size=(33, 2)) * 20, rng.integers(0, 2, 33))
    pred = noisy(gt, rng, 4.0)
    base = pck(pred, gt).correct
    for t in (SimilarityTransform(scale=s), SimilarityTransform(angle, 1.0, *shift)):
        moved = pck(transform_pose(pred, t), transform_pose(gt, t)).correct
        # decisions within float noise of the threshold may legitimately flip
        err = np.linalg.norm(pred.points - gt.points, axis=1)[COCO]
        margin = np.abs(err - 0.2 * torso_size(gt)) > 1e-9 * (1 + err)
        assert np.array_equal(moved[margin], base[margin])


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), t1=st.floats(0.01, 1), t2=st.floats(0.01, 1))
def test_pck_monotone_in_tolerance(seed, t1, t2):
    rng = np.random.default_rng(seed)
    gt = Pose(rng.normal(size=(33, 2)) * 20)
    pred = noisy(gt, rng, 5.0)
    lo, hi = sorted((t1, t2))
    assert pck(pred, gt, EvalConfig(tolerance=lo)).pck <= pck(pred, gt, EvalConfig(tolerance=hi)).pck


class TestDataset:
    def test_ground_truth_predictor(self):
        poses = puppet_poses(10)
        rep = evaluate_dataset(lambda img, gt: gt, [(None, p) for p in poses])
        assert rep.pck == 100.0 and rep.frames == 10

    def test_constant_predictor_matches_brute_force(self):
        poses = puppet_poses(30, seed=4)
        centre = lambda img, gt: Pose(np.tile(gt.mid_hip, (33, 1)))  # noqa: E731
        rep = evaluate_dataset(centre, [(None, p) for p in poses])
        assert rep.pck == pytest.approx(brute_force([(centre(None, p), p) for p in poses]), abs=1e-9)

    def test_random_pairs_match_brute_force(self):
        rng = np.random.default_rng(0)
        gts = [Pose(rng.normal(size=(33, 2)) * 30, rng.integers(0, 2, 33)) for _ in range(100)]
        preds = [noisy(g, rng, rng.uniform(1, 10)) for g in gts]
        lookup = {id(g): p for g, p in zip(gts, preds)}
        rep = evaluate_dataset(lambda img, gt: lookup[id(gt)], [(None, g) for g in gts])
        assert rep.pck == pytest.approx(brute_force(list(zip(preds, gts))), abs=1e-9)

    def test_halves_merge(self):
        rng = np.random.default_rng(1)
        gts = puppet_poses(20, seed=2)
        pairs = [(noisy(g, rng, 3), g) for g in gts]
        lookup = {id(g): p for p, g in pairs}
        pred = lambda img, gt: lookup[id(gt)]  # noqa: E731
        whole = evaluate_dataset(pred, [(None, g) for g in gts])
        a = evaluate_dataset(pred, [(None, g) for g in gts[:7]])
        b = evaluate_dataset(pred, [(None, g) for g in gts[7:]])
        merged = a.merge(b)
        assert merged.pck == pytest.approx(whole.pck, abs=1e-12)
        assert np.array_equal(merged.correct, whole.correct)

    def test_empty(self):
        with pytest.raises(ValueError):
            evaluate_dataset(lambda i, g: g, [])


class TestAgreement:
    def _records(self, poses):
        return [Record(f"{i}.ppm", p) for i, p in enumerate(poses)]

    def test_identical(self):
        recs = self._records(puppet_poses(5))
        assert annotator_agreement(recs, recs).pck == 100.0

    def test_noisy_matches_brute_force_and_symmetric(self):
        rng = np.random.default_rng(0)
        a = puppet_poses(50, seed=9)
        b = [noisy(p, rng, 0.05 * torso_size(p)) for p in a]
        ra, rb = self._records(a), self._records(b)
        rep = annotator_agreement(ra, rb)
        expect = (brute_force(list(zip(b, a))) + brute_force(list(zip(a, b)))) / 2
        assert rep.pck == pytest.approx(expect, abs=1e-9)
        assert annotator_agreement(rb, ra).pck == pytest.approx(rep.pck, abs=1e-12)

    def test_mismatched_images(self):
        recs = self._records(puppet_poses(2))
        with pytest.raises(ValueError):
            annotator_agreement(recs, recs[::-1])


class TestReport:
    def _report(self, label="full", dataset="synth", frames=50, seconds=2.0):
        gts = puppet_poses(3)
        rep = report_from_scores([pck(g, g) for g in gts], EvalConfig(), label, frames=frames,
                                 seconds=seconds, dataset=dataset)
        return rep

    def test_markdown_one_row(self):
        text = emit_report([self._report()])
        lines = text.strip().splitlines()
        assert lines[0] == "| Model | FPS | synth PCK@0.2 |"
        assert len(lines) == 3 and lines[2] == "| full | 25.0 | 100.0 |"

    def test_csv_round_trip(self):
        reps = [self._report(), self._report("lite", seconds=1.0), self._report("lite", "clip", 10, 1.0)]
        rows = list(csv.reader(io.StringIO(emit_report(reps, "csv"))))
        assert rows[0] == ["Model", "FPS", "synth PCK@0.2", "clip PCK@0.2"]
        assert rows[1] == ["full", "25.0000", "100.0000", ""]
        assert float(rows[2][1]) == pytest.approx(60 / 2.0)
        assert float(rows[2][3]) == 100.0

    def test_fps_is_frames_over_time(self):
        assert self._report(frames=30, seconds=1.5).fps == 20.0

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            emit_report([self._report()], "html")
        with pytest.raises(ValueError):
            emit_report([])

    def test_per_keypoint_csv(self):
        lines = per_keypoint_csv(self._report()).splitlines()
        assert lines[0] == "keypoint,correct,total,pck" and len(lines) == 18
        assert lines[1] == "Nose,3,3,100.00"
