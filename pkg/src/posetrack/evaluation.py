"""PCK@0.2 with torso-size normalization, dataset drivers and table reports."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .geometry import Pose
from .topology import COCO17, TopologySubset, keypoint_name

INVISIBLE_RULES = ("exclude", "incorrect")


class DegenerateTorsoError(ValueError):
    pass


@dataclass
class EvalConfig:
    tolerance: float = 0.2
    subset: TopologySubset = COCO17
    invisible: str = "exclude"

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.invisible not in INVISIBLE_RULES:
            raise ValueError(f"invisible rule must be one of {INVISIBLE_RULES}")


def torso_size(gt: Pose) -> float:
    """Distance between mid-shoulder and mid-hip."""
    d = float(np.linalg.norm(gt.mid_shoulder - gt.mid_hip))
    if not d > 0:
        raise DegenerateTorsoError("ground-truth torso has zero length")
    return d


@dataclass
class SampleScore:
    correct: np.ndarray  # bool per subset member
    counted: np.ndarray  # bool per subset member

    @property
    def pck(self) -> float:
        n = int(self.counted.sum())
        return float("nan") if n == 0 else 100.0 * int(self.correct.sum()) / n


def pck(pred: Pose, gt: Pose, config: EvalConfig | None = None) -> SampleScore:
    """Keypoint k is correct iff its error is strictly below tolerance x torso size."""
    config = config or EvalConfig()
    idx = np.asarray(config.subset.members)
    err = np.linalg.norm(pred.points[idx] - gt.points[idx], axis=1)
    correct = err < config.tolerance * torso_size(gt)
    visible = gt.visibility[idx] > 0.5
    if config.invisible == "exclude":
        counted = visible
        correct = correct & visible
    else:
        counted = np.ones_like(visible)
        correct = correct & visible
    return SampleScore(correct, counted)


@dataclass
class EvalReport:
    label: str
    subset: TopologySubset
    correct: np.ndarray  # per subset member
    total: np.ndarray
    sample_pck: list[float] = field(default_factory=list)
    frames: int = 0
    seconds: float = 0.0
    dataset: str = "dataset"

    @property
    def pck(self) -> float:
        t = int(self.total.sum())
        return float("nan") if t == 0 else 100.0 * int(self.correct.sum()) / t

    @property
    def per_keypoint_pck(self) -> dict[str, float]:
        return {
            keypoint_name(k): (100.0 * c / t if t else float("nan"))
            for k, c, t in zip(self.subset.members, self.correct, self.total)
        }

    @property
    def fps(self) -> float:
        return self.frames / self.seconds if self.seconds > 0 else float("nan")

    def merge(self, other: "EvalReport") -> "EvalReport":
        return EvalReport(
            self.label,
            self.subset,
            self.correct + other.correct,
            self.total + other.total,
            self.sample_pck + other.sample_pck,
            self.frames + other.frames,
            self.seconds + other.seconds,
            self.dataset,
        )


def report_from_scores(scores: Sequence[SampleScore], config: EvalConfig, label="model", **kw) -> EvalReport:
    n = len(config.subset)
    correct = np.zeros(n, dtype=np.int64)
    total = np.zeros(n, dtype=np.int64)
    for s in scores:
        correct += s.correct
        total += s.counted
    return EvalReport(label, config.subset, correct, total, [s.pck for s in scores], **kw)


Predictor = Callable[[np.ndarray, Pose], Pose]


def evaluate_dataset(
    predictor: Predictor,
    samples,
    config: EvalConfig | None = None,
    label: str = "model",
    dataset: str = "dataset",
) -> EvalReport:
    """Score ``predictor(image, gt_pose)`` over ``(image, gt_pose)`` pairs.

    The predictor may use the ground truth only for alignment; wall time is
    measured around the predictor calls.
    """
    config = config or EvalConfig()
    samples = list(samples)
    if not samples:
        raise ValueError("nothing to evaluate")
    scores = []
    elapsed = 0.0
    for image, gt in samples:
        t0 = time.perf_counter()
        pred = predictor(image, gt)
        elapsed += time.perf_counter() - t0
        scores.append(pck(pred, gt, config))
    return report_from_scores(scores, config, label, frames=len(samples), seconds=elapsed, dataset=dataset)


@dataclass
class AgreementReport:
    a_vs_b: EvalReport
    b_vs_a: EvalReport

    @property
    def pck(self) -> float:
        return (self.a_vs_b.pck + self.b_vs_a.pck) / 2.0


def annotator_agreement(records_a, records_b, config: EvalConfig | None = None, label="annotators") -> AgreementReport:
    """Score B against A and A against B over the same images; report both and their mean."""
    config = config or EvalConfig()
    records_a, records_b = list(records_a), list(records_b)
    if [r.image for r in records_a] != [r.image for r in records_b]:
        raise ValueError("annotation sets cover different images")
    ab = report_from_scores([pck(b.pose, a.pose, config) for a, b in zip(records_a, records_b)], config, label)
    ba = report_from_scores([pck(a.pose, b.pose, config) for a, b in zip(records_a, records_b)], config, label)
    return AgreementReport(ab, ba)


def _table_rows(reports: Sequence[EvalReport], tolerance: float, digits: int = 1):
    datasets: list[str] = []
    models: dict[str, dict] = {}
    for r in reports:
        if r.dataset not in datasets:
            datasets.append(r.dataset)
        row = models.setdefault(r.label, {"frames": 0, "seconds": 0.0, "pck": {}})
        row["frames"] += r.frames
        row["seconds"] += r.seconds
        row["pck"][r.dataset] = r.pck
    header = ["Model", "FPS"] + [f"{d} PCK@{tolerance:g}" for d in datasets]
    rows = []
    for model, row in models.items():
        fps = row["frames"] / row["seconds"] if row["seconds"] > 0 else float("nan")
        rows.append([model, f"{fps:.{digits}f}"] + [
            f"{row['pck'][d]:.{digits}f}" if d in row["pck"] else "" for d in datasets
        ])
    return header, rows


def emit_report(reports: Sequence[EvalReport], fmt: str = "markdown", tolerance: float = 0.2) -> str:
    """Model | FPS | one PCK column per dataset; one row per model label."""
    if not reports:
        raise ValueError("no reports to emit")
    if fmt == "csv":
        header, rows = _table_rows(reports, tolerance, digits=4)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return buf.getvalue()
    if fmt != "markdown":
        raise ValueError(f"unknown report format {fmt!r}")
    header, rows = _table_rows(reports, tolerance)
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return "\n".join(lines) + "\n"


def per_keypoint_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["keypoint", "correct", "total", "pck"])
    for k, c, t in zip(report.subset.members, report.correct, report.total):
        writer.writerow([keypoint_name(k), int(c), int(t), f"{100.0 * c / t:.2f}" if t else ""])
    return buf.getvalue()
