"""Evaluation metrics and accounting: mask IOU, keypoint agreement,
seconds-per-label statistics, and the rig cost break-even model.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .model import Keypoint, Mask, TimingRecord

MaskLike = Union[Mask, np.ndarray]


def _binary_iou(a: np.ndarray, b: np.ndarray) -> float:
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a, b).sum() / union)


def class_ious(a: Mask, b: Mask, class_ids: Optional[Sequence[int]] = None) -> Dict[int, float]:
    """Per-class IOU over an explicit or inferred class vocabulary."""
    if a.shape != b.shape:
        raise ValueError(f"mask dimensions differ: {a.shape} vs {b.shape}")
    if class_ids is None:
        present = set(np.unique(a.classes)) | set(np.unique(b.classes))
        class_ids = sorted(c for c in present if c != 0)
    return {int(c): _binary_iou(a.classes == c, b.classes == c) for c in class_ids}


def iou(a: MaskLike, b: MaskLike) -> float:
    """Intersection over union.

    Binary arrays compare directly; class masks average the per-class IOU
    over every class present in either mask. A class empty in both counts
    as 1 (perfect agreement on absence).
    """
    if isinstance(a, Mask) != isinstance(b, Mask):
        raise TypeError("compare Mask with Mask or array with array")
    if isinstance(a, Mask):
        per_class = class_ious(a, b)
        if not per_class:
            return 1.0
        return float(np.mean(list(per_class.values())))
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError(f"mask dimensions differ: {a.shape} vs {b.shape}")
    return _binary_iou(a, b)


def keypoint_agreement(
    pred: Sequence[Keypoint], ref: Sequence[Keypoint], radius: float = 5.0
) -> Tuple[float, float, float]:
    """Greedy nearest-pair matching within radius, same class only.

    Returns (precision, recall, mean matched distance). Each point matches
    at most once; empty sides follow the usual conventions (no predictions
    means no false positives).
    """
    pairs = []
    for i, p in enumerate(pred):
        for j, r in enumerate(ref):
            if p.class_id != r.class_id:
                continue
            d = math.hypot(p.u - r.u, p.v - r.v)
            if d <= radius:
                pairs.append((d, i, j))
    pairs.sort()
    used_pred = set()
    used_ref = set()
    distances = []
    for d, i, j in pairs:
        if i in used_pred or j in used_ref:
            continue
        used_pred.add(i)
        used_ref.add(j)
        distances.append(d)
    matched = len(distances)
    precision = matched / len(pred) if pred else 1.0
    recall = matched / len(ref) if ref else 1.0
    mean_distance = float(np.mean(distances)) if distances else 0.0
    return precision, recall, mean_distance


def spl_summary(timings: Sequence[TimingRecord]) -> Dict[str, float]:
    """Mean, median, and p95 of label-extraction seconds."""
    if not timings:
        raise ValueError("need at least one timing record")
    values = np.array([t.label_seconds for t in timings], dtype=np.float64)
    return {
        "mean": float(values.mean()),
        "median": float(np.median(values)),
        "p95": float(np.percentile(values, 95)),
        "count": float(len(values)),
    }


def cost_breakeven(setup_cost, price_per_label, labels_per_image) -> int:
    """Images after which the rig beats paying per label.

    ceil(setup_cost / (price_per_label x labels_per_image)), evaluated in
    exact decimal arithmetic so currency values never pick up float error.
    """
    setup = Fraction(str(setup_cost))
    price = Fraction(str(price_per_label))
    labels = Fraction(str(labels_per_image))
    if setup <= 0 or price <= 0 or labels <= 0:
        raise ValueError("all cost inputs must be positive")
    quotient = setup / (price * labels)
    return int(math.ceil(quotient))


Labels = Tuple[Mask, Sequence[Keypoint]]


@dataclass
class EvalReport:
    """Aggregate agreement statistics across an aligned sample set."""

    sample_count: int
    per_class_iou: Dict[int, float]
    mean_iou: float
    pixel_precision: float
    pixel_recall: float
    keypoint_precision: Optional[float] = None
    keypoint_recall: Optional[float] = None
    keypoint_mean_distance: Optional[float] = None
    spl: Optional[Dict[str, float]] = None

    def __post_init__(self):
        values = list(self.per_class_iou.values()) + [
            self.mean_iou,
            self.pixel_precision,
            self.pixel_recall,
        ]
        for v in values:
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"ratio out of [0,1]: {v}")

    def to_dict(self) -> dict:
        return {
            "sample_count": self.sample_count,
            "per_class_iou": {str(k): v for k, v in self.per_class_iou.items()},
            "mean_iou": self.mean_iou,
            "pixel_precision": self.pixel_precision,
            "pixel_recall": self.pixel_recall,
            "keypoint_precision": self.keypoint_precision,
            "keypoint_recall": self.keypoint_recall,
            "keypoint_mean_distance": self.keypoint_mean_distance,
            "spl": self.spl,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        """Aligned-column table, one row per class plus the mean."""
        rows = [("class", "iou")]
        for class_id in sorted(self.per_class_iou):
            rows.append((str(class_id), f"{self.per_class_iou[class_id]:.3f}"))
        rows.append(("mean", f"{self.mean_iou:.3f}"))
        width0 = max(len(r[0]) for r in rows)
        width1 = max(len(r[1]) for r in rows)
        lines = [f"{r[0]:<{width0}}  {r[1]:>{width1}}" for r in rows]
        lines.append(f"samples: {self.sample_count}")
        lines.append(f"pixel precision/recall: {self.pixel_precision:.3f}/{self.pixel_recall:.3f}")
        if self.keypoint_precision is not None:
            lines.append(
                "keypoints p/r/dist: "
                f"{self.keypoint_precision:.3f}/{self.keypoint_recall:.3f}/"
                f"{self.keypoint_mean_distance:.2f}px"
            )
        if self.spl:
            lines.append(
                f"spl mean/median/p95: {self.spl['mean']:.3f}/{self.spl['median']:.3f}/"
                f"{self.spl['p95']:.3f} s"
            )
        return "\n".join(lines)


def compare_labelers(
    luv_labels: Mapping[str, Labels],
    human_labels: Mapping[str, Labels],
    keypoint_radius: float = 5.0,
    spl: Optional[Dict[str, float]] = None,
) -> EvalReport:
    """Agreement between two labelings of the same samples."""
    if set(luv_labels) != set(human_labels):
        only_a = sorted(set(luv_labels) - set(human_labels))
        only_b = sorted(set(human_labels) - set(luv_labels))
        raise ValueError(f"sample ids misaligned: extra {only_a}, missing {only_b}")
    if not luv_labels:
        raise ValueError("need at least one sample")

    per_class_scores: Dict[int, List[float]] = {}
    tp = fp = fn = 0
    kp_precisions: List[float] = []
    kp_recalls: List[float] = []
    kp_distances: List[float] = []
    any_keypoints = False

    for sample_id in sorted(luv_labels):
        mask_a, kps_a = luv_labels[sample_id]
        mask_b, kps_b = human_labels[sample_id]
        for class_id, value in class_ious(mask_a, mask_b).items():
            per_class_scores.setdefault(class_id, []).append(value)
        a_fg = mask_a.classes != 0
        agree = (mask_a.classes == mask_b.classes) & a_fg
        tp += int(agree.sum())
        fp += int((a_fg & ~agree).sum())
        fn += int(((mask_b.classes != 0) & (mask_a.classes != mask_b.classes)).sum())
        if kps_a or kps_b:
            any_keypoints = True
            p, r, d = keypoint_agreement(kps_a, kps_b, radius=keypoint_radius)
            kp_precisions.append(p)
            kp_recalls.append(r)
            kp_distances.append(d)

    per_class = {c: float(np.mean(v)) for c, v in sorted(per_class_scores.items())}
    mean_iou = float(np.mean(list(per_class.values()))) if per_class else 1.0
    return EvalReport(
        sample_count=len(luv_labels),
        per_class_iou=per_class,
        mean_iou=mean_iou,
        pixel_precision=tp / (tp + fp) if tp + fp else 1.0,
        pixel_recall=tp / (tp + fn) if tp + fn else 1.0,
        keypoint_precision=float(np.mean(kp_precisions)) if any_keypoints else None,
        keypoint_recall=float(np.mean(kp_recalls)) if any_keypoints else None,
        keypoint_mean_distance=float(np.mean(kp_distances)) if any_keypoints else None,
        spl=spl,
    )
