"""Greedy non-maximum suppression baselines."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .candidates import CandidatePoint
from .geometry import BoundingBox, iou


@dataclass(frozen=True)
class NmsParams:
    iou_within: float = 0.7
    iou_across: float = 0.4

    def __post_init__(self):
        for name in ("iou_within", "iou_across"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


def greedy_nms(
    points: Sequence[CandidatePoint],
    boxes: Sequence[BoundingBox],
    threshold: float,
    class_scoped: bool,
) -> list[CandidatePoint]:
    """Keep points in descending score unless a kept point overlaps by more than ``threshold``.

    With ``class_scoped`` only kept points of the same class can suppress.
    Score ties go to the lower point id.  The survivors come back in the
    order they were kept.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    order = sorted(points, key=lambda p: (-p.score, p.point_id))
    kept: list[CandidatePoint] = []
    for p in order:
        box = boxes[p.box_id]
        suppressed = any(
            (not class_scoped or k.class_id == p.class_id) and iou(boxes[k.box_id], box) > threshold
            for k in kept
        )
        if not suppressed:
            kept.append(p)
    return kept


def ac_nms(points, boxes, threshold: float) -> list[CandidatePoint]:
    return greedy_nms(points, boxes, threshold, class_scoped=False)


def wc_ac_nms(points, boxes, params: NmsParams = NmsParams()) -> list[CandidatePoint]:
    within = greedy_nms(points, boxes, params.iou_within, class_scoped=True)
    return greedy_nms(within, boxes, params.iou_across, class_scoped=False)
