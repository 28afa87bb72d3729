"""Detector output and its expansion into box-class candidate points."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .geometry import BoundingBox


class InvalidDetection(ValueError):
    pass


class EmptyCandidateSet(ValueError):
    """No candidate survived filtering; callers turn this into an empty result."""


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    scores: Mapping[int, float]

    def __post_init__(self):
        if not self.scores:
            raise InvalidDetection("detection carries no class scores")
        for cls, s in self.scores.items():
            if not (math.isfinite(s) and 0.0 <= s <= 1.0):
                raise InvalidDetection(f"score {s!r} for class {cls} outside [0, 1]")


@dataclass(frozen=True)
class CandidatePoint:
    point_id: int
    box_id: int
    class_id: int
    score: float


@dataclass
class CandidateSet:
    points: list[CandidatePoint]
    boxes: list[BoundingBox]
    source_count: int = 0
    theta_bg: float = 0.0

    def __len__(self):
        return len(self.points)

    @property
    def box_ids(self) -> list[int]:
        return [p.box_id for p in self.points]

    @property
    def class_ids(self) -> list[int]:
        return [p.class_id for p in self.points]

    @property
    def scores(self) -> list[float]:
        return [p.score for p in self.points]

    def box_of(self, p: CandidatePoint) -> BoundingBox:
        return self.boxes[p.box_id]

    def subset(self, point_ids: Sequence[int]) -> "CandidateSet":
        """Candidate set restricted to ``point_ids``, renumbered densely.

        Boxes are kept as-is so box ids stay meaningful across subsets.
        """
        pts = [self.points[i] for i in point_ids]
        renum = [CandidatePoint(k, p.box_id, p.class_id, p.score) for k, p in enumerate(pts)]
        return CandidateSet(renum, self.boxes, self.source_count, self.theta_bg)


def expand_detections(
    dets: Sequence[Detection],
    theta_bg: float,
    top_k: int = 5,
    top_n: int | None = 100,
) -> CandidateSet:
    """Turn detections into candidate points.

    Each detection contributes its ``top_k`` best classes with score strictly
    above ``theta_bg``; the image-wide ``top_n`` cap is applied afterwards,
    keeping the highest-scoring points.  Point ids follow box order, then
    descending score, then ascending class id.
    """
    if not 0.0 <= theta_bg < 1.0:
        raise ValueError(f"theta_bg must lie in [0, 1), got {theta_bg}")
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    if top_n is not None and top_n < 1:
        raise ValueError("top_n must be >= 1")

    raw = []  # (box_id, score, class_id)
    for box_id, det in enumerate(dets):
        ranked = sorted(det.scores.items(), key=lambda kv: (-kv[1], kv[0]))
        kept = [(c, s) for c, s in ranked if s > theta_bg][:top_k]
        raw.extend((box_id, s, c) for c, s in kept)

    if top_n is not None and len(raw) > top_n:
        by_score = sorted(range(len(raw)), key=lambda k: (-raw[k][1], k))
        keep = set(by_score[:top_n])
        raw = [r for k, r in enumerate(raw) if k in keep]

    points = [CandidatePoint(k, b, c, s) for k, (b, s, c) in enumerate(raw)]
    return CandidateSet(points, [d.box for d in dets], len(dets), theta_bg)
