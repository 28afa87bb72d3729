"""Spatial-semantic similarity between candidate points.

``pair_sim[i, j] = lam * IoU(i, j) + (1 - lam) * Lin(C_i, C_j)``, the
self-similarity of a point with detector score ``p`` is ``-1 / (p - theta_bg)``
and the repellence between two co-selected exemplars is ``-(pair_sim + 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .candidates import CandidatePoint, CandidateSet, EmptyCandidateSet
from .geometry import BoundingBox, iou
from .taxonomy import Taxonomy, lin_similarity


class ScoreBelowThreshold(ValueError):
    pass


@dataclass(frozen=True)
class SimilarityParams:
    lam: float = 0.5
    theta_bg: float = 0.3

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")
        if not 0.0 <= self.theta_bg < 1.0:
            raise ValueError(f"theta_bg must lie in [0, 1), got {self.theta_bg}")


@dataclass(frozen=True)
class SimilarityModel:
    pair_sim: np.ndarray
    self_sim: np.ndarray
    repellence: np.ndarray

    @property
    def n(self) -> int:
        return len(self.self_sim)


def pair_similarity(
    i: CandidatePoint,
    j: CandidatePoint,
    boxes: list[BoundingBox],
    taxonomy: Taxonomy,
    params: SimilarityParams,
) -> float:
    spatial = iou(boxes[i.box_id], boxes[j.box_id])
    semantic = lin_similarity(taxonomy, i.class_id, j.class_id)
    return params.lam * spatial + (1.0 - params.lam) * semantic


def self_similarity(score: float, theta_bg: float) -> float:
    if not score > theta_bg:
        raise ScoreBelowThreshold(f"score {score} not above theta_bg {theta_bg}")
    return -1.0 / (score - theta_bg)


def build_similarity_model(
    cands: CandidateSet, taxonomy: Taxonomy, params: SimilarityParams
) -> SimilarityModel:
    n = len(cands)
    if n == 0:
        raise EmptyCandidateSet("cannot build a similarity model without points")
    pts = cands.points

    # IoU per box pair and Lin per class pair are shared by many points
    box_iou: dict[tuple[int, int], float] = {}
    class_lin: dict[tuple[int, int], float] = {}
    pair = np.zeros((n, n))
    for a in range(n):
        pa = pts[a]
        for b in range(a, n):
            pb = pts[b]
            kb = (min(pa.box_id, pb.box_id), max(pa.box_id, pb.box_id))
            if kb not in box_iou:
                box_iou[kb] = iou(cands.boxes[kb[0]], cands.boxes[kb[1]])
            kc = (min(pa.class_id, pb.class_id), max(pa.class_id, pb.class_id))
            if kc not in class_lin:
                class_lin[kc] = lin_similarity(taxonomy, kc[0], kc[1])
            pair[a, b] = pair[b, a] = params.lam * box_iou[kb] + (1.0 - params.lam) * class_lin[kc]

    selfs = np.array([self_similarity(p.score, params.theta_bg) for p in pts])
    return SimilarityModel(pair, selfs, -(pair + 1.0))


def iou_only_model(cands: CandidateSet, theta_bg: float) -> SimilarityModel:
    """Similarity model with the spatial term alone, as used per class by SAPC."""
    n = len(cands)
    if n == 0:
        raise EmptyCandidateSet("cannot build a similarity model without points")
    pair = np.zeros((n, n))
    for a in range(n):
        for b in range(a, n):
            pair[a, b] = pair[b, a] = iou(cands.box_of(cands.points[a]), cands.box_of(cands.points[b]))
    selfs = np.array([self_similarity(p.score, theta_bg) for p in cands.points])
    return SimilarityModel(pair, selfs, -(pair + 1.0))
