"""Run a named regulariser on detections and evaluate it over scenes."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

from .baselines import ac_nms, wc_ac_nms
from .candidates import CandidateSet, Detection, expand_detections
from .config import RunConfig
from .evaluation import (
    EvalReport, GroundTruthObject, MatchResult, Prediction, compute_report, evaluate_scene,
)
from .inference import RegularizedResult, mapc_cluster, sapc_cluster
from .similarity import build_similarity_model
from .taxonomy import Taxonomy

METHODS = ("mapc", "sapc", "sapc+acnms", "wcacnms", "acnms")


class UnknownMethod(ValueError):
    pass


@dataclass
class Scene:
    detections: list[Detection]
    ground_truth: list[GroundTruthObject] = field(default_factory=list)
    image_size: tuple[float, float] = (0.0, 0.0)
    name: str = ""


@dataclass
class SelectedDetection:
    point_id: int
    box_id: int
    class_id: int
    score: float
    cluster_id: int | None = None


@dataclass
class MethodOutput:
    method: str
    candidates: CandidateSet
    selected: list[SelectedDetection]
    result: RegularizedResult | None = None

    def predictions(self) -> list[Prediction]:
        boxes = self.candidates.boxes
        return [Prediction(boxes[s.box_id], s.class_id, s.score) for s in self.selected]


def run_method(method: str, detections: Sequence[Detection], taxonomy: Taxonomy,
               config: RunConfig) -> MethodOutput:
    if method not in METHODS:
        raise UnknownMethod(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    cp = config.candidates
    top_k = 1 if (method != "mapc" and cp.single_label_baselines) else cp.top_k
    cands = expand_detections(detections, config.similarity.theta_bg, top_k, cp.top_n)

    if method in ("wcacnms", "acnms"):
        if method == "wcacnms":
            kept = wc_ac_nms(cands.points, cands.boxes, config.nms)
        else:
            kept = ac_nms(cands.points, cands.boxes, config.nms.iou_across)
        kept = sorted(kept, key=lambda p: p.point_id)
        sel = [SelectedDetection(p.point_id, p.box_id, p.class_id, p.score) for p in kept]
        return MethodOutput(method, cands, sel)

    if method == "mapc":
        if len(cands) == 0:
            result = RegularizedResult.empty(config.inference.trace_enabled)
        else:
            model = build_similarity_model(cands, taxonomy, config.similarity)
            result = mapc_cluster(cands, model, config.weights, config.inference)
    else:
        result = sapc_cluster(cands, config.similarity, config.weights, config.inference)

    sel = [
        SelectedDetection(j, cands.points[j].box_id, cands.points[j].class_id,
                          cands.points[j].score, k)
        for k, j in enumerate(result.exemplar_ids)
    ]
    if method == "sapc+acnms":
        survivors = ac_nms([cands.points[s.point_id] for s in sel], cands.boxes, config.nms.iou_across)
        keep = {p.point_id for p in survivors}
        sel = [s for s in sel if s.point_id in keep]
    return MethodOutput(method, cands, sel, result)


def match_scene(method: str, scene: Scene, taxonomy: Taxonomy, config: RunConfig) -> MatchResult:
    out = run_method(method, scene.detections, taxonomy, config)
    return evaluate_scene(out.predictions(), scene.ground_truth, taxonomy, config.evaluation)


def evaluate_scenes(method: str, scenes: Sequence[Scene], taxonomy: Taxonomy, config: RunConfig,
                    threads: int = 1) -> EvalReport:
    """Pooled (micro-averaged) report of ``method`` over ``scenes``."""
    def one(scene):
        return match_scene(method, scene, taxonomy, config)

    if threads > 1 and len(scenes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            matches = list(pool.map(one, scenes))
    else:
        matches = [one(s) for s in scenes]
    return compute_report(reduce(lambda a, b: a + b, matches, MatchResult()))
