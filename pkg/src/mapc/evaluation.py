"""Ground-truth matching, precision/recall/F1 and false-positive diagnosis."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .geometry import BoundingBox, iou
from .taxonomy import Taxonomy, is_ancestor


class AmbiguousTargets(ValueError):
    pass


class UnknownParameter(KeyError):
    def __str__(self):
        return f"unknown parameter {self.args[0]!r}"


@dataclass(frozen=True)
class GroundTruthObject:
    box: BoundingBox
    class_id: int


@dataclass(frozen=True)
class Prediction:
    box: BoundingBox
    class_id: int
    score: float


@dataclass(frozen=True)
class EvalConfig:
    iou_threshold: float = 0.5
    parent_relabel_targets: frozenset[int] | None = None

    def __post_init__(self):
        if not 0.0 < self.iou_threshold <= 1.0:
            raise ValueError(f"iou_threshold must lie in (0, 1], got {self.iou_threshold}")


@dataclass
class MatchResult:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    wrong_label: int = 0
    wrong_overlap: int = 0
    # (prediction index, wrong_label, wrong_overlap) per false positive
    diagnoses: list[tuple[int, bool, bool]] = field(default_factory=list)

    def __add__(self, other: "MatchResult") -> "MatchResult":
        return MatchResult(
            self.tp + other.tp, self.fp + other.fp, self.fn + other.fn,
            self.wrong_label + other.wrong_label, self.wrong_overlap + other.wrong_overlap,
        )


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f1: float
    wrong_label_fraction: float
    wrong_overlap_fraction: float
    tp: int
    fp: int
    fn: int

    def as_dict(self) -> dict:
        return {
            "precision": self.precision, "recall": self.recall, "f1": self.f1,
            "wrong_label_fraction": self.wrong_label_fraction,
            "wrong_overlap_fraction": self.wrong_overlap_fraction,
            "tp": self.tp, "fp": self.fp, "fn": self.fn,
        }


def _check_targets(t: Taxonomy, targets: Iterable[int]) -> list[int]:
    targets = sorted(set(targets))
    for a in targets:
        for b in targets:
            if a != b and is_ancestor(t, a, b):
                raise AmbiguousTargets(
                    f"targets {t.name_of(a)!r} and {t.name_of(b)!r} lie on one ancestor path"
                )
    return targets


def relabel_to_parents(points: Sequence, taxonomy: Taxonomy, targets: Iterable[int]) -> list:
    """Map every point to its nearest ancestor-or-self in ``targets``; drop the rest.

    Works on any frozen dataclass with a ``class_id`` field.
    """
    from dataclasses import replace

    target_set = set(_check_targets(taxonomy, targets))
    out = []
    for p in points:
        hit = next((a for a in taxonomy.ancestors(p.class_id) if a in target_set), None)
        if hit is not None:
            out.append(p if hit == p.class_id else replace(p, class_id=hit))
    return out


def match_detections(
    pred: Sequence[Prediction],
    gt: Sequence[GroundTruthObject],
    cfg: EvalConfig = EvalConfig(),
) -> MatchResult:
    """Greedy one-to-one matching in descending prediction score.

    A prediction is a true positive when an unmatched ground-truth object of
    the same class overlaps it by at least the IoU threshold (the best such
    object is taken).  False positives are diagnosed independently as
    *wrong label* (some object of another class overlaps enough) and *wrong
    overlap* (no object of its own class overlaps enough).  A duplicate on an
    already matched object is neither.
    """
    thr = cfg.iou_threshold
    # order is fixed by content so permuting the input cannot change the counts
    order = sorted(
        range(len(pred)),
        key=lambda k: (-pred[k].score, pred[k].class_id, pred[k].box.as_list()),
    )
    matched = [False] * len(gt)
    res = MatchResult()
    for k in order:
        p = pred[k]
        overlaps = [iou(p.box, g.box) for g in gt]
        best, best_iou = None, -1.0
        for gi, g in enumerate(gt):
            if not matched[gi] and g.class_id == p.class_id and overlaps[gi] >= thr and overlaps[gi] > best_iou:
                best, best_iou = gi, overlaps[gi]
        if best is not None:
            matched[best] = True
            res.tp += 1
            continue
        res.fp += 1
        wl = any(overlaps[gi] >= thr and g.class_id != p.class_id for gi, g in enumerate(gt))
        wo = not any(overlaps[gi] >= thr and g.class_id == p.class_id for gi, g in enumerate(gt))
        res.wrong_label += wl
        res.wrong_overlap += wo
        res.diagnoses.append((k, wl, wo))
    res.fn = matched.count(False)
    return res


def f1_score(precision: float, recall: float) -> float:
    if precision + recall <= 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def compute_report(m: MatchResult) -> EvalReport:
    precision = m.tp / (m.tp + m.fp) if m.tp + m.fp else 0.0
    recall = m.tp / (m.tp + m.fn) if m.tp + m.fn else 0.0
    return EvalReport(
        precision=precision,
        recall=recall,
        f1=f1_score(precision, recall),
        wrong_label_fraction=m.wrong_label / m.fp if m.fp else 0.0,
        wrong_overlap_fraction=m.wrong_overlap / m.fp if m.fp else 0.0,
        tp=m.tp, fp=m.fp, fn=m.fn,
    )


def evaluate_scene(pred, gt, taxonomy: Taxonomy | None, cfg: EvalConfig) -> MatchResult:
    if cfg.parent_relabel_targets:
        if taxonomy is None:
            raise ValueError("relabelling needs a taxonomy")
        pred = relabel_to_parents(pred, taxonomy, cfg.parent_relabel_targets)
    return match_detections(pred, gt, cfg)


def sweep(method: str, param: str, values: Sequence, scenes, taxonomy: Taxonomy, config,
          threads: int = 1) -> list[tuple[object, EvalReport]]:
    """Evaluate ``method`` on ``scenes`` once per value of the knob ``param``.

    ``config`` is a :class:`~mapc.config.RunConfig`; every other knob keeps
    its configured value.  Metrics are pooled over the scenes.
    """
    from .config import KNOBS
    from .pipeline import evaluate_scenes

    if param not in KNOBS:
        raise UnknownParameter(param)
    if not values:
        raise ValueError("sweep needs at least one value")
    out = []
    for v in values:
        cfg = config.with_knobs({param: v})
        out.append((v, evaluate_scenes(method, scenes, taxonomy, cfg, threads=threads)))
    return out
