"""Exhaustive grid search over regulariser knobs."""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

from .config import KNOBS, RunConfig
from .evaluation import EvalReport, UnknownParameter
from .pipeline import Scene, evaluate_scenes
from .taxonomy import Taxonomy

DEFAULT_GRID_CAP = 10_000


class GridTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class ParamGrid:
    axes: Mapping[str, Sequence]

    def __post_init__(self):
        for name, values in self.axes.items():
            if name not in KNOBS:
                raise UnknownParameter(name)
            if len(values) == 0:
                raise ValueError(f"grid axis {name!r} is empty")

    @property
    def size(self) -> int:
        n = 1
        for v in self.axes.values():
            n *= len(v)
        return n

    def names(self) -> list[str]:
        return sorted(self.axes)

    def points(self) -> list[dict]:
        names = self.names()
        return [dict(zip(names, combo)) for combo in itertools.product(*(self.axes[k] for k in names))]


@dataclass
class TuningResult:
    best_params: dict
    best_score: float
    table: list[tuple[dict, EvalReport, float]]


def score_report(report: EvalReport, objective: str, recall_floor: float = 0.0) -> float:
    if objective == "f1":
        return report.f1
    if objective == "precision":
        # precision at a recall floor; configurations below the floor rank last
        return report.precision if report.recall >= recall_floor else -1.0 + report.recall
    raise ValueError(f"unknown tuning objective {objective!r}")


def grid_search(
    grid: ParamGrid,
    scenes: Sequence[Scene],
    method: str,
    taxonomy: Taxonomy,
    base: RunConfig = RunConfig(),
    objective: str = "f1",
    recall_floor: float = 0.0,
    threads: int = 1,
    cap: int = DEFAULT_GRID_CAP,
) -> TuningResult:
    """Evaluate every grid point on ``scenes`` and return the best one.

    Ties go to the lexicographically smaller parameter vector, with
    parameters ordered by name.
    """
    if grid.size > cap:
        raise GridTooLarge(f"grid has {grid.size} configurations, cap is {cap}")
    points = grid.points()

    def one(knobs):
        report = evaluate_scenes(method, scenes, taxonomy, base.with_knobs(knobs))
        return knobs, report, score_report(report, objective, recall_floor)

    if threads > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            table = list(pool.map(one, points))
    else:
        table = [one(p) for p in points]

    names = grid.names()
    best = max(table, key=lambda row: (row[2], [-_as_float(row[0][k]) for k in names]))
    return TuningResult(dict(best[0]), best[2], table)


def _as_float(v) -> float:
    return float(v)
